import json
import pathlib

import pytest

from fedcache.common.exceptions import DataError, StageError, UsageError
from fedcache.manifest import MANIFEST_NAME, RunManifest, file_checksum, load_manifest


@pytest.fixture()
def manifest(tmp_path: pathlib.Path) -> RunManifest:
    manifest = RunManifest(command="all", config={"seed": 0})
    manifest.write(tmp_path)
    return manifest


def test_stage_records_files(tmp_path: pathlib.Path, manifest: RunManifest):
    with manifest.stage("ingest", tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("movie_id\n1\n")
        manifest.add_file(tmp_path, path)
    manifest.complete(tmp_path)

    loaded = load_manifest(tmp_path)
    assert loaded.status == "completed"
    assert loaded.stages[0].status == "completed"
    assert loaded.stages[0].finished_at is not None
    assert loaded.files == {"trace.csv": file_checksum(path)}


def test_failed_stage_is_recorded(tmp_path: pathlib.Path, manifest: RunManifest):
    with pytest.raises(StageError) as exc_info:
        with manifest.stage("ingest", tmp_path):
            raise DataError("missing ratings")

    assert exc_info.value.exit_code == 3
    content = json.loads((tmp_path / MANIFEST_NAME).read_text())
    assert content["status"] == "failed"
    assert content["stages"][0]["status"] == "failed"
    assert "missing ratings" in content["error"]


def test_nested_stage_errors_are_not_wrapped_twice(tmp_path: pathlib.Path, manifest: RunManifest):
    with pytest.raises(StageError) as exc_info:
        with manifest.stage("outer", tmp_path):
            with manifest.stage("inner", tmp_path):
                raise ValueError("boom")

    assert exc_info.value.stage == "inner"


def test_add_file_without_stage(tmp_path: pathlib.Path, manifest: RunManifest):
    path = tmp_path / "x.csv"
    path.write_text("")

    with pytest.raises(UsageError):
        manifest.add_file(tmp_path, path)

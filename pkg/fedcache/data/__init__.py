from .movielens import CANONICAL_RECORDS, DEFAULT_FEATURES, RatingsDataset, parse_movielens
from .split import (
    DatasetSplit,
    RequestTrace,
    SplitPlan,
    make_split,
    mark_training,
    write_split_manifest,
    write_trace_csv,
)
from .vectors import UserVector, UserVectors, build_user_vectors

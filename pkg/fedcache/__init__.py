from .cli import get_cli
from .service import RunResult, Service, get_service, run_pipeline, run_sweep
from .settings import ExperimentConfig, Settings, load_config

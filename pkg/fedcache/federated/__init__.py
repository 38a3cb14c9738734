from .aggregation import aggregate
from .client import ClientState, Encoder, autoencoder_encoder, client_rng, encode_clients, local_train
from .service import RoundReport, run_training, write_round_reports
from .settings import AggregationMode, FederationConfig

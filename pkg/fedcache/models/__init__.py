from .autoencoder import (
    AutoencoderModel,
    AutoencoderSettings,
    LatentScaler,
    decode,
    encode,
    init_autoencoder,
    pretrain_autoencoder,
    reconstruction_error,
)
from .denoiser import DenoiserModel, build_mlp_graph, build_unet_graph, denoise, init_denoiser
from .descriptor import parse_graphs, render_graphs
from .storage import architecture_path, load_autoencoder, load_denoiser, save_autoencoder, save_denoiser

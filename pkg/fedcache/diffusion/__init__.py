from .sampler import sample, write_latents_csv
from .schedule import NoiseSchedule, build_schedule, q_sample
from .trainer import DiffusionTrainer, NoisePredictor, training_loss

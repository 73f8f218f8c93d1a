from Diffusion.checkpoint import load_denoiser, save_denoiser
from Diffusion.config import SamplerConfig, ScheduleConfig
from Diffusion.interfaces import EpsilonModel, TrainableDenoiser
from Diffusion.models import ConvDenoiser, DenoiserModel, DenseDenoiser, build_denoiser
from Diffusion.oracle import GaussianOracle, analytic_epsilon_gaussian
from Diffusion.process import diffusion_loss, forward_sample, forward_sample_between, training_loss
from Diffusion.sampling import ddim_step, ddpm_step, guided_epsilon, sample, timestep_subsequence
from Diffusion.schedule import NoiseSchedule, build_schedule

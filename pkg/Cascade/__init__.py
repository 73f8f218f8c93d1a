from Cascade.config import DiffusionTrainConfig, FinetuneConfig, SRTrainConfig
from Cascade.stages import CascadeModel, DiffusionStage, SRStage, cascade_sample, noise_augment, sr_sample, upsample
from Cascade.training import (
    compare_finetune_vs_scratch,
    finetune,
    pretrain,
    train_denoiser,
    train_sr_stage,
)

from _mmsr import (
    LoadedCheckpoint,
    LossWeights,
    SRGenerator,
    SRGeneratorSpec,
    SSIMParams,
    SsimForm,
    avg_downsample,
    bicubic_upsample,
    downsample_loss,
    load_sr_checkpoint,
    mmsr_total,
    mse,
    nn_upsample,
    psnr_from_mse,
    ssim_loss,
    upsample_loss,
)

__all__ = [
    "LoadedCheckpoint",
    "LossWeights",
    "SRGenerator",
    "SRGeneratorSpec",
    "SSIMParams",
    "SsimForm",
    "avg_downsample",
    "bicubic_upsample",
    "downsample_loss",
    "load_sr_checkpoint",
    "mmsr_total",
    "mse",
    "nn_upsample",
    "psnr_from_mse",
    "ssim_loss",
    "upsample_loss",
]

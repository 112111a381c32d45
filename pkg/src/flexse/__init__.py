"""Speech enhancement invariant to sampling rate, channel count, and length."""

from .audio import Waveform, read_wav, write_wav
from .metrics import sdr, si_sdr
from .model import (
    ModelConfig,
    SpeechEnhancer,
    build_model,
    count_macs,
    count_params,
    load_checkpoint,
    save_checkpoint,
)
from .objective import LossConfig, loss, optimal_scale
from .stft import istft, stft
from .training import TrainConfig, lr_at, train_stage

__version__ = "0.1.0"

__all__ = [
    "Waveform",
    "read_wav",
    "write_wav",
    "stft",
    "istft",
    "ModelConfig",
    "SpeechEnhancer",
    "build_model",
    "count_params",
    "count_macs",
    "save_checkpoint",
    "load_checkpoint",
    "LossConfig",
    "loss",
    "optimal_scale",
    "TrainConfig",
    "lr_at",
    "train_stage",
    "sdr",
    "si_sdr",
    "__version__",
]

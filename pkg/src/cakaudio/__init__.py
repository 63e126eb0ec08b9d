"""Learnable single-kernel audio effect with audit-game adversarial training."""

from .audio_io import AudioClip, ensure_rate, read_wav, write_wav
from .autodiff import Tensor, grad, no_grad
from .cak import EffectParams, GateSchedule, cak_apply, detect, init_params, soft_gate, temperature_at
from .augan import BatchLosses, CriticParams, LossWeights, critic_loss, generator_loss
from .corpus import CorpusIndex, TrainingPair, ingest, sample_batch, texture_g
from .spectral import ComplexSpectrogram, MagnitudeSpectrogram, PhaseMap, StftConfig, combine, istft, split, stft
from .trainer import Checkpoint, EpochMetrics, TrainConfig, load_checkpoint, save_checkpoint, train
from .inferencer import KernelReport, apply_effect, inspect_kernel

__version__ = "0.1.0"

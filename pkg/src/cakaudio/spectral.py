"""STFT analysis and synthesis.

Defaults follow the effect's working configuration: 2048-point FFT,
512-sample hop (75% overlap), periodic Hann window, 44.1 kHz. Magnitudes
stay linear; no log compression is applied anywhere in this module.

Reconstruction is weighted overlap-add with the same Hann window on the
synthesis side and division by the summed squared window, which is
constant away from the edges at 75% overlap (COLA), so interior samples
round-trip essentially exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio_io import AudioClip
from .errors import RateMismatch, ShapeMismatch, TooShort


@dataclass(frozen=True)
class StftConfig:
    """Analysis grid parameters. hop must divide fft_size (power of two)."""

    fft_size: int = 2048
    hop: int = 512
    sample_rate: int = 44100

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if self.hop <= 0 or self.fft_size % self.hop:
            raise ValueError("hop must divide fft_size")
        if self.hop >= self.fft_size:
            raise ValueError("hop must be smaller than fft_size for overlap-add")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        """Number of full analysis frames; the final partial frame is dropped."""
        if n_samples < self.fft_size:
            return 0
        return (n_samples - self.fft_size) // self.hop + 1

    def to_dict(self) -> dict:
        return {"fft_size": self.fft_size, "hop": self.hop, "sample_rate": self.sample_rate}

    @staticmethod
    def from_dict(d: dict) -> "StftConfig":
        return StftConfig(int(d["fft_size"]), int(d["hop"]), int(d["sample_rate"]))


@lru_cache(maxsize=8)
def hann_window(size: int) -> np.ndarray:
    """Periodic Hann window (the DFT-even variant needed for COLA)."""
    n = np.arange(size, dtype=np.float64)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
    w.setflags(write=False)
    return w


@dataclass
class ComplexSpectrogram:
    """F x T complex grid, F = fft_size / 2 + 1."""

    bins: np.ndarray
    config: StftConfig

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.bins.ndim != 2 or self.bins.shape[0] != self.config.bins:
            raise ShapeMismatch(
                f"expected {self.config.bins} frequency rows, got shape {self.bins.shape}"
            )

    @property
    def frames(self) -> int:
        return int(self.bins.shape[1])


@dataclass
class MagnitudeSpectrogram:
    """F x T non-negative real grid, the domain of the effect operator."""

    mag: np.ndarray
    config: StftConfig

    def __post_init__(self):
        self.mag = np.asarray(self.mag, dtype=np.float64)
        if self.mag.ndim != 2:
            raise ShapeMismatch("magnitude grid must be two-dimensional")

    @property
    def frames(self) -> int:
        return int(self.mag.shape[1])


@dataclass
class PhaseMap:
    """F x T phases in (-pi, pi]; zero bins carry phase 0 by convention."""

    phase: np.ndarray

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=np.float64)


def stft(clip: AudioClip, config: StftConfig) -> ComplexSpectrogram:
    """Short-time Fourier transform.

    Frame t covers samples [t*hop, t*hop + fft_size). Raises RateMismatch
    when the clip rate differs from the config and TooShort when the clip
    cannot fill a single frame.
    """
    if clip.sample_rate != config.sample_rate:
        raise RateMismatch(
            f"clip is {clip.sample_rate} Hz, analysis expects {config.sample_rate} Hz"
        )
    x = np.asarray(clip.samples, dtype=np.float64)
    frames = config.frame_count(x.shape[0])
    if frames == 0:
        raise TooShort(f"need at least {config.fft_size} samples, got {x.shape[0]}")
    stride = x.strides[0]
    windows = np.lib.stride_tricks.as_strided(
        x, shape=(frames, config.fft_size), strides=(config.hop * stride, stride)
    )
    spectrum = np.fft.rfft(windows * hann_window(config.fft_size), axis=1)
    return ComplexSpectrogram(spectrum.T, config)


def istft(spec: ComplexSpectrogram) -> AudioClip:
    """Weighted overlap-add inverse; output length is (T-1)*hop + fft_size."""
    cfg = spec.config
    frames = np.fft.irfft(spec.bins.T, n=cfg.fft_size, axis=1)
    window = hann_window(cfg.fft_size)
    t_count = frames.shape[0]
    out_len = (t_count - 1) * cfg.hop + cfg.fft_size
    num = np.zeros(out_len, dtype=np.float64)
    den = np.zeros(out_len, dtype=np.float64)
    wsq = window * window
    for t in range(t_count):
        start = t * cfg.hop
        num[start : start + cfg.fft_size] += frames[t] * window
        den[start : start + cfg.fft_size] += wsq
    samples = num / np.maximum(den, 1e-12)
    return AudioClip(samples.astype(np.float32), cfg.sample_rate, "istft")


def split(spec: ComplexSpectrogram) -> tuple[MagnitudeSpectrogram, PhaseMap]:
    """Separate a complex spectrogram into magnitude and phase."""
    mag = np.abs(spec.bins)
    phase = np.angle(spec.bins)
    # np.angle can emit -pi for negative-real bins with a signed zero
    # imaginary part; fold onto the (-pi, pi] convention
    phase = np.where(phase <= -np.pi, np.pi, phase)
    phase = np.where(mag == 0.0, 0.0, phase)
    return MagnitudeSpectrogram(mag, spec.config), PhaseMap(phase)


def combine(mag: MagnitudeSpectrogram, phase: PhaseMap) -> ComplexSpectrogram:
    """Rebuild a complex spectrogram as mag * exp(i * phase)."""
    if mag.mag.shape != phase.phase.shape:
        raise ShapeMismatch(
            f"magnitude shape {mag.mag.shape} does not match phase shape {phase.phase.shape}"
        )
    bins = mag.mag * np.exp(1j * phase.phase)
    return ComplexSpectrogram(bins, mag.config)

"""Shared fixtures and independent oracles.

The helpers here deliberately avoid the package's own numeric paths:
finite differences, loop convolutions, and hand-built WAV bytes serve as
references the implementation is checked against.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pytest

from cakaudio.audio_io import AudioClip, write_wav
from cakaudio.spectral import StftConfig


def fd_grad(f, arrays, eps=1e-4):
    """Central finite differences of scalar f with respect to each array."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for ai, a in enumerate(arrays):
        g = np.zeros_like(a, dtype=np.float64)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            hi = [x.copy() for x in arrays]
            lo = [x.copy() for x in arrays]
            hi[ai][idx] += eps
            lo[ai][idx] -= eps
            g[idx] = (f(*hi) - f(*lo)) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a, b, floor=1e-6):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def conv3x3_ref(x, kernel, bias=0.0, stride=1):
    """Loop-based 3x3 correlation with zero padding, single channel."""
    h, w = x.shape
    xp = np.pad(x, 1)
    oh = (h + 2 - 3) // stride + 1
    ow = (w + 2 - 3) // stride + 1
    out = np.zeros((oh, ow))
    for i in range(oh):
        for j in range(ow):
            out[i, j] = np.sum(xp[i * stride : i * stride + 3, j * stride : j * stride + 3] * kernel) + bias
    return out


def make_wav_bytes(frames: np.ndarray, rate: int, bits: int, fmt: int) -> bytes:
    """Hand-assembled RIFF/WAVE payload. frames: (n,) or (n, channels)."""
    if frames.ndim == 1:
        frames = frames[:, None]
    channels = frames.shape[1]
    if fmt == 1 and bits == 16:
        data = frames.astype("<i2").tobytes()
    elif fmt == 1 and bits == 24:
        flat = frames.astype(np.int64).ravel()
        data = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in flat)
    elif fmt == 3 and bits == 32:
        data = frames.astype("<f4").tobytes()
    else:
        raise ValueError("unsupported test format")
    block = channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, fmt, channels, rate, rate * block, block, bits)
    header += b"data" + struct.pack("<I", len(data))
    return header + data + (b"\x00" if len(data) & 1 else b"")


def tone_clip(freq=440.0, seconds=1.0, sr=44100, amp=0.5, seed=None) -> AudioClip:
    t = np.arange(int(seconds * sr)) / sr
    return AudioClip((amp * np.sin(2 * np.pi * freq * t)).astype(np.float32), sr, f"tone{freq}")


def noise_clip(seconds=1.0, sr=44100, amp=0.5, seed=0, burst_hz=8.0) -> AudioClip:
    """Gated white noise: on/off bursts give it high spectral flux."""
    rng = np.random.default_rng(seed)
    n = int(seconds * sr)
    x = rng.normal(0.0, amp / 3.0, n)
    gate = (np.sin(2 * np.pi * burst_hz * np.arange(n) / sr) > 0).astype(np.float64)
    return AudioClip(np.clip(x * gate, -1, 1).astype(np.float32), sr, f"noise{seed}")


def build_two_texture_corpus(directory: Path, n_tones=8, n_noise=8, seconds=2.0, sr=44100) -> None:
    """Sustained tones (low flux) plus noise bursts (high flux)."""
    directory.mkdir(parents=True, exist_ok=True)
    for k in range(n_tones):
        freq = 220.0 * 2 ** (k / 4.0)
        write_wav(tone_clip(freq, seconds, sr, amp=0.3 + 0.04 * k), directory / f"tone_{k:02d}.wav")
    for k in range(n_noise):
        write_wav(
            noise_clip(seconds, sr, amp=0.4 + 0.03 * k, seed=100 + k, burst_hz=6.0 + k),
            directory / f"noise_{k:02d}.wav",
        )


@pytest.fixture
def small_cfg() -> StftConfig:
    """Fast analysis grid for corpus/trainer tests."""
    return StftConfig(fft_size=256, hop=64, sample_rate=8000)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

"""Apply a trained checkpoint to audio; inspect the learned kernel.

Pipeline: resample to the checkpoint rate, STFT, split magnitude/phase,
normalize by the corpus constant, run the effect, floor negatives,
denormalize, recombine with the ORIGINAL phase, inverse STFT. The effect
touches magnitudes only; phase is reused untouched.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip, ensure_rate
from .cak import apply_to_magnitude
from .spectral import MagnitudeSpectrogram, combine, istft, split, stft
from .trainer import Checkpoint

log = logging.getLogger(__name__)

KERNEL_REPORT_VERSION = 1
SAMPLE_SANITY_BOUND = 4.0


@dataclass
class RenderStats:
    """Numbers the service reports alongside processed audio."""

    control: float
    mag_delta_l1: float  # mean per-cell |y - x| in normalized units
    frames: int


@dataclass
class KernelReport:
    """Checkpoint introspection for heatmap display.

    Kernel rows index frequency offset (low row = lower neighbor bin),
    columns index time offset (right column = later frame). Band response
    is the mean absolute weight per row.
    """

    kernel: list[list[float]]
    bias: float
    scale: float
    band_response: list[float]
    dominant: dict
    schema_version: int = KERNEL_REPORT_VERSION

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "kernel": self.kernel,
            "bias": self.bias,
            "scale": self.scale,
            "band_response": self.band_response,
            "dominant": self.dominant,
        }
        return json.dumps(doc, indent=1)


def render(clip: AudioClip, c: float, ckpt: Checkpoint) -> tuple[AudioClip, RenderStats]:
    """Run the full effect pipeline and return audio plus effect stats."""
    c = float(np.clip(c, 0.0, 1.0))
    clip = ensure_rate(clip, ckpt.stft.sample_rate)
    spec = stft(clip, ckpt.stft)
    mag, phase = split(spec)
    x = MagnitudeSpectrogram(mag.mag / ckpt.norm, ckpt.stft)
    y = apply_to_magnitude(x, c, ckpt.effect, clamp=True)
    delta = float(np.mean(np.abs(y.mag - x.mag)))
    out_mag = MagnitudeSpectrogram(y.mag * ckpt.norm, ckpt.stft)
    out = istft(combine(out_mag, phase))
    peak = float(np.max(np.abs(out.samples))) if len(out) else 0.0
    if peak > SAMPLE_SANITY_BOUND:
        log.warning("output peaked at %.2f; clamping to +/-%.1f", peak, SAMPLE_SANITY_BOUND)
        out = AudioClip(
            np.clip(out.samples, -SAMPLE_SANITY_BOUND, SAMPLE_SANITY_BOUND),
            out.sample_rate,
            out.source_id,
        )
    out.source_id = f"{clip.source_id}|effect(c={c:g})"
    return out, RenderStats(control=c, mag_delta_l1=delta, frames=x.frames)


def apply_effect(clip: AudioClip, c: float, ckpt: Checkpoint) -> AudioClip:
    """Processed audio at control value c; output is within one hop of the input length."""
    out, _ = render(clip, c, ckpt)
    return out


def inspect_kernel(ckpt: Checkpoint) -> KernelReport:
    """Report the learned weights, bias, scale, and per-row band response."""
    k = ckpt.effect.kernel.data
    absk = np.abs(k)
    r, col = np.unravel_index(int(np.argmax(absk)), k.shape)
    return KernelReport(
        kernel=[[float(v) for v in row] for row in k],
        bias=float(ckpt.effect.bias.data),
        scale=float(ckpt.effect.scale.data),
        band_response=[float(v) for v in absk.mean(axis=1)],
        dominant={"row": int(r), "col": int(col), "weight": float(k[r, col])},
    )

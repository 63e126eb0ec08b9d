"""The conditioning-aware kernel (CAK) effect operator.

The whole effect is eleven learnable numbers: a 3x3 detector kernel, its
bias, and a scalar output scale. Applying the effect to a magnitude grid
x at control value c computes

    y = x + detect(x) * c * gate(c) * scale

where gate(c) = sigmoid((c - tau) * temp) is a soft threshold. Because
the residual carries a literal factor of c, y equals x bit-for-bit at
c = 0, independent of what training did to the kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EpochOutOfRange
from .spectral import MagnitudeSpectrogram

KERNEL_SIZE = 3
LEARNABLE_COUNT = 11  # 9 kernel weights + bias + scale


@dataclass
class EffectParams:
    """Learnable effect parameters plus the fixed gate hyperparameters.

    tau and temp are plain floats, deliberately not tensors, so they can
    never leak into an optimizer parameter list.
    """

    kernel: Tensor
    bias: Tensor
    scale: Tensor
    tau: float = 0.3
    temp: float = 2.0

    def __post_init__(self):
        if self.kernel.shape != (KERNEL_SIZE, KERNEL_SIZE):
            raise ValueError("detector kernel must be 3x3")
        if self.bias.size != 1 or self.scale.size != 1:
            raise ValueError("bias and scale must be scalars")
        if self.temp <= 0:
            raise ValueError("gate temperature must be positive")

    def tensors(self) -> dict[str, Tensor]:
        """The optimizer-visible parameters, exactly 11 scalars in total."""
        return {"kernel": self.kernel, "bias": self.bias, "scale": self.scale}

    def learnable_count(self) -> int:
        return sum(t.size for t in self.tensors().values())

    def copy(self) -> "EffectParams":
        return EffectParams(
            Tensor(self.kernel.data.copy(), requires_grad=True),
            Tensor(self.bias.data.copy(), requires_grad=True),
            Tensor(self.scale.data.copy(), requires_grad=True),
            self.tau,
            self.temp,
        )


@dataclass(frozen=True)
class GateSchedule:
    """Linear temperature ramp applied across training epochs."""

    temp_start: float = 2.0
    temp_end: float = 20.0
    total_epochs: int = 100

    def __post_init__(self):
        if self.temp_start > self.temp_end:
            raise ValueError("temp_start must not exceed temp_end")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be at least 1")


def init_params(seed: int = 0) -> EffectParams:
    """Fresh effect: small zero-mean kernel (std 0.1), zero bias, unit scale."""
    rng = np.random.default_rng(seed)
    return EffectParams(
        kernel=Tensor(rng.normal(0.0, 0.1, (KERNEL_SIZE, KERNEL_SIZE)), requires_grad=True),
        bias=Tensor(np.float64(0.0), requires_grad=True),
        scale=Tensor(np.float64(1.0), requires_grad=True),
    )


def temperature_at(epoch: int, sched: GateSchedule) -> float:
    """Gate temperature for a 1-indexed epoch on the linear ramp."""
    if epoch < 1 or epoch > sched.total_epochs:
        raise EpochOutOfRange(f"epoch {epoch} outside 1..{sched.total_epochs}")
    if sched.total_epochs == 1:
        return sched.temp_end
    frac = (epoch - 1) / (sched.total_epochs - 1)
    return sched.temp_start + (sched.temp_end - sched.temp_start) * frac


def soft_gate(c, params: EffectParams):
    """sigmoid((c - tau) * temp), elementwise over c.

    Accepts a float or an ndarray of control values; the result has the
    same shape. Values stay strictly inside (0, 1).
    """
    z = (np.asarray(c, dtype=np.float64) - params.tau) * params.temp
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    if np.isscalar(c) or np.ndim(c) == 0:
        return float(out)
    return out


def _as_batch(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 2:
        return ad.reshape(x, (1,) + x.shape), True
    if x.ndim == 3:
        return x, False
    raise ValueError("expected an FxT grid or a batch of them")


def detect(x: Tensor, params: EffectParams) -> Tensor:
    """Detector response D(x): 3x3 convolution, same padding, plus bias.

    x may be a single FxT grid or a (B, F, T) batch; the output matches.
    """
    xb, squeeze = _as_batch(ad._lift(x))
    b = xb.shape[0]
    x4 = ad.reshape(xb, (b, 1) + xb.shape[1:])
    w = ad.reshape(params.kernel, (1, 1, KERNEL_SIZE, KERNEL_SIZE))
    out = ad.conv2d(x4, w, ad.reshape(params.bias, (1,)), stride=1, padding=1)
    out = ad.reshape(out, xb.shape)
    return ad.reshape(out, out.shape[1:]) if squeeze else out


def control_weight(c, params: EffectParams):
    """The residual multiplier c * gate(c); zero exactly at c = 0."""
    c_arr = np.asarray(c, dtype=np.float64)
    return c_arr * soft_gate(c_arr, params)


def cak_apply(x: Tensor, c, params: EffectParams) -> Tensor:
    """Forward pass y = x + D(x) * c * gate(c) * scale.

    c is a scalar or a per-batch-element vector; it is clamped to [0, 1].
    The output is not clamped here: losses need the raw residual. Callers
    reconstructing audio should floor negatives at zero afterwards.
    """
    x = ad._lift(x)
    c_arr = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    weight = control_weight(c_arr, params)
    if x.ndim == 3 and np.ndim(weight) == 1:
        weight = weight.reshape(-1, 1, 1)
    return ad.add(x, ad.mul(ad.mul(detect(x, params), Tensor(weight)), params.scale))


def apply_to_magnitude(
    mag: MagnitudeSpectrogram, c: float, params: EffectParams, clamp: bool = True
) -> MagnitudeSpectrogram:
    """Inference wrapper over plain spectrograms; no graph is recorded."""
    with ad.no_grad():
        y = cak_apply(Tensor(mag.mag), float(c), params).data
    if clamp:
        y = np.maximum(y, 0.0)
    return MagnitudeSpectrogram(y, mag.config)

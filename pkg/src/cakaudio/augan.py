"""Audit-game adversarial objectives.

The critic does not judge realism in the usual GAN sense: it scores
whether the requested control value was actually applied. Its first
feature map concatenates the raw input with the shared detector response,
so critic gradients reach the effect kernel directly and both players
shape the same detector.

Critic loss:     -E[C(x_real, c)] + E[C(x_fake, c)]
                 + gp_weight * GP + compliance_weight * E[V(x_fake, c)]
Generator loss:  -E[C(x_fake, c)] + compliance_weight * E[V(x_fake, c)]
                 + recon_weight * mean|x_fake - x_real|
                 - reg_weight * E[log(eps + mean|D(x_in)|)]

V(x, c) = |mean(D(x)) - c| is the audit violation; the log term rewards
detector energy on the input so the kernel cannot collapse to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cak import EffectParams, cak_apply, detect

LEAKY_SLOPE = 0.2
CONV_CHANNELS = (16, 32, 64)


@dataclass
class LossWeights:
    """Loss term weights; defaults are the working configuration."""

    gp: float = 10.0
    compliance: float = 2.0
    recon: float = 5.0
    reg: float = 0.01
    reg_eps: float = 1e-8

    def __post_init__(self):
        for name in ("gp", "compliance", "recon", "reg"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


@dataclass
class BatchLosses:
    """Scalar components of one loss evaluation.

    Totals always equal the weighted sum of their stored parts; fields a
    given loss does not compute stay None.
    """

    critic_total: float | None = None
    generator_total: float | None = None
    wasserstein_estimate: float | None = None
    gp_term: float | None = None
    violation_mean: float | None = None
    recon_term: float | None = None
    reg_term: float | None = None
    score_real_mean: float | None = None
    score_fake_mean: float | None = None


@dataclass
class CriticParams:
    """Critic weights: three strided conv layers, pool, control fusion, score head.

    The detector kernel is shared with EffectParams and intentionally
    absent here.
    """

    conv1_w: Tensor
    conv1_b: Tensor
    conv2_w: Tensor
    conv2_b: Tensor
    conv3_w: Tensor
    conv3_b: Tensor
    fc1_w: Tensor
    fc1_b: Tensor
    fc2_w: Tensor
    fc2_b: Tensor

    def tensors(self) -> dict[str, Tensor]:
        return {
            "conv1_w": self.conv1_w,
            "conv1_b": self.conv1_b,
            "conv2_w": self.conv2_w,
            "conv2_b": self.conv2_b,
            "conv3_w": self.conv3_w,
            "conv3_b": self.conv3_b,
            "fc1_w": self.fc1_w,
            "fc1_b": self.fc1_b,
            "fc2_w": self.fc2_w,
            "fc2_b": self.fc2_b,
        }

    def copy(self) -> "CriticParams":
        return CriticParams(**{k: Tensor(t.data.copy(), requires_grad=True) for k, t in self.tensors().items()})


def init_critic(seed: int = 0) -> CriticParams:
    """He-style initialization scaled for the leaky rectifier."""
    rng = np.random.default_rng(seed)
    c1, c2, c3 = CONV_CHANNELS

    def conv_w(cout, cin):
        std = np.sqrt(2.0 / (cin * 9))
        return Tensor(rng.normal(0.0, std, (cout, cin, 3, 3)), requires_grad=True)

    def dense_w(nin, nout):
        std = np.sqrt(2.0 / nin)
        return Tensor(rng.normal(0.0, std, (nin, nout)), requires_grad=True)

    zeros = lambda n: Tensor(np.zeros(n), requires_grad=True)
    return CriticParams(
        conv1_w=conv_w(c1, 2),
        conv1_b=zeros(c1),
        conv2_w=conv_w(c2, c1),
        conv2_b=zeros(c2),
        conv3_w=conv_w(c3, c2),
        conv3_b=zeros(c3),
        fc1_w=dense_w(c3 + 1, c3),
        fc1_b=zeros(c3),
        fc2_w=dense_w(c3, 1),
        fc2_b=zeros(1),
    )


def _batch3(x) -> Tensor:
    t = ad._lift(x)
    if t.ndim == 2:
        t = ad.reshape(t, (1,) + t.shape)
    if t.ndim != 3:
        raise ValueError("expected (B, F, T) or (F, T)")
    return t


def critic_forward(x, c, critic: CriticParams, effect: EffectParams) -> Tensor:
    """Realness/compliance score, one scalar per batch element.

    x: (B, F, T) magnitudes (or a single grid), c: per-element controls.
    The first conv consumes [x, D(x)] stacked as two channels.
    """
    xb = _batch3(x)
    b = xb.shape[0]
    c_arr = np.broadcast_to(np.asarray(c, dtype=np.float64).reshape(-1), (b,))
    x4 = ad.reshape(xb, (b, 1) + xb.shape[1:])
    d4 = ad.reshape(detect(xb, effect), (b, 1) + xb.shape[1:])
    h = ad.concat([x4, d4], axis=1)
    h = ad.leaky_relu(ad.conv2d(h, critic.conv1_w, critic.conv1_b, stride=2), LEAKY_SLOPE)
    h = ad.leaky_relu(ad.conv2d(h, critic.conv2_w, critic.conv2_b, stride=2), LEAKY_SLOPE)
    h = ad.leaky_relu(ad.conv2d(h, critic.conv3_w, critic.conv3_b, stride=2), LEAKY_SLOPE)
    pooled = ad.mean(h, axis=(2, 3))
    fused = ad.concat([pooled, Tensor(c_arr.reshape(b, 1))], axis=1)
    z = ad.leaky_relu(ad.add(ad.matmul(fused, critic.fc1_w), critic.fc1_b), LEAKY_SLOPE)
    score = ad.add(ad.matmul(z, critic.fc2_w), critic.fc2_b)
    return ad.reshape(score, (b,))


def measured_texture(x, effect: EffectParams) -> Tensor:
    """Signed mean of the detector response, per batch element."""
    xb = _batch3(x)
    return ad.mean(detect(xb, effect), axis=(1, 2))


def violation(x, c, effect: EffectParams) -> Tensor:
    """Audit violation V(x, c) = |mean(D(x)) - c|, per batch element."""
    xb = _batch3(x)
    b = xb.shape[0]
    c_arr = np.broadcast_to(np.asarray(c, dtype=np.float64).reshape(-1), (b,))
    return ad.abs_(ad.sub(measured_texture(xb, effect), Tensor(c_arr)))


def interpolation_penalty(score_fn, x_real: np.ndarray, x_fake: np.ndarray, u: np.ndarray) -> Tensor:
    """Gradient penalty (||grad_xhat score||_2 - 1)^2 on mixed inputs.

    score_fn maps a (B, F, T) tensor to per-element scores. u holds one
    mixing coefficient per batch element. The result stays connected to
    whatever parameters score_fn used, via double backprop.
    """
    u3 = u.reshape(-1, 1, 1)
    xhat = Tensor(u3 * x_real + (1.0 - u3) * x_fake, requires_grad=True)
    scores = score_fn(xhat)
    (gx,) = ad.grad(ad.sum_(scores), [xhat], create_graph=True)
    norms = ad.l2_norm(gx, axis=(1, 2))
    return ad.mean(ad.pow_const(ad.sub(norms, Tensor(np.float64(1.0))), 2.0))


def gradient_penalty(
    critic: CriticParams,
    effect: EffectParams,
    x_real: np.ndarray,
    x_fake: np.ndarray,
    c: np.ndarray,
    rng: np.random.Generator,
) -> Tensor:
    """Penalty on interpolations between real and fake at the same controls."""
    if x_real.shape != x_fake.shape:
        raise ValueError(f"shape mismatch: {x_real.shape} vs {x_fake.shape}")
    u = rng.uniform(size=x_real.shape[0])
    return interpolation_penalty(
        lambda xhat: critic_forward(xhat, c, critic, effect), x_real, x_fake, u
    )


def _fake_batch(x_in: np.ndarray, c: np.ndarray, effect: EffectParams) -> Tensor:
    return cak_apply(Tensor(x_in), c, effect)


def critic_loss(
    x_in: np.ndarray,
    x_real: np.ndarray,
    c: np.ndarray,
    critic: CriticParams,
    effect: EffectParams,
    weights: LossWeights,
    rng: np.random.Generator,
) -> tuple[Tensor, BatchLosses]:
    """Critic objective on one batch.

    The fake batch stays differentiable: the shared detector is frozen in
    neither branch, so generation-path gradients from the two objectives
    meet (and largely cancel) when the trainer sums them before applying
    the effect update.
    """
    x_fake = _fake_batch(x_in, c, effect)
    score_real = critic_forward(Tensor(x_real), c, critic, effect)
    score_fake = critic_forward(x_fake, c, critic, effect)
    mean_real = ad.mean(score_real)
    mean_fake = ad.mean(score_fake)
    gp = gradient_penalty(critic, effect, x_real, x_fake.data, c, rng)
    viol = ad.mean(violation(x_fake, c, effect))
    total = ad.add(
        ad.add(ad.sub(mean_fake, mean_real), ad.mul(Tensor(np.float64(weights.gp)), gp)),
        ad.mul(Tensor(np.float64(weights.compliance)), viol),
    )
    parts = BatchLosses(
        critic_total=total.item(),
        wasserstein_estimate=mean_real.item() - mean_fake.item(),
        gp_term=gp.item(),
        violation_mean=viol.item(),
        score_real_mean=mean_real.item(),
        score_fake_mean=mean_fake.item(),
    )
    return total, parts


def generator_loss(
    x_in: np.ndarray,
    x_real: np.ndarray,
    c: np.ndarray,
    critic: CriticParams,
    effect: EffectParams,
    weights: LossWeights,
) -> tuple[Tensor, BatchLosses]:
    """Generator objective on one batch; x_fake stays differentiable.

    The reconstruction term is a per-cell mean (not a sum), making the
    weight resolution independent. The regularizer uses |D(x_in)| on the
    raw input and enters negatively: detector energy is rewarded.
    """
    x_fake = _fake_batch(x_in, c, effect)
    score_fake = critic_forward(x_fake, c, critic, effect)
    mean_fake = ad.mean(score_fake)
    viol = ad.mean(violation(x_fake, c, effect))
    recon = ad.mean(ad.abs_(ad.sub(x_fake, Tensor(x_real))))
    d_in = detect(_batch3(Tensor(x_in)), effect)
    energy = ad.mean(ad.abs_(d_in), axis=(1, 2))
    reg = ad.mean(ad.log(ad.add(energy, Tensor(np.float64(weights.reg_eps)))))
    total = ad.sub(
        ad.add(
            ad.add(ad.neg(mean_fake), ad.mul(Tensor(np.float64(weights.compliance)), viol)),
            ad.mul(Tensor(np.float64(weights.recon)), recon),
        ),
        ad.mul(Tensor(np.float64(weights.reg)), reg),
    )
    parts = BatchLosses(
        generator_total=total.item(),
        violation_mean=viol.item(),
        recon_term=recon.item(),
        reg_term=reg.item(),
        score_fake_mean=mean_fake.item(),
    )
    return total, parts

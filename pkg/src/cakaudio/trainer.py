"""Training loop, checkpoints, and metrics export.

Each step alternates one critic update and one generator update on the
same batch. The shared detector kernel collects gradient from both
objectives within a step; the critic-side contribution is held back and
summed into the generator-side gradient before the effect optimizer
applies it, so the eleven effect parameters see exactly one update per
step.

Checkpoints are JSON with float64 arrays encoded as base64 and a sha256
digest over the canonical payload, making round-trips bit-exact and
corruption detectable.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import augan
from .autodiff import Tensor, grad
from .cak import EffectParams, GateSchedule, init_params, temperature_at
from .corpus import CorpusIndex, SegmentLoader, sample_batch, stack_batch
from .errors import (
    CorruptCheckpoint,
    EmptyCorpus,
    IoFailure,
    NonFinite,
    TrainingAborted,
    VersionMismatch,
)
from .optim import AdamState, adam_step
from .spectral import StftConfig

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
METRICS_COLUMNS = ("epoch", "critic_loss", "gen_loss", "wasserstein", "violation", "temperature", "scale")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch: int = 8
    steps_per_epoch: int | None = None  # None: ceil(index size / batch)
    weights: augan.LossWeights = field(default_factory=augan.LossWeights)
    lr_effect: float = 1e-4
    lr_critic: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    temp_start: float = 2.0
    temp_end: float = 20.0
    identity_fraction: float = 0.5
    seed: int = 0
    crop: tuple[int, int] | None = None  # (bins, frames); None trains on full grids
    c_mode: str = "paired"
    checkpoint_path: str | None = None
    metrics_path: str | None = None
    checkpoint_every: int = 10
    # also keep per-epoch copies ("<path>.ep<N>") at each periodic write
    keep_epoch_checkpoints: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be at least 1")


@dataclass
class EpochMetrics:
    epoch: int
    critic_loss: float
    gen_loss: float
    wasserstein: float
    violation: float
    temperature: float
    scale: float


@dataclass
class Checkpoint:
    version: int
    effect: EffectParams
    critic: augan.CriticParams
    adam_effect: AdamState
    adam_critic: AdamState
    epoch: int
    seed: int
    schedule: GateSchedule
    norm: float
    stft: StftConfig


def new_checkpoint(seed: int = 0, norm: float = 1.0, stft: StftConfig | None = None) -> Checkpoint:
    """Untrained checkpoint; useful for smoke tests and identity checks."""
    return Checkpoint(
        version=CHECKPOINT_VERSION,
        effect=init_params(seed),
        critic=augan.init_critic(seed + 1),
        adam_effect=AdamState(),
        adam_critic=AdamState(),
        epoch=0,
        seed=seed,
        schedule=GateSchedule(),
        norm=norm,
        stft=stft or StftConfig(),
    )


# -- serialization -------------------------------------------------------


def _enc(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).copy()


def _adam_doc(state: AdamState) -> dict:
    return {
        "lr": state.lr,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "step": state.step,
        "m": {k: _enc(v) for k, v in state.m.items()},
        "v": {k: _enc(v) for k, v in state.v.items()},
    }


def _adam_from(doc: dict) -> AdamState:
    return AdamState(
        lr=doc["lr"],
        beta1=doc["beta1"],
        beta2=doc["beta2"],
        eps=doc["eps"],
        step=doc["step"],
        m={k: _dec(v) for k, v in doc["m"].items()},
        v={k: _dec(v) for k, v in doc["v"].items()},
    )


def _payload(ckpt: Checkpoint) -> dict:
    return {
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "norm": ckpt.norm,
        "stft": ckpt.stft.to_dict(),
        "schedule": {
            "temp_start": ckpt.schedule.temp_start,
            "temp_end": ckpt.schedule.temp_end,
            "total_epochs": ckpt.schedule.total_epochs,
        },
        "effect": {
            "kernel": _enc(ckpt.effect.kernel.data),
            "bias": _enc(ckpt.effect.bias.data),
            "scale": _enc(ckpt.effect.scale.data),
            "tau": ckpt.effect.tau,
            "temp": ckpt.effect.temp,
        },
        "critic": {k: _enc(t.data) for k, t in ckpt.critic.tensors().items()},
        "adam_effect": _adam_doc(ckpt.adam_effect),
        "adam_critic": _adam_doc(ckpt.adam_critic),
    }


def _digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("ascii")).hexdigest()


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    payload = _payload(ckpt)
    doc = {"format_version": ckpt.version, "payload": payload, "digest": _digest(payload)}
    return json.dumps(doc).encode("ascii")


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    try:
        Path(path).write_bytes(checkpoint_bytes(ckpt))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpoint(f"unparseable checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CorruptCheckpoint("checkpoint missing format_version")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint format {doc['format_version']}, this build reads {CHECKPOINT_VERSION}"
        )
    payload = doc.get("payload")
    if payload is None or doc.get("digest") != _digest(payload):
        raise CorruptCheckpoint("checkpoint digest mismatch")
    eff = payload["effect"]
    effect = EffectParams(
        kernel=Tensor(_dec(eff["kernel"]), requires_grad=True),
        bias=Tensor(_dec(eff["bias"]).reshape(()), requires_grad=True),
        scale=Tensor(_dec(eff["scale"]).reshape(()), requires_grad=True),
        tau=eff["tau"],
        temp=eff["temp"],
    )
    critic = augan.CriticParams(
        **{k: Tensor(_dec(v), requires_grad=True) for k, v in payload["critic"].items()}
    )
    sched = payload["schedule"]
    return Checkpoint(
        version=doc["format_version"],
        effect=effect,
        critic=critic,
        adam_effect=_adam_from(payload["adam_effect"]),
        adam_critic=_adam_from(payload["adam_critic"]),
        epoch=payload["epoch"],
        seed=payload["seed"],
        schedule=GateSchedule(sched["temp_start"], sched["temp_end"], sched["total_epochs"]),
        norm=payload["norm"],
        stft=StftConfig.from_dict(payload["stft"]),
    )


def load_checkpoint(path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    return checkpoint_from_bytes(data)


def export_metrics(metrics: list[EpochMetrics], path) -> None:
    """CSV with one row per epoch in a stable column order."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for m in metrics:
                writer.writerow(
                    [m.epoch, m.critic_loss, m.gen_loss, m.wasserstein, m.violation, m.temperature, m.scale]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write metrics {path}: {exc}") from exc


# -- the loop ------------------------------------------------------------


def train(index: CorpusIndex, cfg: TrainConfig) -> tuple[Checkpoint, list[EpochMetrics]]:
    """Run the audit-game loop and return the final checkpoint and metrics.

    On a non-finite loss the run aborts, the checkpoint from the last
    completed epoch is written (if a path is configured), and
    TrainingAborted is raised with that path attached.
    """
    if len(index) == 0:
        raise EmptyCorpus("cannot train on an empty index")
    rng = np.random.default_rng(cfg.seed)
    gp_rng = np.random.default_rng(cfg.seed + 1)
    effect = init_params(cfg.seed)
    critic = augan.init_critic(cfg.seed + 1)
    sched = GateSchedule(cfg.temp_start, cfg.temp_end, cfg.epochs)
    adam_e = AdamState(lr=cfg.lr_effect, beta1=cfg.beta1, beta2=cfg.beta2)
    adam_c = AdamState(lr=cfg.lr_critic, beta1=cfg.beta1, beta2=cfg.beta2)
    steps = cfg.steps_per_epoch or max(1, math.ceil(len(index) / cfg.batch))
    loader = SegmentLoader(index)

    def snapshot(epoch: int) -> Checkpoint:
        return Checkpoint(
            version=CHECKPOINT_VERSION,
            effect=effect.copy(),
            critic=critic.copy(),
            adam_effect=replace(adam_e, m={k: v.copy() for k, v in adam_e.m.items()},
                                v={k: v.copy() for k, v in adam_e.v.items()}),
            adam_critic=replace(adam_c, m={k: v.copy() for k, v in adam_c.m.items()},
                                v={k: v.copy() for k, v in adam_c.v.items()}),
            epoch=epoch,
            seed=cfg.seed,
            schedule=sched,
            norm=index.norm,
            stft=index.config,
        )

    metrics: list[EpochMetrics] = []
    last_good: Checkpoint = snapshot(0)
    effect_names = list(effect.tensors())
    critic_names = list(critic.tensors())

    for epoch in range(1, cfg.epochs + 1):
        effect.temp = temperature_at(epoch, sched)
        sums = {"c": 0.0, "g": 0.0, "w": 0.0, "v": 0.0}
        try:
            for _ in range(steps):
                pairs = sample_batch(
                    index, cfg.batch, cfg.identity_fraction, rng,
                    loader=loader, crop=cfg.crop, c_mode=cfg.c_mode,
                )
                x_in, x_real, c = stack_batch(pairs)

                closs, cparts = augan.critic_loss(x_in, x_real, c, critic, effect, cfg.weights, gp_rng)
                c_tensors = critic.tensors()
                e_tensors = effect.tensors()
                all_grads = grad(closs, [c_tensors[k] for k in critic_names] + [e_tensors[k] for k in effect_names])
                c_grads = {k: g.data for k, g in zip(critic_names, all_grads)}
                held_e_grads = {k: g.data for k, g in zip(effect_names, all_grads[len(critic_names) :])}
                adam_step(c_tensors, c_grads, adam_c)

                gloss, gparts = augan.generator_loss(x_in, x_real, c, critic, effect, cfg.weights)
                g_grads = grad(gloss, [e_tensors[k] for k in effect_names])
                total = {k: held_e_grads[k] + g.data for k, g in zip(effect_names, g_grads)}
                adam_step(e_tensors, total, adam_e)

                sums["c"] += cparts.critic_total
                sums["g"] += gparts.generator_total
                sums["w"] += cparts.wasserstein_estimate
                sums["v"] += cparts.violation_mean
        except NonFinite as exc:
            if cfg.checkpoint_path:
                save_checkpoint(last_good, cfg.checkpoint_path)
            if cfg.metrics_path and metrics:
                export_metrics(metrics, cfg.metrics_path)
            raise TrainingAborted(
                f"non-finite value during epoch {epoch}: {exc}", cfg.checkpoint_path
            ) from exc

        metrics.append(
            EpochMetrics(
                epoch=epoch,
                critic_loss=sums["c"] / steps,
                gen_loss=sums["g"] / steps,
                wasserstein=sums["w"] / steps,
                violation=sums["v"] / steps,
                temperature=effect.temp,
                scale=float(effect.scale.data),
            )
        )
        last_good = snapshot(epoch)
        if cfg.checkpoint_path and (epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs):
            save_checkpoint(last_good, cfg.checkpoint_path)
            if cfg.keep_epoch_checkpoints:
                save_checkpoint(last_good, f"{cfg.checkpoint_path}.ep{epoch}")
        log.info(
            "epoch %d/%d critic=%.4f gen=%.4f W=%.4f V=%.4f temp=%.2f s=%.3f",
            epoch, cfg.epochs, metrics[-1].critic_loss, metrics[-1].gen_loss,
            metrics[-1].wasserstein, metrics[-1].violation, metrics[-1].temperature, metrics[-1].scale,
        )

    if cfg.metrics_path:
        export_metrics(metrics, cfg.metrics_path)
    return last_good, metrics

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..domain import LabeledTrip
from ..features import FeatureSchema, default_schema
from .batching import TripTensors, make_batches
from .loss import batch_loss, batch_loss_grad, per_trip_loss
from .network import backward_batch, forward_batch
from .params import COMPONENTS, ModelConfig, ModelParams, component_of, init_params

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    lr_schedule: str = "constant"  # constant | cosine | step
    lr_step_every: int = 10
    lr_step_gamma: float = 0.5
    optimizer: str = "momentum"  # momentum | adam
    momentum: float = 0.9
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    clip_norm: float | None = 5.0
    batch_size: int = 64
    batching: str = "exact"
    n_buckets: int = 8
    train_components: tuple[str, ...] = COMPONENTS
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    val_fraction: float = 0.2
    seed: int = 0
    n_workers: int = 1
    hidden: int = 128
    emb_dim: int = 32
    deep_hidden: tuple[int, ...] = (64, 32)
    output_activation: str = "relu"
    label_quantile: float = 95.0

    def __post_init__(self):
        for name in ("adam_betas", "train_components", "loss_weights", "deep_hidden"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not self.train_components or any(c not in COMPONENTS for c in self.train_components):
            raise ValueError(f"train_components must be a nonempty subset of {COMPONENTS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    def lr_at(self, epoch: int) -> float:
        if self.lr_schedule == "constant":
            return self.learning_rate
        if self.lr_schedule == "cosine":
            span = max(self.epochs, 1)
            return self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * min(epoch, span) / span))
        if self.lr_schedule == "step":
            return self.learning_rate * self.lr_step_gamma ** (epoch // self.lr_step_every)
        raise ValueError(f"unknown schedule {self.lr_schedule!r}")


@dataclass
class OptimizerState:
    step: int = 0
    slots: dict[str, np.ndarray] = field(default_factory=dict)


def _optimizer_update(params: ModelParams, grads, state: OptimizerState, cfg: TrainConfig, lr: float, active) -> None:
    state.step += 1
    names = [n for n in params.tensors if component_of(n) in active]
    if cfg.clip_norm is not None:
        norm = math.sqrt(sum(float((grads[n] ** 2).sum()) for n in names))
        if norm > cfg.clip_norm:
            f = cfg.clip_norm / norm
            grads = {n: grads[n] * f for n in names}
    for n in names:
        g = grads[n]
        w = params.tensors[n]
        if cfg.optimizer == "momentum":
            v = state.slots.setdefault(f"v.{n}", np.zeros_like(w))
            v *= cfg.momentum
            v += g
            w -= lr * v
        elif cfg.optimizer == "adam":
            b1, b2 = cfg.adam_betas
            m = state.slots.setdefault(f"m.{n}", np.zeros_like(w))
            s = state.slots.setdefault(f"s.{n}", np.zeros_like(w))
            m *= b1
            m += (1 - b1) * g
            s *= b2
            s += (1 - b2) * g * g
            mhat = m / (1 - b1**state.step)
            shat = s / (1 - b2**state.step)
            w -= lr * mhat / (np.sqrt(shat) + cfg.adam_eps)
        else:
            raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


def train_val_split(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng([seed, 5]).permutation(n)
    n_val = int(round(n * val_fraction))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def output_scale_from(trips: Sequence[LabeledTrip], q: float = 95.0) -> np.ndarray:
    """Per-channel q-th percentile of positive per-link labels."""
    y = np.vstack([tr.y for tr in trips])
    out = np.ones(2)
    for c in range(2):
        pos = y[:, c][y[:, c] > 0]
        if len(pos):
            out[c] = float(np.percentile(pos, q))
    return out


def build_model(train_trips: Sequence[LabeledTrip], cfg: TrainConfig, schema: FeatureSchema | None = None,
                n_vehicles: int | None = None, n_links: int | None = None) -> ModelParams:
    """Fit normalization on the training trips and initialize parameters."""
    schema = (schema or default_schema()).fit((tr.route, tr.vehicle) for tr in train_trips)
    if n_vehicles is None:
        n_vehicles = max(tr.vehicle.vehicle_id for tr in train_trips) + 1
    if n_links is None:
        n_links = max(int(tr.route.link_ids().max()) for tr in train_trips) + 1
    scale = output_scale_from(train_trips, cfg.label_quantile)
    if cfg.output_activation == "sigmoid":
        scale = output_scale_from(train_trips, 100.0)
    mcfg = ModelConfig(
        d=schema.d,
        n_vehicles=n_vehicles,
        n_links=n_links,
        hidden=cfg.hidden,
        emb_dim=cfg.emb_dim,
        deep_hidden=cfg.deep_hidden,
        output_activation=cfg.output_activation,
    )
    return init_params(mcfg, schema, scale, seed=cfg.seed)


def loss_and_grad(params: ModelParams, batch, weights, active=COMPONENTS, denom: int | None = None):
    """Batch loss (mean over trips) and its gradient for one gathered batch."""
    X, veh, links, mask, y = batch
    out, cache = forward_batch(params, X, veh, links, mask)
    err = y - out
    value = batch_loss(err, weights)
    dout = -batch_loss_grad(err, weights, denom=denom)
    return value, backward_batch(params, cache, dout, active)


def _parallel_grad(params, tensors, idx, weights, active, pool, n_workers):
    chunks = [c for c in np.array_split(idx, n_workers) if len(c)]
    B = len(idx)
    results = list(pool.map(lambda c: loss_and_grad(params, tensors.gather(c), weights, active, denom=B), chunks))
    loss = sum(r[0] * len(c) for r, c in zip(results, chunks)) / B
    grads = results[0][1]
    for r in results[1:]:
        for k in grads:
            grads[k] = grads[k] + r[1][k]
    return loss, grads


def evaluate_tensors(params: ModelParams, tensors: TripTensors, weights) -> dict:
    """Mean per-trip loss, trip totals and pooled trip-level MAAPE."""
    if len(tensors) == 0:
        return {"loss": float("nan"), "maape": float("nan"), "pred_totals": np.zeros((0, 2))}
    losses = np.empty(len(tensors))
    pred_tot = np.empty((len(tensors), 2))
    for idx in tensors.eval_batches():
        X, veh, links, mask, y = tensors.gather(idx)
        out, _ = forward_batch(params, X, veh, links, mask)
        losses[idx] = per_trip_loss(y - out, weights)
        pred_tot[idx] = out.sum(axis=1) * params.output_scale
    truth = tensors.totals
    sel = (tensors.mask > 0) & (truth > 0)
    aape = np.arctan(np.abs((pred_tot[sel] - truth[sel]) / truth[sel]))
    return {"loss": float(losses.mean()), "maape": float(aape.mean()) if aape.size else float("nan"),
            "pred_totals": pred_tot}


@dataclass
class TrainResult:
    params: ModelParams
    history: list[dict]
    last_params: ModelParams
    optimizer_state: OptimizerState
    train_idx: np.ndarray
    val_idx: np.ndarray
    epochs_done: int

    def __iter__(self):
        yield self.params
        yield self.history


def train(
    trips: Sequence[LabeledTrip],
    cfg: TrainConfig,
    *,
    params: ModelParams | None = None,
    optimizer_state: OptimizerState | None = None,
    start_epoch: int = 0,
    n_vehicles: int | None = None,
    n_links: int | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Fit the ensemble; returns the best-validation parameters and history.

    Passing ``params``/``optimizer_state``/``start_epoch`` resumes a run; the
    split is recomputed from ``cfg.seed`` so a resumed run sees the same data.
    """
    trips = list(trips)
    if not trips:
        raise ValueError("dataset is empty")
    tr_idx, va_idx = train_val_split(len(trips), cfg.val_fraction, cfg.seed)
    train_trips = [trips[i] for i in tr_idx]
    val_trips = [trips[i] for i in va_idx]
    if params is None:
        params = build_model(train_trips, cfg, n_vehicles=n_vehicles, n_links=n_links)
    else:
        params = params.copy()
    state = optimizer_state or OptimizerState()
    active = tuple(cfg.train_components)
    vocab = (params.config.n_vehicles, params.config.n_links)
    t_train = TripTensors(train_trips, params.schema, params.output_scale, *vocab)
    t_val = TripTensors(val_trips, params.schema, params.output_scale, *vocab)

    best = params.copy()
    best_val = math.inf
    history: list[dict] = []
    pool = ThreadPoolExecutor(cfg.n_workers) if cfg.n_workers > 1 else None
    epoch = start_epoch
    try:
        for epoch in range(start_epoch, cfg.epochs):
            t0 = time.perf_counter()
            lr = cfg.lr_at(epoch)
            total, count = 0.0, 0
            for bi, idx in enumerate(
                make_batches(t_train.lengths, cfg.batch_size, epoch, cfg.seed, cfg.batching, cfg.n_buckets)
            ):
                if pool is not None:
                    value, grads = _parallel_grad(params, t_train, idx, cfg.loss_weights, active, pool, cfg.n_workers)
                else:
                    value, grads = loss_and_grad(params, t_train.gather(idx), cfg.loss_weights, active)
                if not math.isfinite(value):
                    raise TrainingDiverged(f"non-finite loss {value} at epoch {epoch}, batch {bi} (T={t_train.lengths[idx[0]]})")
                _optimizer_update(params, grads, state, cfg, lr, active)
                total += value * len(idx)
                count += len(idx)
            if not params.all_finite():
                raise TrainingDiverged(f"non-finite parameters after epoch {epoch}")
            ev = evaluate_tensors(params, t_val, cfg.loss_weights) if len(t_val) else {"loss": float("nan"), "maape": float("nan")}
            rec = {
                "epoch": epoch + 1,
                "lr": lr,
                "train_loss": total / count,
                "val_loss": ev["loss"],
                "val_maape": ev["maape"],
                "seconds": time.perf_counter() - t0,
            }
            history.append(rec)
            log.info("epoch %(epoch)d train %(train_loss).5g val %(val_loss).5g maape %(val_maape).4f", rec)
            if on_epoch is not None:
                on_epoch(rec)
            score = ev["loss"] if len(t_val) else rec["train_loss"]
            if score < best_val:
                best_val = score
                best = params.copy()
        epochs_done = max(cfg.epochs, start_epoch)
    finally:
        if pool is not None:
            pool.shutdown()
    if not history:
        best = params.copy()
    return TrainResult(best, history, params, state, tr_idx, va_idx, epochs_done)

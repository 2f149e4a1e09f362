"""Logical-clock simulator of parameter-server SGD with stale reads.

One step: every worker reads the iterate its delay points at, evaluates a
clipped per-sample gradient there on a sample from its own shard, and the
server applies w <- w - (gamma_t / p) * sum of the p gradients. Workers with
equal delay share a batched gradient evaluation, but the final accumulation
always runs in ascending worker order so reruns are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, LossModel
from .schedule import DelaySchedule, LearningRateSchedule
from .seeding import derive_seed, make_rng


@dataclass(frozen=True)
class ShardAssignment:
    """Disjoint, equal-size split of sample indices across workers."""

    shards: np.ndarray  # (p, n // p) int64; row j is worker j's shard
    owner: np.ndarray  # (n,) int64; owner[i] = worker whose shard holds i
    seed: int

    @property
    def worker_count(self) -> int:
        return self.shards.shape[0]

    @property
    def shard_size(self) -> int:
        return self.shards.shape[1]

    @property
    def n(self) -> int:
        return self.owner.shape[0]


def assign_shards(n: int, worker_count: int, seed: int) -> ShardAssignment:
    """Random equal partition of range(n); requires worker_count | n."""
    if worker_count < 1:
        raise ValueError("worker_count must be positive")
    if n % worker_count != 0:
        raise ValueError(
            f"worker_count {worker_count} does not divide dataset size {n}"
        )
    rng = make_rng(derive_seed(seed, "shards"))
    shards = rng.permutation(n).reshape(worker_count, -1).astype(np.int64)
    owner = np.empty(n, dtype=np.int64)
    owner[shards.reshape(-1)] = np.repeat(
        np.arange(worker_count, dtype=np.int64), n // worker_count
    )
    return ShardAssignment(shards, owner, seed)


@dataclass(frozen=True)
class SamplePath:
    """Pre-drawn sample indices xi[j, t, b] for every worker and step."""

    indices: np.ndarray  # (p, horizon, batch) int64
    seed: int

    @property
    def worker_count(self) -> int:
        return self.indices.shape[0]

    @property
    def horizon(self) -> int:
        return self.indices.shape[1]

    @property
    def batch(self) -> int:
        return self.indices.shape[2]


def draw_sample_path(
    shards: ShardAssignment, horizon: int, seed: int, batch: int = 1
) -> SamplePath:
    """Uniform draws from each worker's own shard, independent per (j, t).

    A single counter-based stream keyed on the seed fills the (j, t, b)
    table in one pass, so the path is reproducible bit for bit.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if batch < 1:
        raise ValueError("batch must be positive")
    p, size = shards.shards.shape
    u = make_rng(derive_seed(seed, "samples")).random((p, horizon, batch))
    pos = (u * size).astype(np.int64)  # uniform in [0, size)
    idx = shards.shards[np.arange(p)[:, None, None], pos]
    return SamplePath(np.ascontiguousarray(idx), seed)


class IterateBuffer:
    """Ring holding the most recent `capacity` iterates, tagged by step."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self._store = np.zeros((capacity, dim))
        self._tags = np.full(capacity, -1, dtype=np.int64)

    @property
    def capacity(self) -> int:
        return self._store.shape[0]

    def push(self, step: int, w: np.ndarray) -> None:
        slot = step % self.capacity
        self._store[slot] = w
        self._tags[slot] = step

    def get(self, step: int) -> np.ndarray:
        slot = step % self.capacity
        if self._tags[slot] != step:
            raise KeyError(
                f"iterate for step {step} is not buffered "
                f"(slot holds step {int(self._tags[slot])})"
            )
        return self._store[slot]


@dataclass(frozen=True)
class TrainingRun:
    """Everything a deterministic run needs, bundled and cross-checked."""

    model: LossModel
    data: Dataset
    shards: ShardAssignment
    samples: SamplePath
    delays: DelaySchedule
    rates: LearningRateSchedule
    w0: np.ndarray
    horizon: int

    def __post_init__(self) -> None:
        p = self.shards.worker_count
        if self.data.n != self.shards.n:
            raise ValueError("shard assignment covers a different dataset size")
        if self.data.d_in != self.model.input_dim:
            raise ValueError("model input dimension does not match the data")
        if self.samples.worker_count != p:
            raise ValueError("sample path drawn for a different worker count")
        if self.delays.worker_count != p:
            raise ValueError("delay schedule built for a different worker count")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.horizon > self.samples.horizon:
            raise ValueError("sample path shorter than the run horizon")
        if self.horizon > self.delays.horizon:
            raise ValueError("delay schedule shorter than the run horizon")
        if self.w0.shape != (self.model.dim,):
            raise ValueError("w0 does not match the model dimension")

    @property
    def worker_count(self) -> int:
        return self.shards.worker_count


def _step_impl(
    run: TrainingRun, buffer: IterateBuffer, t: int, want_loss: bool
) -> tuple[np.ndarray, int, float]:
    tau = run.delays.delays[:, t]
    gamma = run.rates.rate_at(t)
    p = run.worker_count
    model = run.model
    rows = np.empty((p, model.dim))
    clipped = 0
    sampled_loss = 0.0
    for d in np.unique(tau):  # readers of the same iterate share a batch
        w_stale = buffer.get(t - int(d))
        members = np.nonzero(tau == d)[0]
        sel = run.samples.indices[members, t, :]  # (k, b)
        flat = sel.reshape(-1)
        feats = run.data.features[flat]
        labs = run.data.labels[flat]
        g, c = model.grad_rows(w_stale, feats, labs)
        clipped += c
        b = sel.shape[1]
        if b > 1:
            g = g.reshape(len(members), b, -1).mean(axis=1)
        rows[members] = g
        if want_loss:
            sampled_loss += float(model.loss_rows(w_stale, feats, labs).sum()) / b
    total = rows[0].copy()
    for j in range(1, p):  # fixed ascending-worker accumulation
        total += rows[j]
    w_next = buffer.get(t) - (gamma / p) * total
    if not np.all(np.isfinite(w_next)):
        raise FloatingPointError(f"non-finite iterate produced at step {t}")
    return w_next, clipped, sampled_loss / p


def step(run: TrainingRun, buffer: IterateBuffer, t: int) -> np.ndarray:
    """Advance one server update and return w_{t+1} (not yet pushed)."""
    w_next, _, _ = _step_impl(run, buffer, t, want_loss=False)
    return w_next


@dataclass
class TrainResult:
    final: np.ndarray
    history: np.ndarray | None  # (horizon + 1, dim) when requested
    step_loss: np.ndarray | None  # mean sampled loss observed at each step
    grad_calls: int
    clipped_calls: int


def train(
    run: TrainingRun, keep_history: bool = False, record_loss: bool = False
) -> TrainResult:
    """Run the full horizon; with horizon 0 the result is w0 itself."""
    dim = run.model.dim
    buffer = IterateBuffer(run.delays.max_delay + 1, dim)
    w = np.array(run.w0, dtype=np.float64, copy=True)
    buffer.push(0, w)
    history = np.empty((run.horizon + 1, dim)) if keep_history else None
    if history is not None:
        history[0] = w
    losses = np.empty(run.horizon) if record_loss else None
    clipped = 0
    batch = run.samples.batch
    for t in range(run.horizon):
        w, c, sampled = _step_impl(run, buffer, t, want_loss=record_loss)
        buffer.push(t + 1, w)
        clipped += c
        if history is not None:
            history[t + 1] = w
        if losses is not None:
            losses[t] = sampled
    return TrainResult(
        final=w,
        history=history,
        step_loss=losses,
        grad_calls=run.horizon * run.worker_count * batch,
        clipped_calls=clipped,
    )


def gaussian_init(dim: int, seed: int, scale: float | None = None) -> np.ndarray:
    """Seeded Gaussian start; default scale 0.1 / sqrt(dim)."""
    if scale is None:
        scale = 0.1 / np.sqrt(dim)
    return scale * make_rng(derive_seed(seed, "init")).standard_normal(dim)

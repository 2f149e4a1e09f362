"""Read-delay schedules for stale aggregation, plus learning-rate rules."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed, make_rng


@dataclass(frozen=True)
class DelaySchedule:
    """Per-worker read delays tau[j, t] for steps t = 0 .. horizon-1.

    A valid schedule keeps every delay inside [0, max_delay], never lets a
    worker read ahead of time (tau[j, t] <= t), and respects the one-step
    growth rule tau[j, t] <= tau[j, t-1] + 1: a reader can fall at most one
    step further behind per update.
    """

    worker_count: int
    horizon: int
    delays: np.ndarray  # (worker_count, horizon) integer matrix
    max_delay: int

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.max_delay < 0:
            raise ValueError("max_delay must be nonnegative")
        if self.delays.shape != (self.worker_count, self.horizon):
            raise ValueError(
                f"delay matrix shape {self.delays.shape} does not match "
                f"(p={self.worker_count}, T={self.horizon})"
            )


@dataclass(frozen=True)
class DelayViolation:
    worker: int
    step: int
    constraint: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: DelayViolation | None = None


def validate(schedule: DelaySchedule) -> ValidationReport:
    """Check the delay constraints; report the first violation, never throw.

    Scans worker-major, step-minor, so the reported (j, t) is the earliest
    offending entry of the lowest offending worker.
    """
    tau = schedule.delays
    p, horizon = tau.shape
    steps = np.arange(horizon)
    bad = np.full((p, horizon), False)
    labels = np.empty((p, horizon), dtype=object)

    def mark(mask: np.ndarray, name: str) -> None:
        fresh = mask & ~bad
        labels[fresh] = name
        bad[fresh] = True

    mark(tau < 0, "negative delay")
    mark(tau > schedule.max_delay, "delay exceeds max_delay")
    mark(tau > steps[None, :], "delay exceeds step index")
    growth = np.zeros_like(bad)
    growth[:, 1:] = tau[:, 1:] > tau[:, :-1] + 1
    mark(growth, "delay grows by more than one")

    if not bad.any():
        return ValidationReport(True)
    j, t = np.unravel_index(int(np.argmax(bad)), bad.shape)
    return ValidationReport(False, DelayViolation(int(j), int(t), labels[j, t]))


def make_fixed_per_worker(
    worker_count: int, horizon: int, max_delay: int, seed: int
) -> DelaySchedule:
    """Each worker ramps up to its own fixed delay and stays there.

    Target delays are drawn uniformly from [0, max_delay], except that two
    seeded, designated workers take the extremes 0 and max_delay so both are
    always represented. Realized delays are tau[j, t] = min(t, d_j).
    """
    if max_delay > 0 and worker_count < 2:
        raise ValueError("need at least two workers to cover both delay extremes")
    rng = make_rng(derive_seed(seed, "delay-targets"))
    targets = rng.integers(0, max_delay + 1, size=worker_count)
    if max_delay > 0:
        spots = rng.choice(worker_count, size=2, replace=False)
        targets[spots[0]] = max_delay
        targets[spots[1]] = 0
    steps = np.arange(horizon)
    delays = np.minimum(steps[None, :], targets[:, None]).astype(np.int64)
    return DelaySchedule(worker_count, horizon, delays, max_delay)


def make_worst_case_growth(
    worker_count: int, horizon: int, max_delay: int
) -> DelaySchedule:
    """Every worker falls behind as fast as allowed: 0, 1, ..., then holds."""
    steps = np.minimum(np.arange(horizon), max_delay)
    delays = np.broadcast_to(steps, (worker_count, horizon)).astype(np.int64).copy()
    return DelaySchedule(worker_count, horizon, delays, max_delay)


def save_delay_schedule(schedule: DelaySchedule, path) -> None:
    """Rows are workers, columns steps, after a `# p= T= tau_bar=` header."""
    with open(path, "w") as fh:
        fh.write(
            f"# p={schedule.worker_count} T={schedule.horizon} "
            f"tau_bar={schedule.max_delay}\n"
        )
        for row in schedule.delays:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_delay_schedule(path) -> DelaySchedule:
    with open(path) as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"# p=(\d+) T=(\d+) tau_bar=(\d+)", header)
        if m is None:
            raise ValueError(f"malformed delay schedule header: {header!r}")
        p, horizon, max_delay = (int(g) for g in m.groups())
        body = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if body.shape != (p, horizon):
        raise ValueError(
            f"delay matrix {body.shape} does not match header (p={p}, T={horizon})"
        )
    return DelaySchedule(p, horizon, body, max_delay)


_RATE_KINDS = ("theorem1", "experimental", "constant")


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step-size rule gamma_t.

    kinds: "theorem1" gives c / (t + 3), "experimental" gives
    c / (1 + 0.05 t), "constant" gives c.
    """

    kind: str
    c: float

    def __post_init__(self) -> None:
        if self.kind not in _RATE_KINDS:
            raise ValueError(f"unknown learning-rate kind {self.kind!r}")
        if self.c <= 0:
            raise ValueError("c must be positive")

    def rate_at(self, t: int) -> float:
        if t < 0:
            raise ValueError("step index must be nonnegative")
        if self.kind == "theorem1":
            return self.c / (t + 3.0)
        if self.kind == "experimental":
            return self.c / (1.0 + 0.05 * t)
        return self.c

    def rates(self, horizon: int) -> np.ndarray:
        """Vector of gamma_t for t = 0 .. horizon-1."""
        t = np.arange(horizon, dtype=np.float64)
        if self.kind == "theorem1":
            return self.c / (t + 3.0)
        if self.kind == "experimental":
            return self.c / (1.0 + 0.05 * t)
        return np.full(horizon, self.c)

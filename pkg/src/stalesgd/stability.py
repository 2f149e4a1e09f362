"""Coupled twin runs on neighboring datasets and stability diagnostics.

The two runs share shards, sample path, delays, learning rates and the
starting point; only one training sample differs. Until that sample is
first read the trajectories coincide bit for bit, so their distance is
exactly zero; afterwards the per-step distance is recorded along with the
recursion slack and loss-gap diagnostics.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .engine import (
    IterateBuffer,
    TrainingRun,
    _step_impl,
    assign_shards,
    draw_sample_path,
)
from .model import Dataset, LossModel, NeighborPair, make_neighbor, sample_from
from .schedule import DelaySchedule, LearningRateSchedule, make_fixed_per_worker
from .seeding import derive_seed, make_rng


@dataclass(frozen=True)
class CouplingConfig:
    """Shared randomness for two runs that differ in one training sample."""

    pair: NeighborPair
    shard_seed: int
    sample_seed: int
    delays: DelaySchedule
    rates: LearningRateSchedule
    w0: np.ndarray
    horizon: int
    batch: int = 1


@dataclass
class StabilityTrace:
    """Step-indexed record of how far the twins have drifted apart.

    delta[t] is ||w_t - w_bar_t||; hit[t] flags steps where the differing
    sample was read; slack[t] is the pathwise recursion slack for the
    transition t -> t+1. Loss-gap columns compare the two models on the
    training set and on a held-out set, evaluated every gap_stride steps
    (NaN elsewhere when the evaluation is stridden or no holdout is given).
    """

    delta: np.ndarray  # (T+1,)
    normalized: np.ndarray  # (T+1,)
    hit: np.ndarray  # (T,) bool
    slack: np.ndarray  # (T,)
    gap_train: np.ndarray  # (T+1,)
    gap_test: np.ndarray  # (T+1,)
    gap_misclass: np.ndarray  # (T+1,)
    i_star: int
    j_star: int
    final_base: np.ndarray
    final_variant: np.ndarray
    model: LossModel
    delays: DelaySchedule
    rates: LearningRateSchedule
    shard_seed: int
    sample_seed: int
    batch: int

    @property
    def horizon(self) -> int:
        return self.hit.shape[0]


def normalized_distance(w: np.ndarray, w_bar: np.ndarray) -> float:
    """sqrt(||w - w'||^2 / (||w||^2 + ||w'||^2)); zero when both are zero.

    The value is reported raw: antipodal vectors give sqrt(2), nothing is
    clamped.
    """
    denom = float(w @ w) + float(w_bar @ w_bar)
    if denom == 0.0:
        return 0.0
    diff = w - w_bar
    return float(np.sqrt(float(diff @ diff) / denom))


def twin_run(
    model: LossModel,
    coupling: CouplingConfig,
    holdout: Dataset | None = None,
    gap_stride: int = 0,
) -> StabilityTrace:
    """Run the coupled pair in lockstep and record the divergence trace.

    While the runs are still bitwise identical and the differing sample has
    not been read, one step is computed and shared; afterwards both runs
    step independently. gap_stride 0 evaluates loss gaps only at the start
    and the final step; a positive stride adds every stride-th step.
    """
    pair = coupling.pair
    base, variant = pair.base, pair.variant
    T = coupling.horizon
    p = coupling.delays.worker_count
    shards = assign_shards(base.n, p, coupling.shard_seed)
    j_star = int(shards.owner[pair.differing_index])
    samples = draw_sample_path(shards, T, coupling.sample_seed, coupling.batch)
    run_a = TrainingRun(
        model, base, shards, samples, coupling.delays, coupling.rates,
        coupling.w0, T,
    )
    run_b = TrainingRun(
        model, variant, shards, samples, coupling.delays, coupling.rates,
        coupling.w0, T,
    )

    cap = coupling.delays.max_delay + 1
    buf_a = IterateBuffer(cap, model.dim)
    buf_b = IterateBuffer(cap, model.dim)
    w0 = np.array(coupling.w0, dtype=np.float64, copy=True)
    buf_a.push(0, w0)
    buf_b.push(0, w0)

    delta = np.zeros(T + 1)
    normalized = np.zeros(T + 1)
    hit = np.asarray(
        (samples.indices[j_star, :T, :] == pair.differing_index).any(axis=1)
    )
    gap_train = np.full(T + 1, np.nan)
    gap_test = np.full(T + 1, np.nan)
    gap_misclass = np.full(T + 1, np.nan)

    def eval_gaps(t: int, wa: np.ndarray, wb: np.ndarray) -> None:
        gap_train[t] = abs(model.mean_loss(wa, base) - model.mean_loss(wb, base))
        if holdout is not None:
            gap_test[t] = abs(
                model.mean_loss(wa, holdout) - model.mean_loss(wb, holdout)
            )
            gap_misclass[t] = abs(
                model.misclassification(wa, holdout)
                - model.misclassification(wb, holdout)
            )

    def due(t: int) -> bool:
        return t == 0 or t == T or (gap_stride > 0 and t % gap_stride == 0)

    wa = w0
    wb = w0
    if due(0):
        eval_gaps(0, wa, wb)
    diverged = False
    for t in range(T):
        if not diverged and not hit[t]:
            wa, _, _ = _step_impl(run_a, buf_a, t, want_loss=False)
            wb = wa  # states identical, so the step is identical bit for bit
        else:
            diverged = True
            wa, _, _ = _step_impl(run_a, buf_a, t, want_loss=False)
            wb, _, _ = _step_impl(run_b, buf_b, t, want_loss=False)
        buf_a.push(t + 1, wa)
        buf_b.push(t + 1, wb)
        d = wa - wb
        delta[t + 1] = np.sqrt(float(d @ d))
        normalized[t + 1] = normalized_distance(wa, wb)
        if due(t + 1):
            eval_gaps(t + 1, wa, wb)

    trace = StabilityTrace(
        delta=delta,
        normalized=normalized,
        hit=hit,
        slack=np.full(T, np.nan),
        gap_train=gap_train,
        gap_test=gap_test,
        gap_misclass=gap_misclass,
        i_star=pair.differing_index,
        j_star=j_star,
        final_base=np.array(wa, copy=True),
        final_variant=np.array(wb, copy=True),
        model=model,
        delays=coupling.delays,
        rates=coupling.rates,
        shard_seed=coupling.shard_seed,
        sample_seed=coupling.sample_seed,
        batch=coupling.batch,
    )
    trace.slack = check_recursion_pathwise(trace).slack
    return trace


@dataclass(frozen=True)
class RecursionReport:
    slack: np.ndarray
    min_slack: float
    first_violation: int | None
    tolerance: float


def _require_checkable(trace: StabilityTrace) -> tuple[float, float]:
    if trace.batch != 1:
        raise ValueError("recursion checks cover single-sample reads only")
    if trace.model.smoothness is None:
        raise ValueError("recursion checks need a declared smoothness constant")
    return trace.model.lipschitz, trace.model.smoothness


def check_recursion_pathwise(
    trace: StabilityTrace, tolerance: float = 1e-9
) -> RecursionReport:
    """Slack of the per-branch bound
    delta_{t+1} <= delta_t + (beta gamma_t / p) sum_j delta_{t - tau(j,t)}
    plus 2 L gamma_t / p on hit steps. Slack below -tolerance is a violation.
    """
    lipschitz, beta = _require_checkable(trace)
    tau = trace.delays.delays  # (p, T)
    p, T = tau.shape[0], trace.horizon
    if T == 0:
        return RecursionReport(np.empty(0), np.inf, None, tolerance)
    gamma = trace.rates.rates(T)
    steps = np.arange(T)
    stale = trace.delta[steps[None, :] - tau[:, :T]]  # delta_{t - tau(j,t)}
    rhs = (
        trace.delta[:T]
        + (beta * gamma / p) * stale.sum(axis=0)
        + trace.hit * (2.0 * lipschitz * gamma / p)
    )
    slack = rhs - trace.delta[1 : T + 1]
    violations = np.nonzero(slack < -tolerance)[0]
    first = int(violations[0]) if violations.size else None
    return RecursionReport(slack, float(slack.min()), first, tolerance)


def check_recursion_relaxed(
    trace: StabilityTrace, tolerance: float = 1e-9
) -> RecursionReport:
    """Slack of the window-max relaxation
    delta_{t+1} <= delta_t + beta gamma_t (tau_bar + 1) max window(delta)
    plus 2 L gamma_t / p on hit steps; never tighter than the branch bound.
    """
    lipschitz, beta = _require_checkable(trace)
    T = trace.horizon
    if T == 0:
        return RecursionReport(np.empty(0), np.inf, None, tolerance)
    tau_bar = trace.delays.max_delay
    p = trace.delays.worker_count
    gamma = trace.rates.rates(T)
    padded = np.concatenate([np.zeros(tau_bar), trace.delta[:T]])
    window_max = np.lib.stride_tricks.sliding_window_view(
        padded, tau_bar + 1
    ).max(axis=1)
    rhs = (
        trace.delta[:T]
        + beta * gamma * (tau_bar + 1) * window_max
        + trace.hit * (2.0 * lipschitz * gamma / p)
    )
    slack = rhs - trace.delta[1 : T + 1]
    violations = np.nonzero(slack < -tolerance)[0]
    first = int(violations[0]) if violations.size else None
    return RecursionReport(slack, float(slack.min()), first, tolerance)


@dataclass(frozen=True)
class SandwichReport:
    max_gap: float
    bound: float
    max_ratio: float
    ok: bool
    worst_index: int


def lipschitz_sandwich_check(
    model: LossModel,
    w: np.ndarray,
    w_bar: np.ndarray,
    data: Dataset,
    tolerance: float = 1e-9,
) -> SandwichReport:
    """Verify |f(w; z) - f(w_bar; z)| <= L ||w - w_bar|| on every sample.

    The tolerance is relative: the check is gap <= bound * (1 + tolerance).
    With coincident iterates both sides are exactly zero.
    """
    gaps = np.abs(
        model.loss_rows(w, data.features, data.labels)
        - model.loss_rows(w_bar, data.features, data.labels)
    )
    diff = w - w_bar
    bound = model.lipschitz * float(np.sqrt(float(diff @ diff)))
    worst = int(np.argmax(gaps))
    max_gap = float(gaps[worst])
    ratio = 0.0 if max_gap == 0.0 else (np.inf if bound == 0.0 else max_gap / bound)
    return SandwichReport(
        max_gap=max_gap,
        bound=bound,
        max_ratio=float(ratio),
        ok=max_gap <= bound * (1.0 + tolerance),
        worst_index=worst,
    )


@dataclass(frozen=True)
class GeneralizationProxy:
    """Train/test loss and misclassification for one model, with gaps."""

    train_loss: float
    test_loss: float
    loss_gap: float
    train_misclass: float
    test_misclass: float
    misclass_gap: float


def generalization_proxy(
    model: LossModel, w: np.ndarray, train: Dataset, test: Dataset
) -> GeneralizationProxy:
    train_loss = model.mean_loss(w, train)
    test_loss = model.mean_loss(w, test)
    train_err = model.misclassification(w, train)
    test_err = model.misclassification(w, test)
    return GeneralizationProxy(
        train_loss=train_loss,
        test_loss=test_loss,
        loss_gap=abs(train_loss - test_loss),
        train_misclass=train_err,
        test_misclass=test_err,
        misclass_gap=abs(train_err - test_err),
    )


@dataclass
class StabilityEstimate:
    """Monte-Carlo stability probe over replicated twin runs.

    estimate is the max over the held-out panel of the mean over replicates
    of |f(w_T; z) - f(w_bar_T; z)|; lipschitz_relaxation is L times the mean
    final distance, which dominates the estimate by the sandwich bound.
    """

    estimate: float
    lipschitz_relaxation: float
    final_delta: np.ndarray  # (replicates,)
    panel_gap_mean: np.ndarray  # (panel size,)
    delta_matrix: np.ndarray  # (replicates, T+1)
    hit_matrix: np.ndarray  # (replicates, T)
    min_slack: float
    max_sandwich_ratio: float
    sandwich_ok: bool
    panel: Dataset
    traces: list[StabilityTrace] | None


def stability_estimate(
    model: LossModel,
    base: Dataset,
    worker_count: int,
    tau_bar: int,
    rates: LearningRateSchedule,
    horizon: int,
    replicates: int,
    seed: int,
    panel: Dataset | None = None,
    panel_size: int = 512,
    w0: np.ndarray | None = None,
    keep_traces: bool = False,
    sandwich_tolerance: float = 1e-9,
) -> StabilityEstimate:
    """Replicated twin runs with fresh seeds, scored on a fixed panel.

    Each replicate draws its own differing index uniformly, fresh shard,
    sample-path and delay seeds, rebuilds the neighbor pair and runs the
    coupled pair from the shared start.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    if panel is None:
        panel = sample_from(base, panel_size, derive_seed(seed, "panel"))
    if w0 is None:
        w0 = np.zeros(model.dim)
    gaps = np.empty((replicates, panel.n))
    final_delta = np.empty(replicates)
    delta_matrix = np.empty((replicates, horizon + 1))
    hit_matrix = np.empty((replicates, horizon), dtype=bool)
    min_slack = np.inf
    max_ratio = 0.0
    sandwich_ok = True
    traces: list[StabilityTrace] | None = [] if keep_traces else None
    for r in range(replicates):
        i_star = int(make_rng(derive_seed(seed, "istar", r)).integers(base.n))
        pair = make_neighbor(base, i_star, derive_seed(seed, "variant", r))
        delays = make_fixed_per_worker(
            worker_count, horizon, tau_bar, derive_seed(seed, "delays", r)
        )
        coupling = CouplingConfig(
            pair=pair,
            shard_seed=derive_seed(seed, "shards", r),
            sample_seed=derive_seed(seed, "samples", r),
            delays=delays,
            rates=rates,
            w0=w0,
            horizon=horizon,
        )
        trace = twin_run(model, coupling)
        delta_matrix[r] = trace.delta
        hit_matrix[r] = trace.hit
        final_delta[r] = trace.delta[-1]
        if trace.slack.size:
            min_slack = min(min_slack, float(trace.slack.min()))
        gaps[r] = np.abs(
            model.loss_rows(trace.final_base, panel.features, panel.labels)
            - model.loss_rows(trace.final_variant, panel.features, panel.labels)
        )
        report = lipschitz_sandwich_check(
            model, trace.final_base, trace.final_variant, panel,
            tolerance=sandwich_tolerance,
        )
        max_ratio = max(max_ratio, report.max_ratio)
        sandwich_ok = sandwich_ok and report.ok
        if traces is not None:
            traces.append(trace)
    panel_gap_mean = gaps.mean(axis=0)
    return StabilityEstimate(
        estimate=float(panel_gap_mean.max()),
        lipschitz_relaxation=float(model.lipschitz * final_delta.mean()),
        final_delta=final_delta,
        panel_gap_mean=panel_gap_mean,
        delta_matrix=delta_matrix,
        hit_matrix=hit_matrix,
        min_slack=float(min_slack),
        max_sandwich_ratio=float(max_ratio),
        sandwich_ok=sandwich_ok,
        panel=panel,
        traces=traces,
    )


# ---------------------------------------------------------------------------
# trace serialization

_TRACE_COLUMNS = "t, delta, norm_dist, hit, slack, gap_loss, gap_misclass"


def save_trace(trace: StabilityTrace, path) -> None:
    """CSV dump, one row per step index 0..T.

    hit and slack describe the transition leaving step t, so the final row
    carries hit 0 and slack nan; gap_loss is the held-out twin loss gap.
    """
    T = trace.horizon
    with open(path, "w") as fh:
        fh.write(_TRACE_COLUMNS + "\n")
        for t in range(T + 1):
            hit = int(trace.hit[t]) if t < T else 0
            slack = trace.slack[t] if t < T else np.nan
            fh.write(
                f"{t}, {trace.delta[t]:.17g}, {trace.normalized[t]:.17g}, "
                f"{hit}, {slack:.17g}, {trace.gap_test[t]:.17g}, "
                f"{trace.gap_misclass[t]:.17g}\n"
            )


def load_trace_columns(path) -> dict[str, np.ndarray]:
    """Read a trace CSV back into named columns."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != _TRACE_COLUMNS:
            raise ValueError(f"malformed trace header: {header!r}")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    names = [c.strip() for c in re.split(r",\s*", header)]
    return {name: body[:, i] for i, name in enumerate(names)}

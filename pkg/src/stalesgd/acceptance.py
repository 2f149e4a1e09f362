"""Numbered release checks, each timed and summarized on one line.

The battery rebuilds its own references from scratch: a hand-rolled serial
SGD loop, brute-force recursion roll-forwards, exact integer minima of the
closed forms, and end-to-end replay through the command-line layer. A green
run means the shipped code paths agree with independent recomputation and
reproduce the expected qualitative trends at desk scale.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import (
    TrainingRun,
    assign_shards,
    draw_sample_path,
    gaussian_init,
    train,
)
from .model import (
    Logistic,
    SyntheticSpec,
    TinyMLP,
    generate_synthetic,
    sample_from,
)
from .schedule import LearningRateSchedule, make_worst_case_growth
from .seeding import derive_seed, make_rng
from .stability import StabilityEstimate, stability_estimate
from .theory import (
    BoundInputs,
    RecursionSequence,
    rate_sequence,
    recursion_rollforward,
    telescoped_bound,
    theorem1_bound,
    theorem2_bound,
    theorem2_consistency,
)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    details: str


def format_line(res: CriterionResult) -> str:
    status = "PASS" if res.passed else "FAIL"
    return (
        f"[{status}] {res.number}. {res.title} "
        f"({res.seconds:.2f}s): {res.details}"
    )


_BUDGETS = {1: 5.0, 2: 10.0, 3: 300.0, 7: 900.0}


def _timed(number: int, title: str, fn) -> CriterionResult:
    start = time.perf_counter()
    try:
        passed, details = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        passed, details = False, f"raised {exc!r}"
    elapsed = time.perf_counter() - start
    budget = _BUDGETS.get(number)
    if budget is not None and elapsed >= budget:
        passed = False
        details += f"; exceeded {budget:.0f}s budget"
    return CriterionResult(number, title, passed, elapsed, details)


# ---------------------------------------------------------------------------
# 1. delay-free engine vs. a hand-rolled serial SGD loop

def _check_serial(seed: int) -> tuple[bool, str]:
    d, n, T = 10, 200, 1000
    spec = SyntheticSpec(n=n, d_in=d, feature_bound=1.0)
    data = generate_synthetic(spec, derive_seed(seed, "serial", "data"))
    model = Logistic(d, feature_bound=1.0)
    rates = LearningRateSchedule("theorem1", 1.0)
    delays = make_worst_case_growth(1, T, 0)
    shards = assign_shards(n, 1, derive_seed(seed, "serial", "shards"))
    samples = draw_sample_path(shards, T, derive_seed(seed, "serial", "samples"), 1)
    run = TrainingRun(model, data, shards, samples, delays, rates, np.zeros(d), T)
    result = train(run, keep_history=True)

    # plain-python reference: same samples, explicit gradient formula
    clip = model.clip_threshold
    w = [0.0] * d
    reference = np.empty((T + 1, d))
    reference[0] = w
    for t in range(T):
        i = int(samples.indices[0, t, 0])
        x = data.features[i]
        y = float(data.labels[i])
        margin = y * sum(w[k] * float(x[k]) for k in range(d))
        sig = 1.0 / (1.0 + math.exp(margin))  # sigmoid of -margin
        g = [-y * sig * float(x[k]) for k in range(d)]
        norm = math.sqrt(sum(v * v for v in g))
        if norm > clip:
            g = [v * (clip / norm) for v in g]
        gamma = 1.0 / (t + 3.0)
        w = [w[k] - gamma * g[k] for k in range(d)]
        reference[t + 1] = w
    err = float(np.max(np.abs(result.history - reference)))
    return err <= 1e-12, f"max |engine - serial reference| = {err:.3g} over {T} steps"


# ---------------------------------------------------------------------------
# 2. telescoped bound dominates the brute-force roll-forward

def _check_sequences(seed: int) -> tuple[bool, str]:
    rng = make_rng(derive_seed(seed, "sequences"))
    count = 10_000
    worst = math.inf
    for _ in range(count):
        T = int(rng.integers(0, 21))
        tau_bar = int(rng.integers(0, 6))
        t0 = int(rng.integers(0, min(3, T) + 1))
        seq = RecursionSequence(
            q=rng.uniform(0.0, 1.0, size=T + 1),
            r=rng.uniform(0.0, 1.0, size=T + 1),
            tau_bar=tau_bar,
        )
        slack = telescoped_bound(seq, t0) - recursion_rollforward(seq, t0)[-1]
        worst = min(worst, slack)
    return worst >= -1e-9, f"{count} random sequences, min slack = {worst:.3g}"


# ---------------------------------------------------------------------------
# 3-5. shared twin-run bundle: logistic, analytic constants

_TWIN_N = 2000
_TWIN_D = 10
_TWIN_P = 8
_TWIN_T = 500
_TWIN_C = 0.5
_TWIN_L = 1.0
_TWIN_BETA = 0.25
_TWIN_ARMS = ((0, 167), (4, 167), (16, 166))
_PANEL_SIZE = 512


def _twin_bundle(seed: int) -> dict[int, StabilityEstimate]:
    spec = SyntheticSpec(n=_TWIN_N, d_in=_TWIN_D, feature_bound=1.0)
    data = generate_synthetic(spec, derive_seed(seed, "twin", "data"))
    panel = sample_from(data, _PANEL_SIZE, derive_seed(seed, "twin", "panel"))
    model = Logistic(_TWIN_D, feature_bound=1.0)
    rates = LearningRateSchedule("theorem1", _TWIN_C)
    return {
        tau_bar: stability_estimate(
            model,
            data,
            worker_count=_TWIN_P,
            tau_bar=tau_bar,
            rates=rates,
            horizon=_TWIN_T,
            replicates=reps,
            seed=derive_seed(seed, "twin", tau_bar),
            panel=panel,
        )
        for tau_bar, reps in _TWIN_ARMS
    }


def _check_recursion(seed: int, bundle: dict[int, StabilityEstimate]) -> tuple[bool, str]:
    bundle.update(_twin_bundle(seed))
    runs = sum(est.delta_matrix.shape[0] for est in bundle.values())
    min_slack = min(est.min_slack for est in bundle.values())
    pathwise_ok = min_slack >= -1e-9

    # expectation form: mean(delta_{t+1} - delta_t - q_t * window max)
    # must stay below the hit forcing 2 L gamma_t / n, up to 3 SEM, at every t
    gamma = LearningRateSchedule("theorem1", _TWIN_C).rates(_TWIN_T)
    forcing = 2.0 * _TWIN_L * gamma / _TWIN_N
    worst_margin = math.inf
    for tau_bar, est in bundle.items():
        deltas = est.delta_matrix
        reps = deltas.shape[0]
        padded = np.concatenate([np.zeros((reps, tau_bar)), deltas[:, :_TWIN_T]], axis=1)
        window_max = np.lib.stride_tricks.sliding_window_view(
            padded, tau_bar + 1, axis=1
        ).max(axis=2)
        growth = _TWIN_BETA * gamma * (tau_bar + 1) * window_max
        z = deltas[:, 1:] - deltas[:, :_TWIN_T] - growth
        mean = z.mean(axis=0)
        sem = z.std(axis=0, ddof=1) / math.sqrt(reps)
        worst_margin = min(worst_margin, float((forcing + 3.0 * sem - mean).min()))
    mc_ok = worst_margin >= -1e-12
    details = (
        f"{runs} runs; min per-step slack = {min_slack:.3g}; "
        f"min mean-form margin = {worst_margin:.3g}"
    )
    return pathwise_ok and mc_ok, details


def _check_sandwich(bundle: dict[int, StabilityEstimate]) -> tuple[bool, str]:
    if not bundle:
        return False, "twin runs unavailable"
    ok = all(est.sandwich_ok for est in bundle.values())
    worst = max(est.max_sandwich_ratio for est in bundle.values())
    return ok, f"max |loss gap| / (L * delta_T) = {worst:.12g} over {_PANEL_SIZE} points"


def _check_domination(bundle: dict[int, StabilityEstimate]) -> tuple[bool, str]:
    if not bundle:
        return False, "twin runs unavailable"
    parts = []
    empirical_ok = True
    for tau_bar in (0, 4):
        estimate = bundle[tau_bar].estimate
        bound = theorem1_bound(
            BoundInputs(
                lipschitz=_TWIN_L,
                smoothness=_TWIN_BETA,
                c=_TWIN_C,
                tau_bar=tau_bar,
                n=_TWIN_N,
                worker_count=_TWIN_P,
                horizon=_TWIN_T,
            )
        )
        empirical_ok = empirical_ok and estimate <= bound
        parts.append(f"tau_bar={tau_bar}: {estimate:.3g} <= {bound:.3g}")

    roll_slack = math.inf
    closed_slack = math.inf
    for tau_bar in (0, 1, 2):
        for T in (10, 100):
            for c in (0.1, 0.5, 1.0):
                inputs = BoundInputs(
                    lipschitz=_TWIN_L,
                    smoothness=_TWIN_BETA,
                    c=c,
                    tau_bar=tau_bar,
                    n=_TWIN_N,
                    worker_count=_TWIN_P,
                    horizon=T,
                )
                seq = rate_sequence(inputs, LearningRateSchedule("theorem1", c))
                roll = recursion_rollforward(seq)[-1]
                tele = telescoped_bound(seq)
                closed = theorem1_bound(inputs) / inputs.lipschitz
                roll_slack = min(roll_slack, tele - roll)
                closed_slack = min(closed_slack, closed - tele)
    grid_ok = roll_slack >= -1e-9 and closed_slack >= -1e-9
    details = (
        "; ".join(parts)
        + f"; chain slacks >= {min(roll_slack, closed_slack):.3g} on 18-cell grid"
    )
    return empirical_ok and grid_ok, details


# ---------------------------------------------------------------------------
# 6. burn-in closed form vs. the exact integer minimum

def _check_burn_in() -> tuple[bool, str]:
    ok = True
    undershoots = []
    lo_ratio, hi_ratio = math.inf, 0.0
    for p in (1, 4):
        for k in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0):
            report = theorem2_consistency(
                BoundInputs(
                    lipschitz=1.0,
                    smoothness=k,
                    c=1.0,
                    tau_bar=0,
                    n=1000,
                    worker_count=p,
                    horizon=997,
                )
            )
            ok = ok and not report.below_15pct
            if report.printed_below:
                undershoots.append(f"p={p}, k={k}")
            lo_ratio = min(lo_ratio, report.ratio)
            hi_ratio = max(hi_ratio, report.ratio)
    example = theorem2_bound(
        BoundInputs(
            lipschitz=1.0,
            smoothness=1.0,
            c=1.0,
            tau_bar=0,
            n=1000,
            worker_count=1,
            horizon=997,
        )
    ).bound
    example_ok = float(f"{example:.4g}") == 0.08944
    ok = ok and example_ok
    details = (
        f"printed/exact in [{lo_ratio:.4g}, {hi_ratio:.4g}] over 12 cells; "
        f"example value {example:.6g}"
    )
    if undershoots:
        details += "; printed below exact at " + ", ".join(undershoots)
    return ok, details


# ---------------------------------------------------------------------------
# 7-8. generalization-gap trends on the tiny network

_TREND_N = 2000
_TREND_D = 20
_TREND_P = 8
_TREND_T = 3000
_TREND_REPS = 5
_TREND_PROBES = (100, 200, 300, 3000)  # first three average into the early phase


def _trend_inputs(seed: int):
    spec = SyntheticSpec(
        n=_TREND_N,
        d_in=_TREND_D,
        feature_bound=4.5,
        separation=3.0,
        spread=1.2,
        label_noise=0.2,
    )
    data = generate_synthetic(spec, derive_seed(seed, "trend", "data"))
    test = sample_from(data, 4000, derive_seed(seed, "trend", "test"))
    model = TinyMLP(_TREND_D, hidden=32, clip_threshold=10.0)
    return data, test, model


def _trend_gaps(seed: int, data, test, model, tau_bar: int, c: float) -> np.ndarray:
    """Replicate-mean |train - test| loss gap at each probe step."""
    rates = LearningRateSchedule("experimental", c)
    delays = make_worst_case_growth(_TREND_P, _TREND_T, tau_bar)
    gaps = np.empty((_TREND_REPS, len(_TREND_PROBES)))
    for r in range(_TREND_REPS):
        shards = assign_shards(_TREND_N, _TREND_P, derive_seed(seed, "trend", "shards", r))
        samples = draw_sample_path(
            shards, _TREND_T, derive_seed(seed, "trend", "samples", r), 1
        )
        w0 = gaussian_init(model.dim, derive_seed(seed, "trend", "init", r), scale=0.3)
        run = TrainingRun(model, data, shards, samples, delays, rates, w0, _TREND_T)
        history = train(run, keep_history=True).history
        for j, t in enumerate(_TREND_PROBES):
            w = history[t]
            gaps[r, j] = abs(model.mean_loss(w, data) - model.mean_loss(w, test))
    return gaps.mean(axis=0)


def _check_delay_trend(seed: int, shared: dict) -> tuple[bool, str]:
    data, test, model = _trend_inputs(seed)
    shared["inputs"] = data, test, model
    early = {}
    final = {}
    for tau_bar in (0, 4, 16):
        gaps = _trend_gaps(seed, data, test, model, tau_bar, c=0.5)
        early[tau_bar] = float(gaps[:3].mean())
        final[tau_bar] = float(gaps[-1])
    shared["final_gap_high_rate"] = final[16]
    ok = final[0] <= final[4] <= final[16] and early[16] <= early[0]
    details = (
        f"final gap tau_bar 0/4/16 = "
        f"{final[0]:.4g}/{final[4]:.4g}/{final[16]:.4g}; "
        f"early gap tau_bar 16 vs 0 = {early[16]:.4g} vs {early[0]:.4g}"
    )
    return ok, details


def _check_rate_trend(seed: int, shared: dict) -> tuple[bool, str]:
    if "inputs" not in shared:
        return False, "trend runs unavailable"
    data, test, model = shared["inputs"]
    low = float(_trend_gaps(seed, data, test, model, tau_bar=16, c=0.1)[-1])
    high = shared["final_gap_high_rate"]
    ok = low <= high
    return ok, f"final gap at tau_bar=16: c=0.1 {low:.4g} vs c=0.5 {high:.4g}"


# ---------------------------------------------------------------------------
# 9. manifest replay reproduces every output byte for byte

def _check_replay(seed: int) -> tuple[bool, str]:
    from . import cli

    with tempfile.TemporaryDirectory() as tmp:
        first = Path(tmp) / "first"
        second = Path(tmp) / "second"
        cfg = cli.make_config(
            overrides={
                "kind": "twin-run",
                "model": "logistic",
                "n": 200,
                "d_in": 5,
                "p": 4,
                "T": 60,
                "tau_bar": 3,
                "c": 0.5,
                "replicates": 2,
                "panel_size": 64,
                "seed": derive_seed(seed, "replay"),
                "outdir": str(first),
            }
        )
        code = cli.run_experiment(cfg)
        if code != 0:
            return False, f"first run exited {code}"
        values = cli.load_config_file(first / "manifest.json")
        values["outdir"] = str(second)
        code = cli.run_experiment(cli.make_config(values))
        if code != 0:
            return False, f"replay exited {code}"
        names = sorted(f.name for f in first.iterdir())
        if names != sorted(f.name for f in second.iterdir()):
            return False, "replay produced a different file set"
        diffs = [
            name
            for name in names
            if name != "manifest.json"
            and (first / name).read_bytes() != (second / name).read_bytes()
        ]
    if diffs:
        return False, "replay differs in " + ", ".join(diffs)
    return True, f"{len(names) - 1} output files byte-identical on replay"


# ---------------------------------------------------------------------------

def run_all(seed: int = 0) -> list[CriterionResult]:
    """Execute the nine checks in order and return their results."""
    results = [
        _timed(1, "delay-free engine matches serial SGD", lambda: _check_serial(seed)),
        _timed(2, "telescoped bound dominates roll-forward", lambda: _check_sequences(seed)),
    ]
    bundle: dict[int, StabilityEstimate] = {}
    results.append(
        _timed(3, "per-step recursion and mean-form check", lambda: _check_recursion(seed, bundle))
    )
    results.append(_timed(4, "loss-gap sandwich on held-out panel", lambda: _check_sandwich(bundle)))
    results.append(_timed(5, "closed-form bound domination", lambda: _check_domination(bundle)))
    results.append(_timed(6, "burn-in closed form vs exact minimum", lambda: _check_burn_in()))
    shared: dict = {}
    results.append(
        _timed(7, "generalization gap vs delay trend", lambda: _check_delay_trend(seed, shared))
    )
    results.append(
        _timed(8, "generalization gap vs learning rate", lambda: _check_rate_trend(seed, shared))
    )
    results.append(_timed(9, "manifest replay determinism", lambda: _check_replay(seed)))
    return results

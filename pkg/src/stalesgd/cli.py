"""Experiment harness: config handling, runners, CSV emission and the CLI.

Verbs: run (single-run / twin-run), sweep (delay-sweep / rate-sweep),
bounds (bound-sweep), accept (acceptance-suite), plotdata. Every verb
accepts --config FILE with key = value lines (or a manifest JSON to replay)
plus flags mirroring the config fields. Exit codes: 0 success, 1 config
error, 2 runtime numeric error, 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, acceptance
from .engine import assign_shards, draw_sample_path, gaussian_init, train, TrainingRun
from .model import (
    Dataset,
    LeastSquares,
    Logistic,
    LossModel,
    SyntheticSpec,
    TinyMLP,
    generate_synthetic,
    sample_from,
)
from .schedule import LearningRateSchedule, make_fixed_per_worker
from .seeding import derive_seed
from .stability import generalization_proxy, save_trace, stability_estimate
from .theory import (
    BoundInputs,
    rate_sequence,
    recursion_rollforward,
    telescoped_bound,
    theorem1_bound,
    theorem2_bound,
)

_KINDS = (
    "single-run",
    "twin-run",
    "delay-sweep",
    "rate-sweep",
    "bound-sweep",
    "acceptance-suite",
)
_MODELS = ("logistic", "least-squares", "mlp")
_TASKS = ("blobs", "linear")
_SCHEDULES = ("theorem1", "experimental", "constant")
_INITS = ("zeros", "gaussian")


class ConfigError(ValueError):
    """Invalid experiment configuration; names the first failing field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters; field order is validation order."""

    kind: str = "single-run"
    model: str = "logistic"
    task: str = "blobs"
    n: int = 2000
    d_in: int = 20
    hidden: int = 16
    feature_bound: float = 1.0
    separation: float = 2.0
    spread: float = 1.0
    label_noise: float = 0.0
    observation_noise: float = 0.1
    clip_threshold: float = 0.0  # 0 = analytic / per-model default
    unit_range: bool = False
    loss_cap: float = 1.0
    p: int = 8
    T: int = 500
    tau_bar: int = 0
    tau_bars: tuple[int, ...] = ()  # delay-sweep values
    schedule: str = "theorem1"
    c: float = 0.5
    cs: tuple[float, ...] = ()  # rate-sweep values
    batch: int = 1
    replicates: int = 5
    seed: int = 0
    outdir: str = "out"
    eval_stride: int = 25
    panel_size: int = 512
    test_n: int = 1000
    init: str = "zeros"
    init_scale: float = 0.0  # 0 = default scale
    lipschitz: float = 1.0  # bound-sweep constant
    smoothness: float = 0.25  # bound-sweep constant
    Ts: tuple[int, ...] = ()  # bound-sweep horizons


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the first failing field, in field order."""
    if cfg.kind not in _KINDS:
        raise ConfigError("kind", f"must be one of {_KINDS}")
    if cfg.model not in _MODELS:
        raise ConfigError("model", f"must be one of {_MODELS}")
    if cfg.task not in _TASKS:
        raise ConfigError("task", f"must be one of {_TASKS}")
    if cfg.model in ("logistic", "mlp") and cfg.task != "blobs":
        raise ConfigError("task", f"{cfg.model} needs labels in {{-1,+1}} (task=blobs)")
    if cfg.n < 1:
        raise ConfigError("n", "must be positive")
    if cfg.d_in < 1:
        raise ConfigError("d_in", "must be positive")
    if cfg.hidden < 1:
        raise ConfigError("hidden", "must be positive")
    if cfg.feature_bound <= 0:
        raise ConfigError("feature_bound", "must be positive")
    if cfg.separation < 0:
        raise ConfigError("separation", "must be nonnegative")
    if cfg.spread < 0:
        raise ConfigError("spread", "must be nonnegative")
    if not 0.0 <= cfg.label_noise <= 1.0:
        raise ConfigError("label_noise", "must lie in [0, 1]")
    if cfg.observation_noise < 0:
        raise ConfigError("observation_noise", "must be nonnegative")
    if cfg.clip_threshold < 0:
        raise ConfigError("clip_threshold", "must be nonnegative (0 = default)")
    if cfg.loss_cap <= 0:
        raise ConfigError("loss_cap", "must be positive")
    if cfg.p < 1:
        raise ConfigError("p", "must be positive")
    if cfg.n % cfg.p != 0:
        raise ConfigError("p", f"must divide n={cfg.n}")
    if cfg.T < 1:
        raise ConfigError("T", "must be positive")
    if cfg.tau_bar < 0:
        raise ConfigError("tau_bar", "must be nonnegative")
    if cfg.tau_bar > 0 and cfg.p < 2:
        raise ConfigError("tau_bar", "positive delays need at least two workers")
    if any(t < 0 for t in cfg.tau_bars):
        raise ConfigError("tau_bars", "entries must be nonnegative")
    if cfg.kind == "delay-sweep" and not cfg.tau_bars:
        raise ConfigError("tau_bars", "delay-sweep needs at least one value")
    if any(t > 0 for t in cfg.tau_bars) and cfg.p < 2:
        raise ConfigError("tau_bars", "positive delays need at least two workers")
    if cfg.schedule not in _SCHEDULES:
        raise ConfigError("schedule", f"must be one of {_SCHEDULES}")
    if cfg.c <= 0:
        raise ConfigError("c", "must be positive")
    if any(v <= 0 for v in cfg.cs):
        raise ConfigError("cs", "entries must be positive")
    if cfg.kind == "rate-sweep" and not cfg.cs:
        raise ConfigError("cs", "rate-sweep needs at least one value")
    if cfg.batch < 1:
        raise ConfigError("batch", "must be positive")
    if cfg.replicates < 1:
        raise ConfigError("replicates", "must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    if not cfg.outdir:
        raise ConfigError("outdir", "must be set")
    if cfg.eval_stride < 1:
        raise ConfigError("eval_stride", "must be positive")
    if cfg.panel_size < 1:
        raise ConfigError("panel_size", "must be positive")
    if cfg.test_n < 1:
        raise ConfigError("test_n", "must be positive")
    if cfg.init not in _INITS:
        raise ConfigError("init", f"must be one of {_INITS}")
    if cfg.model == "mlp" and cfg.init == "zeros":
        raise ConfigError("init", "the zero vector is a stationary start for the mlp")
    if cfg.init_scale < 0:
        raise ConfigError("init_scale", "must be nonnegative (0 = default)")
    if cfg.lipschitz <= 0:
        raise ConfigError("lipschitz", "must be positive")
    if cfg.smoothness <= 0:
        raise ConfigError("smoothness", "must be positive")
    if any(t < 1 for t in cfg.Ts):
        raise ConfigError("Ts", "entries must be positive")


# ---------------------------------------------------------------------------
# config parsing

def _parse_value(field_name: str, text: str, target_type) -> object:
    text = text.strip()
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError("expected true/false")
        if target_type is str:
            return text
        # remaining fields are tuples of ints or floats
        if text == "":
            return ()
        items = [s for s in (part.strip() for part in text.split(",")) if s]
        elem = target_type.__args__[0]
        return tuple(elem(s) for s in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(field_name, f"cannot parse {text!r}: {exc}") from exc


def _field_types() -> dict[str, type]:
    import typing

    return typing.get_type_hints(ExperimentConfig)


def load_config_file(path) -> dict[str, object]:
    """Read `key = value` lines, or a JSON config / manifest for replay."""
    raw = Path(path).read_text()
    stripped = raw.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(raw)
        if "config" in payload and isinstance(payload["config"], dict):
            payload = payload["config"]
        return {k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()}
    values: dict[str, object] = {}
    types = _field_types()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(key, "unknown configuration field")
        values[key] = _parse_value(key, text, types[key])
    return values


def make_config(
    file_values: dict[str, object] | None = None,
    overrides: dict[str, object] | None = None,
) -> ExperimentConfig:
    merged: dict[str, object] = {}
    types = _field_types()
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in types:
                raise ConfigError(key, "unknown configuration field")
            if isinstance(value, str) and types[key] is not str:
                value = _parse_value(key, value, types[key])
            if isinstance(value, list):
                value = tuple(value)
            merged[key] = value
    cfg = ExperimentConfig(**merged)
    validate_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# small CSV helpers

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(", ".join(header) + "\n")
        for row in rows:
            fh.write(", ".join(_fmt(v) for v in row) + "\n")


def read_csv_columns(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = [c.strip() for c in fh.readline().strip().split(",")]
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, body


# ---------------------------------------------------------------------------
# builders

def build_model(cfg: ExperimentConfig) -> LossModel:
    if cfg.model == "logistic":
        return Logistic(
            cfg.d_in, cfg.feature_bound,
            unit_range=cfg.unit_range, loss_cap=cfg.loss_cap,
        )
    if cfg.model == "least-squares":
        clip = cfg.clip_threshold or 10.0 * cfg.feature_bound
        return LeastSquares(
            cfg.d_in, clip, feature_bound=cfg.feature_bound,
            unit_range=cfg.unit_range, loss_cap=cfg.loss_cap,
        )
    clip = cfg.clip_threshold or 5.0
    return TinyMLP(
        cfg.d_in, hidden=cfg.hidden, clip_threshold=clip,
        unit_range=cfg.unit_range, loss_cap=cfg.loss_cap,
    )


def build_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    spec = SyntheticSpec(
        n=cfg.n,
        d_in=cfg.d_in,
        task=cfg.task,
        feature_bound=cfg.feature_bound,
        separation=cfg.separation,
        spread=cfg.spread,
        label_noise=cfg.label_noise,
        noise=cfg.observation_noise,
    )
    data = generate_synthetic(spec, derive_seed(cfg.seed, "data"))
    test = sample_from(data, cfg.test_n, derive_seed(cfg.seed, "test"))
    return data, test


def build_w0(cfg: ExperimentConfig, model: LossModel, replicate: int) -> np.ndarray:
    if cfg.init == "zeros":
        return np.zeros(model.dim)
    scale = cfg.init_scale if cfg.init_scale > 0 else None
    return gaussian_init(model.dim, derive_seed(cfg.seed, "init", replicate), scale)


def _build_run(
    cfg: ExperimentConfig,
    model: LossModel,
    data: Dataset,
    replicate: int,
    tau_bar: int,
    c: float,
) -> TrainingRun:
    rates = LearningRateSchedule(cfg.schedule, c)
    delays = make_fixed_per_worker(
        cfg.p, cfg.T, tau_bar, derive_seed(cfg.seed, "delays", replicate)
    )
    shards = assign_shards(data.n, cfg.p, derive_seed(cfg.seed, "shards", replicate))
    samples = draw_sample_path(
        shards, cfg.T, derive_seed(cfg.seed, "samples", replicate), cfg.batch
    )
    return TrainingRun(
        model, data, shards, samples, delays, rates,
        build_w0(cfg, model, replicate), cfg.T,
    )


def _manifest_seeds(cfg: ExperimentConfig) -> dict:
    per_rep = [
        {
            "delays": derive_seed(cfg.seed, "delays", r),
            "shards": derive_seed(cfg.seed, "shards", r),
            "samples": derive_seed(cfg.seed, "samples", r),
            "init": derive_seed(cfg.seed, "init", r),
            "istar": derive_seed(cfg.seed, "istar", r),
            "variant": derive_seed(cfg.seed, "variant", r),
        }
        for r in range(cfg.replicates)
    ]
    return {
        "data": derive_seed(cfg.seed, "data"),
        "test": derive_seed(cfg.seed, "test"),
        "panel": derive_seed(cfg.seed, "panel"),
        "replicates": per_rep,
    }


def write_manifest(cfg: ExperimentConfig, outdir: Path, outputs: list[str]) -> None:
    payload = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tool": f"stalesgd {__version__}",
        "config": asdict(cfg),
        "seeds": _manifest_seeds(cfg),
        "outputs": sorted(outputs),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# runners

_PROXY_HEADER = [
    "t", "train_loss", "test_loss", "loss_gap",
    "train_misclass", "test_misclass", "misclass_gap",
]


def _eval_points(T: int, stride: int) -> list[int]:
    points = list(range(0, T + 1, stride))
    if points[-1] != T:
        points.append(T)
    return points


def _proxy_rows(model, history, points, data, test):
    rows = []
    for t in points:
        g = generalization_proxy(model, history[t], data, test)
        rows.append(
            (t, g.train_loss, g.test_loss, g.loss_gap,
             g.train_misclass, g.test_misclass, g.misclass_gap)
        )
    return rows


def run_single(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    model = build_model(cfg)
    data, test = build_data(cfg)
    run = _build_run(cfg, model, data, 0, cfg.tau_bar, cfg.c)
    result = train(run, keep_history=True)
    hist = result.history
    steps = np.arange(cfg.T)
    w_norm = np.linalg.norm(hist, axis=1)
    step_norm = np.linalg.norm(np.diff(hist, axis=0), axis=1)
    train_loss = np.array([model.mean_loss(hist[t], data) for t in range(cfg.T)])
    write_csv(
        outdir / "trajectory.csv",
        ["t", "train_loss", "w_norm", "step_norm"],
        zip(steps, train_loss, w_norm[:-1], step_norm),
    )
    points = _eval_points(cfg.T, cfg.eval_stride)
    write_csv(
        outdir / "proxy.csv", _PROXY_HEADER,
        _proxy_rows(model, hist, points, data, test),
    )
    return ["trajectory.csv", "proxy.csv"]


def run_twin(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    model = build_model(cfg)
    data, _ = build_data(cfg)
    rates = LearningRateSchedule(cfg.schedule, cfg.c)
    est = stability_estimate(
        model, data, cfg.p, cfg.tau_bar, rates, cfg.T,
        replicates=cfg.replicates, seed=cfg.seed,
        panel_size=cfg.panel_size, w0=build_w0(cfg, model, 0),
        keep_traces=True,
    )
    outputs = []
    for r, trace in enumerate(est.traces):
        name = f"trace_{r:03d}.csv"
        save_trace(trace, outdir / name)
        outputs.append(name)
    final_norm = np.array([t.normalized[-1] for t in est.traces])

    def sem(x):
        return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0

    write_csv(
        outdir / "summary.csv",
        [
            "replicates", "final_delta_mean", "final_delta_sem",
            "final_norm_dist_mean", "final_norm_dist_sem",
            "stability_estimate", "lipschitz_relaxation",
            "min_slack", "max_sandwich_ratio",
        ],
        [(
            cfg.replicates,
            est.final_delta.mean(), sem(est.final_delta),
            final_norm.mean(), sem(final_norm),
            est.estimate, est.lipschitz_relaxation,
            est.min_slack, est.max_sandwich_ratio,
        )],
    )
    outputs.append("summary.csv")
    return outputs


def _sweep_values(cfg: ExperimentConfig) -> tuple[str, list]:
    if cfg.kind == "delay-sweep":
        return "tau_bar", list(cfg.tau_bars)
    return "c", list(cfg.cs)


def run_sweep(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    model = build_model(cfg)
    data, test = build_data(cfg)
    label_field, values = _sweep_values(cfg)
    points = _eval_points(cfg.T, cfg.eval_stride)
    outputs = []
    summary_rows = []
    for value in values:
        tau_bar = value if label_field == "tau_bar" else cfg.tau_bar
        c = value if label_field == "c" else cfg.c
        label = f"{label_field}{value:g}" if isinstance(value, float) else f"{label_field}{value}"
        per_rep = []
        for r in range(cfg.replicates):
            run = _build_run(cfg, model, data, r, tau_bar, c)
            result = train(run, keep_history=True)
            rows = _proxy_rows(model, result.history, points, data, test)
            per_rep.append(np.asarray(rows, dtype=np.float64))
            name = f"run_{label}_r{r}.csv"
            write_csv(outdir / name, _PROXY_HEADER, rows)
            outputs.append(name)
        stack = np.stack(per_rep)  # (R, len(points), len(header))
        mean = stack.mean(axis=0)
        semv = (
            stack.std(axis=0, ddof=1) / np.sqrt(cfg.replicates)
            if cfg.replicates > 1
            else np.zeros_like(mean)
        )
        metrics = _PROXY_HEADER[1:]
        curve_header = ["t"]
        for mname in metrics:
            curve_header += [f"{mname}_mean", f"{mname}_sem"]
        curve_rows = []
        for i, t in enumerate(points):
            row = [t]
            for jm in range(len(metrics)):
                row += [mean[i, jm + 1], semv[i, jm + 1]]
            curve_rows.append(row)
        name = f"curve_{label}.csv"
        write_csv(outdir / name, curve_header, curve_rows)
        outputs.append(name)
        final_row = [value]
        for jm in range(len(metrics)):
            final_row += [mean[-1, jm + 1], semv[-1, jm + 1]]
        summary_rows.append(final_row)
    summary_header = [label_field]
    for mname in _PROXY_HEADER[1:]:
        summary_header += [f"final_{mname}_mean", f"final_{mname}_sem"]
    write_csv(outdir / "summary.csv", summary_header, summary_rows)
    outputs.append("summary.csv")
    return outputs


def run_bounds(cfg: ExperimentConfig, outdir: Path) -> list[str]:
    taus = cfg.tau_bars or (cfg.tau_bar,)
    cs = cfg.cs or (cfg.c,)
    Ts = cfg.Ts or (cfg.T,)
    rows = []
    for tau_bar, c, T in itertools.product(taus, cs, Ts):
        inputs = BoundInputs(
            lipschitz=cfg.lipschitz, smoothness=cfg.smoothness, c=c,
            tau_bar=tau_bar, n=cfg.n, worker_count=cfg.p, horizon=T,
        )
        rates = LearningRateSchedule(cfg.schedule, c)
        seq = rate_sequence(inputs, rates)
        rows.append(
            (
                cfg.lipschitz, cfg.smoothness, c, tau_bar, cfg.n, cfg.p, T,
                theorem1_bound(inputs),
                theorem2_bound(inputs).bound,
                telescoped_bound(seq),
                recursion_rollforward(seq)[-1],
            )
        )
    write_csv(
        outdir / "bounds.csv",
        ["L", "beta", "c", "tau_bar", "n", "p", "T",
         "thm1", "thm2", "telescoped", "rollforward"],
        rows,
    )
    return ["bounds.csv"]


def run_accept(cfg: ExperimentConfig, outdir: Path) -> tuple[list[str], bool]:
    results = acceptance.run_all(seed=cfg.seed)
    for res in results:
        print(acceptance.format_line(res))
    write_csv(
        outdir / "acceptance.csv",
        ["criterion", "passed", "seconds", "title"],
        [(r.number, int(r.passed), r.seconds, r.title) for r in results],
    )
    return ["acceptance.csv"], all(r.passed for r in results)


def run_experiment(cfg: ExperimentConfig) -> int:
    """Dispatch on cfg.kind; returns the process exit code."""
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ok = True
    if cfg.kind == "single-run":
        outputs = run_single(cfg, outdir)
    elif cfg.kind == "twin-run":
        outputs = run_twin(cfg, outdir)
    elif cfg.kind in ("delay-sweep", "rate-sweep"):
        outputs = run_sweep(cfg, outdir)
    elif cfg.kind == "bound-sweep":
        outputs = run_bounds(cfg, outdir)
    else:
        outputs, ok = run_accept(cfg, outdir)
    write_manifest(cfg, outdir, outputs)
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# plot data

def emit_plot_data(files: list[str], metric: str, out_path) -> None:
    """Long-format plot table (series, x, y, y_err) from aggregated curves."""
    rows = []
    for fname in files:
        header, body = read_csv_columns(fname)
        mean_col = f"{metric}_mean"
        sem_col = f"{metric}_sem"
        if mean_col not in header:
            raise ConfigError("metric", f"{fname} has no column {mean_col}")
        series = Path(fname).stem.replace("curve_", "")
        ti = header.index("t")
        mi = header.index(mean_col)
        si = header.index(sem_col)
        for row in body:
            rows.append((series, row[ti], row[mi], row[si]))
    with open(out_path, "w") as fh:
        fh.write("series, x, y, y_err\n")
        for series, x, y, err in rows:
            fh.write(f"{series}, {_fmt(x)}, {_fmt(y)}, {_fmt(err)}\n")


# ---------------------------------------------------------------------------
# argument parsing

_VERB_KINDS = {
    "run": ("single-run", "twin-run"),
    "sweep": ("delay-sweep", "rate-sweep"),
    "bounds": ("bound-sweep",),
    "accept": ("acceptance-suite",),
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value file or manifest JSON")
    for f in fields(ExperimentConfig):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name)


def _collect_overrides(args: argparse.Namespace) -> dict[str, object]:
    return {
        f.name: getattr(args, f.name)
        for f in fields(ExperimentConfig)
        if getattr(args, f.name, None) is not None
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stalesgd",
        description="stale-gradient SGD experiments, twin runs and bounds",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERB_KINDS:
        p = sub.add_parser(verb)
        _add_config_flags(p)
    plot = sub.add_parser("plotdata")
    plot.add_argument("files", nargs="+")
    plot.add_argument("--metric", default="loss_gap")
    plot.add_argument("--out", default="plot.csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "plotdata":
            emit_plot_data(args.files, args.metric, args.out)
            return 0
        file_values = load_config_file(args.config) if args.config else {}
        overrides = _collect_overrides(args)
        if "kind" not in overrides and "kind" not in file_values:
            overrides["kind"] = _VERB_KINDS[args.verb][0]
        cfg = make_config(file_values, overrides)
        if cfg.kind not in _VERB_KINDS[args.verb]:
            raise ConfigError(
                "kind", f"kind {cfg.kind!r} does not belong to verb {args.verb!r}"
            )
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

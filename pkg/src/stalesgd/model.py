"""Synthetic datasets and per-sample losses with hand-written gradients.

Every loss exposes its raw (pre-clipping) gradient plus the clipped map the
training engine uses everywhere. Lipschitz and smoothness constants are
declared analytically where the loss admits them; otherwise the clipping
threshold itself plays the role of the gradient bound.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .seeding import derive_seed, make_rng


# ---------------------------------------------------------------------------
# synthetic data

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic task with norm-bounded features."""

    n: int
    d_in: int
    task: str = "blobs"  # "blobs": labels in {-1,+1}; "linear": real labels
    feature_bound: float = 1.0
    separation: float = 2.0  # distance between blob centers
    spread: float = 1.0  # per-coordinate noise around the centers
    label_noise: float = 0.0  # fraction of flipped labels (blobs only)
    noise: float = 0.1  # observation noise (linear only)

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.d_in <= 0:
            raise ValueError("d_in must be positive")
        if self.task not in ("blobs", "linear"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.feature_bound <= 0:
            raise ValueError("feature_bound must be positive")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError("label_noise must lie in [0, 1]")


@dataclass(frozen=True)
class DataPoint:
    features: np.ndarray
    label: float


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus labels; row i is sample i."""

    features: np.ndarray  # (n, d_in) float64
    labels: np.ndarray  # (n,) float64
    task: str = "blobs"
    spec: SyntheticSpec | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d_in(self) -> int:
        return self.features.shape[1]

    def point(self, i: int) -> DataPoint:
        return DataPoint(self.features[i], float(self.labels[i]))


@dataclass(frozen=True)
class NeighborPair:
    """Two datasets that differ in exactly one sample."""

    base: Dataset
    variant: Dataset
    differing_index: int


def _task_direction(spec: SyntheticSpec, seed: int) -> np.ndarray:
    rng = make_rng(derive_seed(seed, "direction"))
    u = rng.standard_normal(spec.d_in)
    return u / np.linalg.norm(u)


def _project_to_ball(x: np.ndarray, bound: float) -> np.ndarray:
    # shrink just below the bound so rounding can never push a norm over it
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    target = bound * (1.0 - 1e-14)
    return x * np.minimum(1.0, target / np.maximum(norms, 1e-300))


def _draw_points(
    spec: SyntheticSpec, direction: np.ndarray, rng: np.random.Generator, count: int
) -> tuple[np.ndarray, np.ndarray]:
    if spec.task == "blobs":
        y = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        x = y[:, None] * (0.5 * spec.separation) * direction[None, :]
        x = x + spec.spread * rng.standard_normal((count, spec.d_in))
        x = _project_to_ball(x, spec.feature_bound)
        y = np.where(rng.random(count) < spec.label_noise, -y, y)
        return x, y
    x = _project_to_ball(rng.standard_normal((count, spec.d_in)), spec.feature_bound)
    y = x @ direction + spec.noise * rng.standard_normal(count)
    return x, y


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Draw a dataset; identical (spec, seed) gives identical arrays."""
    direction = _task_direction(spec, seed)
    rng = make_rng(derive_seed(seed, "points"))
    x, y = _draw_points(spec, direction, rng, spec.n)
    return Dataset(x, y, spec.task, spec=spec, seed=seed)


def sample_from(base: Dataset, count: int, seed: int) -> Dataset:
    """Fresh i.i.d. draws from the distribution that produced ``base``."""
    if base.spec is None or base.seed is None:
        raise ValueError("base dataset does not carry its generation recipe")
    direction = _task_direction(base.spec, base.seed)
    rng = make_rng(derive_seed(seed, "holdout"))
    x, y = _draw_points(base.spec, direction, rng, count)
    return Dataset(x, y, base.task, spec=replace(base.spec, n=count), seed=None)


def make_neighbor(base: Dataset, index: int, seed: int) -> NeighborPair:
    """Replace one sample with a fresh draw from the same distribution."""
    if base.spec is None or base.seed is None:
        raise ValueError("base dataset does not carry its generation recipe")
    if not 0 <= index < base.n:
        raise ValueError(f"index {index} out of range for n={base.n}")
    direction = _task_direction(base.spec, base.seed)
    rng = make_rng(derive_seed(seed, "replacement", index))
    x, y = _draw_points(base.spec, direction, rng, 1)
    feats = base.features.copy()
    labs = base.labels.copy()
    feats[index] = x[0]
    labs[index] = y[0]
    variant = Dataset(feats, labs, base.task, spec=base.spec, seed=None)
    return NeighborPair(base, variant, index)


def save_dataset(data: Dataset, path) -> None:
    """One sample per line: comma-separated features, then the label."""
    with open(path, "w") as fh:
        fh.write(f"# d_in={data.d_in} n={data.n} task={data.task}\n")
        for i in range(data.n):
            cells = [f"{v:.17g}" for v in data.features[i]]
            cells.append(f"{data.labels[i]:.17g}")
            fh.write(",".join(cells) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        m = re.fullmatch(r"# d_in=(\d+) n=(\d+) task=(\S+)", header)
        if m is None:
            raise ValueError(f"malformed dataset header: {header!r}")
        d_in, n, task = int(m.group(1)), int(m.group(2)), m.group(3)
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if body.shape != (n, d_in + 1):
        raise ValueError(
            f"dataset body {body.shape} does not match header (n={n}, d_in={d_in})"
        )
    return Dataset(
        np.ascontiguousarray(body[:, :d_in]), np.ascontiguousarray(body[:, d_in]), task
    )


# ---------------------------------------------------------------------------
# loss models

class LossModel:
    """Per-sample loss f(w; z) with a hand-written, clipped gradient.

    Attributes:
        kind: loss family name.
        dim: parameter dimension.
        input_dim: feature dimension the loss consumes.
        clip_threshold: per-sample gradients are projected onto this ball.
        lipschitz: declared bound on the clipped gradient norm.
        smoothness: declared gradient-Lipschitz constant, or None when the
            family has no analytic bound.
        unit_range: when set, losses are divided by loss_cap and clamped at
            1 so values live in [0, 1]; gradients are rescaled to match.
    """

    kind = "abstract"

    def __init__(
        self,
        dim: int,
        input_dim: int,
        clip_threshold: float,
        lipschitz: float,
        smoothness: float | None,
        unit_range: bool = False,
        loss_cap: float = 1.0,
    ):
        if clip_threshold <= 0:
            raise ValueError("clip_threshold must be positive")
        if loss_cap <= 0:
            raise ValueError("loss_cap must be positive")
        self.dim = int(dim)
        self.input_dim = int(input_dim)
        self.clip_threshold = float(clip_threshold)
        self.lipschitz = float(lipschitz)
        self.smoothness = None if smoothness is None else float(smoothness)
        self.unit_range = bool(unit_range)
        self.loss_cap = float(loss_cap)

    # subclasses: unscaled loss/gradient for a batch of samples, one w
    def base_loss_rows(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def base_grad_rows(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def margin_rows(self, w: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Decision value whose sign is the predicted label."""
        raise NotImplementedError

    def loss_rows(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        vals = self.base_loss_rows(w, X, y)
        if self.unit_range:
            vals = np.minimum(vals / self.loss_cap, 1.0)
        return vals

    def raw_grad_rows(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pre-clipping gradient of the (possibly rescaled) loss."""
        rows = self.base_grad_rows(w, X, y)
        if self.unit_range:
            live = self.base_loss_rows(w, X, y) < self.loss_cap
            rows = rows * (live[:, None] / self.loss_cap)
        return rows

    def grad_rows(
        self, w: np.ndarray, X: np.ndarray, y: np.ndarray
    ) -> tuple[np.ndarray, int]:
        """Clipped per-sample gradients plus the number of rows clipped."""
        rows = self.raw_grad_rows(w, X, y)
        norms = np.linalg.norm(rows, axis=1)
        over = norms > self.clip_threshold
        count = int(np.count_nonzero(over))
        if count:
            rows[over] *= (self.clip_threshold / norms[over])[:, None]
        return rows, count

    def mean_loss(self, w: np.ndarray, data: Dataset) -> float:
        return float(self.loss_rows(w, data.features, data.labels).mean())

    def misclassification(self, w: np.ndarray, data: Dataset) -> float:
        if data.task != "blobs":
            return float("nan")
        return float(np.mean(self.margin_rows(w, data.features) * data.labels <= 0.0))


def loss(model: LossModel, w: np.ndarray, z: DataPoint) -> float:
    return float(
        model.loss_rows(w, z.features[None, :], np.asarray([z.label]))[0]
    )


def gradient(model: LossModel, w: np.ndarray, z: DataPoint) -> np.ndarray:
    rows, _ = model.grad_rows(w, z.features[None, :], np.asarray([z.label]))
    return rows[0]


def raw_gradient(model: LossModel, w: np.ndarray, z: DataPoint) -> np.ndarray:
    return model.raw_grad_rows(w, z.features[None, :], np.asarray([z.label]))[0]


class ConstantLoss(LossModel):
    """Flat loss; the gradient vanishes everywhere. Used in degenerate checks."""

    kind = "constant"

    def __init__(self, dim: int, value: float = 0.5, input_dim: int | None = None):
        super().__init__(
            dim, dim if input_dim is None else input_dim,
            clip_threshold=1.0, lipschitz=0.0, smoothness=0.0,
        )
        self.value = float(value)

    def base_loss_rows(self, w, X, y):
        return np.full(X.shape[0], self.value)

    def base_grad_rows(self, w, X, y):
        return np.zeros((X.shape[0], self.dim))

    def margin_rows(self, w, X):
        return np.zeros(X.shape[0])


class LeastSquares(LossModel):
    """f(w; (x, y)) = (x.w - y)^2 / 2.

    The raw gradient (x.w - y) x is unbounded, so the clip threshold is the
    declared Lipschitz constant. The gradient map has exact per-sample
    curvature ||x||^2, so max ||x||^2 over the data is an analytic
    smoothness bound.
    """

    kind = "least-squares"

    def __init__(
        self,
        d_in: int,
        clip_threshold: float,
        feature_bound: float | None = None,
        unit_range: bool = False,
        loss_cap: float = 1.0,
    ):
        scale = loss_cap if unit_range else 1.0
        beta = None if feature_bound is None else float(feature_bound) ** 2 / scale
        super().__init__(
            d_in, d_in, clip_threshold, lipschitz=clip_threshold,
            smoothness=beta, unit_range=unit_range, loss_cap=loss_cap,
        )

    @classmethod
    def for_dataset(cls, data: Dataset, clip_threshold: float, **kw) -> "LeastSquares":
        bound = float(np.linalg.norm(data.features, axis=1).max())
        return cls(data.d_in, clip_threshold, feature_bound=bound, **kw)

    def base_loss_rows(self, w, X, y):
        resid = X @ w - y
        return 0.5 * resid * resid

    def base_grad_rows(self, w, X, y):
        return (X @ w - y)[:, None] * X

    def margin_rows(self, w, X):
        return X @ w


class Logistic(LossModel):
    """f(w; (x, y)) = log(1 + exp(-y x.w)) with labels in {-1, +1}.

    On features with ||x|| <= feature_bound the gradient norm never exceeds
    feature_bound and the gradient map is (feature_bound^2 / 4)-Lipschitz,
    so both constants are declared analytically and the clip is inactive.
    """

    kind = "logistic"

    def __init__(
        self,
        d_in: int,
        feature_bound: float,
        unit_range: bool = False,
        loss_cap: float = 1.0,
    ):
        if feature_bound <= 0:
            raise ValueError("feature_bound must be positive")
        scale = loss_cap if unit_range else 1.0
        super().__init__(
            d_in, d_in,
            clip_threshold=feature_bound / scale,
            lipschitz=feature_bound / scale,
            smoothness=feature_bound ** 2 / 4.0 / scale,
            unit_range=unit_range, loss_cap=loss_cap,
        )
        self.feature_bound = float(feature_bound)

    def base_loss_rows(self, w, X, y):
        return np.logaddexp(0.0, -y * (X @ w))

    def base_grad_rows(self, w, X, y):
        m = y * (X @ w)
        return (-y * expit(-m))[:, None] * X

    def margin_rows(self, w, X):
        return X @ w


class TinyMLP(LossModel):
    """One-hidden-layer tanh network scored with the logistic loss.

    Parameters pack as [W1 (hidden x d_in), b1, w2, b2]. No analytic
    smoothness bound is declared; the clip threshold doubles as the
    gradient bound.
    """

    kind = "mlp"

    def __init__(
        self,
        d_in: int,
        hidden: int = 16,
        clip_threshold: float = 5.0,
        unit_range: bool = False,
        loss_cap: float = 1.0,
    ):
        if hidden <= 0:
            raise ValueError("hidden width must be positive")
        dim = hidden * d_in + 2 * hidden + 1
        super().__init__(
            dim, d_in, clip_threshold, lipschitz=clip_threshold,
            smoothness=None, unit_range=unit_range, loss_cap=loss_cap,
        )
        self.hidden = int(hidden)

    def unpack(self, w: np.ndarray):
        h, d = self.hidden, self.input_dim
        W1 = w[: h * d].reshape(h, d)
        b1 = w[h * d : h * d + h]
        w2 = w[h * d + h : h * d + 2 * h]
        b2 = w[-1]
        return W1, b1, w2, b2

    def margin_rows(self, w, X):
        W1, b1, w2, b2 = self.unpack(w)
        return np.tanh(X @ W1.T + b1) @ w2 + b2

    def base_loss_rows(self, w, X, y):
        return np.logaddexp(0.0, -y * self.margin_rows(w, X))

    def base_grad_rows(self, w, X, y):
        W1, b1, w2, b2 = self.unpack(w)
        Z = np.tanh(X @ W1.T + b1)  # (k, h)
        s = Z @ w2 + b2
        gs = -y * expit(-y * s)  # (k,) dLoss/ds
        dw2 = gs[:, None] * Z
        dA = (gs[:, None] * w2) * (1.0 - Z * Z)  # back through tanh
        dW1 = dA[:, :, None] * X[:, None, :]  # (k, h, d)
        k = X.shape[0]
        return np.concatenate(
            [dW1.reshape(k, -1), dA, dw2, gs[:, None]], axis=1
        )


# ---------------------------------------------------------------------------
# empirical constant checks

def estimate_smoothness(
    model: LossModel, data: Dataset, trials: int = 200, seed: int = 0
) -> float:
    """Empirical sup of ||g(w) - g(w')|| / ||w - w'|| over random probes.

    Secant ratios never exceed the true gradient-Lipschitz constant, so for
    losses with an analytic bound the estimate must come in below it.
    Probes mix order-one and nearly coincident pairs; degenerate pairs with
    ||w - w'|| below 1e-12 are skipped.
    """
    rng = make_rng(derive_seed(seed, "smoothness"))
    scale = 1.0 / np.sqrt(model.dim)
    best = 0.0
    for _ in range(trials):
        i = int(rng.integers(data.n))
        x = data.features[i : i + 1]
        lab = data.labels[i : i + 1]
        w = scale * rng.standard_normal(model.dim)
        for eps in (scale, 1e-4 * scale):
            wp = w + eps * rng.standard_normal(model.dim)
            gap = float(np.linalg.norm(w - wp))
            if gap < 1e-12:
                continue
            g = model.raw_grad_rows(w, x, lab)[0]
            gp = model.raw_grad_rows(wp, x, lab)[0]
            best = max(best, float(np.linalg.norm(g - gp)) / gap)
    return best


def estimate_lipschitz(
    model: LossModel, data: Dataset, trials: int = 200, seed: int = 0
) -> float:
    """Empirical sup of |f(w) - f(w')| / ||w - w'|| over random probes."""
    rng = make_rng(derive_seed(seed, "lipschitz"))
    scale = 1.0 / np.sqrt(model.dim)
    best = 0.0
    for _ in range(trials):
        i = int(rng.integers(data.n))
        x = data.features[i : i + 1]
        lab = data.labels[i : i + 1]
        w = scale * rng.standard_normal(model.dim)
        for eps in (scale, 1e-4 * scale):
            wp = w + eps * rng.standard_normal(model.dim)
            gap = float(np.linalg.norm(w - wp))
            if gap < 1e-12:
                continue
            fa = float(model.loss_rows(w, x, lab)[0])
            fb = float(model.loss_rows(wp, x, lab)[0])
            best = max(best, abs(fa - fb) / gap)
    return best

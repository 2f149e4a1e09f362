import math

import numpy as np
import pytest

from stalesgd import (
    Dataset,
    LeastSquares,
    Logistic,
    SyntheticSpec,
    TinyMLP,
    estimate_lipschitz,
    estimate_smoothness,
    generate_synthetic,
    gradient,
    load_dataset,
    loss,
    make_neighbor,
    make_rng,
    raw_gradient,
    sample_from,
    save_dataset,
)


def fd_gradient(model, w, x, y, h=1e-6):
    """Central differences of the per-sample loss, coordinate by coordinate."""
    g = np.empty(model.dim)
    X = x[None, :]
    Y = np.array([y])
    for k in range(model.dim):
        wp = w.copy()
        wm = w.copy()
        wp[k] += h
        wm[k] -= h
        g[k] = (model.loss_rows(wp, X, Y)[0] - model.loss_rows(wm, X, Y)[0]) / (2 * h)
    return g


@pytest.mark.parametrize(
    "make_model",
    [
        lambda d: Logistic(d, feature_bound=1.0),
        lambda d: LeastSquares(d, clip_threshold=50.0, feature_bound=1.0),
        lambda d: TinyMLP(d, hidden=3, clip_threshold=50.0),
    ],
    ids=["logistic", "least-squares", "mlp"],
)
def test_gradients_match_finite_differences(blob_data, make_model):
    model = make_model(blob_data.d_in)
    rng = make_rng(11)
    for _ in range(20):
        i = int(rng.integers(blob_data.n))
        x = blob_data.features[i]
        y = float(blob_data.labels[i])
        w = rng.standard_normal(model.dim)
        g = model.raw_grad_rows(w, x[None, :], np.array([y]))[0]
        fd = fd_gradient(model, w, x, y)
        assert np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)) < 1e-5


def test_mlp_forward_matches_scalar_reference(blob_data):
    model = TinyMLP(blob_data.d_in, hidden=3)
    rng = make_rng(5)
    w = rng.standard_normal(model.dim)
    W1, b1, w2, b2 = model.unpack(w)
    for i in range(6):
        x = blob_data.features[i]
        total = float(b2)
        for h in range(model.hidden):
            pre = float(b1[h]) + sum(float(W1[h, k]) * float(x[k]) for k in range(blob_data.d_in))
            total += float(w2[h]) * math.tanh(pre)
        got = float(model.margin_rows(w, x[None, :])[0])
        assert got == pytest.approx(total, abs=1e-12)
        y = float(blob_data.labels[i])
        want_loss = math.log1p(math.exp(-y * total))
        assert float(model.loss_rows(w, x[None, :], np.array([y]))[0]) == pytest.approx(
            want_loss, rel=1e-12
        )


def test_generation_is_deterministic_and_ball_bounded():
    spec = SyntheticSpec(n=128, d_in=6, feature_bound=2.5, separation=3.0)
    a = generate_synthetic(spec, seed=9)
    b = generate_synthetic(spec, seed=9)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic(spec, seed=10)
    assert not np.array_equal(a.features, c.features)
    assert np.linalg.norm(a.features, axis=1).max() <= 2.5
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}


def test_linear_task_labels_are_real():
    spec = SyntheticSpec(n=64, d_in=3, task="linear", noise=0.1)
    data = generate_synthetic(spec, seed=4)
    assert data.task == "linear"
    assert np.linalg.norm(data.features, axis=1).max() <= 1.0
    assert np.unique(data.labels).size > 2


def test_holdout_draws_are_fresh_but_same_distribution(blob_data):
    test = sample_from(blob_data, 200, seed=77)
    assert test.n == 200
    assert test.d_in == blob_data.d_in
    assert np.linalg.norm(test.features, axis=1).max() <= 1.0
    again = sample_from(blob_data, 200, seed=77)
    assert np.array_equal(test.features, again.features)


def test_neighbor_differs_in_exactly_one_row(blob_data):
    pair = make_neighbor(blob_data, index=13, seed=5)
    assert pair.differing_index == 13
    feat_diff = np.any(pair.base.features != pair.variant.features, axis=1)
    lab_diff = pair.base.labels != pair.variant.labels
    changed = np.nonzero(feat_diff | lab_diff)[0]
    assert list(changed) == [13]
    # the base dataset is untouched
    assert pair.base is blob_data


def test_neighbor_index_out_of_range(blob_data):
    with pytest.raises(ValueError):
        make_neighbor(blob_data, index=blob_data.n, seed=0)


def test_dataset_file_round_trip(tmp_path, blob_data):
    path = tmp_path / "data.csv"
    save_dataset(blob_data, path)
    back = load_dataset(path)
    assert back.task == blob_data.task
    assert np.array_equal(back.features, blob_data.features)
    assert np.array_equal(back.labels, blob_data.labels)


def test_load_rejects_malformed_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not a header\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        load_dataset(path)


def test_clipping_caps_norms_and_counts_rows():
    rng = make_rng(3)
    X = 4.0 * rng.standard_normal((32, 2))
    y = rng.standard_normal(32)
    model = LeastSquares(2, clip_threshold=0.5)
    w = np.array([1.0, -2.0])
    raw = model.raw_grad_rows(w, X, y)
    over = np.linalg.norm(raw, axis=1) > 0.5
    clipped, count = model.grad_rows(w, X, y)
    assert count == int(over.sum()) > 0
    assert np.linalg.norm(clipped, axis=1).max() <= 0.5 * (1 + 1e-12)
    # rows under the threshold come through untouched
    assert np.array_equal(clipped[~over], raw[~over])


def test_logistic_clip_is_inactive_on_bounded_features(blob_data, logistic_model):
    rng = make_rng(8)
    for _ in range(10):
        w = 3.0 * rng.standard_normal(logistic_model.dim)
        _, count = logistic_model.grad_rows(w, blob_data.features, blob_data.labels)
        assert count == 0


def test_declared_constants_dominate_empirical_probes(blob_data, logistic_model):
    assert estimate_lipschitz(logistic_model, blob_data) <= 1.0 * (1 + 1e-6)
    assert estimate_smoothness(logistic_model, blob_data) <= 0.25 * (1 + 1e-6)
    ls = LeastSquares.for_dataset(blob_data, clip_threshold=10.0)
    assert estimate_smoothness(ls, blob_data) <= ls.smoothness * (1 + 1e-6)


def test_gradient_norms_never_exceed_the_declared_bound(blob_data):
    logistic = Logistic(blob_data.d_in, feature_bound=1.0)
    mlp = TinyMLP(blob_data.d_in, hidden=4, clip_threshold=2.0)
    rng = make_rng(21)
    for _ in range(300):
        i = int(rng.integers(blob_data.n))
        w = 5.0 * rng.standard_normal(logistic.dim)
        g = logistic.raw_grad_rows(w, blob_data.features[i : i + 1], blob_data.labels[i : i + 1])
        assert np.linalg.norm(g) <= logistic.lipschitz + 1e-12
        wm = 5.0 * rng.standard_normal(mlp.dim)
        gm, _ = mlp.grad_rows(wm, blob_data.features[i : i + 1], blob_data.labels[i : i + 1])
        assert np.linalg.norm(gm) <= mlp.lipschitz * (1 + 1e-12)


def test_unit_range_clamps_losses_and_zeroes_gradients(blob_data):
    model = Logistic(blob_data.d_in, feature_bound=1.0, unit_range=True, loss_cap=0.8)
    rng = make_rng(14)
    w = 10.0 * rng.standard_normal(model.dim)
    vals = model.loss_rows(w, blob_data.features, blob_data.labels)
    assert vals.min() >= 0.0 and vals.max() <= 1.0
    clamped = model.base_loss_rows(w, blob_data.features, blob_data.labels) >= 0.8
    assert clamped.any() and not clamped.all()
    grads = model.raw_grad_rows(w, blob_data.features, blob_data.labels)
    assert np.all(grads[clamped] == 0.0)
    assert np.any(grads[~clamped] != 0.0)


def test_misclassification_counts_sign_errors():
    data = Dataset(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, -1.0]), "blobs")
    model = Logistic(2, feature_bound=1.0)
    assert model.misclassification(np.array([1.0, 0.0]), data) == 0.0
    assert model.misclassification(np.array([-1.0, 0.0]), data) == 1.0
    # zero margin counts as an error
    assert model.misclassification(np.array([0.0, 1.0]), data) == 1.0
    linear = Dataset(np.array([[1.0]]), np.array([0.3]), "linear")
    assert math.isnan(LeastSquares(1, clip_threshold=1.0).misclassification(np.array([0.0]), linear))


def test_single_sample_helpers_match_row_forms(blob_data, logistic_model):
    rng = make_rng(2)
    w = rng.standard_normal(logistic_model.dim)
    z = blob_data.point(7)
    X = blob_data.features[7:8]
    y = blob_data.labels[7:8]
    assert loss(logistic_model, w, z) == logistic_model.loss_rows(w, X, y)[0]
    assert np.array_equal(gradient(logistic_model, w, z), logistic_model.grad_rows(w, X, y)[0][0])
    assert np.array_equal(raw_gradient(logistic_model, w, z), logistic_model.raw_grad_rows(w, X, y)[0])


def test_spec_validation_errors():
    with pytest.raises(ValueError):
        SyntheticSpec(n=0, d_in=2)
    with pytest.raises(ValueError):
        SyntheticSpec(n=4, d_in=2, task="images")
    with pytest.raises(ValueError):
        SyntheticSpec(n=4, d_in=2, label_noise=1.5)
    with pytest.raises(ValueError):
        Logistic(2, feature_bound=0.0)
    with pytest.raises(ValueError):
        TinyMLP(2, hidden=0)

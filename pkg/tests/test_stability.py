import numpy as np
import pytest

from stalesgd import (
    CouplingConfig,
    Dataset,
    LearningRateSchedule,
    LeastSquares,
    Logistic,
    NeighborPair,
    assign_shards,
    check_recursion_pathwise,
    check_recursion_relaxed,
    draw_sample_path,
    generalization_proxy,
    lipschitz_sandwich_check,
    load_trace_columns,
    make_fixed_per_worker,
    make_neighbor,
    make_rng,
    normalized_distance,
    sample_from,
    save_trace,
    stability_estimate,
    twin_run,
)


def coupling_for(blob_data, model, tau_bar=2, horizon=50, seed=100, i_star=5, c=0.5):
    pair = make_neighbor(blob_data, i_star, seed=seed)
    return CouplingConfig(
        pair=pair,
        shard_seed=seed + 1,
        sample_seed=seed + 2,
        delays=make_fixed_per_worker(2, horizon, tau_bar, seed + 3),
        rates=LearningRateSchedule("theorem1", c),
        w0=np.zeros(model.dim),
        horizon=horizon,
    )


def test_normalized_distance_properties():
    w = np.array([3.0, 4.0])
    assert normalized_distance(w, w) == 0.0
    assert normalized_distance(np.zeros(2), np.zeros(2)) == 0.0
    assert normalized_distance(w, -w) == pytest.approx(np.sqrt(2.0))
    # scale invariant
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert normalized_distance(a, b) == pytest.approx(normalized_distance(3 * a, 3 * b))


def test_identical_twins_never_separate(blob_data, logistic_model):
    # a "neighbor" that is actually the same dataset: the runs must agree
    pair = NeighborPair(blob_data, blob_data, differing_index=5)
    template = coupling_for(blob_data, logistic_model)
    coupling = CouplingConfig(
        pair=pair,
        shard_seed=template.shard_seed,
        sample_seed=template.sample_seed,
        delays=template.delays,
        rates=template.rates,
        w0=template.w0,
        horizon=template.horizon,
    )
    trace = twin_run(logistic_model, coupling)
    assert np.all(trace.delta == 0.0)
    assert np.all(trace.normalized == 0.0)
    assert trace.slack.min() >= 0.0


def test_twins_coincide_exactly_until_the_first_hit(blob_data, logistic_model):
    coupling = coupling_for(blob_data, logistic_model, horizon=150)
    trace = twin_run(logistic_model, coupling)
    hits = np.nonzero(trace.hit)[0]
    assert hits.size > 0  # 150 steps on a 30-sample shard reads i* eventually
    first = hits[0]
    assert np.all(trace.delta[: first + 1] == 0.0)
    assert trace.delta[first + 1] > 0.0
    assert trace.i_star == 5
    assert trace.j_star == int(assign_shards(blob_data.n, 2, coupling.shard_seed).owner[5])


def test_one_dimensional_twin_matches_scalar_mirror():
    base = Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 0.0]), "linear")
    variant = Dataset(base.features, np.array([0.0, 1.0]), "linear")
    pair = NeighborPair(base, variant, differing_index=1)
    model = LeastSquares(1, clip_threshold=100.0, feature_bound=1.0)
    coupling = CouplingConfig(
        pair=pair,
        shard_seed=42,
        sample_seed=43,
        delays=make_fixed_per_worker(1, 12, 0, seed=44),
        rates=LearningRateSchedule("constant", 0.1),
        w0=np.zeros(1),
        horizon=12,
    )
    trace = twin_run(model, coupling)

    shards = assign_shards(2, 1, 42)
    samples = draw_sample_path(shards, 12, 43)
    wa = wb = 0.0
    for t in range(12):
        i = int(samples.indices[0, t, 0])
        ya = 0.0
        yb = 1.0 if i == 1 else 0.0
        wa, wb = wa - 0.1 * (wa - ya), wb - 0.1 * (wb - yb)
        assert trace.delta[t + 1] == pytest.approx(abs(wa - wb), abs=1e-15)
        assert trace.hit[t] == (i == 1)


def test_pathwise_slack_is_nonnegative_on_real_runs(blob_data, logistic_model):
    for seed in (200, 201, 202):
        trace = twin_run(logistic_model, coupling_for(blob_data, logistic_model, seed=seed))
        report = check_recursion_pathwise(trace)
        assert report.min_slack >= -1e-9
        assert report.first_violation is None


def test_relaxed_bound_is_never_tighter_than_the_branch_bound(blob_data, logistic_model):
    trace = twin_run(logistic_model, coupling_for(blob_data, logistic_model, tau_bar=3))
    tight = check_recursion_pathwise(trace).slack
    loose = check_recursion_relaxed(trace).slack
    assert np.all(loose >= tight - 1e-15)


def test_recursion_checks_require_constants_and_single_samples(blob_data, logistic_model):
    trace = twin_run(logistic_model, coupling_for(blob_data, logistic_model, horizon=10))
    trace.batch = 2
    with pytest.raises(ValueError, match="single-sample"):
        check_recursion_pathwise(trace)
    trace.batch = 1
    trace.model = LeastSquares(blob_data.d_in, clip_threshold=1.0)  # no smoothness
    with pytest.raises(ValueError, match="smoothness"):
        check_recursion_relaxed(trace)


def test_sandwich_holds_for_logistic_iterates(blob_data, logistic_model):
    rng = make_rng(77)
    panel = sample_from(blob_data, 64, seed=78)
    for _ in range(5):
        w = rng.standard_normal(logistic_model.dim)
        wb = w + 0.1 * rng.standard_normal(logistic_model.dim)
        report = lipschitz_sandwich_check(logistic_model, w, wb, panel)
        assert report.ok
        assert report.max_ratio <= 1.0 + 1e-9
    same = lipschitz_sandwich_check(logistic_model, w, w.copy(), panel)
    assert same.ok and same.max_gap == 0.0 and same.max_ratio == 0.0


def test_estimate_is_dominated_by_the_distance_relaxation(blob_data, logistic_model):
    est = stability_estimate(
        logistic_model, blob_data, worker_count=2, tau_bar=2,
        rates=LearningRateSchedule("theorem1", 0.5), horizon=60,
        replicates=8, seed=300, panel_size=32,
    )
    assert est.estimate <= est.lipschitz_relaxation * (1 + 1e-12)
    assert est.min_slack >= -1e-9
    assert est.sandwich_ok
    assert est.final_delta.shape == (8,)
    assert est.delta_matrix.shape == (8, 61)
    assert est.hit_matrix.shape == (8, 60)
    assert est.panel.n == 32
    assert est.traces is None


def test_estimate_keeps_traces_on_request(blob_data, logistic_model):
    est = stability_estimate(
        logistic_model, blob_data, worker_count=2, tau_bar=1,
        rates=LearningRateSchedule("theorem1", 0.5), horizon=20,
        replicates=3, seed=301, panel_size=16, keep_traces=True,
    )
    assert len(est.traces) == 3
    assert all(t.horizon == 20 for t in est.traces)


def test_trace_csv_round_trip(tmp_path, blob_data, logistic_model):
    panel = sample_from(blob_data, 16, seed=9)
    trace = twin_run(
        logistic_model, coupling_for(blob_data, logistic_model, horizon=30),
        holdout=panel, gap_stride=10,
    )
    path = tmp_path / "trace.csv"
    save_trace(trace, path)
    cols = load_trace_columns(path)
    assert list(cols) == ["t", "delta", "norm_dist", "hit", "slack", "gap_loss", "gap_misclass"]
    assert np.array_equal(cols["t"], np.arange(31))
    assert cols["delta"] == pytest.approx(trace.delta, abs=0.0)
    assert np.array_equal(cols["hit"][:30].astype(bool), trace.hit)
    assert cols["slack"][:30] == pytest.approx(trace.slack, abs=0.0)
    assert np.isnan(cols["slack"][30])
    evaluated = ~np.isnan(cols["gap_loss"])
    assert set(np.nonzero(evaluated)[0]) == {0, 10, 20, 30}


def test_proxy_reports_gaps(blob_data, logistic_model):
    test = sample_from(blob_data, 100, seed=55)
    w = np.zeros(logistic_model.dim)
    proxy = generalization_proxy(logistic_model, w, blob_data, test)
    assert proxy.train_loss == pytest.approx(np.log(2.0))
    assert proxy.loss_gap == pytest.approx(abs(proxy.train_loss - proxy.test_loss))
    assert proxy.misclass_gap == pytest.approx(abs(proxy.train_misclass - proxy.test_misclass))
    assert 0.0 <= proxy.test_misclass <= 1.0

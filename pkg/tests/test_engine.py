import numpy as np
import pytest

from stalesgd import (
    Dataset,
    DelaySchedule,
    IterateBuffer,
    LearningRateSchedule,
    LeastSquares,
    Logistic,
    SamplePath,
    TinyMLP,
    TrainingRun,
    assign_shards,
    draw_sample_path,
    gaussian_init,
    make_fixed_per_worker,
    make_worst_case_growth,
    step,
    train,
)


def test_shards_partition_the_dataset():
    shards = assign_shards(12, 3, seed=4)
    assert shards.shards.shape == (3, 4)
    assert sorted(shards.shards.reshape(-1)) == list(range(12))
    for j in range(3):
        assert np.all(shards.owner[shards.shards[j]] == j)
    with pytest.raises(ValueError):
        assign_shards(10, 3, seed=0)


def test_sample_path_stays_inside_each_shard():
    shards = assign_shards(20, 4, seed=1)
    path = draw_sample_path(shards, 50, seed=2, batch=3)
    assert path.indices.shape == (4, 50, 3)
    for j in range(4):
        assert set(path.indices[j].reshape(-1)) <= set(shards.shards[j])


def test_sample_frequencies_are_roughly_uniform():
    shards = assign_shards(12, 3, seed=9)
    path = draw_sample_path(shards, 20000, seed=5)
    for j in range(3):
        counts = np.array([(path.indices[j] == i).sum() for i in shards.shards[j]])
        assert np.all(np.abs(counts / 20000 - 0.25) < 0.02)


def test_buffer_round_trip_and_eviction():
    buf = IterateBuffer(3, 2)
    for t in range(5):
        buf.push(t, np.full(2, float(t)))
    assert buf.get(4)[0] == 4.0
    assert buf.get(2)[0] == 2.0
    with pytest.raises(KeyError):
        buf.get(1)  # evicted by the ring
    with pytest.raises(KeyError):
        buf.get(5)  # never pushed
    with pytest.raises(ValueError):
        IterateBuffer(0, 2)


def stale_pair_run(horizon=2):
    """1-d least squares, two workers, worker 1 lags one step behind."""
    data = Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 0.0]), "linear")
    model = LeastSquares(1, clip_threshold=100.0)
    shards = assign_shards(2, 2, seed=0)
    samples = SamplePath(np.zeros((2, horizon, 1), dtype=np.int64), seed=0)
    tau = np.zeros((2, horizon), dtype=np.int64)
    tau[1, 1:] = 1
    delays = DelaySchedule(2, horizon, tau, 1)
    rates = LearningRateSchedule("constant", 0.1)
    return TrainingRun(model, data, shards, samples, delays, rates, np.array([1.0]), horizon)


def test_two_step_stale_update_by_hand():
    # grad is w itself (x=1, y=0). Step 0: both read w0=1, total 2,
    # w1 = 1 - 0.05*2 = 0.9. Step 1: worker 0 reads 0.9, worker 1 still
    # reads w0=1, so w2 = 0.9 - 0.05*1.9 = 0.805.
    result = train(stale_pair_run(), keep_history=True)
    assert result.history[:, 0] == pytest.approx([1.0, 0.9, 0.805], abs=1e-15)
    assert result.grad_calls == 4


def test_step_matches_train(blob_data, logistic_model):
    shards = assign_shards(blob_data.n, 2, seed=3)
    samples = draw_sample_path(shards, 10, seed=4)
    delays = make_fixed_per_worker(2, 10, 2, seed=5)
    rates = LearningRateSchedule("theorem1", 1.0)
    w0 = np.zeros(logistic_model.dim)
    run = TrainingRun(logistic_model, blob_data, shards, samples, delays, rates, w0, 10)
    full = train(run, keep_history=True)
    buf = IterateBuffer(delays.max_delay + 1, logistic_model.dim)
    buf.push(0, w0)
    w = w0
    for t in range(10):
        w = step(run, buf, t)
        buf.push(t + 1, w)
        assert np.array_equal(w, full.history[t + 1])


def test_delay_free_run_matches_serial_reference(blob_data, logistic_model):
    T = 80
    shards = assign_shards(blob_data.n, 1, seed=6)
    samples = draw_sample_path(shards, T, seed=7)
    delays = make_worst_case_growth(1, T, 0)
    rates = LearningRateSchedule("theorem1", 1.0)
    run = TrainingRun(
        logistic_model, blob_data, shards, samples, delays, rates,
        np.zeros(logistic_model.dim), T,
    )
    got = train(run, keep_history=True).history

    w = np.zeros(logistic_model.dim)
    for t in range(T):
        i = int(samples.indices[0, t, 0])
        x = blob_data.features[i]
        y = blob_data.labels[i]
        sig = 1.0 / (1.0 + np.exp(y * float(x @ w)))
        w = w - (1.0 / (t + 3.0)) * (-y * sig) * x
        assert np.abs(w - got[t + 1]).max() <= 1e-12


def test_training_is_bitwise_deterministic(blob_data, logistic_model):
    def final(sample_seed):
        shards = assign_shards(blob_data.n, 3, seed=1)
        samples = draw_sample_path(shards, 40, seed=sample_seed)
        delays = make_fixed_per_worker(3, 40, 3, seed=2)
        rates = LearningRateSchedule("experimental", 0.5)
        run = TrainingRun(
            logistic_model, blob_data, shards, samples, delays, rates,
            np.zeros(logistic_model.dim), 40,
        )
        return train(run).final

    assert np.array_equal(final(8), final(8))
    assert not np.array_equal(final(8), final(9))


def test_step_displacement_is_bounded_by_rate_times_lipschitz(blob_data):
    model = LeastSquares(blob_data.d_in, clip_threshold=0.2, feature_bound=1.0)
    shards = assign_shards(blob_data.n, 2, seed=2)
    samples = draw_sample_path(shards, 60, seed=3)
    delays = make_fixed_per_worker(2, 60, 4, seed=4)
    rates = LearningRateSchedule("constant", 0.5)
    w0 = gaussian_init(model.dim, seed=5, scale=2.0)
    run = TrainingRun(model, blob_data, shards, samples, delays, rates, w0, 60)
    hist = train(run, keep_history=True).history
    moves = np.linalg.norm(np.diff(hist, axis=0), axis=1)
    assert np.all(moves <= 0.5 * model.lipschitz * (1 + 1e-12))


def test_batch_gradients_are_averaged():
    data = Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 2.0]), "linear")
    model = LeastSquares(1, clip_threshold=100.0)
    shards = assign_shards(2, 1, seed=0)
    indices = np.array([0, 1]).reshape(1, 1, 2)
    samples = SamplePath(indices, seed=0)
    delays = make_worst_case_growth(1, 1, 0)
    rates = LearningRateSchedule("constant", 1.0)
    run = TrainingRun(model, data, shards, samples, delays, rates, np.array([0.0]), 1)
    # grads at w=0 are (0-0)*1 = 0 and (0-2)*1 = -2; their mean is -1
    assert train(run).final[0] == pytest.approx(1.0)


def test_zero_horizon_returns_the_start():
    data = Dataset(np.array([[1.0], [1.0]]), np.array([0.0, 0.0]), "linear")
    model = LeastSquares(1, clip_threshold=1.0)
    shards = assign_shards(2, 1, seed=0)
    samples = SamplePath(np.zeros((1, 1, 1), dtype=np.int64), seed=0)
    delays = make_worst_case_growth(1, 1, 0)
    rates = LearningRateSchedule("constant", 1.0)
    run = TrainingRun(model, data, shards, samples, delays, rates, np.array([3.0]), 0)
    result = train(run, keep_history=True)
    assert result.final[0] == 3.0
    assert result.history.shape == (1, 1)
    assert result.grad_calls == 0


def test_run_wiring_is_cross_checked(blob_data, logistic_model):
    shards = assign_shards(blob_data.n, 2, seed=1)
    samples = draw_sample_path(shards, 10, seed=1)
    delays = make_fixed_per_worker(2, 10, 1, seed=1)
    rates = LearningRateSchedule("constant", 0.1)
    good = dict(
        model=logistic_model, data=blob_data, shards=shards, samples=samples,
        delays=delays, rates=rates, w0=np.zeros(logistic_model.dim), horizon=10,
    )
    TrainingRun(**good)
    with pytest.raises(ValueError, match="w0"):
        TrainingRun(**{**good, "w0": np.zeros(3)})
    with pytest.raises(ValueError, match="horizon"):
        TrainingRun(**{**good, "horizon": 11})
    with pytest.raises(ValueError, match="worker count"):
        TrainingRun(**{**good, "delays": make_fixed_per_worker(3, 10, 1, seed=1)})
    other = assign_shards(blob_data.n // 2, 2, seed=1)
    with pytest.raises(ValueError, match="dataset"):
        TrainingRun(**{**good, "shards": other})


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_run_raises_floating_point_error():
    data = Dataset(np.array([[1.0], [1.0]]), np.array([0.5, 0.5]), "linear")
    model = LeastSquares(1, clip_threshold=float("inf"))  # nothing tames the blow-up
    shards = assign_shards(2, 1, seed=0)
    samples = SamplePath(np.zeros((1, 900, 1), dtype=np.int64), seed=0)
    delays = make_worst_case_growth(1, 900, 0)
    rates = LearningRateSchedule("constant", 4.0)  # |1 - gamma| = 3 expands
    run = TrainingRun(model, data, shards, samples, delays, rates, np.array([0.0]), 900)
    with pytest.raises(FloatingPointError):
        train(run)


def test_mlp_training_reduces_loss(blob_data):
    model = TinyMLP(blob_data.d_in, hidden=8, clip_threshold=5.0)
    shards = assign_shards(blob_data.n, 2, seed=11)
    samples = draw_sample_path(shards, 400, seed=12)
    delays = make_fixed_per_worker(2, 400, 2, seed=13)
    rates = LearningRateSchedule("experimental", 0.5)
    w0 = gaussian_init(model.dim, seed=14, scale=0.3)
    run = TrainingRun(model, blob_data, shards, samples, delays, rates, w0, 400)
    result = train(run, record_loss=True)
    assert model.mean_loss(result.final, blob_data) < model.mean_loss(w0, blob_data)
    assert result.step_loss.shape == (400,)
    assert np.all(np.isfinite(result.step_loss))

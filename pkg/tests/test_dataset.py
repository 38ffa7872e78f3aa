import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlearn import dataset, harness, plant

CFG = plant.PlantConfig.default()
AB = harness.AbstractAlphabet.default()


def trace(seq):
    return harness.run_concrete(seq, CFG, AB, full=True)


def test_exact_length_needs_no_padding():
    tr = trace(["fast-acc", "const", "slow-acc"])
    pair = dataset.build_pair(tr, len(tr.records), CFG)
    assert pair.targets.tolist() == [[r.v_l, r.v_f, r.d] for r in tr.records]
    assert pair.X[:, 0].tolist() == [r.acc_cmd for r in tr.records]


def test_tail_padding_resimulates_idle_plant():
    tr = trace(["fast-acc", "fast-acc"])
    T = 12
    pair = dataset.build_pair(tr, T, CFG)
    # continuing a longer schedule with zero input is the independent route
    _, ref = plant.simulate(CFG, [(1.5, 2), (1.5, 2), (0.0, T - 4)], tr.curve_seed)
    assert pair.targets.tolist() == [[r.v_l, r.v_f, r.d] for r in ref]
    assert (pair.X[4:, 0] == 0.0).all()


def test_head_padding_on_reverse():
    tr = trace(["const", "brake", "wait"])
    cut = next(i for i, r in enumerate(tr.records) if r.v_l < 0)
    T = 10
    pair = dataset.build_pair(tr, T, CFG)
    pad = T - cut
    assert (pair.targets[:pad] == [0.0, 0.0, CFG.initial_distance]).all()
    assert (pair.X[:pad] == 0.0).all()
    assert pair.targets[pad:].tolist() == [[r.v_l, r.v_f, r.d] for r in tr.records[:cut]]
    assert (pair.targets[:, 0] >= 0).all()


def test_delta_prime_reconstructs_heading():
    seed = next(s for s in range(50) if any(r.delta for r in plant.simulate(CFG, [(0.7, 30)], s)[1]))
    _, records = plant.simulate(CFG, [(0.7, 30)], seed)
    tr = harness.ConcreteTrace(["slow-acc"] * 15, ("far",) * 15, records, [0] * 30,
                               plant.reset(CFG), seed)
    pair = dataset.build_pair(tr, 30, CFG)
    assert pair.X[0, 1] == 0.0
    heading = records[0].delta + np.cumsum(pair.X[:, 1])
    assert np.allclose(heading, [r.delta for r in records], atol=1e-12)


def test_too_long_traces_are_rejected():
    tr = trace(["wait"] * 3)
    with pytest.raises(dataset.TraceTooLongError):
        dataset.build_pair(tr, 23, CFG)
    rev = trace(["const"] * 3 + ["brake", "wait"])
    cut = next(i for i, r in enumerate(rev.records) if r.v_l < 0)
    assert cut > 0
    with pytest.raises(dataset.TraceTooLongError):
        dataset.build_pair(rev, cut - 1, CFG)


def test_crash_label_and_time():
    tr = trace(["fast-acc", "fast-acc", "wait", "wait"])
    pair = dataset.build_pair(tr, 30, CFG)
    first = next(i for i, r in enumerate(tr.records) if r.d < CFG.truck_length)
    assert pair.label_crash and pair.crash_time == first
    calm = dataset.build_pair(trace(["const"]), 5, CFG)
    assert not calm.label_crash and calm.crash_time is None
    with pytest.raises(ValueError):
        dataset.RawSequencePair(np.zeros((2, 2)), np.zeros((2, 3)), True, None)


def random_pairs(rng, n, T=6):
    return [dataset.RawSequencePair(rng.normal(size=(T, 2)) * [1.0, 0.01],
                                    rng.normal(size=(T, 3)) * [1, 2, 3] + [0, 1, 10], False, None)
            for _ in range(n)]


def test_normalization_zero_mean_unit_std():
    pairs = random_pairs(np.random.default_rng(0), 40)
    stats = dataset.fit_normalize(pairs)
    X, Y = dataset.apply_normalize(pairs, stats)
    for A in (X, Y):
        flat = A.reshape(-1, A.shape[-1])
        assert np.abs(flat.mean(axis=0)).max() < 1e-9
        assert np.allclose(flat.std(axis=0), 1.0)
    _, raw_Y, _, _ = dataset.stack(pairs)
    assert np.abs(dataset.invert(Y, stats) - raw_Y).max() < 1e-10


def test_constant_dimension_is_finite():
    pairs = [dataset.RawSequencePair(np.c_[np.ones(4), np.zeros(4)], np.ones((4, 3)), False, None)]
    stats = dataset.fit_normalize(pairs)
    assert (stats.x_std == dataset.STD_FLOOR).all()
    X, _ = dataset.apply_normalize(pairs, stats)
    assert (X == 0.0).all()


def test_empty_training_set():
    with pytest.raises(ValueError):
        dataset.fit_normalize([])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.randoms(use_true_random=False))
def test_normalization_ignores_pair_order(seed, shuffler):
    pairs = random_pairs(np.random.default_rng(seed), 12)
    a = dataset.fit_normalize(pairs)
    shuffled = list(pairs)
    shuffler.shuffle(shuffled)
    b = dataset.fit_normalize(shuffled)
    for k in ("x_mean", "x_std", "y_mean", "y_std"):
        assert np.array_equal(getattr(a, k), getattr(b, k))


def test_stats_round_trip(tmp_path):
    stats = dataset.fit_normalize(random_pairs(np.random.default_rng(1), 5))
    stats.save(tmp_path / "stats.txt")
    back = dataset.NormalizationStats.load(tmp_path / "stats.txt")
    assert all(np.array_equal(getattr(stats, k), getattr(back, k)) for k in ("x_mean", "x_std", "y_mean", "y_std"))


def test_dataset_csv_round_trip(tmp_path):
    pairs = dataset.build_pairs([trace(s) for s in (["fast-acc", "fast-acc", "wait", "wait"], ["const"])], 30, CFG)
    path = tmp_path / "data.csv"
    dataset.write_dataset(path, pairs)
    assert path.read_text().splitlines()[0] == ",".join(dataset.DATASET_HEADER)
    back = dataset.read_dataset(path)
    assert len(back) == 2
    for p, q in zip(pairs, back):
        assert np.array_equal(p.X, q.X) and np.array_equal(p.targets, q.targets)
        assert (p.label_crash, p.crash_time) == (q.label_crash, q.crash_time)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isorank.sampling import (
    BatchedObservations,
    NoiseModel,
    ObservationStream,
    SignalInstance,
    is_permutation,
    lambda_effective,
    make_rng,
    poissonize,
    sorted_view,
    split_stream,
    subsample_batches,
)
from isorank.synth import gen_isotonic


def stream_of(records, n=3, d=3, lam=1.0):
    rows, cols, vals = (np.array(x) for x in zip(*records)) if records else ([], [], [])
    return ObservationStream(n, d, lam, rows, cols, vals)


def test_instance_validation():
    inst = SignalInstance(np.array([[0.2], [0.1]]), np.array([1, 0]))
    inst.check()
    assert not SignalInstance(np.array([[0.2], [0.1]]), np.array([0, 1])).is_valid()
    assert not SignalInstance(np.array([[1.5]]), np.array([0])).is_valid()
    with pytest.raises(ValueError):
        SignalInstance(np.zeros((0, 2)), np.array([], dtype=int))
    with pytest.raises(ValueError):
        SignalInstance(np.zeros((2, 2)), np.array([0, 0]))


def test_sorted_view_and_permutation():
    M = np.array([[3.0], [1.0], [2.0]])
    pi = np.array([2, 0, 1])
    assert sorted_view(M, pi).ravel().tolist() == [1.0, 2.0, 3.0]
    assert is_permutation(pi) and not is_permutation([0, 2])


def test_rng_is_keyed():
    a = make_rng(3, 1).random(4)
    assert np.array_equal(a, make_rng(3, 1).random(4))
    assert not np.array_equal(a, make_rng(3, 2).random(4))


# poissonize --------------------------------------------------------------------

def test_poissonize_rejects_bad_effort():
    with pytest.raises(ValueError):
        poissonize(SignalInstance(np.ones((2, 2)) * 0.5, np.arange(2), 0.0), NoiseModel(), 0)
    with pytest.raises(ValueError):
        poissonize(SignalInstance(np.ones((2, 2)) * 0.5, np.arange(2), np.inf), NoiseModel(), 0)


def test_poissonize_tiny_effort_gives_empty_stream():
    s = poissonize(SignalInstance(np.full((2, 2), 0.5), np.arange(2), 1e-12), NoiseModel(), 0)
    assert s.N == 0


def test_poissonize_gaussian_mean():
    inst = SignalInstance(np.array([[0.5]]), np.array([0]), 20_000.0)
    s = poissonize(inst, NoiseModel("gaussian"), 1)
    assert s.N >= 10_000
    assert abs(s.values.mean() - 0.5) <= 3 / np.sqrt(s.N)


def test_poissonize_count_moment():
    inst = SignalInstance(np.full((10, 10), 0.5), np.arange(10), 2.0)
    Ns = np.array([poissonize(inst, NoiseModel("none"), s).N for s in range(10_000)])
    assert abs(Ns.mean() - 200) <= 3 * np.sqrt(200) / np.sqrt(Ns.size)


def test_poissonize_deterministic_and_uniform():
    inst = gen_isotonic(6, 5, seed=0, lam=200.0)
    a = poissonize(inst, NoiseModel("bernoulli"), 4)
    b = poissonize(inst, NoiseModel("bernoulli"), 4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.rows, b.rows)
    assert set(np.unique(a.values)) <= {0.0, 1.0}
    c = a.counts()
    assert c.sum() == a.N
    # chi-square style bound on cell counts
    expected = a.N / c.size
    assert np.all(np.abs(c - expected) < 6 * np.sqrt(expected))


# subsample_batches ---------------------------------------------------------------

def test_batches_empty_stream():
    b = subsample_batches(stream_of([]), 1, 0)
    assert not b.Y.any() and not b.B.any() and not b.r.any()


def test_batches_single_record():
    b = subsample_batches(stream_of([(1, 1, 0.7)]), 1, 0)
    hit = np.flatnonzero(b.r[:, 1, 1])
    assert hit.size == 1
    s = hit[0]
    assert b.Y[s, 1, 1] == 0.7 and b.B[s, 1, 1] and b.r[s, 1, 1] == 1
    assert b.r.sum() == 1 and np.count_nonzero(b.Y) == 1


def test_batches_average_in_same_cell():
    recs = [(0, 2, 0.2), (0, 2, 0.4), (0, 2, 0.6)]
    # search a seed that puts all three records in one batch
    for seed in range(500):
        b = subsample_batches(stream_of(recs), 1, seed)
        if b.r[:, 0, 2].max() == 3:
            s = int(np.argmax(b.r[:, 0, 2]))
            assert b.Y[s, 0, 2] == pytest.approx(0.4)
            return
    pytest.fail("no seed grouped the records")


def test_batches_partition_and_mask():
    inst = gen_isotonic(7, 9, seed=1, lam=6.0)
    s = poissonize(inst, NoiseModel(), 3)
    b = subsample_batches(s, 2, 3)
    assert b.Y.shape == (10, 7, 9)
    assert np.array_equal(b.r.sum(axis=0), s.counts())
    assert np.array_equal(b.B, b.r >= 1)
    assert np.all(b.Y[~b.B] == 0)
    assert b.window(1).shape == (5, 7, 9)
    with pytest.raises(IndexError):
        b.window(2)


def test_batches_reject_bad_T():
    with pytest.raises(ValueError):
        subsample_batches(stream_of([]), 0, 0)


def test_batches_readonly():
    b = subsample_batches(stream_of([(0, 0, 1.0)]), 1, 0)
    with pytest.raises(ValueError):
        b.Y[0, 0, 0] = 2.0


def test_mask_marginal_matches_lambda1():
    inst = SignalInstance(np.full((100, 100), 0.5), np.arange(100), 5.0)
    b = subsample_batches(poissonize(inst, NoiseModel(), 0), 1, 0)
    freq = b.B.mean()
    p = b.lambda1
    assert b.lambda0 == pytest.approx(1.0)
    assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / b.B.size)


def test_conditional_unbiasedness():
    inst = gen_isotonic(60, 60, seed=2, lam=5.0)
    b = subsample_batches(poissonize(inst, NoiseModel(), 1), 1, 1)
    diffs, var = [], []
    for s in range(5):
        m = b.B[s]
        diffs.append((b.Y[s] - inst.M)[m])
        var.append(1.0 / b.r[s][m])
    diffs, var = np.concatenate(diffs), np.concatenate(var)
    assert abs(diffs.mean()) <= 3 * np.sqrt(var.sum()) / diffs.size


# lambda_effective ------------------------------------------------------------------

def test_lambda_effective_examples():
    assert lambda_effective(5, 1) == pytest.approx((1.0, 1 - np.exp(-1)))
    assert lambda_effective(10, 2) == pytest.approx((1.0, 0.6321205588))
    l0, l1 = lambda_effective(1e-9, 1)
    assert l1 / l0 == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        lambda_effective(0, 1)


# split / transpose -----------------------------------------------------------------

def test_split_stream_partitions_records():
    inst = gen_isotonic(5, 4, seed=0, lam=10.0)
    s = poissonize(inst, NoiseModel(), 0)
    parts = split_stream(s, 3, 1)
    assert sum(p.N for p in parts) == s.N
    assert all(p.lam == pytest.approx(10.0 / 3) for p in parts)
    assert np.array_equal(sum(p.counts() for p in parts), s.counts())


def test_transpose_swaps_axes():
    s = stream_of([(0, 2, 0.5), (1, 0, 0.25)], n=2, d=3)
    t = s.transpose()
    assert (t.n, t.d) == (3, 2)
    assert np.array_equal(t.counts(), s.counts().T)


def test_full_observation():
    M = np.array([[0.1, 0.2], [0.3, 0.4]])
    b = BatchedObservations.full_observation(M, 2, 50.0)
    assert b.Y.shape == (10, 2, 2) and np.all(b.Y == M) and b.lambda1 == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.1, 8), st.integers(1, 3), st.integers(0, 10**6))
def test_partition_property(n, d, lam, T, seed):
    inst = SignalInstance(np.full((n, d), 0.5), np.arange(n), lam)
    s = poissonize(inst, NoiseModel(), seed)
    b = subsample_batches(s, T, seed)
    assert np.array_equal(b.r.sum(axis=0), s.counts())
    assert np.array_equal(b.B, b.r >= 1)

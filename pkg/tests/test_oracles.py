import numpy as np
import pytest

from dsaddle.oracles import (
    GSGOracle,
    ReferenceState,
    SamplingDistribution,
    StaleReferenceCache,
    SVRGOracle,
    gsgo,
    maybe_refresh_reference,
    svrgo,
)
from dsaddle.rng import StreamBank
from conftest import small_auc, small_logistic


def test_uniform_weights_are_one():
    d = SamplingDistribution.uniform(3, 4)
    assert d.n == 4 and d.p_min == 0.25
    assert all(d.weight(i, l) == 1.0 for i in range(3) for l in range(4))


def test_distribution_validation():
    with pytest.raises(ValueError):
        SamplingDistribution(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        SamplingDistribution(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        SamplingDistribution(np.array([0.5, 0.5]))


@pytest.mark.parametrize("probs", [[0.25, 0.25, 0.5], [0.1, 0.3, 0.6]])
def test_gsgo_exact_expectation(probs, rng):
    # enumerate the batch index to compute E[G] without sampling noise
    pr = small_logistic(m=2, n=3, N=60)
    dist = SamplingDistribution(np.array([probs, probs]))
    x, y = rng.standard_normal(5) * 0.5, rng.standard_normal(5) * 0.5
    for i in range(2):
        ex = sum(dist.probs[i, l] * dist.weight(i, l) * pr.grad(i, l, x, y)[0] for l in range(3))
        ey = sum(dist.probs[i, l] * dist.weight(i, l) * pr.grad(i, l, x, y)[1] for l in range(3))
        fx, fy = pr.grad_full(i, x, y)
        assert np.allclose(ex, fx, atol=1e-14) and np.allclose(ey, fy, atol=1e-14)


def test_svrgo_exact_expectation(rng):
    pr = small_auc(m=2, n=3, N=60)
    probs = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
    dist = SamplingDistribution(probs)
    X = rng.standard_normal((2, pr.d_x))
    Y = rng.standard_normal((2, pr.d_y))
    refs, _ = ReferenceState.at(pr, X + 0.3, Y - 0.2, 0.5)
    for i in range(2):
        ex = sum(
            probs[i, l] * (dist.weight(i, l) * (pr.grad(i, l, X[i], Y[i])[0]
                                                - pr.grad(i, l, refs.x_tilde[i], refs.y_tilde[i])[0]) + refs.gx[i])
            for l in range(3)
        )
        assert np.allclose(ex, pr.grad_full(i, X[i], Y[i])[0], atol=1e-12)


def test_gsgo_monte_carlo_mean(rng):
    pr = small_logistic(m=1, n=4, N=80)
    dist = SamplingDistribution(np.array([[0.1, 0.2, 0.3, 0.4]]))
    x, y = rng.standard_normal(5) * 0.5, rng.standard_normal(5) * 0.5
    K = 20000
    samples = np.array([gsgo(pr, dist, 0, x, y, rng)[0] for _ in range(K)])
    full = pr.grad_full(0, x, y)[0]
    se = samples.std(axis=0) / np.sqrt(K)
    assert np.all(np.abs(samples.mean(axis=0) - full) <= 5 * se + 1e-12)


def test_svrgo_exact_at_reference(rng):
    pr = small_logistic(m=3, n=4, N=120)
    dist = SamplingDistribution.uniform(3, 4)
    X, Y = rng.standard_normal((3, 5)), rng.standard_normal((3, 5))
    refs, _ = ReferenceState.at(pr, X, Y, 0.25)
    for i in range(3):
        for _ in range(5):
            gx, gy, _ = svrgo(pr, dist, refs, i, X[i], Y[i], rng)
            fx, fy = pr.grad_full(i, X[i], Y[i])
            assert np.allclose(gx, fx, atol=1e-15, rtol=0) and np.allclose(gy, fy, atol=1e-15, rtol=0)


def test_svrg_variance_below_plain_near_reference(rng):
    pr = small_logistic(m=1, n=5, N=100)
    dist = SamplingDistribution.uniform(1, 5)
    x, y = rng.standard_normal(5) * 0.3, rng.standard_normal(5) * 0.3
    refs, _ = ReferenceState.at(pr, (x + 0.01)[None], (y - 0.01)[None], 0.2)
    full = np.concatenate(pr.grad_full(0, x, y))

    def var(fn):
        out = [np.concatenate(fn()[:2]) for _ in range(2000)]
        return np.mean(np.sum((np.array(out) - full) ** 2, axis=1))

    v_plain = var(lambda: gsgo(pr, dist, 0, x, y, rng))
    v_svrg = var(lambda: svrgo(pr, dist, refs, 0, x, y, rng))
    assert v_svrg < 0.01 * v_plain


def test_stale_reference_raises():
    pr = small_logistic(m=2, n=2, N=40)
    refs = ReferenceState.empty(2, 5, 5, 0.5)
    with pytest.raises(StaleReferenceCache):
        svrgo(pr, SamplingDistribution.uniform(2, 2), refs, 0, np.zeros(5), np.zeros(5), np.random.default_rng(0))


def test_refresh_frequency_is_binomial():
    pr = small_logistic(m=4, n=2, N=40)
    p, K = 0.3, 4000
    refs, _ = ReferenceState.at(pr, np.zeros((4, 5)), np.zeros((4, 5)), p)
    base = refs.refreshes
    rngs = StreamBank(7, 4)["refresh"]
    X = np.zeros((4, 5))
    for _ in range(K):
        maybe_refresh_reference(pr, refs, X, X, rngs)
    count = refs.refreshes - base
    mean, sd = 4 * K * p, np.sqrt(4 * K * p * (1 - p))
    assert abs(count - mean) <= 4 * sd


def test_refresh_never_and_always():
    pr = small_logistic(m=2, n=2, N=40)
    X = np.ones((2, 5)) * 0.1
    rngs = StreamBank(0, 2)["refresh"]
    for p, expect in ((0.0, 0), (1.0, pr.N)):
        refs = ReferenceState.empty(2, 5, 5, p)
        assert maybe_refresh_reference(pr, refs, X, X, rngs) == expect


def test_svrg_oracle_cost_bookkeeping(rng):
    pr = small_logistic(m=4, n=4, N=160)
    dist = SamplingDistribution.uniform(4, 4)
    bank = StreamBank(3, 4)
    refs, init_cost = ReferenceState.at(pr, np.zeros((4, 5)), np.zeros((4, 5)), 0.25)
    assert init_cost == pr.N
    orc = SVRGOracle(pr, dist, refs, bank["batch"], bank["refresh"])
    total = 0
    before = refs.refreshes
    for _ in range(50):
        X, Y = rng.standard_normal((4, 5)) * 0.2, rng.standard_normal((4, 5)) * 0.2
        total += orc(X, Y)[2]
    # each call: 2 batch gradients per node plus full recomputation for refreshed nodes
    per_node = pr.node_size(0)
    assert all(pr.node_size(i) == per_node for i in range(4))
    batch = pr.batch_size(0, 0)
    assert total == 50 * 4 * 2 * batch + (refs.refreshes - before) * per_node


def test_gsg_oracle_counts_and_determinism():
    pr = small_logistic(m=4, n=2, N=80)
    dist = SamplingDistribution.uniform(4, 2)
    X = np.full((4, 5), 0.1)
    a = GSGOracle(pr, dist, StreamBank(5, 4)["batch"])(X, X)
    b = GSGOracle(pr, dist, StreamBank(5, 4)["batch"])(X, X)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert a[2] == 4 * pr.batch_size(0, 0)

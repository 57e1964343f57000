import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinlink.aoi import (
    PROB_EPS,
    AoiConfig,
    TwoPopulationConfig,
    WeightedBatch,
    age,
    aoi_loss,
    bce_loss,
    decay_weight,
    per_sample_bce,
    prune,
    split_populations,
    two_population_loss,
)
from twinlink.scene import PathRecord, Sample, Source


def stamped(times):
    path = [PathRecord(1e-6 + 0j, 1e-7, 0.0, 0.0)]
    return [Sample(f"s{i}", path, 0, float(t), Source.VEHICULAR) for i, t in enumerate(times)]


def test_age():
    assert age(5.0, 5.0) == 0.0
    assert age(100, 90) == 10
    assert age(100, 37.3) == pytest.approx(62.7)
    with pytest.raises(ValueError):
        age(10, 10.5)


def test_decay_weight_values():
    assert decay_weight(0.0, 0.4) == 1.0
    assert decay_weight(100, 0.01) == pytest.approx(0.367879, abs=1e-6)
    assert decay_weight(13.2458, 0.4) == pytest.approx(0.005, rel=1e-4)
    np.testing.assert_allclose(decay_weight(np.array([0, 10]), 0.1), [1.0, math.exp(-1)])


def test_config_validation_and_max_age():
    with pytest.raises(ValueError):
        AoiConfig(0.0)
    with pytest.raises(ValueError):
        AoiConfig(0.1, threshold=1.0)
    assert AoiConfig(0.4, 0.005).max_age == pytest.approx(math.log(200) / 0.4)
    assert AoiConfig(0.4, 0.0).max_age == math.inf


def test_prune_cutoff_at_t100():
    times = np.round(np.arange(0, 100.0001, 0.1), 10)
    res = prune(stamped(times), 100.0, AoiConfig(0.4, 0.005))
    cutoff = 100 - math.log(200) / 0.4
    assert cutoff == pytest.approx(86.754, abs=1e-3)
    assert [s.timestamp for s in res.samples] == [t for t in times if t > cutoff]
    assert res.retained + res.dropped == len(times)


def test_prune_zero_threshold_keeps_everything_and_order():
    data = stamped([5, 1, 3, 0])
    res = prune(data, 10, AoiConfig(5.0, 0.0))
    assert res.samples == data and res.dropped == 0


def test_prune_drops_samples_exactly_on_the_boundary():
    # weight exactly 0.25 with threshold 0.25 must go
    data = stamped([10.0 - math.log(4) / 1.0])
    w = decay_weight(age(10.0, data[0].timestamp), 1.0)
    res = prune(data, 10.0, AoiConfig(1.0, w))
    assert res.retained == 0


ts = st.lists(st.floats(0, 100), min_size=1, max_size=40)


@settings(max_examples=150, deadline=None)
@given(ts, st.floats(0.001, 2.0), st.floats(0.0, 0.99))
def test_prune_matches_brute_force(times, gamma, thr):
    data = stamped(times)
    got = prune(data, 100.0, AoiConfig(gamma, thr)).samples
    want = [s for s in data if math.exp(-gamma * (100.0 - s.timestamp)) > thr]
    assert [s.id for s in got] == [s.id for s in want]


@settings(max_examples=150, deadline=None)
@given(ts, st.floats(0.001, 1.0), st.floats(0.001, 1.0), st.floats(0.0, 0.99))
def test_retained_set_shrinks_with_gamma(times, g1, g2, thr):
    lo, hi = sorted((g1, g2))
    data = stamped(times)
    small = {s.id for s in prune(data, 100.0, AoiConfig(hi, thr)).samples}
    big = {s.id for s in prune(data, 100.0, AoiConfig(lo, thr)).samples}
    assert small <= big


def test_bce_values():
    assert bce_loss(WeightedBatch([0.5], [1], [0])) == pytest.approx(math.log(2))
    assert bce_loss(WeightedBatch([1 - PROB_EPS], [1], [0])) < 1e-6
    # clamping keeps log(0) out
    assert math.isfinite(bce_loss(WeightedBatch([0.0, 1.0], [1, 0], [0, 0])))
    pair = WeightedBatch([0.3, 0.8], [0, 1], [0, 0])
    singles = bce_loss(WeightedBatch([0.3], [0], [0])) + bce_loss(WeightedBatch([0.8], [1], [0]))
    assert bce_loss(pair) == pytest.approx(singles, rel=1e-15)
    assert bce_loss(pair, "mean") == pytest.approx(singles / 2)
    with pytest.raises(ValueError):
        bce_loss(pair, "median")


def test_aoi_loss_hand_value_and_zero_age_identity():
    b = WeightedBatch([0.5], [1], [10.0], gamma=0.1)
    assert aoi_loss(b) == pytest.approx(0.693147 * math.exp(-1), abs=1e-6)
    assert abs(aoi_loss(b) - math.log(2) * math.exp(-1)) <= 1e-9
    rng = np.random.default_rng(0)
    p, y = rng.random(50), rng.integers(0, 2, 50)
    zero = WeightedBatch(p, y, np.zeros(50), gamma=3.0)
    assert aoi_loss(zero) == bce_loss(zero)


def test_batch_validation():
    with pytest.raises(ValueError):
        WeightedBatch([0.5, 0.5], [1], [0, 0])
    with pytest.raises(ValueError):
        WeightedBatch([0.5], [1], [-1.0])


probs = st.floats(0.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(probs, st.integers(0, 1), st.floats(0, 50)), min_size=1, max_size=20),
       st.floats(0.0, 2.0), st.integers(0, 2**32 - 1))
def test_aoi_loss_monotone_in_gamma_and_permutation_invariant(rows, gamma, seed):
    p, y, a = (np.array(v) for v in zip(*rows))
    lo = aoi_loss(WeightedBatch(p, y, a, gamma))
    hi = aoi_loss(WeightedBatch(p, y, a, 2 * gamma))
    assert hi <= lo + 1e-12
    perm = np.random.default_rng(seed).permutation(len(p))
    shuffled = aoi_loss(WeightedBatch(p[perm], y[perm], a[perm], gamma))
    assert shuffled == pytest.approx(lo, rel=1e-12, abs=1e-300)


def test_weighted_gradient_by_finite_differences():
    p = np.array([0.3, 0.7, 0.55])
    y = np.array([1, 0, 1])
    a = np.array([0.0, 4.0, 9.0])
    gamma, h = 0.2, 1e-6
    for i in range(3):
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        num = (aoi_loss(WeightedBatch(up, y, a, gamma)) - aoi_loss(WeightedBatch(dn, y, a, gamma))) / (2 * h)
        plain = (per_sample_bce(up[i], y[i]) - per_sample_bce(dn[i], y[i])) / (2 * h)
        assert num == pytest.approx(plain * math.exp(-gamma * a[i]), rel=1e-6)


def test_two_population_reductions():
    rec = WeightedBatch([0.2, 0.9], [0, 1], [1.0, 2.0])
    old = WeightedBatch([0.6, 0.4], [1, 0], [30.0, 50.0])
    cfg = TwoPopulationConfig(alpha=1, beta=0, gamma_alpha=0.1)
    assert two_population_loss(rec, old, cfg) == aoi_loss(WeightedBatch(rec.predictions, rec.labels, rec.ages, 0.1))
    both = TwoPopulationConfig(alpha=1, beta=1, gamma_alpha=0.05, gamma_beta=0.05)
    union = WeightedBatch(np.r_[rec.predictions, old.predictions], np.r_[rec.labels, old.labels],
                          np.r_[rec.ages, old.ages], 0.05)
    assert two_population_loss(rec, old, both) == pytest.approx(aoi_loss(union), rel=1e-14)


def test_two_population_hand_arithmetic():
    rec = WeightedBatch([0.5, 0.25], [1, 0], [0.0, 10.0])
    old = WeightedBatch([0.8, 0.1], [1, 1], [20.0, 40.0])
    cfg = TwoPopulationConfig(alpha=0.7, beta=0.3, gamma_alpha=0.1, gamma_beta=0.05)
    want = 0.7 * (math.log(2) + -math.log(0.75) * math.exp(-1.0)) \
        + 0.3 * (-math.log(0.8) * math.exp(-1.0) + -math.log(0.1) * math.exp(-2.0))
    assert abs(two_population_loss(rec, old, cfg) - want) <= 1e-12
    with pytest.raises(ValueError):
        TwoPopulationConfig(alpha=0, beta=0)


def test_split_populations():
    data = stamped([1, 50, 20, 80])
    recent, old = split_populations(data, 20)
    assert [s.timestamp for s in recent] == [50, 20, 80]
    assert [s.timestamp for s in old] == [1]

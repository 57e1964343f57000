import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import loop_oracle, random_paths
from twinlink.features import (
    FEATURE_NAMES,
    Perturbation,
    extract_features,
    feature_matrix,
    perturb_paths,
    write_features_csv,
)
from twinlink.scene import PathKind, PathRecord, Sample, Source




def test_single_path_degeneracies():
    f = extract_features([PathRecord(1 + 0j, 5e-9, 0.3, -0.1, PathKind.LOS)])
    assert f.as_array().tolist() == [1.0, 1.0, 0.0, 0.0, 0.3, -0.1]


def test_two_equal_paths_hand_values():
    paths = [PathRecord(1 + 0j, 0.0, 0.0, 0.0), PathRecord(1j, 2e-9, 0.0, 0.0)]
    f = extract_features(paths)
    assert f.tau_rms == pytest.approx(1e-9, rel=1e-12)
    assert f.rise_time == pytest.approx(2e-9, rel=1e-12)
    assert f.p_rss == 2.0 and f.p_max == 1.0


def test_matches_loop_oracle_on_random_sets():
    rng = np.random.default_rng(0)
    for _ in range(200):
        paths = random_paths(rng, int(rng.integers(1, 7)))
        got = extract_features(paths).as_array()
        want = np.array(loop_oracle(paths))
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-300)


def test_rms_angle_mode():
    paths = [PathRecord(1 + 0j, 0.0, 0.2, 0.1), PathRecord(1 + 0j, 1e-9, 0.6, 0.1)]
    f = extract_features(paths, angle_mode="rms")
    assert f.theta_spread == pytest.approx(0.2)
    assert f.phi_spread == 0.0
    with pytest.raises(ValueError):
        extract_features(paths, angle_mode="median")


def test_errors():
    with pytest.raises(ValueError):
        extract_features([])
    with pytest.raises(ValueError):
        extract_features([PathRecord(0j, 1e-9, 0.0, 0.0)])


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6), st.floats(0.01, 100.0), st.floats(-math.pi, math.pi))
def test_gain_scaling_covariance(seed, n, mag, phase):
    paths = random_paths(np.random.default_rng(seed), n)
    c = mag * complex(math.cos(phase), math.sin(phase))
    a = extract_features(paths)
    b = extract_features([PathRecord(p.gain * c, p.delay, p.azimuth, p.elevation) for p in paths])
    assert b.p_rss == pytest.approx(a.p_rss * mag**2, rel=1e-12)
    assert b.p_max == pytest.approx(a.p_max * mag**2, rel=1e-12)
    for name in ("tau_rms", "rise_time", "theta_spread", "phi_spread"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-9, abs=1e-20)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6))
def test_permutation_invariance_and_bounds(seed, n):
    rng = np.random.default_rng(seed)
    paths = random_paths(rng, n)
    a = extract_features(paths).as_array()
    b = extract_features([paths[i] for i in rng.permutation(n)]).as_array()
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-24)
    assert a[0] >= a[1] > 0 and a[2] >= 0 and a[3] >= 0
    eta = np.array([abs(p.gain) ** 2 for p in paths]) / a[0]
    assert abs(eta.sum() - 1.0) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6), st.floats(0, 1e-6))
def test_zero_spread_iff_equal_delays(seed, n, tau):
    rng = np.random.default_rng(seed)
    paths = [PathRecord(p.gain, tau, p.azimuth, p.elevation) for p in random_paths(rng, n)]
    f = extract_features(paths)
    assert f.tau_rms == 0.0 and f.rise_time == 0.0
    if n > 1:
        paths[0] = PathRecord(paths[0].gain, tau + 1e-9, 0.0, 0.0)
        f = extract_features(paths)
        assert f.tau_rms > 0 and f.rise_time > 0


def test_perturbation_is_seeded_and_bounded():
    rng = np.random.default_rng(4)
    paths = random_paths(rng, 5)
    a = perturb_paths(paths, np.random.default_rng(1))
    b = perturb_paths(paths, np.random.default_rng(1))
    assert a == b
    for p, q in zip(paths, a):
        ratio_db = 20 * math.log10(abs(q.gain) / abs(p.gain))
        assert abs(ratio_db) <= 0.5 + 1e-12
        assert q.delay >= 0 and abs(q.elevation) <= math.pi / 2
    none = perturb_paths(paths, np.random.default_rng(1), Perturbation(0.0, 0.0, 0.0))
    assert [(p.delay, p.azimuth) for p in none] == [(p.delay, p.azimuth) for p in paths]


def test_feature_matrix_and_csv(tmp_path):
    rng = np.random.default_rng(2)
    samples = [Sample(f"s{i}", random_paths(rng, 3), i % 2, 0.1 * i, Source.VEHICULAR) for i in range(4)]
    x, y = feature_matrix(samples)
    assert x.shape == (4, 6) and y.tolist() == [0, 1, 0, 1]
    out = tmp_path / "f.csv"
    write_features_csv(out, samples, [extract_features(s.paths) for s in samples])
    lines = out.read_text().splitlines()
    assert lines[0] == "id,t,y," + ",".join(FEATURE_NAMES)
    assert len(lines) == 5
    assert float(lines[2].split(",")[3]) == x[1, 0]

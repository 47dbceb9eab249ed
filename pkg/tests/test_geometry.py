import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from fsa_aoi.geometry import (Deterministic, Empty, InsufficientPointsError, ObservationWindow, RadioConfig,
                              RandomNearest, Topology, build_window, build_windows, cross_distances,
                              dbm_to_watts, parse_window, sample_bipolar, shift, shift_to_origin,
                              torus_distance)

RADIO = RadioConfig()


def test_radio_defaults_and_derived():
    assert RADIO.alpha == 3.8 and RADIO.theta == 1.0 and RADIO.link_distance == 30.0
    assert RADIO.delta == pytest.approx(2 / 3.8)
    assert RADIO.rho == RADIO.ptx / RADIO.noise_power
    assert RADIO.rho == pytest.approx(10 ** 11.9, rel=1e-12)
    assert RADIO.big_c(3e-3) == pytest.approx(14.07, abs=0.01)


def test_radio_from_db():
    r = RadioConfig.from_db(theta_db=3.0, ptx_dbm=20.0, noise_dbm=-90.0)
    assert r.theta == pytest.approx(10 ** 0.3)
    assert r.ptx == pytest.approx(0.1)
    assert r.noise_power == pytest.approx(1e-12)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)


@pytest.mark.parametrize("kw", [{"alpha": 2.0}, {"theta": 0.0}, {"ptx": -1.0}, {"noise_power": 0.0},
                                {"link_distance": 0.0}])
def test_radio_validation(kw):
    with pytest.raises(ValueError):
        RadioConfig(**kw)


def test_region_side_and_pair_geometry():
    t = sample_bipolar(3e-3, 1000, RADIO, 5)
    assert t.region_side == pytest.approx(577.35, abs=0.01)
    d = torus_distance(t.sources, t.destinations, t.region_side)
    np.testing.assert_allclose(d, 30.0, rtol=1e-9)


def test_forced_single_pair():
    t = sample_bipolar(1e-4, 1, RADIO, 9, count=1)
    assert len(t) == 1
    assert torus_distance(t.sources[0], t.destinations[0], t.region_side) == pytest.approx(30.0)


def test_region_too_small_for_link():
    with pytest.raises(ValueError):
        sample_bipolar(3e-3, 1, RADIO, 9, count=1)


def test_same_seed_bitwise_identical():
    a, b = sample_bipolar(3e-3, 200, RADIO, 42), sample_bipolar(3e-3, 200, RADIO, 42)
    assert a == b
    assert a != sample_bipolar(3e-3, 200, RADIO, 43)


def test_pair_count_poisson_mean():
    counts = np.array([len(sample_bipolar(1e-3, 50, RADIO, s)) for s in range(1000)])
    assert abs(counts.mean() - 50) <= 3 * math.sqrt(50 / 1000)


def test_nearest_neighbour_rayleigh_law():
    lam, side_pairs = 1e-3, 2000
    samples = []
    seed = 0
    while len(samples) < 10_000:
        t = sample_bipolar(lam, side_pairs, RADIO, seed)
        dist = cross_distances(t.sources, t.sources, t.region_side)
        np.fill_diagonal(dist, np.inf)
        samples.extend(dist.min(axis=1).tolist())
        seed += 1
    stat, p = stats.kstest(samples, lambda x: 1 - np.exp(-lam * math.pi * np.asarray(x) ** 2))
    # neighbours within one topology are weakly dependent; the KS test is still well inside 1 %
    assert p > 0.01


def test_orientation_uniform():
    t = sample_bipolar(1e-3, 5000, RADIO, 3)
    off = t.destinations - t.sources
    off -= t.region_side * np.round(off / t.region_side)
    angle = np.mod(np.arctan2(off[:, 1], off[:, 0]), 2 * math.pi) / (2 * math.pi)
    assert stats.kstest(angle, "uniform").pvalue > 0.01


def test_topology_json_round_trip():
    t = sample_bipolar(3e-3, 30, RADIO, 1)
    assert Topology.from_json(t.to_json()) == t


def test_topology_arrays_read_only():
    t = sample_bipolar(3e-3, 30, RADIO, 1)
    with pytest.raises(ValueError):
        t.sources[0, 0] = 1.0


def test_shift_properties():
    t = sample_bipolar(3e-3, 40, RADIO, 2)
    s = shift_to_origin(t, 4)
    np.testing.assert_allclose(s.sources[4], 0.0, atol=1e-9)
    back = shift(s, -t.sources[4])
    np.testing.assert_allclose(torus_distance(back.sources, t.sources, t.region_side), 0, atol=1e-9)
    d0 = cross_distances(t.destinations, t.sources, t.region_side)
    d1 = cross_distances(s.destinations, s.sources, s.region_side)
    np.testing.assert_allclose(d0, d1, atol=1e-9)
    again = shift_to_origin(s, 4)
    np.testing.assert_allclose(again.sources, s.sources, atol=1e-9)
    with pytest.raises(IndexError):
        shift_to_origin(t, len(t))


@given(st.lists(st.floats(0, 100), min_size=2, max_size=2), st.lists(st.floats(0, 100), min_size=2, max_size=2))
def test_torus_distance_symmetric_and_bounded(a, b):
    d = torus_distance(np.array(a), np.array(b), 100.0)
    assert d == pytest.approx(float(torus_distance(np.array(b), np.array(a), 100.0)))
    assert d <= 100.0 / math.sqrt(2) + 1e-9


def _hand_topology():
    src = [[0, 0], [10, 0], [0, 20], [50, 50], [30, 30]]
    dst = [[5, 0], [10, 5], [0, 25], [55, 50], [30, 35]]
    return Topology(lam=1e-3, region_side=1000.0, sources=src, destinations=dst)


def test_random_window_exhaustive_oracle():
    t = _hand_topology()
    w = build_window(t, 0, RandomNearest(3), RADIO)
    raw = sorted((math.dist(t.sources[0], t.destinations[j]), j) for j in range(1, 5))[:3]
    np.testing.assert_allclose(w.observed_distances, RADIO.normalized([r for r, _ in raw]))
    assert list(w.observed_indices) == [j for _, j in raw]
    assert w.observed_count == 3 and w.disk_radius == pytest.approx(raw[-1][0])


def test_deterministic_windows():
    t = _hand_topology()
    assert build_window(t, 0, Deterministic(0.0), RADIO).observed_count == 0
    full = build_window(t, 0, Deterministic(t.region_side * math.sqrt(2)), RADIO)
    assert sorted(full.observed_indices) == [1, 2, 3, 4]
    assert build_window(t, 0, Empty(), RADIO).observed_count == 0


def test_insufficient_points():
    with pytest.raises(InsufficientPointsError):
        build_window(_hand_topology(), 0, RandomNearest(5), RADIO)


def test_window_nesting_and_monotone_radius():
    t = sample_bipolar(3e-3, 300, RADIO, 8)
    for node in range(0, len(t), 37):
        radii = [build_window(t, node, RandomNearest(p), RADIO).disk_radius for p in range(1, 12)]
        assert all(a <= b for a, b in zip(radii, radii[1:]))
        small = set(build_window(t, node, Deterministic(60.0), RADIO).observed_indices)
        large = set(build_window(t, node, Deterministic(120.0), RADIO).observed_indices)
        assert small <= large
        assert node not in large


def test_build_windows_matches_single():
    t = sample_bipolar(3e-3, 100, RADIO, 4)
    ws = build_windows(t, RandomNearest(4), RADIO, block=7)
    for i in (0, 13, len(t) - 1):
        np.testing.assert_array_equal(ws[i].observed_distances,
                                      build_window(t, i, RandomNearest(4), RADIO).observed_distances)


def test_parse_window():
    assert parse_window("det:400") == Deterministic(400.0)
    assert parse_window("rand:3") == RandomNearest(3)
    assert parse_window("none") == Empty()
    with pytest.raises(ValueError):
        parse_window("disk:3")
    with pytest.raises(ValueError):
        Deterministic(-1.0)


def test_window_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        ObservationWindow(0, 1.0, [0.0])

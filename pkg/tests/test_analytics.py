import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsa_aoi import radial
from fsa_aoi.analytics import (NodePolicy, aoi_lower_bound, conditional_success_prob, conditional_time_avg_aoi,
                               expected_inv_mu_given_window, expected_mu_given_window, fixed_frame_derivative,
                               network_aoi_fixed_frame, network_aoi_given_window, optimal_fixed_frame,
                               success_probabilities)
from fsa_aoi.geometry import ObservationWindow, RadioConfig, Topology, sample_bipolar
from fsa_aoi.policy import PolicyAssignment
from fsa_aoi.radial import DivergenceError
from fsa_aoi.simulator import SimConfig, run

from oracles import cartesian_complement, success_product_loop

RADIO = RadioConfig()
LAM = 3e-3
IDEAL = replace(RADIO, noise_power=1e-40)   # rho -> infinity
EMPTY = ObservationWindow(0, 0.0)


def _radio_with_noise_term(a):
    return replace(RADIO, noise_power=RADIO.ptx * a / RADIO.theta_r_alpha)


def test_node_policy_validation():
    assert NodePolicy(0.5, 4).activation == 0.125
    for eta, f in ((1.5, 1), (-0.1, 1), (0.5, 0), (0.5, 2.5)):
        with pytest.raises(ValueError):
            NodePolicy(eta, f)


def test_success_prob_no_interferers():
    radio = _radio_with_noise_term(0.2)
    t = Topology(lam=1e-6, region_side=1000.0, sources=[[0, 0]], destinations=[[30, 0]])
    assert conditional_success_prob(t, 0, [NodePolicy(1, 1)], radio) == pytest.approx(0.818731, abs=1e-6)


def test_success_prob_one_interferer_at_unit_distance():
    d = RADIO.theta_r_alpha ** (1 / RADIO.alpha)
    t = Topology(lam=1e-6, region_side=10_000.0, sources=[[0, 0], [30 + d, 0]],
                 destinations=[[30, 0], [30 + d, 30]])
    p = conditional_success_prob(t, 0, [NodePolicy(1, 1), NodePolicy(1, 1)], RADIO)
    assert p == pytest.approx(math.exp(-RADIO.noise_term) * 0.5, rel=1e-12)


def test_success_prob_against_explicit_product():
    t = sample_bipolar(1e-3, 10, RADIO, 21)
    rng = np.random.default_rng(0)
    policies = [NodePolicy(float(rng.uniform(0, 1)), int(rng.integers(1, 6))) for _ in range(len(t))]
    acts = [p.activation for p in policies]
    vec = success_probabilities(t, policies, RADIO)
    for i in range(len(t)):
        want = success_product_loop(t, i, acts, RADIO)
        assert conditional_success_prob(t, i, policies, RADIO) == pytest.approx(want, rel=1e-12)
        assert vec[i] == pytest.approx(want, rel=1e-12)


def test_success_prob_blocking_consistent():
    t = sample_bipolar(3e-3, 1200, RADIO, 2)
    acts = np.full(len(t), 0.07)
    full = success_probabilities(t, acts, RADIO)
    for i in (0, 511, 512, 1023, len(t) - 1):
        assert full[i] == pytest.approx(conditional_success_prob(t, i, acts, RADIO), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(0.0, 0.9), st.floats(0.01, 0.1), st.floats(1.0, 30.0))
def test_success_prob_monotone(seed, q, dq, move):
    t = sample_bipolar(3e-3, 20, RADIO, seed)
    acts = np.full(len(t), q)
    base = conditional_success_prob(t, 0, acts, RADIO)
    j = 1 if len(t) > 1 else 0
    more = acts.copy()
    more[j] = min(1.0, q + dq)
    assert conditional_success_prob(t, 0, more, RADIO) <= base + 1e-15
    # push interferer j directly away from receiver 0
    y = t.destinations[0]
    x = t.sources[j]
    away = (x - y) / max(np.linalg.norm(x - y), 1e-9)
    if np.linalg.norm(x - y) + move < t.region_side / 2 - 1:
        src = t.sources.copy()
        src[j] = x + move * away
        moved = Topology(t.lam, t.region_side, src, t.destinations)
        assert conditional_success_prob(moved, 0, acts, RADIO) >= base - 1e-15


def test_time_avg_aoi_examples():
    assert conditional_time_avg_aoi(NodePolicy(1, 1), 1.0) == 1.0
    assert conditional_time_avg_aoi(NodePolicy(1, 3), 0.5) == pytest.approx(5.1111111, abs=1e-6)
    with pytest.raises(DivergenceError):
        conditional_time_avg_aoi(NodePolicy(0.0, 3), 0.5)


def test_time_avg_aoi_against_single_link_simulation():
    mu = 0.8
    radio = _radio_with_noise_term(-math.log(mu))
    t = Topology(lam=1e-6, region_side=3000.0, sources=[[0, 0]], destinations=[[30, 0]])
    out = run(t, PolicyAssignment("x", [NodePolicy(0.5, 2)]), radio, SimConfig(horizon_slots=1_000_000, rng_seed=4))
    assert out.network_avg_aoi == pytest.approx(conditional_time_avg_aoi(NodePolicy(0.5, 2), mu), rel=0.01)


def test_lower_bound_values():
    assert aoi_lower_bound(1) == 1.0
    assert aoi_lower_bound(12) == pytest.approx(7 - 1 / 144 + 0.5, rel=1e-15)


@given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.integers(1, 200))
def test_lower_bound_dominance(eta, mu, f):
    assert conditional_time_avg_aoi(NodePolicy(eta, f), mu) >= aoi_lower_bound(f) - 1e-9


@given(st.integers(1, 100))
def test_aoi_minimised_at_unit_success(f):
    xs = np.linspace(0.01, 1.0, 200)
    vals = [conditional_time_avg_aoi(NodePolicy(1.0, f), x) for x in xs]
    assert min(vals) == pytest.approx(vals[-1])


def test_expected_mu_limits():
    whole = ObservationWindow(0, 1e7)
    assert expected_mu_given_window(whole, NodePolicy(1e-9, 1), LAM, RADIO) == pytest.approx(
        math.exp(-RADIO.noise_term), rel=1e-8)
    c = RADIO.big_c(LAM)
    for f in (1, 3, 10):
        got = expected_mu_given_window(EMPTY, NodePolicy(1.0, f), LAM, RADIO)
        assert got == pytest.approx(math.exp(-RADIO.noise_term - c / f), rel=1e-12)


def test_expected_inv_mu_limits():
    c, d = RADIO.big_c(LAM), RADIO.delta
    for eta, f in ((1.0, 2), (0.5, 3), (0.3, 1)):
        q = eta / f
        got = expected_inv_mu_given_window(EMPTY, NodePolicy(eta, f), LAM, RADIO)
        assert got == pytest.approx(math.exp(RADIO.noise_term + c * q * (1 - q) ** (d - 1)), rel=1e-12)
    assert expected_inv_mu_given_window(EMPTY, NodePolicy(1, 1), 0.0, RADIO) == pytest.approx(math.exp(RADIO.noise_term))
    with pytest.raises(DivergenceError):
        expected_inv_mu_given_window(EMPTY, NodePolicy(1, 1), LAM, RADIO)


@pytest.mark.parametrize("alpha", [4.0, 3.8])
def test_disk_window_moments_against_cartesian_oracle(alpha):
    radio = replace(RADIO, alpha=alpha)
    window = ObservationWindow(0, 150.0, radio.normalized([40.0, 90.0, 120.0]))
    policy = NodePolicy(1.0, 4)
    q = policy.activation
    near = float(np.sum(np.log1p(-q / (1 + window.observed_distances))))
    out_mu = cartesian_complement(lambda u: q / (1 + u), 150.0, LAM, radio, leading=q)
    out_inv = cartesian_complement(lambda u: q / (1 - q + u), 150.0, LAM, radio, leading=q)
    assert expected_mu_given_window(window, policy, LAM, radio) == pytest.approx(
        math.exp(-radio.noise_term + near - out_mu), rel=1e-6)
    assert expected_inv_mu_given_window(window, policy, LAM, radio) == pytest.approx(
        math.exp(radio.noise_term - near + out_inv), rel=1e-6)


def test_network_aoi_given_window_ideal():
    assert network_aoi_given_window(EMPTY, NodePolicy(1, 1), 0.0, IDEAL) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("f", [2, 5, 19, 60])
def test_empty_window_matches_fixed_frame(f):
    assert network_aoi_given_window(EMPTY, NodePolicy(1, f), LAM, RADIO) == pytest.approx(
        network_aoi_fixed_frame(f, LAM, RADIO), rel=1e-12)


def test_network_aoi_nested_monte_carlo():
    # fixed three-neighbour window, outer PPP beyond it redrawn, inner fading analytic
    rng = np.random.default_rng(3)
    window = ObservationWindow(0, 60.0, RADIO.normalized([25.0, 41.0, 57.0]))
    policy = NodePolicy(1.0, 6)
    q = policy.activation
    outer = 3000.0
    base = math.exp(-RADIO.noise_term) * np.prod(1 - q / (1 + window.observed_distances))
    samples = []
    for _ in range(500):
        n = rng.poisson(LAM * math.pi * (outer ** 2 - 60.0 ** 2))
        s = np.sqrt(rng.uniform(60.0 ** 2, outer ** 2, n))
        mu = base * math.exp(np.log1p(-q / (1 + RADIO.normalized(s))).sum())
        samples.append(conditional_time_avg_aoi(policy, mu))
    assert network_aoi_given_window(window, policy, LAM, RADIO) == pytest.approx(np.mean(samples), rel=0.03)


def test_fixed_frame_special_cases():
    assert network_aoi_fixed_frame(1, 0.0, IDEAL) == pytest.approx(1.0, abs=1e-12)
    # every node always on: E[1/mu] diverges under interference
    assert network_aoi_fixed_frame(1, LAM, RADIO) == math.inf
    with pytest.raises(ValueError):
        network_aoi_fixed_frame(0.5, LAM, RADIO)


def test_fixed_frame_reference_values():
    assert network_aoi_fixed_frame(2, LAM, RADIO) == pytest.approx(35051.8, rel=1e-4)
    assert network_aoi_fixed_frame(4, LAM, RADIO) == pytest.approx(224.0, rel=1e-3)
    assert network_aoi_fixed_frame(8, LAM, RADIO) == pytest.approx(48.73, rel=1e-3)


def test_fixed_frame_asymptote():
    f = 1e4
    assert network_aoi_fixed_frame(f, LAM, RADIO) / f == pytest.approx(7 / 12, rel=0.01)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(2, 40))
def test_frame_slotted_beats_thinned_updates(eta, f):
    # same per-slot activation: (eta, F) against (1, F / eta) in the continuous relaxation
    q = eta / f
    m = math.exp(-RADIO.noise_term - radial.interference_integral(q, 0.0, LAM, RADIO))
    inv = math.exp(RADIO.noise_term + radial.inverse_integral(q, 0.0, LAM, RADIO))
    g = f / eta
    thinned = (f * f - 1) / (12 * f) * eta * m + f / eta * inv + (1 - f) / 2
    framed = (g * g - 1) / (12 * g) * m + g * inv + (1 - g) / 2
    assert framed < thinned


def test_derivative_matches_finite_difference():
    for f in (1.5, 4.0, 18.5, 100.0):
        h = 1e-6 * f
        fd = (network_aoi_fixed_frame(f + h, LAM, RADIO) - network_aoi_fixed_frame(f - h, LAM, RADIO)) / (2 * h)
        assert fixed_frame_derivative(f, LAM, RADIO) == pytest.approx(fd, rel=1e-5)


def test_optimal_frame_default():
    opt = optimal_fixed_frame(LAM, RADIO)
    assert opt.residual <= 1e-8
    scan = [network_aoi_fixed_frame(f, LAM, RADIO) for f in range(1, 201)]
    assert opt.frame_size == int(np.argmin(scan)) + 1 == 19
    assert opt.continuous_root == pytest.approx(18.49, abs=0.01)
    assert opt.aoi == pytest.approx(32.38, abs=0.01)


def test_optimal_frame_interference_free():
    assert optimal_fixed_frame(0.0, IDEAL).frame_size == 1


@pytest.mark.parametrize("lam", [1e-4, 1e-3, 5e-3])
def test_optimal_frame_scan_other_densities(lam):
    opt = optimal_fixed_frame(lam, RADIO)
    scan = [network_aoi_fixed_frame(f, lam, RADIO) for f in range(1, 201)]
    assert opt.frame_size == int(np.argmin(scan)) + 1

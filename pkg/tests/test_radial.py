import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsa_aoi import radial
from fsa_aoi.geometry import RadioConfig
from fsa_aoi.radial import DivergenceError

from oracles import cartesian_complement

RADIO = RadioConfig()
LAM = 3e-3


@pytest.mark.parametrize("radius", [0.0, 10.0, 100.0, 400.0])
@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_closed_form_matches_quadrature(radius, q):
    for fn in (radial.interference_integral, radial.inverse_integral):
        closed = fn(q, radius, LAM, RADIO)
        quad = fn(q, radius, LAM, RADIO, method="quad")
        assert closed == pytest.approx(quad, rel=1e-8)
    closed = radial.phi_integral(q, radius, LAM, RADIO)
    assert closed == pytest.approx(radial.phi_integral(q, radius, LAM, RADIO, method="quad"), rel=1e-8)


def test_empty_window_constants():
    c = RADIO.big_c(LAM)
    assert radial.interference_integral(1.0, 0.0, LAM, RADIO) == pytest.approx(c, rel=1e-12)
    q, d = 0.2, RADIO.delta
    assert radial.inverse_integral(q, 0.0, LAM, RADIO) == pytest.approx(c * q * (1 - q) ** (d - 1), rel=1e-12)


def test_divergences():
    with pytest.raises(DivergenceError):
        radial.inverse_integral(1.0, 0.0, LAM, RADIO)
    with pytest.raises(DivergenceError):
        radial.inverse_integral(1.0, 0.0, LAM, RADIO, method="quad")
    assert radial.phi_integral(1.0, 0.0, LAM, RADIO) == math.inf
    assert radial.existence_integral(0.0, LAM, RADIO) == math.inf
    assert radial.existence_integral(0.0, 0.0, RADIO) == 0.0
    # finite once a window removes the origin
    assert math.isfinite(radial.inverse_integral(1.0, 50.0, LAM, RADIO))


def test_existence_integral_three_ways():
    closed = radial.existence_integral(100.0, LAM, RADIO)
    assert closed == pytest.approx(radial.existence_integral(100.0, LAM, RADIO, method="quad"), rel=1e-9)
    assert closed == pytest.approx(radial.existence_integral_physical(100.0, LAM, RADIO), rel=1e-12)


@pytest.mark.parametrize("alpha", [4.0, 3.8])
def test_cartesian_oracle(alpha):
    radio = replace(RADIO, alpha=alpha)
    r = 100.0
    q = 0.25
    got = radial.interference_integral(q, r, LAM, radio)
    want = cartesian_complement(lambda u: q / (1 + u), r, LAM, radio, leading=q)
    assert got == pytest.approx(want, rel=1e-6)
    got = radial.inverse_integral(q, r, LAM, radio)
    want = cartesian_complement(lambda u: q / (1 - q + u), r, LAM, radio, leading=q)
    assert got == pytest.approx(want, rel=1e-6)
    eta = 0.5
    got = radial.phi_integral(eta, r, LAM, radio)
    want = cartesian_complement(lambda u: (1 + u) / (1 - eta + u) ** 2, r, LAM, radio)
    assert got == pytest.approx(want, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 500.0), st.floats(1.0, 100.0))
def test_tails_monotone(q, r, dr):
    a = radial.inverse_integral(q, r, LAM, RADIO)
    b = radial.inverse_integral(q, r + dr, LAM, RADIO)
    assert b <= a * (1 + 1e-12)
    assert radial.inverse_integral(min(q + 0.005, 0.999), r, LAM, RADIO) >= a
    assert radial.interference_integral(q, r + dr, LAM, RADIO) <= radial.interference_integral(q, r, LAM, RADIO)


def test_array_evaluation():
    etas = np.array([0.1, 0.4, 0.7])
    vec = radial.phi_integral(etas, 120.0, LAM, RADIO)
    assert vec == pytest.approx([radial.phi_integral(float(e), 120.0, LAM, RADIO) for e in etas], rel=1e-14)


def test_disk_rule_moments():
    nodes, w = radial.disk_rule(250.0, RADIO)
    assert w.sum() == pytest.approx(math.pi * 250.0 ** 2, rel=1e-12)
    assert np.dot(w, nodes ** 2) == pytest.approx(math.pi * 250.0 ** 4 / 2, rel=1e-12)
    assert radial.disk_rule(0.0, RADIO)[0].size == 0

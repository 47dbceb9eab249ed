"""Integrals of rotation-invariant kernels over a disk complement.

All kernels are functions of the normalised distance
``u(x) = |x|**alpha / (theta r**alpha)``.  In that variable the Poisson
intensity measure becomes ``lam dx = K u**(delta - 1) du`` with
``K = lam pi r**2 theta**delta delta``, and the tails reduce to incomplete
beta functions.  Each integral is available in closed form (``method="closed"``)
and by direct radial quadrature in the physical radius (``method="quad"``);
the two routes are cross-checked in the tests.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .geometry import RadioConfig
from .numerics import QuadratureSpec, integrate_radial, gauss_legendre_panels


class DivergenceError(ArithmeticError):
    """Raised when a deconditioned expectation is infinite."""


def _tail_inverse_linear(a, b, delta):
    """int_a^inf u**(delta-1) / (b + u) du for b >= 0 (a > 0 when b == 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = special.beta(delta, 1 - delta) * b ** (delta - 1) * special.betaincc(delta, 1 - delta, a / (a + b))
        zero = np.where(a > 0, a ** (delta - 1) / (1 - delta), np.inf)
    return np.where(b > 0, pos, zero)


def _tail_inverse_square(a, b, delta):
    """int_a^inf u**(delta-1) / (b + u)**2 du for b >= 0 (a > 0 when b == 0)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = special.beta(delta, 2 - delta) * b ** (delta - 2) * special.betaincc(delta, 2 - delta, a / (a + b))
        zero = np.where(a > 0, a ** (delta - 2) / (2 - delta), np.inf)
    return np.where(b > 0, pos, zero)


def _quad_complement(kernel, radius: float, lam: float, radio: RadioConfig,
                     spec: QuadratureSpec | None = None) -> float:
    """lam * int_{|x| > radius} kernel(u(x)) dx in polar form."""
    if lam == 0:
        return 0.0
    tra = radio.theta_r_alpha
    alpha = radio.alpha

    def integrand(s):
        return lam * 2.0 * math.pi * s * kernel(s ** alpha / tra)

    spec = spec or QuadratureSpec(decay_exponent=alpha - 1, scale=radio.length_scale,
                                  absolute_tolerance=1e-12, relative_tolerance=1e-10)
    return integrate_radial(integrand, radius, spec)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def interference_integral(q, radius, lam, radio: RadioConfig, method="closed"):
    """lam int_{|x|>R} q / (1 + u) dx, the log-attenuation of E[mu | W]."""
    if method == "quad":
        return _quad_complement(lambda u: q / (1.0 + u), radius, lam, radio)
    a = radio.normalized(radius)
    return _scalar(radio.area_factor(lam) * np.asarray(q) * _tail_inverse_linear(a, 1.0, radio.delta))


def inverse_integral(q, radius, lam, radio: RadioConfig, method="closed"):
    """lam int_{|x|>R} q / (1 - q + u) dx, the log-amplification of E[1/mu | W]."""
    if method == "quad":
        if q >= 1 and radius == 0 and lam > 0:
            raise DivergenceError("E[1/mu] diverges for always-on interferers with no window")
        return _quad_complement(lambda u: q / (1.0 - q + u), radius, lam, radio)
    a = radio.normalized(radius)
    q = np.asarray(q, dtype=float)
    if lam == 0:
        return _scalar(np.zeros_like(q * a))
    vals = radio.area_factor(lam) * q * _tail_inverse_linear(a, 1.0 - q, radio.delta)
    if np.any(~np.isfinite(vals)):
        raise DivergenceError("E[1/mu] diverges for always-on interferers with no window")
    return _scalar(vals)


def phi_integral(eta, radius, lam, radio: RadioConfig, method="closed"):
    """lam int_{|x|>R} (1 + u) / (1 - eta + u)**2 dx; infinite at eta=1, R=0."""
    if method == "quad":
        if lam == 0:
            return 0.0
        if eta >= 1 and radius == 0:
            return math.inf
        return _quad_complement(lambda u: (1.0 + u) / (1.0 - eta + u) ** 2, radius, lam, radio)
    a = radio.normalized(radius)
    eta = np.asarray(eta, dtype=float)
    if lam == 0:
        return _scalar(np.zeros_like(eta * a))
    b = 1.0 - eta
    d = radio.delta
    vals = radio.area_factor(lam) * (_tail_inverse_linear(a, b, d) + eta * _tail_inverse_square(a, b, d))
    return _scalar(vals)


def existence_integral(radius, lam, radio: RadioConfig, method="closed"):
    """lam int_{|x|>R} (1/u + 1/u**2) dx; infinite for R = 0 and lam > 0."""
    if lam == 0:
        return 0.0
    if radius == 0:
        return math.inf
    if method == "quad":
        return _quad_complement(lambda u: 1.0 / u + 1.0 / u ** 2, radius, lam, radio)
    a = float(radio.normalized(radius))
    d = radio.delta
    return radio.area_factor(lam) * (a ** (d - 1) / (1 - d) + a ** (d - 2) / (2 - d))


def existence_integral_physical(radius: float, lam: float, radio: RadioConfig) -> float:
    """Same integral written directly in the radius R."""
    if lam == 0:
        return 0.0
    if radius == 0:
        return math.inf
    a, tra = radio.alpha, radio.theta_r_alpha
    return 2 * math.pi * lam * (tra * radius ** (2 - a) / (a - 2) + tra ** 2 * radius ** (2 - 2 * a) / (2 * a - 2))


def disk_rule(radius: float, radio: RadioConfig, panels: int = 48,
              inner_radius: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights for ``int_{r0<|x|<R} f(|x|) dx``.

    Returns radial nodes and area weights (``2 pi s ds`` folded in).
    Panels are graded geometrically towards the inner edge ``r0``, or towards
    the origin on the scale :attr:`RadioConfig.length_scale` when ``r0 = 0``.
    """
    if radius <= inner_radius or radius <= 0:
        return np.zeros(0), np.zeros(0)
    if inner_radius > 0:
        edges = np.geomspace(inner_radius, radius, panels + 1)
    else:
        inner = min(radius, 1e-3 * radio.length_scale)
        edges = np.concatenate([[0.0], np.geomspace(inner, radius, panels)])
    nodes, weights = gauss_legendre_panels(edges)
    return nodes, weights * 2.0 * math.pi * nodes

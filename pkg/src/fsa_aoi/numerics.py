"""Numerical kernels shared by the analytic and policy code.

Radial integrals over ``[a, inf)`` are evaluated panel by panel on a doubling
grid; every panel uses adaptive Gauss-Kronrod subdivision and the running sum
stops once an analytic bound on the remaining power-law tail is below the
requested tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when a radial integral cannot be certified to tolerance."""


class BracketError(ValueError):
    """Raised when a root bracket does not straddle a sign change."""


class RootFindingError(RuntimeError):
    """Raised when bisection exhausts its iteration budget."""


class InversionError(RuntimeError):
    """Raised when a characteristic-function inversion does not converge."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate:.6g}, error={error:.3g})")
        self.estimate = estimate
        self.error = error


def gamma_fn(x: float) -> float:
    if x <= 0:
        raise ValueError(f"gamma_fn is only defined here for x > 0, got {x}")
    return math.gamma(x)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and truncation rule for :func:`integrate_radial`.

    ``decay_exponent`` is the exponent ``p`` of the envelope ``|f(u)| <= c u**-p``
    the integrand is known to respect for large ``u``; the panel sequence stops
    at the first breakpoint ``U`` where ``|f(U)| * U / (p - 1)`` (the integral of
    that envelope over ``[U, inf)``) drops below the tolerance.  ``scale`` sets
    the width of the first panel and should match the natural length of the
    integrand.
    """

    absolute_tolerance: float = 1e-10
    relative_tolerance: float = 1e-8
    decay_exponent: float = 2.8
    scale: float = 1.0
    max_panels: int = 400

    def __post_init__(self):
        if self.absolute_tolerance <= 0 or self.relative_tolerance <= 0:
            raise ValueError("quadrature tolerances must be strictly positive")
        if self.decay_exponent <= 1:
            raise ValueError("decay_exponent must exceed 1 for a convergent tail")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def tail_bound(self, f_at_cut: float, f_before_cut: float, cut: float, before: float) -> float:
        # the observed local decay may be slower than the asymptotic one
        p = self.decay_exponent
        if f_at_cut == 0.0:
            return 0.0 if f_before_cut == 0.0 else abs(f_at_cut)
        if f_before_cut != 0.0 and before > 0:
            observed = math.log(abs(f_before_cut) / abs(f_at_cut)) / math.log(cut / before)
            p = min(p, observed)
        if p <= 1.0:
            return math.inf
        return abs(f_at_cut) * cut / (p - 1.0)


def integrate_radial(f: Callable[[float], float], a: float = 0.0,
                     spec: QuadratureSpec | None = None) -> float:
    """Integrate ``f`` over ``[a, inf)``.

    >>> round(integrate_radial(lambda u: u ** -2.8, 1.0), 9)
    0.555555556
    """
    spec = spec or QuadratureSpec()
    if a < 0:
        raise ValueError("lower limit must be non-negative")
    lo = float(a)
    hi = max(2.0 * lo, lo + spec.scale)
    total = 0.0
    f_lo = f(lo) if lo > 0 else 0.0
    for _ in range(spec.max_panels):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, err = integrate.quad(f, lo, hi, epsabs=spec.absolute_tolerance / 8,
                                        epsrel=spec.relative_tolerance / 8, limit=200)
        if not math.isfinite(value):
            raise QuadratureError(f"non-finite panel value on [{lo}, {hi}]")
        if err > max(spec.absolute_tolerance, spec.relative_tolerance * abs(value)):
            raise QuadratureError(f"panel [{lo:.4g}, {hi:.4g}] error estimate {err:.3g} above tolerance")
        total += value
        f_hi = f(hi)
        bound = spec.tail_bound(f_hi, f_lo, hi, lo)
        if bound <= max(spec.absolute_tolerance, spec.relative_tolerance * abs(total)):
            return total
        lo, hi, f_lo = hi, 2.0 * hi, f_hi
        if not math.isfinite(hi):
            break
    raise QuadratureError(f"tail bound not certified after {spec.max_panels} panels (cut at {lo:.3g})")


@dataclass(frozen=True)
class RootSpec:
    bracket_low: float
    bracket_high: float
    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not self.bracket_low < self.bracket_high:
            raise ValueError("bracket_low must be below bracket_high")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def _sign(v: float) -> int:
    return int(v > 0) - int(v < 0)


def find_root(g: Callable[[float], float], spec: RootSpec) -> float:
    """Bisection on a sign-changing bracket, finished with one secant step.

    The secant point is taken inside the final bracket, so the returned root
    always lies within ``spec.tolerance`` of a sign change of ``g``.
    """
    a, b = spec.bracket_low, spec.bracket_high
    fa, fb = g(a), g(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if _sign(fa) == _sign(fb):
        raise BracketError(f"g({a})={fa:.3g} and g({b})={fb:.3g} share a sign")
    for _ in range(spec.max_iterations):
        if b - a <= spec.tolerance:
            break
        m = 0.5 * (a + b)
        fm = g(m)
        if fm == 0:
            return m
        if _sign(fm) == _sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    else:
        raise RootFindingError(f"bracket still {b - a:.3g} wide after {spec.max_iterations} iterations")
    if math.isfinite(fa) and math.isfinite(fb) and fb != fa:
        x = a - fa * (b - a) / (fb - fa)
        return min(max(x, a), b)
    return 0.5 * (a + b)


def bisect_many(g: Callable[[np.ndarray], np.ndarray], low: np.ndarray, high: np.ndarray,
                tolerance: float = 1e-10, max_iterations: int = 200) -> np.ndarray:
    """Vectorised bisection for a batch of independent brackets.

    ``g`` maps an array of abscissae to an array of values, element ``k`` of
    which only depends on element ``k`` of its input.
    """
    a = np.array(low, dtype=float)
    b = np.array(high, dtype=float)
    fa, fb = g(a), g(b)
    if np.any(np.sign(fa) * np.sign(fb) > 0):
        raise BracketError("some brackets do not straddle a sign change")
    for _ in range(max_iterations):
        if np.all(b - a <= tolerance):
            break
        m = 0.5 * (a + b)
        fm = g(m)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, m, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, m)
        fb = np.where(left, fb, fm)
    else:
        raise RootFindingError("batched bisection did not converge")
    with np.errstate(invalid="ignore", divide="ignore"):
        x = a - fa * (b - a) / (fb - fa)
    ok = np.isfinite(fa) & np.isfinite(fb) & (fb != fa)
    return np.where(ok, np.clip(x, a, b), 0.5 * (a + b))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def gauss_legendre_panels(edges: np.ndarray, order: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule on ``edges``."""
    if order == 32:
        x, w = _GL_NODES, _GL_WEIGHTS
    else:
        x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def _euler(partial: list[float], terms: int) -> float:
    tail = np.array(partial[-(terms + 1):])
    weights = np.array([math.comb(terms, j) for j in range(tail.size)]) / 2.0 ** (tail.size - 1)
    return float(np.dot(weights, tail))


def gil_pelaez_cdf(cf: Callable[[np.ndarray], np.ndarray], x: float, scale: float, *,
                   envelope_tol: float = 1e-8, max_panels: int = 4000,
                   euler_terms: int = 11, error_tol: float = 1e-5,
                   atom: float = 0.0, settle_after: int = 200, settle_every: int = 50,
                   settle_tol: float = 1e-2) -> tuple[float, float]:
    """``P(X <= x)`` for a real random variable with characteristic function ``cf``.

    Evaluates ``1/2 - (1/pi) int_0^inf Im[exp(-i w x) cf(w)] / w dw`` over panels
    of width ``pi / max(|x|, scale)``.  Summation stops once ``|cf(w)| / w``
    falls under ``envelope_tol``; if the envelope never gets there the partial
    sums are Euler-averaged, checked every ``settle_every`` panels after
    ``settle_after`` and accepted once two checks agree to
    ``settle_tol * error_tol``.  Returns ``(probability, error_estimate)``.

    ``atom`` is a known point mass at zero.  It is removed from ``cf`` before
    inversion (its constant modulus would otherwise stall the envelope test)
    and added back in closed form.
    """
    base = 0.5
    if atom:
        raw = cf
        cf = lambda w: raw(w) - atom
        base = 0.5 * (1 - atom) + (atom if x >= 0 else 0.0)
    width = math.pi / max(abs(x), scale)
    partial = []
    total = 0.0
    quiet = 0
    last = None
    for k in range(max_panels):
        if k == 0:
            # geometric grading resolves integrable singularities at w = 0
            # (heavy-tailed X has Im[...] / w ~ w**(p - 1) there)
            edges = np.concatenate([[0.0], width * np.geomspace(1e-14, 1.0, 29)])
        else:
            edges = np.array([k * width, (k + 1) * width])
        nodes, weights = gauss_legendre_panels(edges)
        vals = cf(nodes)
        integrand = np.imag(np.exp(-1j * nodes * x) * vals) / nodes
        total += float(np.dot(weights, integrand))
        partial.append(total)
        end = (k + 1) * width
        env = float(np.max(np.abs(vals))) / end
        quiet = quiet + 1 if env < envelope_tol else 0
        if quiet >= 2:
            return base - total / math.pi, env * width / math.pi
        # slowly decaying cf: stop once the Euler-averaged sum has settled
        if k >= settle_after and k % settle_every == 0:
            estimate = _euler(partial, euler_terms)
            if last is not None and abs(estimate - last) / math.pi < settle_tol * error_tol:
                return base - estimate / math.pi, abs(estimate - last) / math.pi
            last = estimate
    # envelope did not vanish: binomial (Euler) average of the last partial sums
    accelerated = _euler(partial, euler_terms)
    error = abs(accelerated - _euler(partial[:-1], euler_terms)) / math.pi
    value = base - accelerated / math.pi
    if error > error_tol:
        raise InversionError("oscillatory integral did not settle", value, error)
    return value, error

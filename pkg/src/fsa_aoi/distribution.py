"""Distribution of the adaptive update rate and of the resulting frame size.

For a deterministic disk window of radius ``R`` the root ``eta*`` exceeds
``kappa`` exactly when ``phi(kappa) > 0``.  Multiplying through by ``kappa``,

    P(eta* > kappa) = P(U(kappa) < 1 - V(kappa)),

where ``U`` sums ``kappa / (D + 1 - kappa)`` over the normalised distances
``D`` of the window points and ``V`` is the deterministic tail outside the
disk.  ``U`` is a compound Poisson variable, so its law follows from its
characteristic function through the Gil-Pelaez formula.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import radial
from .analytics import network_aoi_fixed_frame
from .geometry import ObservationWindow, RadioConfig
from .numerics import gil_pelaez_cdf

log = logging.getLogger(__name__)

GAIN_CLIP = 10.0


class ConsistencyError(ValueError):
    """A derived probability fell below zero by more than the inversion tolerance."""


def _check_kappa(kappa: float):
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")


def _gain(kappa: float, u):
    return kappa / (np.asarray(u, dtype=float) + (1.0 - kappa))


def u_statistic(kappa: float, window, radio: RadioConfig | None = None) -> float:
    """Sum of ``kappa / (D + 1 - kappa)`` over the observed points.

    ``window`` is an :class:`ObservationWindow` or an array of normalised
    distances.  ``radio`` is unused and kept for call-site symmetry.
    """
    _check_kappa(kappa)
    d = window.observed_distances if isinstance(window, ObservationWindow) else np.asarray(window, dtype=float)
    return float(np.sum(_gain(kappa, d)))


def v_term(kappa: float, radius: float, lam: float, radio: RadioConfig, method: str = "closed") -> float:
    """``kappa`` times the outer integral of the stationarity function."""
    _check_kappa(kappa)
    return float(kappa * radial.phi_integral(kappa, radius, lam, radio, method))


@dataclass(frozen=True)
class _DiskLaw:
    """Quadrature of the intensity measure of the window gains."""
    gains: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, kappa: float, radius: float, lam: float, radio: RadioConfig,
              inner_radius: float = 0.0) -> "_DiskLaw":
        nodes, area = radial.disk_rule(radius, radio, inner_radius=inner_radius)
        return cls(_gain(kappa, radio.normalized(nodes)), lam * area)

    def log_laplace(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=complex)
        return -(self.weights * -np.expm1(-np.multiply.outer(s, self.gains))).sum(axis=-1)

    def scale(self) -> float:
        return float(np.dot(self.weights, np.minimum(self.gains, GAIN_CLIP)))


def laplace_u(s, radius: float, lam: float, radio: RadioConfig, kappa: float):
    """``E[exp(-s U)]``; ``s`` may be complex and array-valued."""
    _check_kappa(kappa)
    if lam == 0 or radius == 0:
        return np.ones_like(np.asarray(s, dtype=complex))[()]
    law = _DiskLaw.build(kappa, radius, lam, radio)
    return np.exp(law.log_laplace(s))[()]


def _u_cdf_below(level: float, kappa: float, radius: float, lam: float, radio: RadioConfig) -> float:
    """P(U(kappa) < level) for level > 0.

    A single point with gain at least ``level`` already decides the event, so
    the disk splits into an inner part that must be empty and an annulus whose
    gains stay below ``level``.  Removing the inner part also removes the
    singular gain density that makes the characteristic function decay slowly.
    """
    if lam == 0 or radius == 0:
        return 1.0
    u_cut = kappa / level - (1.0 - kappa)
    inner = (u_cut * radio.theta_r_alpha) ** (1.0 / radio.alpha) if u_cut > 0 else 0.0
    if inner >= radius:
        return math.exp(-lam * math.pi * radius * radius)
    empty_inner = math.exp(-lam * math.pi * inner * inner)
    law = _DiskLaw.build(kappa, radius, lam, radio, inner_radius=inner)
    cf = lambda w: np.exp(law.log_laplace(-1j * np.asarray(w)))
    # an empty annulus gives U = 0 with probability exp(-lam |annulus|)
    atom = math.exp(-float(law.weights.sum()))
    value, err = gil_pelaez_cdf(cf, level, max(1.0, law.scale()), atom=atom)
    return min(1.0, max(0.0, empty_inner * value))


def ccdf_eta(kappa: float, radius: float, lam: float, radio: RadioConfig) -> float:
    """P(eta* > kappa) for kappa < 1 and the atom P(eta* = 1) at kappa = 1."""
    _check_kappa(kappa)
    if lam == 0:
        return 1.0
    level = 1.0 - v_term(kappa, radius, lam, radio)
    if not level > 0:
        return 0.0
    return _u_cdf_below(level, kappa, radius, lam, radio)


@dataclass
class RateDistribution:
    radius: float
    lam: float
    radio: RadioConfig = field(repr=False)
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def ccdf(self, kappa: float) -> float:
        return ccdf_eta(kappa, self.radius, self.lam, self.radio)

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["kappa", "ccdf"])
            for k, v in zip(self.grid, self.values):
                w.writerow([repr(float(k)), repr(float(v))])


def rate_distribution(radius: float, lam: float, radio: RadioConfig, grid=None) -> RateDistribution:
    grid = np.linspace(0.01, 1.0, 100) if grid is None else np.asarray(grid, dtype=float)
    values = np.array([ccdf_eta(k, radius, lam, radio) for k in grid])
    return RateDistribution(radius, lam, radio, grid, values)


@dataclass
class FramesizePmf:
    probabilities: np.ndarray
    tail: float

    @property
    def l_max(self) -> int:
        return int(self.probabilities.size)

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.l_max + 1)

    def total(self) -> float:
        return float(self.probabilities.sum() + self.tail)

    def to_csv(self, path, comments: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["l", "p_l"])
            for l, p in zip(self.support, self.probabilities):
                w.writerow([int(l), repr(float(p))])


def framesize_pmf(radius: float, lam: float, radio: RadioConfig, l_max: int = 50,
                  tolerance: float = 1e-4) -> FramesizePmf:
    """P(ceil(1 / eta*) = l) for l = 1..l_max from successive CCDF values.

    Small negative differences (inversion noise) are clamped to zero; any
    below ``-tolerance`` raise :class:`ConsistencyError`.
    """
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    at_least = np.array([ccdf_eta(1.0 / l, radius, lam, radio) for l in range(1, l_max + 1)])
    p = np.diff(at_least, prepend=0.0)
    if np.any(p < -tolerance):
        bad = int(np.argmin(p)) + 1
        raise ConsistencyError(f"P(F = {bad}) = {p[bad - 1]:.3g} is negative beyond tolerance {tolerance:g}")
    p = np.clip(p, 0.0, None)
    tail = max(0.0, 1.0 - float(p.sum()))
    return FramesizePmf(p, tail)


def mixture_network_aoi(pmf: FramesizePmf, lam: float, radio: RadioConfig,
                        tolerance: float = 1e-6) -> float:
    """Average of the per-class fixed-frame AoI weighted by the frame-size pmf.

    Classes with mass below ``tolerance`` are dropped and the remainder
    renormalised, which keeps a negligible ``l = 1`` class (infinite AoI under
    interference) from dominating.
    """
    keep = pmf.probabilities > tolerance
    if not keep.any():
        raise ValueError("pmf has no class above the tolerance")
    weights = pmf.probabilities[keep] / pmf.probabilities[keep].sum()
    classes = [network_aoi_fixed_frame(int(l), lam, radio) for l in pmf.support[keep]]
    return float(np.dot(weights, classes))

"""Closed-form success probabilities and AoI expressions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import radial
from .geometry import ObservationWindow, RadioConfig, Topology, cross_distances
from .numerics import RootSpec, find_root
from .radial import DivergenceError


@dataclass(frozen=True)
class NodePolicy:
    eta: float
    frame_size: int

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"update rate must lie in [0, 1], got {self.eta}")
        if int(self.frame_size) != self.frame_size or self.frame_size < 1:
            raise ValueError(f"frame size must be a positive integer, got {self.frame_size}")
        object.__setattr__(self, "frame_size", int(self.frame_size))

    @property
    def activation(self) -> float:
        """Per-slot transmit probability."""
        return self.eta / self.frame_size


def _activation(policies) -> np.ndarray:
    if isinstance(policies, np.ndarray):
        return np.asarray(policies, dtype=float)
    return np.array([p.activation for p in policies], dtype=float)


def success_probabilities(topology: Topology, policies, radio: RadioConfig) -> np.ndarray:
    """Conditional success probability of every link given the topology.

    ``policies`` is a sequence of :class:`NodePolicy` or an array of per-slot
    activation probabilities.
    """
    q = _activation(policies)
    n = len(topology)
    if q.shape != (n,):
        raise ValueError("need exactly one policy per node")
    out = np.empty(n)
    block = 512
    for start in range(0, n, block):
        # rows: receivers y_i, columns: interfering sources X_j
        dist = cross_distances(topology.destinations[start:start + block], topology.sources,
                               topology.region_side)
        with np.errstate(divide="ignore"):
            factor = np.log1p(-q[None, :] / (1.0 + radio.normalized(dist)))
        rows = np.arange(start, min(start + block, n))
        factor[rows - start, rows] = 0.0
        out[start:start + block] = np.exp(-radio.noise_term + factor.sum(axis=1))
    return out


def conditional_success_prob(topology: Topology, node: int, policies, radio: RadioConfig) -> float:
    if not 0 <= node < len(topology):
        raise IndexError(node)
    q = _activation(policies)
    if q.shape != (len(topology),):
        raise ValueError("need exactly one policy per node")
    dist = cross_distances(topology.destinations[node:node + 1], topology.sources, topology.region_side)[0]
    terms = np.log1p(-q / (1.0 + radio.normalized(dist)))
    terms[node] = 0.0
    return float(math.exp(-radio.noise_term + terms.sum()))


def conditional_time_avg_aoi(policy: NodePolicy, mu: float) -> float:
    """Time-average AoI of a link with per-attempt success probability ``mu``."""
    x = policy.eta * mu
    if x <= 0:
        raise DivergenceError("AoI is infinite when the link never delivers")
    f = policy.frame_size
    return (f * f - 1) / (12 * f) * x + f / x + (1 - f) / 2


def aoi_lower_bound(frame_size: float) -> float:
    if frame_size < 1:
        raise ValueError("frame size must be at least 1")
    f = frame_size
    return 7 * f / 12 - 1 / (12 * f) + 0.5


def _window_log_product(window: ObservationWindow, q: float) -> float:
    return float(np.sum(np.log1p(-q / (1.0 + window.observed_distances))))


def expected_mu_given_window(window: ObservationWindow, policy: NodePolicy, lam: float,
                             radio: RadioConfig, method: str = "closed") -> float:
    """E[mu | W] with every node running ``policy`` (mass-transport form)."""
    q = policy.activation
    outside = radial.interference_integral(q, window.disk_radius, lam, radio, method)
    return math.exp(-radio.noise_term + _window_log_product(window, q) - outside)


def expected_inv_mu_given_window(window: ObservationWindow, policy: NodePolicy, lam: float,
                                 radio: RadioConfig, method: str = "closed") -> float:
    """E[1 / mu | W]; raises :class:`DivergenceError` when it is infinite."""
    q = policy.activation
    outside = radial.inverse_integral(q, window.disk_radius, lam, radio, method)
    return math.exp(radio.noise_term + outside - _window_log_product(window, q))


def network_aoi_given_window(window: ObservationWindow, policy: NodePolicy, lam: float,
                             radio: RadioConfig, method: str = "closed") -> float:
    f, eta = policy.frame_size, policy.eta
    if eta <= 0:
        raise DivergenceError("AoI is infinite for a node that never updates")
    m = expected_mu_given_window(window, policy, lam, radio, method)
    inv = expected_inv_mu_given_window(window, policy, lam, radio, method)
    return (f * f - 1) / (12 * f) * eta * m + f / eta * inv + (1 - f) / 2


def network_aoi_fixed_frame(frame_size: float, lam: float, radio: RadioConfig) -> float:
    """Network AoI when all nodes update every frame of a common size and observe nothing.

    ``frame_size`` may be real-valued (continuous relaxation).  Returns
    ``inf`` at ``frame_size == 1`` with interference present, where E[1/mu] diverges.
    """
    f = float(frame_size)
    if f < 1:
        raise ValueError("frame size must be at least 1")
    c = radio.big_c(lam)
    a = radio.noise_term
    d = radio.delta
    if c == 0:
        amplification = 0.0
    elif f == 1:
        return math.inf
    else:
        amplification = c / f * (1 - 1 / f) ** (d - 1)
    try:
        inverse_term = f * math.exp(a + amplification)
    except OverflowError:
        return math.inf
    return inverse_term + (f * f - 1) / (12 * f) * math.exp(-a - c / f) + (1 - f) / 2


def fixed_frame_derivative(frame_size: float, lam: float, radio: RadioConfig) -> float:
    """d/dF of :func:`network_aoi_fixed_frame` for real F > 1."""
    f = float(frame_size)
    c = radio.big_c(lam)
    a = radio.noise_term
    d = radio.delta
    if c == 0:
        first = math.exp(a)
    else:
        h = c * (f - 1) ** (d - 1) * f ** (-d)
        dh = c * (f - 1) ** (d - 2) * f ** (-d - 1) * (d - f)
        slope = 1 + f * dh
        try:
            first = math.exp(a + h) * slope
        except OverflowError:
            return math.copysign(math.inf, slope)
    second = math.exp(-a - c / f) * (f * (f * f + 1) + c * (f * f - 1)) / (12 * f ** 3)
    return first + second - 0.5


@dataclass(frozen=True)
class OptimalFrame:
    frame_size: int
    continuous_root: float
    residual: float
    aoi: float


def optimal_fixed_frame(lam: float, radio: RadioConfig, f_max: float = 1e4) -> OptimalFrame:
    """Best common frame size: stationary point of the relaxed AoI, then integer rounding."""
    lo = 1.0 + 1e-12
    g_lo = fixed_frame_derivative(lo, lam, radio)
    if g_lo >= 0:
        # nondecreasing from F = 1 (interference-free case)
        return OptimalFrame(1, 1.0, 0.0, network_aoi_fixed_frame(1, lam, radio))
    if fixed_frame_derivative(f_max, lam, radio) <= 0:
        raise ValueError(f"AoI derivative does not change sign on [1, {f_max:g}]")
    root = find_root(lambda x: fixed_frame_derivative(x, lam, radio),
                     RootSpec(lo, f_max, tolerance=1e-13, max_iterations=400))
    residual = abs(fixed_frame_derivative(root, lam, radio))
    candidates = sorted({max(1, math.floor(root)), max(1, math.ceil(root))})
    best = min(candidates, key=lambda k: network_aoi_fixed_frame(k, lam, radio))
    return OptimalFrame(best, root, residual, network_aoi_fixed_frame(best, lam, radio))

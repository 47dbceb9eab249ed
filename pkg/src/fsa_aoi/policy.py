"""Locally adaptive update rates and frame sizes."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import radial
from .analytics import NodePolicy
from .geometry import ObservationWindow, RadioConfig, StoppingSetSpec, Topology, build_windows
from .numerics import RootSpec, bisect_many, find_root

log = logging.getLogger(__name__)

ETA_FLOOR = 1e-9
DEFAULT_F_CAP = 10_000

FSA_ADAPTIVE = "FSA-adaptive"
SA_ADAPTIVE = "SA-adaptive"
ALWAYS_ON = "AlwaysOn"


def fixed_frame_label(frame_size: int) -> str:
    return f"FixedFrame({int(frame_size)})"


def phi(eta: float, window: ObservationWindow, lam: float, radio: RadioConfig,
        method: str = "closed") -> float:
    """Stationarity function of the SA objective; its root is the adaptive rate.

    Positive for small rates and strictly decreasing in ``eta``; equals
    ``-d/d eta log E[1 / (eta mu) | W]``.
    """
    if not 0 < eta <= 1:
        raise ValueError("update rate must lie in (0, 1]")
    gaps = 1.0 + window.observed_distances - eta
    assert np.all(gaps > 0), "observed normalised distances must be positive"
    return 1.0 / eta - float(np.sum(1.0 / gaps)) - radial.phi_integral(eta, window.disk_radius, lam, radio, method)


def existence_condition(window: ObservationWindow, lam: float, radio: RadioConfig,
                        method: str = "closed") -> bool:
    """True when the fixed-point equation has a root in (0, 1)."""
    tail = radial.existence_integral(window.disk_radius, lam, radio, method)
    return float(np.sum(1.0 / window.observed_distances)) + tail > 1.0


def solve_update_rate(window: ObservationWindow, lam: float, radio: RadioConfig,
                      tolerance: float = 1e-10, method: str = "closed") -> float:
    if not existence_condition(window, lam, radio, method):
        return 1.0
    return find_root(lambda e: phi(e, window, lam, radio, method),
                     RootSpec(ETA_FLOOR, 1.0, tolerance=tolerance))


def solve_update_rates(windows: Sequence[ObservationWindow], lam: float, radio: RadioConfig,
                       tolerance: float = 1e-10) -> np.ndarray:
    """Batched :func:`solve_update_rate` over many windows (closed-form integrals)."""
    n = len(windows)
    if n == 0:
        return np.zeros(0)
    sizes = np.array([w.observed_count for w in windows])
    owner = np.repeat(np.arange(n), sizes)
    flat = np.concatenate([w.observed_distances for w in windows]) if sizes.sum() else np.zeros(0)
    radii = np.array([w.disk_radius for w in windows])
    inv_sum = np.bincount(owner, weights=1.0 / flat, minlength=n)
    tails = np.array([radial.existence_integral(r, lam, radio) for r in radii])
    exists = inv_sum + tails > 1.0
    rates = np.ones(n)
    if not exists.any():
        return rates
    idx = np.flatnonzero(exists)
    pick = exists[owner]
    sub_owner = np.searchsorted(idx, owner[pick])
    sub_flat = flat[pick]
    sub_radii = radii[idx]

    def g(eta):
        near = np.bincount(sub_owner, weights=1.0 / (1.0 + sub_flat - eta[sub_owner]), minlength=idx.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            far = radial.phi_integral(eta, sub_radii, lam, radio)
        return 1.0 / eta - near - far

    low = np.full(idx.size, ETA_FLOOR)
    high = np.ones(idx.size)
    rates[idx] = bisect_many(g, low, high, tolerance=tolerance)
    return rates


def frame_size_for_rate(eta: float, f_cap: int = DEFAULT_F_CAP) -> int:
    """Ceiling rule ``ceil(1 / eta)``, capped at ``f_cap``."""
    if not 0 < eta <= 1:
        raise ValueError("update rate must lie in (0, 1]")
    return min(int(math.ceil(1.0 / eta)), int(f_cap))


@dataclass
class PolicyAssignment:
    provenance: str
    policies: list[NodePolicy]
    rates: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.policies)

    @property
    def etas(self) -> np.ndarray:
        return np.array([p.eta for p in self.policies], dtype=float)

    @property
    def frame_sizes(self) -> np.ndarray:
        return np.array([p.frame_size for p in self.policies], dtype=int)

    @property
    def activations(self) -> np.ndarray:
        return self.etas / self.frame_sizes

    def to_json(self) -> str:
        return json.dumps({"provenance": self.provenance,
                           "policies": [{"node": i, "eta": p.eta, "frame": p.frame_size}
                                        for i, p in enumerate(self.policies)]})

    @classmethod
    def from_json(cls, text: str) -> "PolicyAssignment":
        doc = json.loads(text)
        rows = sorted(doc["policies"], key=lambda r: r["node"])
        return cls(doc["provenance"], [NodePolicy(r["eta"], r["frame"]) for r in rows])


def _rates_for(topology: Topology, spec: StoppingSetSpec, lam: float | None,
               radio: RadioConfig) -> np.ndarray:
    lam = topology.lam if lam is None else lam
    return solve_update_rates(build_windows(topology, spec, radio), lam, radio)


def assign_fsa(topology: Topology, spec: StoppingSetSpec, lam: float | None, radio: RadioConfig,
               f_cap: int = DEFAULT_F_CAP, rates: np.ndarray | None = None) -> PolicyAssignment:
    """Every node updates in every frame; frame size from the ceiling rule."""
    if rates is None:
        rates = _rates_for(topology, spec, lam, radio)
    frames = [frame_size_for_rate(e, f_cap) for e in rates]
    capped = sum(1 for e in rates if math.ceil(1.0 / e) > f_cap)
    if capped:
        log.warning("%d frame sizes clipped at f_cap=%d", capped, f_cap)
    return PolicyAssignment(FSA_ADAPTIVE, [NodePolicy(1.0, f) for f in frames], np.asarray(rates))


def assign_sa(topology: Topology, spec: StoppingSetSpec, lam: float | None, radio: RadioConfig,
              matched: bool = False, f_cap: int = DEFAULT_F_CAP,
              rates: np.ndarray | None = None) -> PolicyAssignment:
    """Slotted ALOHA with the adaptive rate, or with ``1 / ceil(1 / eta)`` when ``matched``."""
    if rates is None:
        rates = _rates_for(topology, spec, lam, radio)
    if matched:
        etas = [1.0 / frame_size_for_rate(e, f_cap) for e in rates]
    else:
        etas = [float(e) for e in rates]
    return PolicyAssignment(SA_ADAPTIVE, [NodePolicy(e, 1) for e in etas], np.asarray(rates))


def assign_fixed(topology: Topology, frame_size: int) -> PolicyAssignment:
    return PolicyAssignment(fixed_frame_label(frame_size),
                            [NodePolicy(1.0, frame_size) for _ in range(len(topology))])


def assign_always_on(topology: Topology) -> PolicyAssignment:
    return PolicyAssignment(ALWAYS_ON, [NodePolicy(1.0, 1) for _ in range(len(topology))])

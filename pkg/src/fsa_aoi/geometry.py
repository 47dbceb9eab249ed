"""Poisson bipolar deployments on a torus and per-node observation windows."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import rng as _rng
from .numerics import gamma_fn


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RadioConfig:
    """Physical-layer constants shared by analysis and simulation.

    Defaults are alpha=3.8, r=30 m, theta=0 dB, P=23 dBm and noise -96 dBm.
    """

    alpha: float = 3.8
    theta: float = 1.0
    ptx: float = dbm_to_watts(23.0)
    noise_power: float = dbm_to_watts(-96.0)
    link_distance: float = 30.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError("path-loss exponent must exceed 2")
        for name in ("theta", "ptx", "noise_power", "link_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_db(cls, alpha=3.8, theta_db=0.0, ptx_dbm=23.0, noise_dbm=-96.0, link_distance=30.0):
        return cls(alpha=alpha, theta=db_to_linear(theta_db), ptx=dbm_to_watts(ptx_dbm),
                   noise_power=dbm_to_watts(noise_dbm), link_distance=link_distance)

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    @property
    def rho(self) -> float:
        return self.ptx / self.noise_power

    @property
    def theta_r_alpha(self) -> float:
        return self.theta * self.link_distance ** self.alpha

    @property
    def noise_term(self) -> float:
        """theta * r**alpha / rho, the exponent of the noise-only success probability."""
        return self.theta_r_alpha / self.rho

    @property
    def length_scale(self) -> float:
        """Distance at which an interferer's normalised distance equals one."""
        return self.link_distance * self.theta ** (1.0 / self.alpha)

    def big_c(self, lam: float) -> float:
        d = self.delta
        return lam * math.pi * self.link_distance ** 2 * self.theta ** d * gamma_fn(1 - d) * gamma_fn(1 + d)

    def area_factor(self, lam: float) -> float:
        """Converts ``du`` into ``lam dx`` for ``u = |x|**alpha / (theta r**alpha)``."""
        return lam * math.pi * self.link_distance ** 2 * self.theta ** self.delta * self.delta

    def normalized(self, distance):
        """|x|**alpha / (theta r**alpha)."""
        return np.asarray(distance, dtype=float) ** self.alpha / self.theta_r_alpha

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "theta": self.theta, "ptx": self.ptx,
                "noise_power": self.noise_power, "link_distance": self.link_distance}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1, 2)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Topology:
    lam: float
    region_side: float
    sources: np.ndarray
    destinations: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", _frozen(self.sources))
        object.__setattr__(self, "destinations", _frozen(self.destinations))
        if self.sources.shape != self.destinations.shape:
            raise ValueError("sources and destinations must pair up")

    def __len__(self) -> int:
        return self.sources.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.lam == other.lam and self.region_side == other.region_side
                and self.seed == other.seed
                and np.array_equal(self.sources, other.sources)
                and np.array_equal(self.destinations, other.destinations))

    @property
    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.sources, self.destinations))

    def to_json(self) -> str:
        pairs = np.hstack([self.sources, self.destinations]).tolist()
        return json.dumps({"lambda": self.lam, "region_side": self.region_side,
                           "seed": self.seed, "pairs": pairs})

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        doc = json.loads(text)
        pairs = np.array(doc["pairs"], dtype=float).reshape(-1, 4)
        return cls(lam=doc["lambda"], region_side=doc["region_side"],
                   sources=pairs[:, :2], destinations=pairs[:, 2:], seed=doc.get("seed"))


def torus_displacement(a, b, side: float) -> np.ndarray:
    """Shortest displacement ``b - a`` on a square torus of the given side."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - side * np.round(d / side)


def torus_distance(a, b, side: float) -> np.ndarray:
    d = torus_displacement(a, b, side)
    return np.hypot(d[..., 0], d[..., 1])


def cross_distances(points_a: np.ndarray, points_b: np.ndarray, side: float) -> np.ndarray:
    """Matrix of torus distances, entry ``[i, j] = |a_i - b_j|``."""
    return torus_distance(points_a[:, None, :], points_b[None, :, :], side)


def region_side_for(lam: float, n_target: float) -> float:
    return math.sqrt(n_target / lam)


def sample_bipolar(lam: float, n_target: float, radio: RadioConfig, seed: int,
                   count: int | None = None) -> Topology:
    """Poisson bipolar deployment on a torus of area ``n_target / lam``.

    ``count`` pins the number of pairs instead of drawing it from
    ``Poisson(n_target)``.
    """
    if not lam > 0:
        raise ValueError("density must be positive")
    if not n_target >= 1:
        raise ValueError("n_target must be at least 1")
    side = region_side_for(lam, n_target)
    if side <= 2 * radio.link_distance:
        raise ValueError(f"region side {side:.3g} m cannot hold links of length {radio.link_distance:g} m; "
                         "raise n_target or lower the density")
    g = _rng.stream(seed, _rng.TOPOLOGY)
    n = int(g.poisson(lam * side * side)) if count is None else int(count)
    sources = g.uniform(0.0, side, size=(n, 2))
    angle = g.uniform(0.0, 2.0 * math.pi, size=n)
    offset = radio.link_distance * np.column_stack([np.cos(angle), np.sin(angle)])
    destinations = np.mod(sources + offset, side)
    return Topology(lam=lam, region_side=side, sources=sources, destinations=destinations, seed=seed)


def shift(topology: Topology, offset) -> Topology:
    """Translate every point by ``-offset`` and wrap back into ``[0, side)``."""
    side = topology.region_side
    off = np.asarray(offset, dtype=float)
    return Topology(lam=topology.lam, region_side=side,
                    sources=np.mod(topology.sources - off, side),
                    destinations=np.mod(topology.destinations - off, side),
                    seed=topology.seed)


def shift_to_origin(topology: Topology, node: int) -> Topology:
    if not 0 <= node < len(topology):
        raise IndexError(f"node {node} out of range for {len(topology)} pairs")
    return shift(topology, topology.sources[node])


@dataclass(frozen=True)
class Deterministic:
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("window radius must be non-negative")

    def label(self) -> str:
        return f"det:{self.radius:g}"


@dataclass(frozen=True)
class RandomNearest:
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("a random window must observe at least one point")

    def label(self) -> str:
        return f"rand:{self.count}"


@dataclass(frozen=True)
class Empty:
    def label(self) -> str:
        return "none"


StoppingSetSpec = Union[Deterministic, RandomNearest, Empty]


def parse_window(text: str) -> StoppingSetSpec:
    """Parse ``det:R``, ``rand:p`` or ``none``."""
    text = text.strip().lower()
    if text in ("none", "empty"):
        return Empty()
    kind, _, value = text.partition(":")
    if kind == "det":
        return Deterministic(float(value))
    if kind == "rand":
        return RandomNearest(int(value))
    raise ValueError(f"unknown window spec {text!r}")


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ObservationWindow:
    owner: int
    disk_radius: float
    observed_distances: np.ndarray = field(default_factory=lambda: np.zeros(0))
    observed_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        d = np.array(self.observed_distances, dtype=float).ravel()
        d.setflags(write=False)
        object.__setattr__(self, "observed_distances", d)
        object.__setattr__(self, "observed_indices", np.array(self.observed_indices, dtype=int).ravel())
        if np.any(d <= 0):
            raise ValueError("normalised distances must be positive")

    @property
    def observed_count(self) -> int:
        return int(self.observed_distances.size)


def _window_from_row(owner: int, dist: np.ndarray, spec: StoppingSetSpec,
                     radio: RadioConfig) -> ObservationWindow:
    others = np.delete(np.arange(dist.size), owner)
    d = dist[others]
    if isinstance(spec, Empty):
        return ObservationWindow(owner, 0.0)
    if isinstance(spec, Deterministic):
        keep = d <= spec.radius
        idx = others[keep]
        order = np.argsort(d[keep], kind="stable")
        return ObservationWindow(owner, float(spec.radius), radio.normalized(d[keep][order]), idx[order])
    if isinstance(spec, RandomNearest):
        p = spec.count
        if d.size < p:
            raise InsufficientPointsError(f"node {owner} sees {d.size} foreign destinations, needs {p}")
        order = np.argsort(d, kind="stable")[:p]
        return ObservationWindow(owner, float(d[order[-1]]), radio.normalized(d[order]), others[order])
    raise TypeError(f"unsupported stopping set {spec!r}")


def build_window(topology: Topology, node: int, spec: StoppingSetSpec,
                 radio: RadioConfig) -> ObservationWindow:
    """Window of ``node``: foreign destinations seen from its source."""
    if not 0 <= node < len(topology):
        raise IndexError(f"node {node} out of range for {len(topology)} pairs")
    dist = torus_distance(topology.sources[node], topology.destinations, topology.region_side)
    return _window_from_row(node, dist, spec, radio)


def build_windows(topology: Topology, spec: StoppingSetSpec, radio: RadioConfig,
                  block: int = 512) -> list[ObservationWindow]:
    n = len(topology)
    out = []
    for start in range(0, n, block):
        rows = cross_distances(topology.sources[start:start + block], topology.destinations,
                               topology.region_side)
        out.extend(_window_from_row(start + k, row, spec, radio) for k, row in enumerate(rows))
    return out

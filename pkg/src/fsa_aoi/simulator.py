"""Slot-level Monte Carlo simulation of frame slotted ALOHA under the SINR model.

Two engines share one source of randomness:

* ``batch`` precomputes every node's transmit slots, then evaluates SINR for
  all transmissions in large vectorised chunks;
* ``reference`` steps slot by slot through explicit per-link state and can
  write a full trace and check the age recurrence as it goes.

Per node, the frame decisions come from a stream keyed by the node index;
signal and interference fading come from two further streams consumed in
(slot, receiver, interferer) order.  Both engines therefore produce identical
outcomes for identical seeds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .geometry import RadioConfig, StoppingSetSpec, Topology, cross_distances, sample_bipolar
from .policy import (PolicyAssignment, assign_always_on, assign_fixed, assign_fsa, assign_sa,
                     DEFAULT_F_CAP)

log = logging.getLogger(__name__)

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    horizon_slots: int = 10_000
    warmup_slots: int | None = None
    replications: int = 5
    rng_seed: int = 0
    f_cap: int = DEFAULT_F_CAP
    chunk_pairs: int = 2_000_000

    def __post_init__(self):
        if self.horizon_slots < 1:
            raise ValueError("horizon must be at least one slot")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not 0 <= self.warmup < self.horizon_slots:
            raise ValueError("warmup must be shorter than the horizon")

    @property
    def warmup(self) -> int:
        return self.horizon_slots // 10 if self.warmup_slots is None else int(self.warmup_slots)

    def to_dict(self) -> dict:
        return {"horizon_slots": self.horizon_slots, "warmup_slots": self.warmup,
                "replications": self.replications, "rng_seed": self.rng_seed, "f_cap": self.f_cap}


@dataclass
class LinkState:
    frame_size: int
    current_age: int = 0
    last_generation_time: int = 0
    frame_phase: int = 0
    chosen_slot: int | None = None


@dataclass
class SimOutcome:
    per_link_time_avg_aoi: np.ndarray
    attempts: np.ndarray
    successes: np.ndarray

    @property
    def n_links(self) -> int:
        return int(self.per_link_time_avg_aoi.size)

    @property
    def success_rate_per_link(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.attempts > 0, self.successes / np.maximum(self.attempts, 1), np.nan)

    @property
    def network_avg_aoi(self) -> float:
        return float(np.mean(self.per_link_time_avg_aoi)) if self.n_links else math.nan

    @property
    def ci_halfwidth(self) -> float:
        return _halfwidth(self.per_link_time_avg_aoi)

    def to_dict(self) -> dict:
        return {"network_avg_aoi": self.network_avg_aoi, "ci_halfwidth": self.ci_halfwidth,
                "per_link_time_avg_aoi": self.per_link_time_avg_aoi.tolist(),
                "attempts": self.attempts.tolist(), "successes": self.successes.tolist()}


def _halfwidth(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return math.nan
    return float(Z95 * np.std(values, ddof=1) / math.sqrt(n))


@dataclass
class ReplicatedOutcome:
    outcomes: list[SimOutcome]
    topology_seeds: list[int]
    protocol: str
    window: str

    @property
    def per_link(self) -> np.ndarray:
        return np.concatenate([o.per_link_time_avg_aoi for o in self.outcomes])

    @property
    def network_avg_aoi(self) -> float:
        v = self.per_link
        return float(v.mean()) if v.size else math.nan

    @property
    def ci_halfwidth(self) -> float:
        return _halfwidth(self.per_link)

    @property
    def replication_means(self) -> list[float]:
        return [o.network_avg_aoi for o in self.outcomes]

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "window": self.window,
                "network_avg_aoi": self.network_avg_aoi, "ci_halfwidth": self.ci_halfwidth,
                "n_links": int(self.per_link.size), "topology_seeds": self.topology_seeds,
                "replication_means": self.replication_means,
                "replications": [o.to_dict() for o in self.outcomes]}


def _frames(eta: float, frame_size: int, horizon: int, gen: np.random.Generator):
    n_frames = -(-horizon // frame_size)
    active = gen.random(n_frames) < eta
    offsets = gen.integers(0, frame_size, n_frames)
    return active, offsets


def _schedules(topology: Topology, assignment: PolicyAssignment, sim: SimConfig):
    key = [sim.rng_seed, 0 if topology.seed is None else topology.seed]
    out = []
    for node, p in enumerate(assignment.policies):
        f = min(p.frame_size, sim.f_cap)
        gen = _rng.stream(key, _rng.SCHEDULE, node)
        out.append((f,) + _frames(p.eta, f, sim.horizon_slots, gen))
    return out


def _gains(topology: Topology, radio: RadioConfig) -> np.ndarray:
    """gain[i, j] = |X_j - y_i|**-alpha (receiver i, interferer j)."""
    dist = cross_distances(topology.destinations, topology.sources, topology.region_side)
    with np.errstate(divide="ignore"):
        g = dist ** -radio.alpha
    np.fill_diagonal(g, 0.0)
    return g


def _fading_streams(topology: Topology, sim: SimConfig):
    key = [sim.rng_seed, 0 if topology.seed is None else topology.seed]
    return _rng.stream(key, _rng.SIGNAL_FADING), _rng.stream(key, _rng.INTERFERENCE_FADING)


def link_time_average_age(deliveries: np.ndarray, horizon: int, warmup: int) -> float:
    """Mean of ``t - G(t)`` over slots ``warmup <= t < horizon``.

    ``G(t)`` is the latest delivery slot strictly before ``t`` (0 if none):
    a sample delivered in slot ``d`` has age 1 in slot ``d + 1``.
    """
    d = np.asarray(deliveries, dtype=np.int64)
    starts = np.concatenate([[0], d + 1])
    ends = np.concatenate([d, [horizon - 1]])
    values = np.concatenate([[0], d])
    overlap = np.clip(np.minimum(ends, horizon - 1) - np.maximum(starts, warmup) + 1, 0, None)
    n = horizon - warmup
    slot_sum = (warmup + horizon - 1) * n // 2
    return float(slot_sum - int(np.dot(values, overlap))) / n


def _run_batch(topology: Topology, assignment: PolicyAssignment, radio: RadioConfig,
               sim: SimConfig) -> SimOutcome:
    n = len(topology)
    horizon = sim.horizon_slots
    slot_lists, node_lists = [], []
    for node, (f, active, offsets) in enumerate(_schedules(topology, assignment, sim)):
        slots = np.flatnonzero(active) * f + offsets[active]
        slots = slots[slots < horizon]
        slot_lists.append(slots)
        node_lists.append(np.full(slots.size, node))
    slots = np.concatenate(slot_lists) if n else np.zeros(0, dtype=np.int64)
    nodes = np.concatenate(node_lists) if n else np.zeros(0, dtype=np.int64)
    order = np.lexsort((nodes, slots))
    slots, nodes = slots[order], nodes[order]

    gain = _gains(topology, radio)
    sig_gen, int_gen = _fading_streams(topology, sim)
    signal = radio.link_distance ** -radio.alpha
    noise = 1.0 / radio.rho
    delivered = np.zeros(slots.size, dtype=bool)

    _, group_start, group_count = np.unique(slots, return_index=True, return_counts=True)
    event_group = np.repeat(np.arange(group_start.size), group_count)
    event_pairs = np.repeat(group_count - 1, group_count)
    pair_cum = np.concatenate([[0], np.cumsum(group_count * (group_count - 1))])

    g0 = 0
    while g0 < group_start.size:
        # largest run of whole slots whose pair count fits in one chunk
        g1 = int(np.searchsorted(pair_cum, pair_cum[g0] + sim.chunk_pairs, side="right")) - 1
        g1 = min(max(g1, g0 + 1), group_start.size)
        e0 = group_start[g0]
        e1 = group_start[g1] if g1 < group_start.size else slots.size
        ev = np.arange(e0, e1)
        npair = event_pairs[ev]
        total = int(npair.sum())
        rx_event = np.repeat(ev, npair)
        first_pair = np.concatenate([[0], np.cumsum(npair)[:-1]])
        k = np.arange(total) - np.repeat(first_pair, npair)
        own_pos = np.repeat(ev - group_start[event_group[ev]], npair)
        member = k + (k >= own_pos)
        tx_event = np.repeat(group_start[event_group[ev]], npair) + member
        h_int = int_gen.standard_exponential(total, method="inv")
        power = h_int * gain[nodes[rx_event], nodes[tx_event]]
        interference = np.bincount(rx_event - e0, weights=power, minlength=e1 - e0)
        h_sig = sig_gen.standard_exponential(e1 - e0, method="inv")
        sinr = h_sig * signal / (interference + noise)
        delivered[e0:e1] = sinr > radio.theta
        g0 = g1

    attempts = np.bincount(nodes, minlength=n)
    successes = np.bincount(nodes[delivered], minlength=n)
    d_slots, d_nodes = slots[delivered], nodes[delivered]
    # deliveries are sorted by slot; regroup them by node, preserving slot order
    by_node = np.argsort(d_nodes, kind="stable")
    d_slots, d_nodes = d_slots[by_node], d_nodes[by_node]
    bounds = np.searchsorted(d_nodes, np.arange(n + 1))
    aoi = np.array([link_time_average_age(d_slots[bounds[i]:bounds[i + 1]], horizon, sim.warmup)
                    for i in range(n)])
    return SimOutcome(aoi, attempts, successes)


TRACE_COLUMNS = ("t", "node", "active", "chosen_slot", "sinr_db", "delivered", "age")


def _run_reference(topology: Topology, assignment: PolicyAssignment, radio: RadioConfig,
                   sim: SimConfig, trace=None, check: bool = False) -> SimOutcome:
    n = len(topology)
    horizon, warmup = sim.horizon_slots, sim.warmup
    schedules = _schedules(topology, assignment, sim)
    gain = _gains(topology, radio)
    sig_gen, int_gen = _fading_streams(topology, sim)
    signal = radio.link_distance ** -radio.alpha
    noise = 1.0 / radio.rho
    states = [LinkState(frame_size=f) for f, _, _ in schedules]
    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    age_sum = np.zeros(n, dtype=np.int64)
    writer = csv.writer(trace) if trace is not None else None
    if writer:
        writer.writerow(TRACE_COLUMNS)

    for t in range(horizon):
        transmitting = []
        for i, (state, (f, active, offsets)) in enumerate(zip(states, schedules)):
            state.frame_phase = t % f
            if state.frame_phase == 0:
                frame = t // f
                state.chosen_slot = int(offsets[frame]) if active[frame] else None
            if state.chosen_slot is not None and state.chosen_slot == state.frame_phase:
                transmitting.append(i)
        # same draw order and summation as the batch engine: receivers in
        # node order, interferers ascending, accumulated via bincount
        interference = {}
        for i in transmitting:
            others = [j for j in transmitting if j != i]
            h = int_gen.standard_exponential(len(others), method="inv")
            acc = np.bincount(np.zeros(len(others), dtype=int), weights=h * gain[i, others], minlength=1)
            interference[i] = float(acc[0])
        sinr, delivered = {}, set()
        for i in transmitting:
            value = sig_gen.standard_exponential(method="inv") * signal / (interference[i] + noise)
            sinr[i] = value
            attempts[i] += 1
            if value > radio.theta:
                delivered.add(i)
                successes[i] += 1
        for i, state in enumerate(states):
            if check:
                assert state.current_age == t - state.last_generation_time
            if t >= warmup:
                age_sum[i] += state.current_age
            if writer:
                s = sinr.get(i)
                writer.writerow([t, i, int(i in sinr),
                                 "" if state.chosen_slot is None else state.chosen_slot,
                                 "" if s is None else f"{10 * math.log10(s) if s > 0 else -math.inf:.6f}",
                                 int(i in delivered), state.current_age])
            previous = state.current_age
            if i in delivered:
                state.last_generation_time = t
                state.current_age = 1
            else:
                state.current_age += 1
            if check:
                expected = 1 if i in delivered else previous + 1
                assert state.current_age == expected == t + 1 - state.last_generation_time
    aoi = age_sum / float(horizon - warmup)
    return SimOutcome(aoi.astype(float), attempts, successes)


def run(topology: Topology, assignment: PolicyAssignment, radio: RadioConfig, sim: SimConfig,
        engine: str = "batch", trace=None, check: bool = False) -> SimOutcome:
    """Simulate ``sim.horizon_slots`` slots of one topology under a fixed assignment.

    ``trace`` (a writable text stream) and ``check`` (assert the age
    recurrence every slot) select the reference engine.
    """
    if len(assignment) != len(topology):
        raise ValueError("need exactly one policy per node")
    if trace is not None or check:
        engine = "reference"
    if engine == "batch":
        return _run_batch(topology, assignment, radio, sim)
    if engine == "reference":
        return _run_reference(topology, assignment, radio, sim, trace=trace, check=check)
    raise ValueError(f"unknown engine {engine!r}")


def make_assignment(protocol: str, topology: Topology, spec: StoppingSetSpec, radio: RadioConfig,
                    f_cap: int = DEFAULT_F_CAP, lam: float | None = None) -> PolicyAssignment:
    """Build the policy named by ``fsa``, ``sa``, ``sa-matched``, ``fixed:F`` or ``always-on``."""
    p = protocol.strip().lower()
    if p == "fsa":
        return assign_fsa(topology, spec, lam, radio, f_cap=f_cap)
    if p == "sa":
        return assign_sa(topology, spec, lam, radio, f_cap=f_cap)
    if p == "sa-matched":
        return assign_sa(topology, spec, lam, radio, matched=True, f_cap=f_cap)
    if p.startswith("fixed:"):
        return assign_fixed(topology, int(p.split(":", 1)[1]))
    if p == "always-on":
        return assign_always_on(topology)
    raise ValueError(f"unknown protocol {protocol!r}")


def replication_topology(lam: float, n_target: float, radio: RadioConfig, sim: SimConfig,
                         k: int) -> Topology:
    return sample_bipolar(lam, n_target, radio, _rng.derive_seed(sim.rng_seed, _rng.REPLICATION, k))


def _one_replication(args) -> tuple[int, SimOutcome]:
    lam, n_target, spec, protocol, radio, sim, k = args
    topology = replication_topology(lam, n_target, radio, sim, k)
    assignment = make_assignment(protocol, topology, spec, radio, sim.f_cap, lam)
    return topology.seed, run(topology, assignment, radio, sim)


def run_replicated(lam: float, n_target: float, spec: StoppingSetSpec, protocol: str,
                   radio: RadioConfig, sim: SimConfig, workers: int = 1) -> ReplicatedOutcome:
    """Sample ``sim.replications`` topologies, assign policies and simulate each."""
    jobs = [(lam, n_target, spec, protocol, radio, sim, k) for k in range(sim.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_replication, jobs))
    else:
        results = [_one_replication(j) for j in jobs]
    label = spec.label() if hasattr(spec, "label") else str(spec)
    return ReplicatedOutcome([o for _, o in results], [s for s, _ in results], protocol, label)


def outcome_json(outcome, **extra) -> str:
    doc = dict(extra)
    doc.update(outcome.to_dict())
    return json.dumps(doc, indent=1)

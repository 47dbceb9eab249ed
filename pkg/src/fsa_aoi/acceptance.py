"""Release acceptance suite: every criterion with its measured value and verdict.

The report is deterministic for a given seed; wall-clock timings are kept
in a separate document so reruns compare bitwise.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import rng as _rng
from .analytics import (NodePolicy, aoi_lower_bound, conditional_time_avg_aoi, expected_inv_mu_given_window,
                        expected_mu_given_window, network_aoi_fixed_frame, optimal_fixed_frame,
                        success_probabilities)
from .distribution import ccdf_eta, framesize_pmf
from .experiments import ExperimentConfig, config_from_dict, run_fig3, run_fig4, run_fig5
from .geometry import (Deterministic, Empty, ObservationWindow, RadioConfig, Topology, build_windows,
                       sample_bipolar)
from .policy import FSA_ADAPTIVE, SA_ADAPTIVE, PolicyAssignment, existence_condition, solve_update_rate, \
    solve_update_rates
from .simulator import SimConfig, run, run_replicated

log = logging.getLogger(__name__)

REPORT_SCHEMA = {
    "type": "object",
    "required": ["suite", "seed", "criteria", "passed", "failed"],
    "additionalProperties": False,
    "properties": {
        "suite": {"type": "string"},
        "seed": {"type": "integer"},
        "passed": {"type": "boolean"},
        "failed": {"type": "array", "items": {"type": "integer"}},
        "criteria": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "name", "measured", "tolerance", "comparison", "passed"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "name": {"type": "string"},
                    "measured": {"type": ["number", "null"]},
                    "tolerance": {"type": "number"},
                    "comparison": {"enum": ["<=", ">=", "=="]},
                    "passed": {"type": "boolean"},
                    "runtime_budget_s": {"type": ["number", "null"]},
                    "within_budget": {"type": ["boolean", "null"]},
                    "detail": {"type": "object"},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class AcceptanceConfig:
    seed: int = 0
    radio: RadioConfig = field(default_factory=RadioConfig)
    workers: int = 1


@dataclass
class CriterionResult:
    id: int
    name: str
    measured: float
    tolerance: float
    comparison: str
    passed: bool
    detail: dict = field(default_factory=dict)
    runtime_budget_s: float | None = None
    within_budget: bool | None = None
    runtime_s: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        budget = "" if self.runtime_budget_s is None else f" runtime={self.runtime_s:.1f}s/<{self.runtime_budget_s:g}s"
        return (f"criterion {self.id:2d} [{verdict}] {self.name}: measured={self.measured:.6g} "
                f"{self.comparison} {self.tolerance:g}{budget}")

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "measured": _num(self.measured), "tolerance": self.tolerance,
                "comparison": self.comparison, "passed": bool(self.passed),
                "runtime_budget_s": self.runtime_budget_s, "within_budget": self.within_budget,
                "detail": _jsonable(self.detail)}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def _compare(measured: float, tolerance: float, comparison: str) -> bool:
    if not math.isfinite(measured):
        return False
    if comparison == "<=":
        return measured <= tolerance
    if comparison == ">=":
        return measured >= tolerance
    return measured == tolerance


def _single_link(radio: RadioConfig) -> Topology:
    side = 100.0 * radio.link_distance
    return Topology(lam=1.0 / side ** 2, region_side=side, sources=[[0.0, 0.0]],
                    destinations=[[radio.link_distance, 0.0]], seed=0)


def _radio_with_mu(radio: RadioConfig, mu: float) -> RadioConfig:
    """Noise power chosen so the noise-only success probability equals ``mu``."""
    return replace(radio, noise_power=radio.ptx * -math.log(mu) / radio.theta_r_alpha)


# criteria ---------------------------------------------------------------------------------------

def c01_noise_limited(cfg: AcceptanceConfig) -> dict:
    # default radio (mu within 1e-6 of one) plus a noisier receiver with mu = 0.6
    cases = []
    for radio in (cfg.radio, _radio_with_mu(cfg.radio, 0.6)):
        mu = math.exp(-radio.noise_term)
        out = run(_single_link(radio), PolicyAssignment("AlwaysOn", [NodePolicy(1.0, 1)]), radio,
                  SimConfig(horizon_slots=1_000_000, rng_seed=cfg.seed))
        cases.append([mu, out.network_avg_aoi, 1 / mu, abs(out.network_avg_aoi * mu - 1.0)])
    return dict(measured=max(c[3] for c in cases), tolerance=0.01, detail={"cases": cases})


def c02_renewal(cfg: AcceptanceConfig) -> dict:
    g = _rng.stream(cfg.seed, _rng.ORACLE, 2)
    worst, rows = 0.0, []
    for k in range(50):
        eta, mu, f = g.uniform(0.5, 1.0), g.uniform(0.5, 1.0), int(g.integers(1, 11))
        radio = _radio_with_mu(cfg.radio, mu)
        sim = SimConfig(horizon_slots=f * 1_000_000, rng_seed=_rng.derive_seed(cfg.seed, _rng.ORACLE, 2, k))
        out = run(_single_link(radio), PolicyAssignment("renewal", [NodePolicy(eta, f)]), radio, sim)
        predicted = conditional_time_avg_aoi(NodePolicy(eta, f), mu)
        rel = abs(out.network_avg_aoi / predicted - 1.0)
        worst = max(worst, rel)
        rows.append([eta, f, mu, out.network_avg_aoi, predicted])
    return dict(measured=worst, tolerance=0.01, detail={"triples": rows})


def c03_lower_bound(cfg: AcceptanceConfig) -> dict:
    err = max(abs(conditional_time_avg_aoi(NodePolicy(1.0, f), 1.0) - aoi_lower_bound(f)) for f in range(1, 101))
    # machine precision relative to the magnitude of the largest bound (about 58 slots)
    return dict(measured=err, tolerance=64 * np.finfo(float).eps * aoi_lower_bound(100))


def c04_success_law(cfg: AcceptanceConfig) -> dict:
    radio, lam = cfg.radio, 3e-3
    inside = total = 0
    for k in range(10):
        topo = sample_bipolar(lam, 200, radio, _rng.derive_seed(cfg.seed, _rng.ORACLE, 4, k))
        g = _rng.stream(cfg.seed, _rng.ORACLE, 4, k)
        policies = [NodePolicy(float(g.uniform(0.1, 1.0)), int(g.integers(1, 11))) for _ in range(len(topo))]
        assignment = PolicyAssignment("random", policies)
        out = run(topo, assignment, radio, SimConfig(horizon_slots=100_000, rng_seed=cfg.seed + k))
        p = success_probabilities(topo, assignment.activations, radio)
        n = out.attempts
        freq = out.successes / np.maximum(n, 1)
        sigma = np.sqrt(p * (1 - p) / np.maximum(n, 1))
        ok = (n > 0) & (np.abs(freq - p) <= 3 * sigma)
        inside += int(ok.sum())
        total += len(topo)
    return dict(measured=inside / total, tolerance=0.99, comparison=">=",
                detail={"links": total, "within_3_sigma": inside})


def _random_window(g: np.random.Generator, radio: RadioConfig, lam: float, kind: str, size: float):
    """Window of a PPP of density ``lam`` seen from the origin."""
    if kind == "none":
        return ObservationWindow(0, 0.0)
    if kind == "det":
        n = int(g.poisson(lam * math.pi * size ** 2))
        r = np.sort(size * np.sqrt(g.random(n)))
        return ObservationWindow(0, float(size), radio.normalized(r))
    p = int(size)
    r = np.sqrt(np.cumsum(g.standard_exponential(p)) / (lam * math.pi))
    return ObservationWindow(0, float(r[-1]), radio.normalized(r))


def _objective(window: ObservationWindow, etas: np.ndarray, lam: float, radio: RadioConfig) -> np.ndarray:
    """E[1 / (eta mu) | W] under slotted ALOHA, vectorised over ``etas``."""
    from . import radial
    out = np.empty(etas.size)
    for s in range(0, etas.size, 5000):
        e = etas[s:s + 5000]
        with np.errstate(divide="ignore", invalid="ignore"):
            outside = radial._tail_inverse_linear(radio.normalized(window.disk_radius), 1.0 - e, radio.delta)
        outside = radio.area_factor(lam) * e * outside
        near = np.log1p(-e[:, None] / (1.0 + window.observed_distances[None, :])).sum(axis=1)
        with np.errstate(over="ignore"):
            out[s:s + 5000] = np.exp(radio.noise_term + outside - near) / e
    return out


def c05_solver_oracle(cfg: AcceptanceConfig) -> dict:
    radio = cfg.radio
    g = _rng.stream(cfg.seed, _rng.ORACLE, 5)
    grid = np.linspace(1e-5, 1.0, 100_000)
    worst, agree, rows = 0.0, True, []
    for k in range(20):
        lam = float(math.exp(g.uniform(math.log(1e-4), math.log(5e-3))))
        kind = ["none", "det", "det", "rand", "rand"][k % 5]
        size = float(g.uniform(20.0, 200.0)) if kind == "det" else float(g.integers(1, 11))
        window = _random_window(g, radio, lam, kind, size)
        eta = solve_update_rate(window, lam, radio)
        j = _objective(window, grid, lam, radio)
        best = float(grid[int(np.nanargmin(j))])
        j_end = _objective(window, np.array([1.0 - 1e-6, 1.0]), lam, radio)
        rising = bool(j_end[1] > j_end[0]) if math.isfinite(j_end[1]) else True
        exists = existence_condition(window, lam, radio)
        agree &= rising == exists
        worst = max(worst, abs(eta - best))
        rows.append([lam, kind, size, eta, best, exists, rising])
    measured = worst if agree else math.inf
    return dict(measured=measured, tolerance=1e-3,
                detail={"windows": rows, "existence_agrees": agree, "max_abs_error": worst})


def c06_deconditioning(cfg: AcceptanceConfig) -> dict:
    radio = cfg.radio
    g = _rng.stream(cfg.seed, _rng.ORACLE, 6)
    outer_radius = 3000.0
    worst, rows = 0.0, []
    for k in range(5):
        lam = float(g.uniform(1e-3, 5e-3))
        radius = float(g.uniform(60.0, 400.0))
        f = int(g.integers(2, 11))
        policy = NodePolicy(float(g.uniform(0.1, 1.0)), f)
        q = policy.activation
        window = _random_window(g, radio, lam, "det", radius)
        base = math.exp(-radio.noise_term) * np.prod(1 - q / (1 + window.observed_distances))
        mus = np.empty(500)
        area = math.pi * (outer_radius ** 2 - radius ** 2)
        for m in range(500):
            n = int(g.poisson(lam * area))
            s = np.sqrt(g.uniform(radius ** 2, outer_radius ** 2, n))
            mus[m] = base * math.exp(np.log1p(-q / (1 + radio.normalized(s))).sum())
        mc_mu, mc_inv = float(mus.mean()), float((1 / mus).mean())
        an_mu = expected_mu_given_window(window, policy, lam, radio)
        an_inv = expected_inv_mu_given_window(window, policy, lam, radio)
        err = max(abs(an_mu / mc_mu - 1), abs(an_inv / mc_inv - 1))
        worst = max(worst, err)
        rows.append([lam, radius, policy.eta, f, an_mu, mc_mu, an_inv, mc_inv])
    return dict(measured=worst, tolerance=0.03, detail={"cases": rows})


def c07_fixed_frame(cfg: AcceptanceConfig) -> dict:
    radio, lam = cfg.radio, 3e-3
    worst, rows = 0.0, []
    for f in (2, 4, 8):
        res = run_replicated(lam, 200, Empty(), f"fixed:{f}", radio,
                             SimConfig(horizon_slots=10_000, replications=5, rng_seed=cfg.seed), cfg.workers)
        predicted = network_aoi_fixed_frame(f, lam, radio)
        rel = abs(res.network_avg_aoi / predicted - 1)
        worst = max(worst, rel)
        rows.append([f, predicted, res.network_avg_aoi, res.ci_halfwidth, rel])
    return dict(measured=worst, tolerance=0.05, detail={"frames": rows})


def c08_optimal_frame(cfg: AcceptanceConfig) -> dict:
    radio, lam = cfg.radio, 3e-3
    opt = optimal_fixed_frame(lam, radio)
    scan = [network_aoi_fixed_frame(f, lam, radio) for f in range(1, 201)]
    argmin = int(np.argmin(scan)) + 1
    measured = opt.residual if argmin == opt.frame_size else math.inf
    return dict(measured=measured, tolerance=1e-8,
                detail={"frame_size": opt.frame_size, "scan_argmin": argmin, "continuous_root": opt.continuous_root,
                        "aoi": opt.aoi})


def _desk_sim(cfg: AcceptanceConfig) -> SimConfig:
    return SimConfig(horizon_slots=10_000, replications=5, rng_seed=cfg.seed)


def c09_dominance(cfg: AcceptanceConfig) -> dict:
    radio, lam, spec = cfg.radio, 3e-3, Deterministic(400.0)
    fsa = run_replicated(lam, 200, spec, "fsa", radio, _desk_sim(cfg), cfg.workers)
    sa = run_replicated(lam, 200, spec, "sa-matched", radio, _desk_sim(cfg), cfg.workers)
    gap = (sa.network_avg_aoi - sa.ci_halfwidth) - (fsa.network_avg_aoi + fsa.ci_halfwidth)
    return dict(measured=gap, tolerance=0.0, comparison=">=",
                detail={"fsa": [fsa.network_avg_aoi, fsa.ci_halfwidth], "sa_matched": [sa.network_avg_aoi, sa.ci_halfwidth],
                        "per_topology_fsa": fsa.replication_means, "per_topology_sa": sa.replication_means})


def _experiment(cfg: AcceptanceConfig, eid: str, **overrides) -> ExperimentConfig:
    config = config_from_dict({"pairs": 200, **overrides}, eid)
    config.radio = cfg.radio
    config.sim = _desk_sim(cfg)
    config.workers = cfg.workers
    return config


def c10_fig3_trend(cfg: AcceptanceConfig) -> dict:
    table = run_fig3(_experiment(cfg, "fig3_radius_sweep"))
    worst, series = -math.inf, {}
    for proto in (SA_ADAPTIVE, FSA_ADAPTIVE):
        rows = sorted(table.where(protocol=proto), key=lambda r: r["radius"])
        series[proto] = [[r["radius"], r["network_aoi"], r["ci_halfwidth"]] for r in rows]
        for a, b in zip(rows, rows[1:]):
            # increase beyond the combined CI halfwidths counts against the trend
            worst = max(worst, b["network_aoi"] - a["network_aoi"] - (a["ci_halfwidth"] + b["ci_halfwidth"]))
    return dict(measured=worst, tolerance=0.0, detail={"series": series})


def c11_fig4_magnitude(cfg: AcceptanceConfig) -> dict:
    base = _experiment(cfg, "fig4_density_sweep")
    densest = max(base.densities)
    table = run_fig4(replace(base, densities=[densest]))
    ratios = {}
    for window in base.windows:
        fsa = table.where(protocol=FSA_ADAPTIVE, window=window)[0]
        sa = table.where(protocol=SA_ADAPTIVE, window=window)[0]
        ratios[window] = [fsa["network_aoi"] / sa["network_aoi"], fsa["network_aoi"], fsa["ci_halfwidth"],
                          sa["network_aoi"], sa["ci_halfwidth"]]
    worst = max(v[0] for v in ratios.values())
    return dict(measured=worst, tolerance=0.6, detail={"lambda": densest, "ratios": ratios})


def c12_fig5_property(cfg: AcceptanceConfig) -> dict:
    table = run_fig5(_experiment(cfg, "fig5_budget_sweep", budgets=[3, 10]))
    def get(p, kind):
        r = table.where(p=p, window_kind=kind)[0]
        return r["network_aoi"], r["ci_halfwidth"]
    violations = []
    for p in (3, 10):
        (d, dh), (r, rh) = get(p, "deterministic"), get(p, "random")
        violations.append(d - r - (dh + rh))
    for kind in ("deterministic", "random"):
        violations.append(get(10, kind)[0] - get(3, kind)[0])
    return dict(measured=max(violations), tolerance=0.0,
                detail={"rows": [[r["p"], r["window_kind"], r["radius"], r["network_aoi"], r["ci_halfwidth"]]
                                 for r in table.rows],
                        "violations": violations})


def c13_ccdf(cfg: AcceptanceConfig) -> dict:
    radio, lam, radius = cfg.radio, 3e-3, 400.0
    etas = []
    for k in range(10):
        # 2000 pairs make the torus wider than the 800 m window diameter
        topo = sample_bipolar(lam, 2000, radio, _rng.derive_seed(cfg.seed, _rng.ORACLE, 13, k))
        etas.append(solve_update_rates(build_windows(topo, Deterministic(radius), radio), lam, radio))
    etas = np.sort(np.concatenate(etas))
    n = etas.size
    probes = np.unique(np.quantile(etas, np.linspace(0.0025, 0.9975, 200)))
    analytic = np.array([ccdf_eta(float(k), radius, lam, radio) for k in probes])
    # empirical P(eta > k) just at and just below each probe (both sides of its step)
    above = 1 - np.searchsorted(etas, probes, side="right") / n
    above_left = 1 - np.searchsorted(etas, probes, side="left") / n
    ks = float(max(np.max(np.abs(analytic - above)), np.max(np.abs(analytic - above_left))))
    pmf = framesize_pmf(radius, lam, radio, 50)
    frames = np.ceil(1 / etas).astype(int)
    hist = np.bincount(np.minimum(frames, 51), minlength=52)[1:51] / n
    tail = float(np.mean(frames > 50))
    tv = 0.5 * (float(np.abs(hist - pmf.probabilities).sum()) + abs(tail - pmf.tail))
    return dict(measured=ks, tolerance=0.05,
                detail={"ks": ks, "tv": tv, "tv_tolerance": 0.08, "nodes": n, "tv_ok": tv <= 0.08},
                extra_pass=tv <= 0.08)


def c14_determinism(cfg: AcceptanceConfig) -> dict:
    small = config_from_dict({"pairs": 60, "radii": [0.0, 200.0]}, "fig3_radius_sweep")
    small.radio = cfg.radio
    small.sim = SimConfig(horizon_slots=2000, replications=2, rng_seed=cfg.seed)
    first = run_fig3(small).to_csv_text()
    second = run_fig3(small).to_csv_text()
    small.workers = 2
    parallel = run_fig3(small).to_csv_text()
    mismatches = int(first != second) + int(first != parallel)
    return dict(measured=mismatches, tolerance=0, comparison="==", detail={"bytes": len(first)})


CRITERIA: dict[int, tuple[str, Callable[[AcceptanceConfig], dict], float | None]] = {
    1: ("noise-limited link law", c01_noise_limited, 10.0),
    2: ("renewal cross-check of the conditional AoI", c02_renewal, 60.0),
    3: ("lower-bound identity", c03_lower_bound, None),
    4: ("conditional success probability per link", c04_success_law, 300.0),
    5: ("update-rate solver against grid argmin", c05_solver_oracle, None),
    6: ("deconditioned success moments against nested Monte Carlo", c06_deconditioning, 300.0),
    7: ("fixed-frame network AoI against simulation", c07_fixed_frame, None),
    8: ("optimal common frame size", c08_optimal_frame, None),
    9: ("frame slotted beats matched slotted ALOHA", c09_dominance, None),
    10: ("network AoI nonincreasing in window radius", c10_fig3_trend, 900.0),
    11: ("FSA over SA ratio at the densest point", c11_fig4_magnitude, None),
    12: ("deterministic against random windows at matched budgets", c12_fig5_property, None),
    13: ("update-rate CCDF and frame-size pmf", c13_ccdf, None),
    14: ("bitwise determinism of experiment output", c14_determinism, None),
}


def run_criterion(cid: int, cfg: AcceptanceConfig | None = None) -> CriterionResult:
    cfg = cfg or AcceptanceConfig()
    name, fn, budget = CRITERIA[cid]
    start = time.perf_counter()
    res = fn(cfg)
    elapsed = time.perf_counter() - start
    comparison = res.get("comparison", "<=")
    passed = _compare(float(res["measured"]), float(res["tolerance"]), comparison)
    passed = passed and res.get("extra_pass", True)
    within = None if budget is None else elapsed < budget
    if within is False:
        passed = False
    return CriterionResult(cid, name, float(res["measured"]), float(res["tolerance"]), comparison, bool(passed),
                           res.get("detail", {}), budget, within, elapsed)


def run_acceptance(cfg: AcceptanceConfig | None = None, only=None, echo: Callable[[str], None] | None = None):
    """Run the selected criteria; returns ``(report, timings)``."""
    cfg = cfg or AcceptanceConfig()
    ids = sorted(CRITERIA) if only is None else sorted(only)
    results = []
    for cid in ids:
        r = run_criterion(cid, cfg)
        results.append(r)
        if echo:
            echo(r.line())
    report = {"suite": "fsa-aoi acceptance", "seed": cfg.seed, "criteria": [r.to_dict() for r in results],
              "passed": all(r.passed for r in results), "failed": [r.id for r in results if not r.passed]}
    timings = {str(r.id): r.runtime_s for r in results}
    return report, timings


def validate_report(report: dict) -> None:
    import jsonschema
    jsonschema.validate(report, REPORT_SCHEMA)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True)

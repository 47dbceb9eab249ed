"""Command-line front end: ``fsa-aoi <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import rng as _rng
from .experiments import (EXPERIMENT_IDS, RUNNERS, ConfigError, ExperimentConfig, ResultTable, load_config,
                          protocol_label, provenance, write_outputs)
from .geometry import Deterministic, parse_window, sample_bipolar
from .simulator import make_assignment, run_replicated

log = logging.getLogger("fsa_aoi")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsa-aoi", description="Age of information under locally adaptive "
                                "frame slotted ALOHA in Poisson bipolar networks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("fig3", "network AoI against window radius"),
                        ("fig4", "network AoI against density"),
                        ("fig5", "deterministic against random windows at matched budgets"),
                        ("accept", "run the acceptance suite"),
                        ("simulate", "simulate one protocol and window"),
                        ("solve-policy", "solve the adaptive policy on one sampled topology"),
                        ("analyze", "closed-form fixed-frame curve, optimum and rate distribution")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="TOML or JSON configuration file")
        s.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        s.add_argument("--pairs", type=float, help="mean number of source-destination pairs")
        s.add_argument("--slots", type=int, help="simulation horizon in slots")
        s.add_argument("--reps", type=int, help="number of topology replications")
        s.add_argument("--out", help="output directory")
        s.add_argument("--protocol", help="fsa | sa | sa-matched | fixed:F | always-on")
        s.add_argument("--window", help="det:R | rand:p | none")
        s.add_argument("--lam", type=float, help="density in pairs per square metre")
        s.add_argument("--workers", type=int, help="worker processes for replications")
        s.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "accept":
            s.add_argument("--criteria", help="comma-separated criterion ids (default: all)")
    return p


def _configure(args) -> ExperimentConfig:
    eid = EXPERIMENT_IDS.get(args.command)
    config = load_config(args.config, eid)
    sim = config.sim
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        sim = replace(sim, rng_seed=args.seed)
    if args.slots is not None:
        warm = sim.warmup_slots if sim.warmup_slots is not None and sim.warmup_slots < args.slots else None
        sim = replace(sim, horizon_slots=args.slots, warmup_slots=warm)
    if args.reps is not None:
        sim = replace(sim, replications=args.reps)
    updates = {"sim": sim}
    if args.pairs is not None:
        updates["pairs"] = args.pairs
    if args.protocol is not None:
        updates["protocols"] = [args.protocol.lower()]
    if args.window is not None and args.command in ("fig4", "simulate", "solve-policy", "analyze"):
        updates["windows"] = [args.window]
    if args.lam is not None:
        updates["lam"] = args.lam
        if args.command == "fig4":
            updates["densities"] = [args.lam]
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["out"] = args.out
    try:
        return replace(config, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _window(config: ExperimentConfig, args) -> str:
    return args.window if args.window else ("det:400" if config.experiment_id == "custom" else config.windows[0])


def _cmd_figure(args, config: ExperimentConfig) -> int:
    table = RUNNERS[args.command](config)
    write_outputs([table], config, config.out, plots=not args.no_plots)
    print(table.to_csv_text(), end="")
    return EXIT_OK


def _cmd_simulate(args, config: ExperimentConfig) -> int:
    window = _window(config, args)
    protocol = config.protocols[0] if args.protocol else "fsa"
    res = run_replicated(config.lam, config.pairs, parse_window(window), protocol, config.radio, config.sim,
                         config.workers)
    rows = []
    for k, o in enumerate(res.outcomes):
        for i in range(o.n_links):
            rows.append({"replication": k, "node": i, "aoi": float(o.per_link_time_avg_aoi[i]),
                         "attempts": int(o.attempts[i]), "successes": int(o.successes[i])})
    table = ResultTable("simulate", ["replication", "node", "aoi", "attempts", "successes"], rows,
                        provenance(config))
    write_outputs([table], config, config.out, plots=not args.no_plots)
    doc = {"lambda": config.lam, "protocol": protocol_label(protocol), "window": window,
           "network_avg_aoi": res.network_avg_aoi, "ci_halfwidth": res.ci_halfwidth,
           "n_links": int(res.per_link.size), "topology_seeds": res.topology_seeds,
           "replication_means": res.replication_means}
    Path(config.out, "simulate.json").write_text(json.dumps(res.to_dict() | doc, indent=1, sort_keys=True))
    print(json.dumps(doc, indent=1))
    return EXIT_OK


def _cmd_solve_policy(args, config: ExperimentConfig) -> int:
    window = _window(config, args)
    protocol = config.protocols[0] if args.protocol else "fsa"
    seed = _rng.derive_seed(config.sim.rng_seed, _rng.REPLICATION, 0)
    topo = sample_bipolar(config.lam, config.pairs, config.radio, seed)
    assignment = make_assignment(protocol, topo, parse_window(window), config.radio, config.sim.f_cap, config.lam)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "topology.json").write_text(topo.to_json())
    (out / "policy.json").write_text(assignment.to_json())
    rates = assignment.rates if assignment.rates is not None else assignment.etas
    rows = [{"node": i, "eta_star": float(rates[i]), "eta": p.eta, "frame": p.frame_size,
             "activation": p.activation} for i, p in enumerate(assignment.policies)]
    table = ResultTable("policy", ["node", "eta_star", "eta", "frame", "activation"], rows, provenance(config))
    write_outputs([table], config, out, plots=not args.no_plots)
    frames = assignment.frame_sizes
    print(json.dumps({"pairs": len(topo), "provenance": assignment.provenance, "window": window,
                      "median_eta_star": float(np.median(rates)) if len(rates) else None,
                      "frame_sizes": {int(f): int(c) for f, c in zip(*np.unique(frames, return_counts=True))}},
                     indent=1))
    return EXIT_OK


def _cmd_analyze(args, config: ExperimentConfig) -> int:
    from .analytics import network_aoi_fixed_frame, optimal_fixed_frame
    from .distribution import framesize_pmf, mixture_network_aoi, rate_distribution
    lam, radio = config.lam, config.radio
    prov = provenance(config)
    curve = ResultTable("fixed_frame", ["frame_size", "aoi"],
                        [{"frame_size": f, "aoi": network_aoi_fixed_frame(f, lam, radio)} for f in range(1, 201)],
                        prov)
    opt = optimal_fixed_frame(lam, radio)
    tables = [curve]
    summary = {"lambda": lam, "optimal_frame": opt.frame_size, "continuous_root": opt.continuous_root,
               "stationarity_residual": opt.residual, "optimal_aoi": opt.aoi}
    spec = parse_window(_window(config, args))
    if isinstance(spec, Deterministic) and spec.radius > 0:
        dist = rate_distribution(spec.radius, lam, radio)
        tables.append(ResultTable("ccdf", ["kappa", "ccdf"],
                                  [{"kappa": float(k), "ccdf": float(v)} for k, v in zip(dist.grid, dist.values)],
                                  prov))
        pmf = framesize_pmf(spec.radius, lam, radio, 50)
        tables.append(ResultTable("pmf", ["l", "p_l"],
                                  [{"l": int(l), "p_l": float(p)} for l, p in zip(pmf.support, pmf.probabilities)],
                                  prov))
        summary.update({"window": spec.label(), "pmf_tail": pmf.tail,
                        "mixture_network_aoi": mixture_network_aoi(pmf, lam, radio)})
    else:
        log.info("rate distribution needs a deterministic window with R > 0; skipped")
    write_outputs(tables, config, config.out, plots=not args.no_plots)
    Path(config.out, "analyze.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _cmd_accept(args, config: ExperimentConfig) -> int:
    from .acceptance import AcceptanceConfig, CRITERIA, dumps, run_acceptance
    only = None
    if args.criteria:
        try:
            only = [int(c) for c in args.criteria.split(",") if c.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad criterion list {args.criteria!r}") from exc
        if set(only) - set(CRITERIA):
            raise ConfigError(f"unknown criteria {sorted(set(only) - set(CRITERIA))}")
    cfg = AcceptanceConfig(seed=config.sim.rng_seed, radio=config.radio, workers=config.workers)
    report, timings = run_acceptance(cfg, only, echo=print)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "acceptance.json").write_text(dumps(report))
    (out / "acceptance_timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True))
    print("all criteria passed" if report["passed"] else f"failed criteria: {report['failed']}")
    return EXIT_OK if report["passed"] else EXIT_FAILED


COMMANDS = {"fig3": _cmd_figure, "fig4": _cmd_figure, "fig5": _cmd_figure, "simulate": _cmd_simulate,
            "solve-policy": _cmd_solve_policy, "analyze": _cmd_analyze, "accept": _cmd_accept}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.window is not None:
            try:
                parse_window(args.window)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        config = _configure(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration, figure runners and provenance-stamped tables."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .geometry import RadioConfig, parse_window, region_side_for
from .policy import ALWAYS_ON, FSA_ADAPTIVE, SA_ADAPTIVE, fixed_frame_label
from .simulator import ReplicatedOutcome, SimConfig, run_replicated

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig3_radius_sweep", "fig4_density_sweep", "fig5_budget_sweep", "custom")
PROTOCOLS = ("fsa", "sa", "sa-matched", "always-on")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def default_density_grid() -> list[float]:
    grid = set(np.round(np.geomspace(1e-4, 5e-3, 6), 12).tolist()) | {1.1e-3}
    return sorted(grid)


@dataclass
class ExperimentConfig:
    experiment_id: str = "custom"
    lam: float = 3e-3
    radii: list[float] = field(default_factory=lambda: [0.0, 100.0, 200.0, 400.0])
    densities: list[float] = field(default_factory=default_density_grid)
    budgets: list[int] = field(default_factory=lambda: list(range(3, 11)))
    windows: list[str] = field(default_factory=lambda: ["rand:3", "rand:10", "det:400"])
    protocols: list[str] = field(default_factory=lambda: ["sa", "fsa"])
    pairs: float = 200
    workers: int = 1
    radio: RadioConfig = field(default_factory=RadioConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    out: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment_id not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment_id!r}")
        for name in ("radii", "densities", "budgets", "windows", "protocols"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid is empty")
        for p in self.protocols:
            if p not in PROTOCOLS and not (p.startswith("fixed:") and p[6:].isdigit() and int(p[6:]) >= 1):
                raise ConfigError(f"unknown protocol {p!r}")
        for w in self.windows:
            try:
                parse_window(w)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if any(r < 0 for r in self.radii):
            raise ConfigError("radii must be non-negative")
        if any(d <= 0 for d in self.densities) or self.lam <= 0:
            raise ConfigError("densities must be positive")
        if any(int(b) != b or b < 1 for b in self.budgets):
            raise ConfigError("budgets must be positive integers")
        if self.pairs < 1 or self.workers < 1:
            raise ConfigError("pairs and workers must be at least 1")
        densest = max(max(self.densities), self.lam)
        if region_side_for(densest, self.pairs) <= 2 * self.radio.link_distance:
            raise ConfigError(f"{self.pairs:g} pairs at density {densest:g} give a region too small "
                              f"for {self.radio.link_distance:g} m links")

    def to_dict(self) -> dict:
        return {"experiment_id": self.experiment_id, "lam": self.lam, "radii": list(self.radii),
                "densities": list(self.densities), "budgets": list(self.budgets),
                "windows": list(self.windows), "protocols": list(self.protocols),
                "pairs": self.pairs, "radio": self.radio.to_dict(), "sim": self.sim.to_dict()}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "fig3_radius_sweep": {"lam": 3e-3, "protocols": ["sa", "fsa"]},
    "fig4_density_sweep": {"protocols": ["sa", "fsa"]},
    "fig5_budget_sweep": {"lam": 5e-3, "protocols": ["fsa"]},
    "custom": {},
}

_RADIO_KEYS = {"alpha", "theta", "theta_db", "ptx", "ptx_dbm", "noise_power", "noise_dbm", "link_distance"}
_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)}
_TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"radio", "sim"}


def _radio_from(block: dict) -> RadioConfig:
    unknown = set(block) - _RADIO_KEYS
    if unknown:
        raise ConfigError(f"unknown radio keys {sorted(unknown)}")
    defaults = RadioConfig()
    kw = {}
    kw["alpha"] = float(block.get("alpha", defaults.alpha))
    kw["link_distance"] = float(block.get("link_distance", defaults.link_distance))
    # dB quantities are converted once here; everything downstream is linear
    for lin, db, conv in (("theta", "theta_db", lambda v: 10 ** (v / 10)),
                          ("ptx", "ptx_dbm", lambda v: 10 ** ((v - 30) / 10)),
                          ("noise_power", "noise_dbm", lambda v: 10 ** ((v - 30) / 10))):
        if lin in block and db in block:
            raise ConfigError(f"give either {lin} or {db}, not both")
        if db in block:
            kw[lin] = conv(float(block[db]))
        else:
            kw[lin] = float(block.get(lin, getattr(defaults, lin)))
    try:
        return RadioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(doc: dict, experiment_id: str | None = None) -> ExperimentConfig:
    doc = dict(doc)
    eid = experiment_id or doc.pop("experiment_id", "custom")
    doc.pop("experiment_id", None)
    radio_block = doc.pop("radio", {})
    sim_block = doc.pop("sim", {})
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    if set(sim_block) - _SIM_KEYS:
        raise ConfigError(f"unknown sim keys {sorted(set(sim_block) - _SIM_KEYS)}")
    merged = dict(EXPERIMENT_DEFAULTS.get(eid, {}))
    merged.update(doc)
    try:
        sim = SimConfig(**sim_block)
        return ExperimentConfig(experiment_id=eid, radio=_radio_from(radio_block), sim=sim, **merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, experiment_id: str | None = None) -> ExperimentConfig:
    """Read a TOML or JSON configuration file (``None`` gives the defaults)."""
    if path is None:
        return config_from_dict({}, experiment_id)
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(raw)
        else:
            if sys.version_info >= (3, 11):
                import tomllib
            else:
                import tomli as tomllib
            doc = tomllib.loads(raw.decode())
    except Exception as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(doc, experiment_id)


def git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], cwd=Path(__file__).resolve().parent,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def provenance(config: ExperimentConfig) -> dict:
    return {"git_revision": git_revision(), "experiment": config.experiment_id,
            "rng_seed": config.sim.rng_seed, "config_hash": config.config_hash(),
            "radio": json.dumps(config.radio.to_dict(), sort_keys=True),
            "sim": json.dumps(config.sim.to_dict(), sort_keys=True), "pairs": config.pairs}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ResultTable:
    name: str
    columns: list[str]
    rows: list[dict]
    provenance: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def where(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for k, v in self.provenance.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def write_csv(self, directory: str | Path) -> Path:
        path = Path(directory) / f"{self.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text())
        return path


def protocol_label(protocol: str) -> str:
    p = protocol.lower()
    if p == "fsa":
        return FSA_ADAPTIVE
    if p in ("sa", "sa-matched"):
        return SA_ADAPTIVE if p == "sa" else SA_ADAPTIVE + "(matched)"
    if p == "always-on":
        return ALWAYS_ON
    return fixed_frame_label(int(p.split(":", 1)[1]))


def _simulate(config: ExperimentConfig, lam: float, window: str, protocol: str) -> ReplicatedOutcome:
    spec = parse_window(window)
    log.info("simulating %s %s at lambda=%g", protocol, window, lam)
    return run_replicated(lam, config.pairs, spec, protocol, config.radio, config.sim, config.workers)


def _stats(res: ReplicatedOutcome) -> dict:
    return {"network_aoi": res.network_avg_aoi, "ci_halfwidth": res.ci_halfwidth,
            "n_links": int(res.per_link.size)}


def run_fig3(config: ExperimentConfig) -> ResultTable:
    """Network AoI against the deterministic window radius."""
    rows = []
    for radius in config.radii:
        window = "none" if radius == 0 else f"det:{radius:g}"
        for p in config.protocols:
            res = _simulate(config, config.lam, window, p)
            rows.append({"radius": float(radius), "protocol": protocol_label(p), **_stats(res)})
    return ResultTable("fig3", ["radius", "protocol", "network_aoi", "ci_halfwidth", "n_links"],
                       rows, provenance(config))


def run_fig4(config: ExperimentConfig) -> ResultTable:
    """Network AoI against density for each protocol and window."""
    rows = []
    for lam in config.densities:
        for window in config.windows:
            for p in config.protocols:
                res = _simulate(config, lam, window, p)
                rows.append({"lambda": float(lam), "protocol": protocol_label(p), "window": window,
                             **_stats(res)})
    return ResultTable("fig4", ["lambda", "protocol", "window", "network_aoi", "ci_halfwidth", "n_links"],
                       rows, provenance(config))


def matched_radius(p: int, lam: float) -> float:
    """Disk radius holding ``p`` points on average."""
    return math.sqrt(p / (lam * math.pi))


def run_fig5(config: ExperimentConfig) -> ResultTable:
    """Deterministic against random windows at matched observation budgets."""
    rows = []
    for p in config.budgets:
        radius = matched_radius(int(p), config.lam)
        for kind, window in (("deterministic", f"det:{radius!r}"), ("random", f"rand:{int(p)}")):
            for proto in config.protocols:
                res = _simulate(config, config.lam, window, proto)
                rows.append({"p": int(p), "window_kind": kind, "radius": radius,
                             "protocol": protocol_label(proto), **_stats(res)})
    return ResultTable("fig5", ["p", "window_kind", "radius", "protocol", "network_aoi", "ci_halfwidth",
                                "n_links"], rows, provenance(config))


RUNNERS = {"fig3": run_fig3, "fig4": run_fig4, "fig5": run_fig5}
EXPERIMENT_IDS = {"fig3": "fig3_radius_sweep", "fig4": "fig4_density_sweep", "fig5": "fig5_budget_sweep"}


def write_outputs(tables: Sequence[ResultTable], config: ExperimentConfig, out: str | Path,
                  plots: bool = True) -> dict:
    """CSV per table, a PNG per table when plotting is on, and a JSON manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for t in tables:
        files.append(t.write_csv(out).name)
        if plots:
            from .plotting import render_table
            png = render_table(t, out)
            if png is not None:
                files.append(png.name)
    manifest = {"experiment": config.experiment_id, "files": files, "config": config.to_dict(),
                "provenance": provenance(config)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest

"""Configuration-driven convergence experiments.

Loads a YAML scene description, runs the requested solver methods against a
shared reference solution, and writes one CSV convergence history per method
plus a JSON metadata file.  All methods report their cost in applications of
the block iteration operator (reflections), so the error columns share an
x-axis; the Kirchhoff-preconditioned method reports ORTHODIR iterations
instead, since its per-iteration cost is not reflection-shaped.
"""

from __future__ import annotations

import json
import math
import subprocess
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import kirchhoff, krylov, multiscatter, rate
from .geometry import Circle, Ellipse, FourierCurve, GeometryError, Scene, closest_pair
from .multiscatter import IterateSequence, MultiDensity, ResourceGuardError

METHODS = ("neumann", "pade", "krylov_binomial", "krylov_stable", "krylov_kirchhoff")

CSV_HEADER = "iteration_or_reflection,log10_l2_error,wall_seconds"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "bundled_scenario_path",
    "bundled_scenarios",
    "build_scene",
    "run",
    "measure_rate",
    "validate",
    "ValidationReport",
]


class ConfigError(Exception):
    """Malformed configuration; message carries the offending field path."""


@dataclass
class ExperimentConfig:
    scenario: str
    obstacles: list
    alpha: tuple
    k: float
    methods: list
    n: tuple | None = None
    ppw: float = 10.0
    max_reflections: int = 120
    tol: float = 1e-12
    kirchhoff_n: int = 12
    kirchhoff_m: int = 12
    kirchhoff_max_iter: int = 12
    output: str = "runs"
    seed: int = 0
    axes_are: str = "semi"   # how ellipse axes in the file are meant

    def __post_init__(self):
        if self.k <= 0:
            raise ConfigError(f"k: must be positive, got {self.k}")
        if self.max_reflections < 1:
            raise ConfigError(
                f"max_reflections: must be >= 1, got {self.max_reflections}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"methods: unknown method {m!r}")


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}{key}: missing required field")
    return mapping[key]


def _parse_obstacle(entry: dict, idx: int, axes_are: str):
    path = f"obstacles[{idx}]."
    kind = _require(entry, "kind", path)
    center = tuple(_require(entry, "center", path))
    if kind == "circle":
        return Circle(center, float(_require(entry, "radius", path)))
    if kind == "ellipse":
        axes = [float(v) for v in _require(entry, "axes", path)]
        if axes_are == "full":
            axes = [0.5 * v for v in axes]
        return Ellipse(center, (axes[0], axes[1]))
    if kind == "fourier":
        return FourierCurve(center,
                            cos_coeffs=tuple(map(tuple, entry.get("cos_coeffs", ()))),
                            sin_coeffs=tuple(map(tuple, entry.get("sin_coeffs", ()))))
    raise ConfigError(f"{path}kind: unknown kind {kind!r}")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment configuration."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    axes_are = raw.get("axes_are", "semi")
    if axes_are not in ("semi", "full"):
        raise ConfigError(f"axes_are: expected 'semi' or 'full', got {axes_are!r}")
    obstacles_raw = _require(raw, "obstacles", "")
    if not isinstance(obstacles_raw, list) or not obstacles_raw:
        raise ConfigError("obstacles: expected a non-empty list")
    obstacles = [_parse_obstacle(o, i, axes_are)
                 for i, o in enumerate(obstacles_raw)]
    kir = raw.get("kirchhoff", {}) or {}
    n_raw = raw.get("n")
    try:
        cfg = ExperimentConfig(
            scenario=str(_require(raw, "scenario", "")),
            obstacles=obstacles,
            alpha=tuple(float(v) for v in _require(raw, "alpha", "")),
            k=float(_require(raw, "k", "")),
            methods=list(raw.get("methods", list(METHODS))),
            n=None if n_raw is None else tuple(int(v) for v in n_raw),
            ppw=float(raw.get("ppw", 10.0)),
            max_reflections=int(raw.get("max_reflections", 120)),
            tol=float(raw.get("tol", 1e-12)),
            kirchhoff_n=int(kir.get("N", 12)),
            kirchhoff_m=int(kir.get("M", kir.get("N", 12))),
            kirchhoff_max_iter=int(kir.get("max_iter", 12)),
            output=str(raw.get("output", "runs")),
            seed=int(raw.get("seed", 0)),
            axes_are=axes_are,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field has wrong type: {exc}") from exc
    return cfg


def bundled_scenarios() -> list[str]:
    pkg = resources.files("multiscat") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".yaml"))


def bundled_scenario_path(name: str) -> Path:
    p = resources.files("multiscat") / "scenarios" / f"{name}.yaml"
    if not p.is_file():
        raise ConfigError(
            f"scenario: no bundled scenario {name!r}; have {bundled_scenarios()}")
    return Path(str(p))


def build_scene(cfg: ExperimentConfig) -> Scene:
    try:
        return Scene(tuple(cfg.obstacles), cfg.alpha, cfg.k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# method drivers: each yields (cost_index, relative_error) rows


def _rel(x: MultiDensity, ref: MultiDensity, ref_norm: float) -> float:
    return (x - ref).norm() / ref_norm


def _run_neumann(ds, ref, ref_norm, cfg):
    seq = IterateSequence()
    rows = []
    clock = time.perf_counter
    t0 = clock()
    partial, seq = multiscatter.neumann_sum(ds, 0, seq)
    rows.append((0, _rel(partial, ref, ref_norm), clock() - t0))
    for m in range(1, cfg.max_reflections + 1):
        partial, seq = multiscatter.neumann_sum(ds, m, seq)
        err = _rel(partial, ref, ref_norm)
        rows.append((m, err, clock() - t0))
        if err < cfg.tol:
            break
    return rows


def _run_pade(ds, ref, ref_norm, cfg):
    seq = IterateSequence()
    rows = []
    clock = time.perf_counter
    t0 = clock()
    partial_sums = []
    acc = None
    for m in range(cfg.max_reflections + 1):
        _, seq = multiscatter.neumann_sum(ds, m, seq)
        acc = seq[m] if acc is None else acc + seq[m]
        partial_sums.append(acc)
        est = krylov.pade_accelerate(partial_sums, m // 2)
        err = _rel(est, ref, ref_norm)
        rows.append((m, err, clock() - t0))
        if err < cfg.tol:
            break
    return rows


def _run_krylov(ds, ref, ref_norm, cfg, mode):
    seq = IterateSequence()
    g = multiscatter.initial_iterate(ds)
    seq.append(g)
    rows = []
    clock = time.perf_counter
    t0 = clock()

    def callback(state):
        reflections = len(seq) - 1
        rows.append((reflections, _rel(state.mu, ref, ref_norm), clock() - t0))

    try:
        krylov.orthodir_identified(
            lambda v: multiscatter.apply_T(ds, v),
            g,
            lambda a, b: a.inner(b),
            tol=cfg.tol,
            max_iter=max(cfg.max_reflections - 2, 1),
            mode=mode,
            callback=callback,
            iterates=seq,
        )
    except krylov.BreakdownError:
        pass                     # rows up to the breakdown are still reported
    return rows


def _run_kirchhoff(ds, ref, ref_norm, cfg):
    rows = []
    clock = time.perf_counter
    t0 = clock()
    start = [0.0]

    def callback(state, err):
        rows.append((state.j + 1, err, clock() - start[0]))

    start[0] = clock()
    kirchhoff.solve_preconditioned(
        ds, N=cfg.kirchhoff_n, M=cfg.kirchhoff_m, tol=cfg.tol,
        max_iter=cfg.kirchhoff_max_iter, reference=ref, callback=callback)
    rows.insert(0, (0, 1.0, 0.0))
    return rows


_DRIVERS = {
    "neumann": _run_neumann,
    "pade": _run_pade,
    "krylov_binomial": lambda ds, ref, rn, cfg: _run_krylov(ds, ref, rn, cfg, "binomial"),
    "krylov_stable": lambda ds, ref, rn, cfg: _run_krylov(ds, ref, rn, cfg, "stable"),
    "krylov_kirchhoff": _run_kirchhoff,
}


# ---------------------------------------------------------------------------
# artifact writing


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, rows):
    lines = [CSV_HEADER]
    for cost, err, wall in rows:
        log_err = math.log10(max(err, 1e-300))
        lines.append(f"{int(cost)},{_format_float(log_err)},{_format_float(wall)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _commit_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def run(cfg: ExperimentConfig, raw_config: dict | None = None) -> dict:
    """Execute every requested method; returns {method: csv_path}."""
    scene = build_scene(cfg)
    ds = multiscatter.discretize(scene, ppw=cfg.ppw, n=cfg.n)
    ref = multiscatter.reference_solve(ds)
    ref_norm = ref.norm()

    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    timings = {}
    for method in cfg.methods:
        t0 = time.perf_counter
        start = t0()
        rows = _DRIVERS[method](ds, ref, ref_norm, cfg)
        timings[method] = t0() - start
        csv_path = out_dir / f"{cfg.scenario}_{method}.csv"
        _write_csv(csv_path, rows)
        artifacts[method] = str(csv_path)

    meta = {
        "scenario": cfg.scenario,
        "config": raw_config if raw_config is not None else {},
        "n": list(ds.n),
        "k": cfg.k,
        "commit": _commit_hash(),
        "timings_seconds": timings,
        "artifacts": artifacts,
    }
    meta_path = out_dir / f"{cfg.scenario}_metadata.json"
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    artifacts["metadata"] = str(meta_path)
    return artifacts


def measure_rate(cfg: ExperimentConfig, m_lo: int = 10, m_hi: int = 20) -> dict:
    """Empirical two-reflection decay over iterates m_lo..m_hi vs. the
    closed-form round-trip rate of the configured scene."""
    scene = build_scene(cfg)
    ds = multiscatter.discretize(scene, ppw=cfg.ppw, n=cfg.n)
    _, seq = multiscatter.neumann_sum(ds, m_hi + 2)
    modulus, ratio = rate.empirical_rate(seq, m_lo, m_hi)
    predicted = rate.r2_2d(rate.orbit_geometry(scene))
    return {
        "empirical_modulus": modulus,
        "empirical_ratio": ratio,
        "predicted_modulus": abs(predicted),
        "relative_deviation": abs(modulus - abs(predicted)) / abs(predicted),
        "window": (m_lo, m_hi),
        "n": list(ds.n),
    }


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)   # (name, ok, detail)
    predicted_rate: float | None = None
    predicted_reflections: float | None = None

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def lines(self):
        out = [f"[{'ok' if ok else 'FAIL'}] {name}: {detail}"
               for name, ok, detail in self.checks]
        if self.predicted_rate is not None:
            out.append(f"predicted |R2| = {self.predicted_rate:.6f}")
        if self.predicted_reflections is not None:
            out.append("predicted reflections to tol = "
                       f"{self.predicted_reflections:.1f}")
        return out


def _projection_interval(curve, direction, samples=4096):
    t = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    proj = curve.position(t) @ direction
    return float(proj.min()), float(proj.max())


def validate(cfg: ExperimentConfig) -> ValidationReport:
    """Geometric sanity report: convexity, disjointness, no-occlusion,
    plus the predicted rate and reflection count for the configured tol."""
    report = ValidationReport()
    scene = build_scene(cfg)

    for j, curve in enumerate(scene.obstacles):
        ok = curve.is_convex()
        report.checks.append((f"obstacle[{j}] convex", ok,
                              "strictly convex" if ok else "curvature changes sign"))

    if len(scene.obstacles) == 2:
        try:
            _, _, d = closest_pair(scene)
            report.checks.append(("disjoint", d > 0.0, f"gap d = {d:.6g}"))
        except GeometryError as exc:
            report.checks.append(("disjoint", False, str(exc)))
            d = None

        perp = np.array([-scene.alpha_vec[1], scene.alpha_vec[0]])
        lo0, hi0 = _projection_interval(scene.obstacles[0], perp)
        lo1, hi1 = _projection_interval(scene.obstacles[1], perp)
        gap = max(lo1 - hi0, lo0 - hi1)
        report.checks.append(
            ("no-occlusion", gap > 0.0,
             f"transverse clearance {gap:.6g} between projections "
             f"[{lo0:.4g},{hi0:.4g}] and [{lo1:.4g},{hi1:.4g}]"))

        if d is not None and d > 0:
            geom = rate.orbit_geometry(scene)
            r2 = rate.r2_2d(geom)
            report.predicted_rate = abs(r2)
            report.predicted_reflections = (
                2.0 * math.log(cfg.tol) / math.log(abs(r2)))
    return report

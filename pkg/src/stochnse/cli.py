"""Command line entry point: ``stochnse run|report|validate``.

Exit codes: 0 success, 1 validation error or missing artifacts, 2 numerical
divergence, 3 statistical-acceptance failure (``run --strict`` only).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import scipy
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .density_harness import (
    DEFAULT_F,
    DiscreteJumpSpec,
    EnsembleFailure,
    ForcingSpec,
    ProjectionSubspace,
    atom_test,
    conditional_kernel_probe,
    continuity_in_initial_condition,
    run_ensemble,
)
from .fbm_noise import FbmSpec, build_level_covariance, diagonal_variance_fit, sample_coefficients, besov_dichotomy_report
from .levy_noise import (
    LevyMeasureSpec,
    moment_scaling_report,
    small_ball_report,
    synthesize_levy_field,
    truncation_convergence_report,
)
from .nse_solver import SolverConfig, SolverDivergence, solve
from .stats import member_seed
from .torus_spectral import ModeIndex, ModeSet, SpectralVelocity, is_saturating_up_to

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_STAT_FAIL = 0, 1, 2, 3
KINDS = ("synthesize_levy", "synthesize_fbm", "check_moments", "saturate",
         "simulate", "ensemble", "continuity", "kernel_probe")


# -- schema -------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LevyConfig(_Strict):
    alpha: float = Field(gt=0, lt=2)
    amplitude: float = Field(1.0, gt=0)
    z_max: float = math.inf
    eps: float = Field(gt=0)
    max_level: int = Field(8, ge=0, le=14)
    p: Optional[float] = None
    M: int = Field(10_000, ge=100)
    s: Optional[float] = None
    eps_list: Optional[List[float]] = None
    moment_tolerance: float = 0.15
    truncation_tolerance: float = 0.2

    @model_validator(mode="after")
    def _domain(self):
        spec = LevyMeasureSpec(self.alpha, self.amplitude, self.z_max)
        if self.p is not None:
            if not self.alpha < self.p < 2:
                raise ValueError(f"p must lie in (alpha, 2) = ({self.alpha}, 2)")
            if not math.isfinite(spec.abs_moment(self.p, self.eps)):
                raise ValueError("p-th moment infinite for z_max=inf; set a finite z_max")
        if self.s is not None and self.p is not None and not self.s < 1 / self.p - 1:
            raise ValueError(f"s must be < 1/p - 1 = {1 / self.p - 1:.4g}")
        if self.eps_list is not None and (len(set(self.eps_list)) < 3 or min(self.eps_list) <= 0):
            raise ValueError("eps_list needs at least three distinct positive levels")
        return self


class SmallBallConfig(_Strict):
    alpha: float = Field(gt=0, lt=2)
    amplitude: float = Field(1.0, gt=0)
    eps_grid: List[float] = Field(min_length=3)
    M: int = Field(100_000, ge=100)
    n_grid: int = Field(4096, ge=64)
    tolerance: float = 0.2

    @model_validator(mode="after")
    def _domain(self):
        if min(self.eps_grid) <= 0:
            raise ValueError("small-ball radii must be positive")
        return self


class FbmConfig(_Strict):
    hurst: float = Field(gt=0.5, lt=1.0)
    max_level: int = Field(8, ge=0, le=10)
    M: int = Field(2000, ge=100)
    s: Optional[List[float]] = None
    slope_tolerance: float = 0.1

    @model_validator(mode="after")
    def _domain(self):
        for s in self.s or []:
            if not -0.5 < s < 0.5:
                raise ValueError(f"Besov smoothness {s} outside the tested window (-1/2, 1/2)")
        return self


class SaturateConfig(_Strict):
    generators: List[Tuple[int, int]]
    radius: int = Field(8, ge=1)
    max_iters: int = Field(32, ge=1)


class SolverSection(_Strict):
    kappa: float = Field(gt=0)
    N: int = Field(ge=1, le=64)
    dt: float = Field(gt=0)
    T: float = Field(gt=0)
    dealias: Literal["two_thirds", "none"] = "two_thirds"
    scheme: Literal["integrating_factor_euler", "imex_euler"] = "integrating_factor_euler"

    @model_validator(mode="after")
    def _domain(self):
        self.build()
        return self

    def build(self):
        return SolverConfig(self.kappa, self.N, self.dt, self.T, self.dealias, self.scheme)


class ForcingSection(_Strict):
    kind: Literal["levy", "fbm", "none"] = "levy"
    generators: List[Tuple[int, int]] = [(1, 0), (0, 1), (1, 1), (1, -1)]
    alpha: float = Field(1.5, gt=0, lt=2)
    amplitude: float = Field(1.0, gt=0)
    z_max: float = 1.0
    eps: float = Field(0.01, gt=0)
    hurst: float = Field(0.75, gt=0.5, lt=1.0)
    scale: float = 1.0

    @model_validator(mode="after")
    def _domain(self):
        self.build()
        return self

    def build(self, scale=None):
        return ForcingSpec(self.kind, ModeSet.from_generators(self.generators), self.alpha,
                           self.amplitude, self.z_max, self.eps, self.hurst,
                           self.scale if scale is None else scale)


class ModeValue(_Strict):
    j1: int
    j2: int
    parity: Literal["sin", "cos"] = "sin"
    value: float = 1.0

    def mode(self):
        return ModeIndex(self.j1, self.j2, self.parity)


class ModeRef(_Strict):
    j1: int
    j2: int
    parity: Literal["sin", "cos"] = "sin"

    def mode(self):
        return ModeIndex(self.j1, self.j2, self.parity)


class InitialSection(_Strict):
    modes: List[ModeValue] = []

    def build(self, N):
        return SpectralVelocity.from_modes(N, {m.mode(): m.value for m in self.modes})


class EnsembleSection(_Strict):
    M: int = Field(2000, ge=100)
    F: List[ModeRef] = [ModeRef(j1=2, j2=1)]
    level: float = Field(0.01, gt=0, lt=1)

    def projection(self):
        return ProjectionSubspace(tuple(m.mode() for m in self.F))


class ContinuitySection(_Strict):
    M: int = Field(2000, ge=100)
    F: List[ModeRef] = [ModeRef(j1=2, j2=1)]
    w: ModeRef = ModeRef(j1=2, j2=1)
    deltas: List[float] = [0.5, 0.25, 0.125]
    n_floor: int = Field(1, ge=1)
    negative_scale: float = 2.0
    bandwidth: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _domain(self):
        if len(self.F) != 1:
            raise ValueError("continuity is implemented for a one-dimensional F")
        if any(d <= 0 for d in self.deltas):
            raise ValueError("perturbation sizes must be positive")
        return self


class ProbeSection(_Strict):
    source: Literal["fbm", "levy", "discrete"]
    levels: List[int] = [1, 2, 3, 4]
    M: int = Field(2000, ge=500)
    hurst: float = Field(0.75, gt=0.5, lt=1.0)
    alpha: float = Field(1.5, gt=0, lt=2)
    amplitude: float = Field(1.0, gt=0)
    z_max: float = 1.0
    eps: float = Field(0.01, gt=0)
    rate: float = Field(40.0, gt=0)
    level: float = Field(0.01, gt=0, lt=1)

    @model_validator(mode="after")
    def _domain(self):
        if any(not 0 <= n <= 4 for n in self.levels):
            raise ValueError("probe levels must lie in 0..4")
        if self.source == "levy":
            LevyMeasureSpec(self.alpha, self.amplitude, self.z_max)
        return self

    def noise(self):
        if self.source == "fbm":
            return FbmSpec(self.hurst)
        if self.source == "levy":
            return (LevyMeasureSpec(self.alpha, self.amplitude, self.z_max), self.eps)
        return DiscreteJumpSpec(self.rate)


REQUIRED = {
    "synthesize_levy": ("levy",),
    "synthesize_fbm": ("fbm",),
    "check_moments": ("levy",),
    "saturate": ("saturate",),
    "simulate": ("solver",),
    "ensemble": ("solver", "forcing"),
    "continuity": ("solver", "forcing"),
    "kernel_probe": ("probe",),
}


class ExperimentConfig(_Strict):
    kind: Literal[KINDS]
    base_seed: int = Field(ge=0)
    output: str
    levy: Optional[LevyConfig] = None
    small_ball: Optional[SmallBallConfig] = None
    fbm: Optional[FbmConfig] = None
    saturate: Optional[SaturateConfig] = None
    solver: Optional[SolverSection] = None
    forcing: Optional[ForcingSection] = None
    u0: InitialSection = InitialSection()
    ensemble: Optional[EnsembleSection] = None
    continuity: Optional[ContinuitySection] = None
    probe: Optional[ProbeSection] = None
    snapshot_every: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _sections(self):
        missing = [s for s in REQUIRED[self.kind] if getattr(self, s) is None]
        if missing:
            raise ValueError(f"experiment '{self.kind}' requires section(s): {', '.join(missing)}")
        if self.kind == "check_moments" and self.levy.p is None:
            raise ValueError("check_moments requires levy.p")
        if self.solver is not None:
            N = self.solver.N
            for m in list(self.u0.modes) + list((self.ensemble or EnsembleSection()).F):
                if max(abs(m.j1), abs(m.j2)) > N:
                    raise ValueError(f"mode ({m.j1}, {m.j2}) outside truncation N={N}")
                m.mode()
        return self

    def canonical(self):
        return self.model_dump(mode="json")

    def digest(self):
        blob = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ConfigError(ValueError):
    pass


def _format_validation(err):
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "\n".join(lines)


def load_config(path):
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if os.environ.get("STOCHNSE_OUTPUT"):
        raw["output"] = os.environ["STOCHNSE_OUTPUT"]
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None
    except ValueError as err:
        raise ConfigError(str(err)) from None


def dump_config(cfg):
    return yaml.safe_dump(cfg.canonical(), sort_keys=True)


# -- pipelines ----------------------------------------------------------------

class _Writer:
    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.checks = []

    def text(self, name, content):
        (self.out / name).write_text(content)
        self.files.append(name)

    def binary(self, name, content):
        (self.out / name).write_bytes(content)
        self.files.append(name)

    def records(self, name, recs):
        self.text(name, "".join(json.dumps(r, default=_json_default) + "\n" for r in recs))

    def check(self, name, passed, **info):
        self.checks.append({"name": name, "passed": bool(passed), **info})


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _ndjson_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _tag_fit(recs, target, passed, tolerance=None):
    fit = recs[-1]
    fit.update(target=target, passed=bool(passed))
    if tolerance is not None:
        fit["tolerance"] = tolerance
    return recs


def _run_synthesize_levy(cfg, w):
    c = cfg.levy
    spec = LevyMeasureSpec(c.alpha, c.amplitude, c.z_max)
    w.text("levy_field.ndjson", synthesize_levy_field(spec, c.eps, c.max_level, cfg.base_seed).to_ndjson())


def _run_synthesize_fbm(cfg, w):
    c = cfg.fbm
    spec = FbmSpec(c.hurst, c.max_level)
    w.text("fbm_field.ndjson", sample_coefficients(spec, c.max_level, cfg.base_seed).to_ndjson())
    for j in range(c.max_level + 1):
        w.text(f"fbm_level_cov_j{j}.csv", build_level_covariance(spec, j).to_csv())
    levels = range(2, c.max_level + 1) if c.max_level >= 3 else range(0, c.max_level + 1)
    fit = diagonal_variance_fit(spec, levels, normalization="unit")
    from .fbm_noise import joint_covariance
    from .wavelet_basis import level_slice
    diag = np.diag(joint_covariance(spec.hurst, c.max_level))
    recs = [dict(kind="fbm_variance", level=j, statistic=float(np.log2(diag[level_slice(j)].mean() * 2.0 ** -j)),
                 stderr=0.0) for j in levels]
    recs.append(dict(kind="fbm_variance_fit", **fit.to_dict(), hurst=c.hurst))
    ok = abs(fit.slope + 2 * c.hurst) <= c.slope_tolerance
    w.records("fbm_variance.ndjson", _tag_fit(recs, -2 * c.hurst, ok, c.slope_tolerance))
    w.check("fbm_variance_slope", ok, slope=fit.slope, target=-2 * c.hurst)
    for q, s in enumerate(c.s or []):
        rep = besov_dichotomy_report(spec, s, c.max_level, c.M, member_seed(cfg.base_seed, q + 1))
        recs = rep.records()
        w.records(f"fbm_besov_s{q}.ndjson", recs)
        w.check(f"fbm_besov_s{s}", True, bounded=rep.bounded, growing=rep.growing,
                expected="bounded" if s < c.hurst - 1 else "growing")


def _run_check_moments(cfg, w):
    c = cfg.levy
    spec = LevyMeasureSpec(c.alpha, c.amplitude, c.z_max)
    rep = moment_scaling_report(spec, c.eps, c.p, c.max_level, c.M, member_seed(cfg.base_seed, 0))
    ok = abs(rep.fit.slope - rep.target_slope) <= c.moment_tolerance
    w.records("moments.ndjson", _tag_fit(_ndjson_lines(rep.to_ndjson()), rep.target_slope, ok, c.moment_tolerance))
    w.check("moment_slope", ok, slope=rep.fit.slope, target=rep.target_slope)
    if c.eps_list:
        s = c.s if c.s is not None else 1 / c.p - 1 - 0.5
        tr = truncation_convergence_report(spec, c.eps_list, c.p, s, c.max_level, c.M, member_seed(cfg.base_seed, 1))
        ok = tr.fit.slope >= tr.target_slope - c.truncation_tolerance
        w.records("truncation.ndjson", _tag_fit(_ndjson_lines(tr.to_ndjson()), tr.target_slope, ok))
        w.check("truncation_slope", ok, slope=tr.fit.slope, target=tr.target_slope)
    if cfg.small_ball is not None:
        sb = cfg.small_ball
        rep = small_ball_report(LevyMeasureSpec(sb.alpha, sb.amplitude), sb.eps_grid, sb.M,
                                member_seed(cfg.base_seed, 2), n_grid=sb.n_grid)
        ok = abs(rep.alpha_hat - sb.alpha) <= sb.tolerance
        w.records("small_ball.ndjson", _tag_fit(_ndjson_lines(rep.to_ndjson()), -sb.alpha, ok, sb.tolerance))
        w.check("small_ball_exponent", ok, alpha_hat=rep.alpha_hat, alpha=sb.alpha)


def _run_saturate(cfg, w):
    c = cfg.saturate
    rep = is_saturating_up_to(ModeSet.from_generators(c.generators), c.radius, c.max_iters)
    w.text("saturation.ndjson", rep.to_ndjson())
    w.text("closure.csv", rep.closure.to_csv())
    w.check("saturation", True, covered=rep.covered, iterations=rep.iterations)


def _run_simulate(cfg, w):
    config = cfg.solver.build()
    u0 = cfg.u0.build(config.N)
    forcing = (cfg.forcing or ForcingSection(kind="none")).build()
    path = forcing.build(config, cfg.base_seed, range(1))
    path = path.member(0)
    rec = solve(u0, path, config, snapshot_every=cfg.snapshot_every)
    w.text("diagnostics.csv", rec.diagnostics_csv())
    if cfg.snapshot_every:
        w.text("trajectory.ndjson", rec.to_ndjson())
        w.binary("trajectory.bin", rec.to_binary())


def _run_ensemble(cfg, w):
    config = cfg.solver.build()
    ens = cfg.ensemble or EnsembleSection()
    sample = run_ensemble(config, cfg.u0.build(config.N), ens.projection(), ens.M, cfg.base_seed,
                          cfg.forcing.build())
    w.text("sample.csv", sample.to_csv())
    rep = atom_test(sample, level=ens.level)
    w.records("atom_test.ndjson", [dict(kind="atom_test", **rep.to_dict(), **_prov(sample.provenance))])
    w.check("no_atoms", not rep.atom, verdict=rep.verdict)


def _prov(p):
    return {"config_hash": p.get("config_hash"), "seed_range": p.get("seed_range")}


def _run_continuity(cfg, w):
    config = cfg.solver.build()
    c = cfg.continuity or ContinuitySection()
    F = ProjectionSubspace(tuple(m.mode() for m in c.F))
    wv = SpectralVelocity.from_modes(config.N, {c.w.mode(): 1.0})
    neg = cfg.forcing.build(scale=cfg.forcing.scale * c.negative_scale)
    rep = continuity_in_initial_condition(config, cfg.u0.build(config.N), wv, F, c.M, cfg.base_seed,
                                          cfg.forcing.build(), c.deltas, c.bandwidth, c.n_floor, neg)
    w.text("continuity.ndjson", rep.to_ndjson())
    w.check("continuity", rep.passed, nonincreasing=rep.nonincreasing,
            negative_control_decays=rep.negative_control_decays)


def _run_kernel_probe(cfg, w):
    c = cfg.probe
    expect_atoms = c.source == "discrete"
    ok = True
    for i, n in enumerate(c.levels):
        rep = conditional_kernel_probe(c.noise(), n, c.M, member_seed(cfg.base_seed, i), level=c.level)
        w.text(f"probe_n{n}.ndjson", rep.to_ndjson())
        ok &= (rep.atoms_detected == len(rep.tested)) if expect_atoms else rep.atoms_detected == 0
    w.check("kernel_probe", ok, source=c.source, expect_atoms=expect_atoms)


PIPELINES = {
    "synthesize_levy": _run_synthesize_levy,
    "synthesize_fbm": _run_synthesize_fbm,
    "check_moments": _run_check_moments,
    "saturate": _run_saturate,
    "simulate": _run_simulate,
    "ensemble": _run_ensemble,
    "continuity": _run_continuity,
    "kernel_probe": _run_kernel_probe,
}


def versions():
    return {"stochnse": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run_experiment(cfg, strict=False):
    """Execute ``cfg``; returns the exit status. Artifacts and ``manifest.json`` go to ``cfg.output``."""
    w = _Writer(cfg.output)
    start = time.perf_counter()
    status = EXIT_OK
    error = None
    threads = int(os.environ.get("STOCHNSE_THREADS", "1"))
    try:
        with scipy.fft.set_workers(threads):
            PIPELINES[cfg.kind](cfg, w)
    except (SolverDivergence, EnsembleFailure) as exc:
        status, error = EXIT_DIVERGED, str(exc)
    if status == EXIT_OK and strict and not all(c["passed"] for c in w.checks):
        status = EXIT_STAT_FAIL
    manifest = {
        "kind": cfg.kind,
        "config_hash": cfg.digest(),
        "seed": cfg.base_seed,
        "versions": versions(),
        "wall_time": time.perf_counter() - start,
        "config": cfg.canonical(),
        "artifacts": list(w.files),
        "checks": w.checks,
        "exit_status": status,
        "error": error,
        "threads": threads,
    }
    (w.out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))
    return status


# -- report -------------------------------------------------------------------

X_KEYS = ("level", "eps", "delta")
Y_KEYS = ("statistic", "prob", "distance")


def report_directory(path, stream=None):
    """Summaries and ``plot_<kind>.csv`` (x, y, band) files for every fitted series."""
    d = Path(path)
    man = d / "manifest.json"
    if not man.is_file():
        print(f"error: no manifest.json in {d}", file=sys.stderr)
        return EXIT_INVALID
    manifest = json.loads(man.read_text())
    absent = [a for a in manifest.get("artifacts", []) if not (d / a).exists()]
    if absent:
        print("error: missing artifacts: " + ", ".join(absent), file=sys.stderr)
        return EXIT_INVALID
    lines = [f"experiment {manifest['kind']}  config {manifest['config_hash']}  seed {manifest['seed']}  "
             f"exit {manifest['exit_status']}  wall {manifest['wall_time']:.2f}s"]
    series = {}
    for name in manifest["artifacts"]:
        if not name.endswith(".ndjson"):
            continue
        for r in _ndjson_lines((d / name).read_text()):
            kind = r.get("kind", "")
            if kind.endswith("_fit"):
                tgt = r.get("target")
                verdict = "" if "passed" not in r else ("PASS" if r["passed"] else "FAIL")
                lines.append(f"  {kind:<22} slope {r['slope']:+.4f}  [{r['ci_low']:+.4f}, {r['ci_high']:+.4f}]"
                             + (f"  target {tgt:+.4f}" if tgt is not None else "") + f"  {verdict}")
            elif kind == "continuity_verdict":
                trend = "nonincreasing" if r["nonincreasing"] else "NOT nonincreasing"
                neg = "decays" if r["negative_control_decays"] else "does not decay"
                lines.append(f"  continuity: distances {trend} to noise floor {r['noise_floor']:.4f}; "
                             f"negative control {neg}; {'PASS' if r['passed'] else 'FAIL'}")
            elif kind in ("atom_test",):
                lines.append(f"  atom_test: {r['verdict']} (max multiplicity {r['max_duplicate_mass']}, "
                             f"nn p={r['nn_pvalue']:.3g})")
            elif kind == "probe_summary":
                lines.append(f"  probe n={r['n']}: {r['atoms_detected']} of {r['tested']} cells with atoms, "
                             f"{r['skipped']} skipped")
            if kind.startswith("continuity") and kind != "continuity_verdict" and "delta" not in r:
                continue
            xk = next((k for k in X_KEYS if k in r), None)
            yk = next((k for k in Y_KEYS if k in r), None)
            if xk and yk and not kind.endswith("_fit"):
                band = 1.96 * float(r.get("stderr", 0.0) or 0.0)
                series.setdefault(kind, []).append((r[xk], r[yk], band))
    for c in manifest.get("checks", []):
        lines.append(f"  check {c['name']}: {'PASS' if c['passed'] else 'FAIL'}")
    for kind, pts in series.items():
        body = "x,y,band\n" + "".join(f"{float(x)!r},{float(y)!r},{float(b)!r}\n" for x, y, b in pts)
        (d / f"plot_{kind}.csv").write_text(body)
        lines.append(f"  wrote plot_{kind}.csv ({len(pts)} points)")
    text = "\n".join(lines) + "\n"
    (d / "summary.txt").write_text(text)
    (stream or sys.stdout).write(text)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="stochnse", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a YAML config")
    r.add_argument("config")
    r.add_argument("--strict", action="store_true", help="exit 3 when a statistical check fails")
    p = sub.add_parser("report", help="summarize an artifact directory")
    p.add_argument("directory")
    v = sub.add_parser("validate", help="validate a config without running it")
    v.add_argument("config")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return report_directory(args.directory)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "validate":
        print(f"ok: {cfg.kind} (config {cfg.digest()})")
        return EXIT_OK
    return run_experiment(cfg, strict=args.strict)


if __name__ == "__main__":
    sys.exit(main())

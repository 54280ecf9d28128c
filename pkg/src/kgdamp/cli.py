"""Command-line entry point: ``kgdamp <command> --config FILE [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 solver fault,
4 UNDECIDED verdict under ``--strict``, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import COMMANDS, ConfigError, ExperimentConfig, load_config
from .dichotomy import Thresholds, build_catalog, classify
from .grid import FieldPair, build_grid
from .manifold import foliation_completeness, gap_condition, manifold_dimensions
from .propagator import LinearFlow, SimulationParams, evolve
from .spectral import spectral_report
from .stationary import BracketNotFound, NewtonDivergence, ShootingError, find_stationary

__all__ = ["main", "run", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER", "EXIT_UNDECIDED", "EXIT_IO"]

logger = logging.getLogger("kgdamp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_UNDECIDED = 4
EXIT_IO = 5

SCHEMA_VERSION = 1
TIMESERIES_COLUMNS = ("t", "E", "K0", "h1_sq", "l2v_sq", "ydot", "linf_u")
SOLVER_FAULTS = (ShootingError, BracketNotFound, NewtonDivergence, FloatingPointError, np.linalg.LinAlgError)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


class _Writer:
    """Output sink bound to one directory and config hash."""

    def __init__(self, out_dir: str, cfg: ExperimentConfig):
        self.out_dir = out_dir
        self.cfg = cfg
        self.hash = cfg.config_hash
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def record(self, record_type: str, **payload) -> dict:
        rec = {"schema_version": SCHEMA_VERSION, "config_hash": self.hash, "command": self.cfg.command, "record": record_type}
        rec.update(payload)
        return _jsonable(rec)

    def ndjson(self, name: str, records) -> None:
        if not self.cfg.output.ndjson:
            return
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")

    def table(self, name: str, header, rows) -> None:
        if not self.cfg.output.csv:
            return
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(header) + ["config_hash"])
            for row in rows:
                w.writerow([_fmt(x) for x in row] + [self.hash])

    def text(self, name: str, body: str) -> None:
        if not self.cfg.output.report:
            return
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)


def _timeseries_rows(traj):
    rows = []
    for i, t in enumerate(traj.times):
        r = traj.reports[i]
        rows.append((t, r.E, r.K0, r.h1_sq, r.l2v_sq, traj.ydot[i], traj.linf_u[i]))
    if traj.t_stop > traj.times[-1]:
        s, r = traj.final_state, traj.final_report
        g = s.grid
        ydot = g.inner(s.u, s.v) + traj.alpha * g.l2_sq(s.u)
        rows.append((traj.t_stop, r.E, r.K0, r.h1_sq, r.l2v_sq, ydot, float(np.max(np.abs(s.u)))))
    return rows


def _setup(cfg: ExperimentConfig):
    m = cfg.model
    spec = m.nonlinearity()
    grid = build_grid(m.d, m.R, m.N)
    return spec, grid


def _profile(cfg, spec, grid):
    return find_stationary(spec, cfg.model.d, cfg.model.nodes, grid=grid)


def _params(cfg) -> SimulationParams:
    dyn = cfg.dynamics
    return SimulationParams(
        alpha=dyn.alpha, dt=dyn.dt, T=dyn.T, blowup_norm_cap=dyn.blowup_norm_cap, record_every=cfg.output.record_every
    )


def _thresholds(cfg) -> Thresholds:
    dyn = cfg.dynamics
    return Thresholds(delta=dyn.delta, conv_tol=dyn.conv_tol, window_fraction=dyn.window_fraction)


def _noise(grid, rng, scale):
    xi = rng.standard_normal(5)
    return scale * sum(x * np.exp(-((grid.r - k) ** 2)) for k, x in enumerate(xi))


def _initial_state(cfg, grid, profile, amplitude=None, noise_rng=None):
    ini = cfg.initial
    a = ini.amplitude if amplitude is None else amplitude
    if ini.kind == "profile":
        shape = profile.Q
    elif ini.kind == "gaussian":
        shape = np.exp(-((grid.r / ini.width) ** 2))
    else:
        shape = np.zeros(grid.N)
    u = a * shape
    v = ini.velocity * shape
    if noise_rng is not None and cfg.sweep.noise > 0:
        u = u + _noise(grid, noise_rng, cfg.sweep.noise)
    return FieldPair(u, v, grid)


def _needs_profile(cfg) -> bool:
    return cfg.command in ("stationary", "spectrum", "classify", "sweep") or cfg.initial.kind == "profile"


def _profile_summary(p) -> dict:
    return {
        "s0": p.s0,
        "center_value": p.center_value,
        "nodes": p.nodes,
        "energy": p.energy,
        "k0": p.k0,
        "residual": p.residual,
    }


def _cmd_stationary(cfg, out: _Writer) -> int:
    spec, grid = _setup(cfg)
    p = _profile(cfg, spec, grid)
    out.table("profile.csv", ("r", "Q"), zip(grid.r, p.Q))
    out.ndjson("summary.ndjson", [out.record("stationary", **_profile_summary(p))])
    lines = [f"{k} = {v}" for k, v in _profile_summary(p).items()]
    out.text("stationary.txt", "\n".join(lines) + "\n")
    print(f"stationary: s0={p.s0:.12g} nodes={p.nodes} E={p.energy:.12g} K0={p.k0:.3e}")
    return EXIT_OK


def _spectral_text(rep, dims, alpha) -> str:
    lines = [f"alpha = {alpha}", "eigenvalues below 1 (mu, refinement error):"]
    for m, e in zip(rep.mu, rep.mu_errors):
        lines.append(f"  {m:.12g}  {e:.3e}")
    if len(rep.near_threshold):
        lines.append("near-threshold, unclassified: " + ", ".join(f"{x:.6g}" for x in rep.near_threshold))
    lines.append(f"kernel = {rep.kernel} (defect {rep.kernel_defect:.3e})")
    lines.append("z:")
    for z in rep.z:
        lines.append(f"  {z.real:.12g} {z.imag:+.12g}i")
    ess = rep.ess_descriptor
    lines.append(f"essential spectrum: Re z = {ess.re_line:g}, |Im z| >= {ess.im_min:.6g}")
    if ess.real_interval is not None:
        lines.append(f"  plus real interval [{ess.real_interval[0]:.6g}, {ess.real_interval[1]:.6g}]")
    lines.append(f"n_unstable = {rep.n_unstable}, n_center = {rep.n_center}")
    lines.append(f"quad_form = {rep.quad_form:.12g}, h5f_slack = {rep.h5f_slack:.3e}, certified = {rep.certified}")
    lines.append(f"dim_u = {dims.dim_u}, dim_c = {dims.dim_c}")
    return "\n".join(lines) + "\n"


def _cmd_spectrum(cfg, out: _Writer) -> int:
    spec, grid = _setup(cfg)
    p = _profile(cfg, spec, grid)
    alpha = cfg.dynamics.alpha
    rep = spectral_report(p, spec, alpha)
    dims = manifold_dimensions(rep)
    ess = rep.ess_descriptor
    rec = out.record(
        "spectrum",
        alpha=alpha,
        mu=rep.mu,
        mu_errors=rep.mu_errors,
        near_threshold=rep.near_threshold,
        kernel=rep.kernel,
        kernel_defect=rep.kernel_defect,
        z=rep.z,
        essential={"re_line": ess.re_line, "im_min": ess.im_min, "real_interval": ess.real_interval},
        n_unstable=rep.n_unstable,
        n_center=rep.n_center,
        quad_form=rep.quad_form,
        h5f_slack=rep.h5f_slack,
        certified=rep.certified,
        dim_u=dims.dim_u,
        dim_c=dims.dim_c,
        profile=_profile_summary(p),
    )
    out.ndjson("spectrum.ndjson", [rec])
    body = _spectral_text(rep, dims, alpha)
    out.text("spectrum.txt", body)
    sys.stdout.write(body)
    return EXIT_OK


def _cmd_evolve(cfg, out: _Writer) -> int:
    spec, grid = _setup(cfg)
    p = _profile(cfg, spec, grid) if _needs_profile(cfg) else None
    traj = evolve(_initial_state(cfg, grid, p), spec, _params(cfg))
    out.table("timeseries.csv", TIMESERIES_COLUMNS, _timeseries_rows(traj))
    summary = out.record(
        "evolve",
        reason=traj.reason,
        t_last_ok=traj.t_last_ok,
        t_stop=traj.t_stop,
        E_start=traj.reports[0].E,
        E_end=traj.final_report.E,
        max_norm=traj.max_norm,
    )
    out.ndjson("summary.ndjson", [summary])
    print(f"evolve: {traj.reason} at t={traj.t_stop:.6g}")
    return EXIT_OK


def _verdict_record(out, verdict, **extra):
    return out.record("verdict", **extra, **verdict.to_dict())


def _cmd_classify(cfg, out: _Writer, strict: bool) -> int:
    spec, grid = _setup(cfg)
    p = _profile(cfg, spec, grid)
    catalog = build_catalog([p], grid, labels=[f"Q{cfg.model.nodes}"])
    params = _params(cfg)
    traj = evolve(_initial_state(cfg, grid, p), spec, params)
    verdict = classify(traj.states[0], spec, params, catalog, _thresholds(cfg), trajectory=traj)
    out.table("timeseries.csv", TIMESERIES_COLUMNS, _timeseries_rows(traj))
    out.ndjson("verdicts.ndjson", [_verdict_record(out, verdict, index=0)])
    print(f"classify: {verdict.kind}")
    if strict and verdict.kind == "UNDECIDED":
        return EXIT_UNDECIDED
    return EXIT_OK


def _cmd_sweep(cfg, out: _Writer, strict: bool, threads: int) -> int:
    spec, grid = _setup(cfg)
    p = _profile(cfg, spec, grid)
    catalog = build_catalog([p], grid, labels=[f"Q{cfg.model.nodes}"])
    params = _params(cfg)
    thresholds = _thresholds(cfg)
    flow = LinearFlow(grid, params.alpha)

    def job(spec_job):
        rng = np.random.default_rng([cfg.seed, spec_job["index"]])
        state = _initial_state(cfg, grid, p, amplitude=spec_job["amplitude"], noise_rng=rng)
        return classify(state, spec, params, catalog, thresholds, flow=flow)

    jobs = cfg.sweep_jobs()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        verdicts = list(pool.map(job, jobs))
    records = [_verdict_record(out, v, index=j["index"], amplitude=j["amplitude"]) for j, v in zip(jobs, verdicts)]
    out.ndjson("verdicts.ndjson", records)
    for j, v in zip(jobs, verdicts):
        print(f"sweep[{j['index']}] c={j['amplitude']:g}: {v.kind}")
    if strict and any(v.kind == "UNDECIDED" for v in verdicts):
        return EXIT_UNDECIDED
    return EXIT_OK


def _cmd_gapcheck(cfg, out: _Writer) -> int:
    g = cfg.gap
    rep = gap_condition(g.C1, g.C2, g.beta1, g.beta2, g.lipR)
    payload = {
        "C1": rep.C1,
        "C2": rep.C2,
        "beta1": rep.beta1,
        "beta2": rep.beta2,
        "lipR": rep.lipR,
        "condition_value": rep.condition_value,
        "holds": rep.holds,
        "gamma1": rep.gamma1,
        "gamma2": rep.gamma2,
        "lipg_bound": rep.lipg_bound,
    }
    if rep.holds:
        fol = foliation_completeness(g.C1, g.C2, g.beta1, g.beta2, g.lipR)
        payload["foliation_product"] = fol.product
        payload["foliation_complete"] = fol.holds
    out.ndjson("gapcheck.ndjson", [out.record("gapcheck", **payload)])
    body = "\n".join(f"{k} = {v}" for k, v in payload.items()) + "\n"
    out.text("gapcheck.txt", body)
    sys.stdout.write(body)
    return EXIT_OK


def run(cfg: ExperimentConfig, out_dir: str = ".", strict: bool = False, threads: int = 1) -> int:
    """Execute a validated configuration; returns the process exit code."""
    try:
        out = _Writer(out_dir, cfg)
    except OSError as exc:
        print(f"error: cannot create output directory {out_dir!r}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if cfg.command == "stationary":
            return _cmd_stationary(cfg, out)
        if cfg.command == "spectrum":
            return _cmd_spectrum(cfg, out)
        if cfg.command == "evolve":
            return _cmd_evolve(cfg, out)
        if cfg.command == "classify":
            return _cmd_classify(cfg, out, strict)
        if cfg.command == "sweep":
            return _cmd_sweep(cfg, out, strict, threads)
        return _cmd_gapcheck(cfg, out)
    except SOLVER_FAULTS as exc:
        print(f"solver fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc.filename or out_dir}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgdamp", description="Damped radial Klein-Gordon experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--strict", action="store_true", help="exit 4 on UNDECIDED verdicts")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: cannot read {args.config!r}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return run(cfg, args.out, args.strict, args.threads)

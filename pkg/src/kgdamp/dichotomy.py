"""Long-time classification of trajectories: blow-up or convergence.

A radial trajectory of the damped equation either blows up in finite
time or converges to an equilibrium. Numerically we can only certify
one of the two from a finite run, so the verdict is ``FTB``,
``CONVERGED`` or ``UNDECIDED``; there is no "global but unbounded"
verdict.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import FieldPair, RadialGrid
from .nonlinearity import NonlinearitySpec
from .propagator import LinearFlow, SimulationParams, Trajectory, evolve

__all__ = [
    "CatalogEntry",
    "build_catalog",
    "ConvexityDiagnostics",
    "convexity_diagnostics",
    "VanishingScan",
    "k0_vanishing_scan",
    "LimitMatch",
    "omega_limit_match",
    "Thresholds",
    "TrajectoryVerdict",
    "classify",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    id: str
    u: np.ndarray
    grid: RadialGrid


def _resample(u: np.ndarray, src: RadialGrid, dst: RadialGrid) -> np.ndarray:
    if (src.d, src.R, src.N) == (dst.d, dst.R, dst.N):
        return np.asarray(u, dtype=float)
    rr = np.concatenate([-src.r[::-1], src.r, [src.R]])
    uu = np.concatenate([u[::-1], u, [0.0]])
    spline = CubicSpline(rr, uu)
    return np.where(dst.r <= src.R, spline(np.minimum(dst.r, src.R)), 0.0)


def build_catalog(profiles: Sequence, grid: RadialGrid, labels: Sequence[str] | None = None) -> list[CatalogEntry]:
    """Zero plus every profile and its negative (``f`` is odd).

    Profiles on a different grid are resampled onto ``grid``.
    """
    entries = [CatalogEntry("zero", np.zeros(grid.N), grid)]
    if labels is None:
        labels = [f"Q{i}" for i in range(len(profiles))]
    seen = set()
    for label, p in zip(labels, profiles):
        if label in seen:
            raise ValueError(f"duplicate catalog label {label!r}")
        seen.add(label)
        u = _resample(p.Q, p.grid, grid)
        entries.append(CatalogEntry(label, u, grid))
        entries.append(CatalogEntry("-" + label, -u, grid))
    return entries


@dataclass
class ConvexityDiagnostics:
    """``y = 1/2 ||u||^2 + alpha int_0^t ||u||^2`` and its derivatives.

    ``ydot`` is ``(u, v) + alpha ||u||^2``; ``yddot`` is its central
    difference at interior samples, compared with ``||v||^2 - K0(u)``.
    """

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray
    yddot_rhs: np.ndarray
    residuals: np.ndarray
    yddot_identity_residual: float


def _uniform_step(t: np.ndarray) -> float:
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ValueError("convexity diagnostics need uniformly spaced samples")
    return float(steps[0])


def convexity_diagnostics(traj: Trajectory, alpha: float | None = None, spec=None) -> ConvexityDiagnostics:
    if alpha is None:
        alpha = traj.alpha
    t = np.asarray(traj.times, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    dt = _uniform_step(t)
    l2u = np.asarray(traj.l2u_sq)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (l2u[1:] + l2u[:-1]) * np.diff(t))])
    y = 0.5 * l2u + alpha * integral
    ydot = np.asarray(traj.uv) + alpha * l2u
    yddot = (ydot[2:] - ydot[:-2]) / (2.0 * dt)
    rhs = np.array([r.l2v_sq - r.K0 for r in traj.reports])[1:-1]
    res = np.abs(yddot - rhs)
    return ConvexityDiagnostics(t, y, ydot, yddot, rhs, res, float(res.max()))


@dataclass
class VanishingScan:
    """Sample times where ``|K0| + ||v||`` reaches new running minima."""

    times: np.ndarray
    values: np.ndarray
    vanishing: bool


def k0_vanishing_scan(traj: Trajectory, tol: float = 1e-4) -> VanishingScan:
    q = np.abs(traj.k0_values) + traj.velocity_norms
    t = np.asarray(traj.times)
    n = q.size
    picked = []
    envelope = np.inf
    for i in range(n):
        left = q[i - 1] if i > 0 else np.inf
        right = q[i + 1] if i + 1 < n else np.inf
        if q[i] <= left and q[i] <= right and q[i] < envelope:
            picked.append(i)
            envelope = q[i]
    idx = np.array(picked, dtype=int)
    vals = q[idx]
    return VanishingScan(t[idx], vals, bool(vals.size and vals[-1] <= tol))


@dataclass(frozen=True)
class LimitMatch:
    limit_id: str
    distance: float
    runner_up: Optional[str]
    runner_up_distance: float
    ambiguous: bool


def omega_limit_match(traj_or_state, catalog: Sequence[CatalogEntry]) -> LimitMatch:
    """Nearest catalog equilibrium ``(Q, 0)`` to the final state in ``H1 x L2``."""
    if not catalog:
        raise ValueError("catalog is empty")
    state = traj_or_state.final_state if isinstance(traj_or_state, Trajectory) else traj_or_state
    g = state.grid
    dists = []
    for e in catalog:
        u = _resample(e.u, e.grid, g)
        du = state.u - u
        dists.append(float(np.sqrt(g.h1_sq(du) + g.l2_sq(state.v))))
    order = np.argsort(dists, kind="stable")
    best = int(order[0])
    if len(order) > 1:
        second = int(order[1])
        d1, d2 = dists[best], dists[second]
        return LimitMatch(catalog[best].id, d1, catalog[second].id, d2, bool(d2 <= 2.0 * d1))
    return LimitMatch(catalog[best].id, dists[best], None, float("inf"), False)


@dataclass(frozen=True)
class Thresholds:
    """``delta`` defaults to ``1e-3 (1 + |E(0)|)``; the final window is the
    trailing ``window_fraction`` of samples (at least ``min_window``)."""

    delta: Optional[float] = None
    conv_tol: float = 1e-4
    window_fraction: float = 0.1
    min_window: int = 3

    def __post_init__(self):
        errors = []
        if self.delta is not None and not self.delta > 0:
            errors.append(f"delta must be positive, got {self.delta}")
        if not self.conv_tol > 0:
            errors.append(f"conv_tol must be positive, got {self.conv_tol}")
        if not 0 < self.window_fraction <= 1:
            errors.append(f"window_fraction must lie in (0, 1], got {self.window_fraction}")
        if self.min_window < 1:
            errors.append(f"min_window must be >= 1, got {self.min_window}")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass
class TrajectoryVerdict:
    kind: str
    reason: str
    blowup_bracket: Optional[tuple[float, float]] = None
    limit_id: Optional[str] = None
    limit_distance: Optional[float] = None
    rate_fit: Optional[float] = None
    ambiguous: bool = False
    solver_suspect: bool = False
    delta: float = 0.0
    k0_tail: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.blowup_bracket is not None:
            out["blowup_bracket"] = list(self.blowup_bracket)
        return out


def _fit_rate(t: np.ndarray, dist: np.ndarray) -> Optional[float]:
    half = t >= t[-1] / 2.0
    mask = half & (dist > 1e-14)
    if np.count_nonzero(mask) < 3:
        return None
    slope = np.polyfit(t[mask], np.log(dist[mask]), 1)[0]
    return float(-slope)


def classify(
    state0: FieldPair,
    spec: NonlinearitySpec | None,
    params: SimulationParams,
    catalog: Sequence[CatalogEntry] | None = None,
    thresholds: Thresholds | None = None,
    flow: LinearFlow | None = None,
    trajectory: Trajectory | None = None,
) -> TrajectoryVerdict:
    """Run :func:`evolve` (unless ``trajectory`` is given) and classify.

    FTB: norm cap hit and either ``E(0) < 0`` or ``K0 <= -delta`` over the
    whole final window. CONVERGED: nearest catalog equilibrium within
    ``conv_tol`` and final ``||v|| <= conv_tol``. Otherwise UNDECIDED.
    """
    thresholds = thresholds or Thresholds()
    grid = state0.grid
    if catalog is None:
        catalog = build_catalog([], grid)
    if not catalog:
        raise ValueError("catalog must contain at least the zero equilibrium")
    traj = trajectory if trajectory is not None else evolve(state0, spec, params, flow)

    E = traj.energies
    K0 = traj.k0_values
    E0 = float(E[0])
    delta = thresholds.delta if thresholds.delta is not None else 1e-3 * (1.0 + abs(E0))
    n = len(traj)
    w = min(n, max(thresholds.min_window, int(np.ceil(thresholds.window_fraction * n))))
    tail = K0[-w:]
    k0_tail = {"min": float(tail.min()), "max": float(tail.max()), "mean": float(tail.mean()), "samples": int(w)}
    evidence = {
        "E_start": E0,
        "E_end": float(traj.final_report.E),
        "min_K0": float(min(K0.min(), traj.final_report.K0)),
        "max_norm": float(traj.max_norm),
        "t_stop": float(traj.t_stop),
    }
    base = dict(reason=traj.reason, delta=float(delta), k0_tail=k0_tail, evidence=evidence)

    if traj.reason in ("norm_cap", "nonfinite"):
        blowup_evidence = E0 < 0 or k0_tail["max"] <= -delta
        if blowup_evidence:
            return TrajectoryVerdict(kind="FTB", blowup_bracket=(float(traj.t_last_ok), float(traj.t_stop)), **base)
        return TrajectoryVerdict(kind="UNDECIDED", solver_suspect=traj.reason == "nonfinite", **base)

    match = omega_limit_match(traj, catalog)
    v_final = float(np.sqrt(traj.final_report.l2v_sq))
    if match.distance <= thresholds.conv_tol and v_final <= thresholds.conv_tol:
        entry = next(e for e in catalog if e.id == match.limit_id)
        u_lim = _resample(entry.u, entry.grid, grid)
        dist = np.array([float(np.sqrt(grid.h1_sq(s.u - u_lim) + grid.l2_sq(s.v))) for s in traj.states])
        return TrajectoryVerdict(
            kind="CONVERGED",
            limit_id=match.limit_id,
            limit_distance=match.distance,
            rate_fit=_fit_rate(np.asarray(traj.times), dist),
            ambiguous=match.ambiguous,
            **base,
        )
    return TrajectoryVerdict(kind="UNDECIDED", limit_id=match.limit_id, limit_distance=match.distance, ambiguous=match.ambiguous, **base)

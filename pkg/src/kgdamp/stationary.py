"""Radial equilibria ``-Q'' - (d-1)/r Q' + Q = f(Q)`` by shooting and Newton.

Shooting classifies ODE trajectories started at ``Q(0) = s0``. After
crossing ``k`` zeros a trajectory either decays to zero or turns away
from zero; the boundary in ``s0`` between "at most ``l`` zeros" and
"more than ``l`` zeros" is located by bisection. The bisected profile is
then sampled on the grid and polished by Newton's method on the
discrete elliptic system, so the final profile is an exact equilibrium
of the discretised equation (not only of the ODE).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .functionals import energy, k0
from .grid import FieldPair, RadialGrid, build_grid
from .nonlinearity import NonlinearitySpec, f_eval, fprime_eval

__all__ = [
    "ShootingError",
    "BracketNotFound",
    "NewtonDivergence",
    "ShotResult",
    "StationaryProfile",
    "shoot",
    "find_stationary",
    "nehari_residual",
    "count_sign_changes",
    "positive_fixed_point",
]

logger = logging.getLogger(__name__)

DECAY_TOL = 1e-6
START_RADIUS = 1e-4


class ShootingError(RuntimeError):
    """The ODE integrator failed (step-size underflow or similar)."""


class BracketNotFound(RuntimeError):
    """No shooting value with the requested number of zeros was found."""

    def __init__(self, message: str, scanned: tuple[float, float]):
        super().__init__(f"{message} (scanned s0 in [{scanned[0]:.6g}, {scanned[1]:.6g}])")
        self.scanned = scanned


class NewtonDivergence(RuntimeError):
    pass


@dataclass
class ShotResult:
    """Classified shooting trajectory.

    ``outcome`` is ``decays``, ``crosses`` (``zeros >= 1`` then turns
    away from zero or exceeds the zero budget), ``diverges`` (turns away
    without any zero) or ``unresolved`` (``Rmax`` reached first).
    ``r_cut`` is where ``|Q| + |Q'|`` was smallest after the last zero.
    """

    outcome: str
    zeros: int
    s0: float
    r_end: float
    r_cut: float
    _segments: list = field(default_factory=list, repr=False)

    def evaluate(self, r) -> np.ndarray:
        """``(Q, Q')`` at radii ``r <= r_end`` from the dense output."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((2, r.size))
        ends = np.array([s[1] for s in self._segments])
        idx = np.clip(np.searchsorted(ends, r), 0, len(self._segments) - 1)
        for k in np.unique(idx):
            mask = idx == k
            rr = r[mask]
            a, b, interp, y0 = self._segments[k]
            if interp is None:
                out[:, mask] = _series(rr, y0)
            else:
                out[:, mask] = interp(np.clip(rr, a, b))
        return out


def _series(r, start):
    s0, c = start
    return np.vstack([s0 + 0.5 * c * r * r, c * r])


def positive_fixed_point(spec: NonlinearitySpec) -> float:
    """Smallest ``y > 0`` with ``f(y) = y`` (bottom of the shooting well)."""
    g = lambda y: float(f_eval(spec, y)) - y  # noqa: E731
    hi = 1.0
    while g(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("f(y) = y has no positive root")
    lo = hi / 2.0
    while lo > 1e-12 and g(lo) > 0:
        lo /= 2.0
    if g(lo) > 0:
        raise ValueError("f(y) - y is positive down to 0; no positive fixed point is bracketed")
    return brentq(g, lo, hi, xtol=1e-15)


def shoot(
    spec: NonlinearitySpec,
    d: int,
    s0: float,
    Rmax: float = 60.0,
    decay_tol: float = DECAY_TOL,
    max_zeros: int | None = None,
    rtol: float = 1e-13,
    atol: float = 1e-15,
) -> ShotResult:
    """Integrate the radial profile ODE from ``Q(0) = s0, Q'(0) = 0``.

    Integration stops at the first classification event; ``max_zeros``
    stops once more than that many zeros have been seen.
    """
    if not s0 > 0:
        raise ValueError(f"s0 must be positive, got {s0}")
    c = (s0 - float(f_eval(spec, s0))) / d
    r0 = START_RADIUS / max(1.0, np.sqrt(abs(c)))
    segments = [(0.0, r0, None, (s0, c))]
    if c >= 0:
        # Q'' > 0 at the start: the decreasing quantity Q'^2/2 + F(Q) - Q^2/2
        # is negative, so Q can neither reach zero nor decay
        return ShotResult("diverges", 0, s0, r0, 0.0, segments)

    terms = [(a, p - 1.0) for a, p in spec.attract] + [(-b, q - 1.0) for b, q in spec.repel]

    def rhs(r, y):
        q, dq = y
        aq = abs(q)
        fq = sum(a * aq**e for a, e in terms) * q
        return np.array([dq, -(d - 1) / r * dq + q - fq])

    y0 = np.array([s0 + 0.5 * c * r0 * r0, c * r0])
    solver = DOP853(rhs, r0, y0, Rmax, rtol=rtol, atol=atol, first_step=r0)
    zeros = 0
    q_prev, dq_prev = y0
    best = (abs(y0[0]) + abs(y0[1]), r0)
    outcome = None
    while outcome is None:
        msg = solver.step()
        if solver.status == "failed":
            raise ShootingError(f"integrator failed at r = {solver.t:.6g} for s0 = {s0!r}: {msg}")
        segments.append((solver.t_old, solver.t, solver.dense_output(), None))
        q, dq = solver.y
        if np.sign(q) != np.sign(q_prev) and q_prev != 0:
            zeros += 1
            best = (np.inf, solver.t)
            if max_zeros is not None and zeros > max_zeros:
                outcome = "crosses"
                break
        else:
            falling = q_prev * dq_prev < 0
            if falling and q * dq >= 0:
                outcome = "crosses" if zeros else "diverges"
                break
        mag = abs(q) + abs(dq)
        if mag < best[0]:
            best = (mag, solver.t)
        if q * dq < 0 and mag < decay_tol:
            outcome = "decays"
            break
        if solver.status == "finished":
            outcome = "unresolved"
            break
        q_prev, dq_prev = q, dq
    return ShotResult(outcome, zeros, s0, solver.t, best[1], segments)


def count_sign_changes(Q, rel_floor: float = 1e-12) -> int:
    """Sign changes of ``Q`` ignoring entries below ``rel_floor * max|Q|``."""
    Q = np.asarray(Q, dtype=float)
    scale = np.max(np.abs(Q)) if Q.size else 0.0
    if scale == 0:
        return 0
    s = np.sign(Q[np.abs(Q) > rel_floor * scale])
    return int(np.count_nonzero(s[1:] != s[:-1]))


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    grid: RadialGrid
    Q: np.ndarray
    nodes: int
    s0: float
    residual: float
    energy: float
    k0: float
    spec: NonlinearitySpec | None = None

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def center_value(self) -> float:
        """Discrete profile extrapolated to ``r = 0`` (even in ``r``)."""
        r2 = self.grid.r[:4] ** 2
        return float(np.polyval(np.polyfit(r2, self.Q[:4], 3), 0.0))

    def state(self) -> FieldPair:
        return FieldPair(self.Q, np.zeros_like(self.Q), self.grid)


def nehari_residual(profile, spec: NonlinearitySpec | None = None, grid: RadialGrid | None = None) -> float:
    """``|K0(Q)|``; accepts a profile or a raw field plus its grid."""
    if isinstance(profile, StationaryProfile):
        Q, grid = profile.Q, profile.grid
        spec = spec if spec is not None else profile.spec
    else:
        if grid is None:
            raise ValueError("a grid is required when passing a raw field")
        Q = profile
    return abs(k0(Q, spec, grid))


def _scan_bracket(spec, d, nodes, s_lo, s_hi, factor, shot_kw):
    s = s_lo
    prev = None
    while s <= s_hi:
        res = shoot(spec, d, s, max_zeros=nodes + 1, **shot_kw)
        if res.outcome == "unresolved":
            raise ShootingError(f"trajectory for s0 = {s:.6g} was not classified before Rmax")
        if res.zeros > nodes or res.outcome == "decays" and res.zeros == nodes:
            if prev is None:
                raise BracketNotFound(f"already {res.zeros} zeros at the first scanned s0", (s_lo, s))
            if prev.zeros != nodes:
                raise BracketNotFound(
                    f"zero count jumps from {prev.zeros} to {res.zeros}; no profile with {nodes} zeros",
                    (s_lo, s),
                )
            return prev, res
        prev = res
        s *= factor
    raise BracketNotFound(f"no trajectory with more than {nodes} zeros", (s_lo, s_hi))


def _bisect(spec, d, nodes, lo, hi, shot_kw, rel_tol=4e-16, max_iter=200):
    if hi.outcome == "decays" and hi.zeros == nodes:
        return hi
    for _ in range(max_iter):
        mid_s = 0.5 * (lo.s0 + hi.s0)
        if mid_s in (lo.s0, hi.s0) or hi.s0 - lo.s0 <= rel_tol * hi.s0:
            break
        mid = shoot(spec, d, mid_s, max_zeros=nodes + 1, **shot_kw)
        if mid.outcome == "decays" and mid.zeros == nodes:
            return mid
        if mid.zeros > nodes:
            hi = mid
        else:
            lo = mid
    # the lower shot follows the profile furthest before turning away
    return lo


def _initial_profile(shot: ShotResult, grid: RadialGrid) -> np.ndarray:
    r = grid.r
    r_cut = shot.r_cut if shot.r_cut > 0 else shot.r_end
    inside = r <= r_cut
    Q = np.zeros(grid.N)
    Q[inside] = shot.evaluate(r[inside])[0]
    if np.any(~inside) and np.any(inside):
        k = grid.d
        q_cut = shot.evaluate([r_cut])[0, 0]
        tail = lambda x: x ** (-(k - 1) / 2.0) * np.exp(-x)  # noqa: E731
        Q[~inside] = q_cut * tail(r[~inside]) / tail(r_cut)
    return Q


def _residual(grid, spec, Q):
    res = grid.stiffness @ Q + Q - f_eval(spec, Q)
    return res, float(np.sqrt(grid.l2_sq(res)))


def _roundoff_floor(grid, spec, Q):
    # residual evaluation cannot be more accurate than this
    terms = np.abs(grid.stiffness) @ np.abs(Q) + np.abs(Q) + np.abs(f_eval(spec, Q))
    return 64 * np.finfo(float).eps * float(np.sqrt(grid.l2_sq(terms)))


def _newton(grid, spec, Q, tol, max_iter=50):
    """Damped Newton; the target is ``max(tol, round-off floor)``."""
    A = grid.stiffness
    eye = sp.identity(grid.N, format="csr")
    res, nrm = _residual(grid, spec, Q)
    for it in range(max_iter):
        target = max(tol, _roundoff_floor(grid, spec, Q))
        if nrm <= target:
            return Q, nrm
        J = sp.csc_matrix(A + eye - sp.diags(fprime_eval(spec, Q)))
        dQ = spsolve(J, -res)
        lam = 1.0
        while lam > 1e-6:
            trial = Q + lam * dQ
            res_t, nrm_t = _residual(grid, spec, trial)
            if np.isfinite(nrm_t) and nrm_t < nrm:
                break
            lam *= 0.5
        else:
            raise NewtonDivergence(f"line search failed at iteration {it}, residual {nrm:.3e}")
        Q, res, nrm = trial, res_t, nrm_t
    if nrm > max(tol, _roundoff_floor(grid, spec, Q)):
        raise NewtonDivergence(f"residual {nrm:.3e} after {max_iter} iterations exceeds {tol:.1e}")
    return Q, nrm


def find_stationary(
    spec: NonlinearitySpec,
    d: int,
    nodes: int = 0,
    grid: RadialGrid | None = None,
    R: float = 30.0,
    N: int = 1024,
    tol: float = 1e-10,
    s0_max: float | None = None,
    scan_factor: float = 1.1,
    decay_tol: float = DECAY_TOL,
) -> StationaryProfile:
    """Radial equilibrium with exactly ``nodes`` sign changes.

    ``tol`` bounds the weighted residual of the discrete equation after
    Newton polishing. The reported ``s0`` is the bisected shooting value
    of the ODE; ``center_value`` gives the discrete profile at the origin.
    """
    if not isinstance(nodes, (int, np.integer)) or nodes < 0:
        raise ValueError(f"nodes must be a non-negative integer, got {nodes!r}")
    if grid is None:
        grid = build_grid(d, R, N)
    elif grid.d != d:
        raise ValueError(f"grid dimension {grid.d} differs from d = {d}")
    spec.check_dimension(d)

    zeta = positive_fixed_point(spec)
    s_lo = zeta * (1.0 + 1e-9)
    s_hi = s0_max if s0_max is not None else 1e3 * zeta
    shot_kw = {"Rmax": max(2.0 * grid.R, 60.0), "decay_tol": decay_tol}
    lo, hi = _scan_bracket(spec, d, nodes, s_lo, s_hi, scan_factor, shot_kw)
    best = _bisect(spec, d, nodes, lo, hi, shot_kw)
    logger.debug("shooting value %.16g (%s, %d zeros)", best.s0, best.outcome, best.zeros)

    Q, resid = _newton(grid, spec, _initial_profile(best, grid), tol)
    got = count_sign_changes(Q)
    if got != nodes:
        raise NewtonDivergence(f"Newton converged to a profile with {got} sign changes, expected {nodes}")
    state = FieldPair(Q, np.zeros(grid.N), grid)
    return StationaryProfile(
        grid=grid,
        Q=state.u,
        nodes=got,
        s0=float(best.s0),
        residual=resid,
        energy=energy(state, spec),
        k0=k0(Q, spec, grid),
        spec=spec,
    )

"""Time integration of the damped Klein-Gordon equation.

The linear part ``u_tt + 2 alpha u_t - Lap u + u = 0`` is propagated
exactly, mode by mode, in the eigenbasis of the discrete operator
``-Lap_h + I``. The nonlinearity is added by Strang splitting
(half kick, exact linear flow, half kick).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .functionals import EnergyReport, energy_report
from .grid import FieldPair, RadialGrid
from .nonlinearity import NonlinearitySpec, f_eval

__all__ = [
    "SimulationParams",
    "LinearFlow",
    "Trajectory",
    "linear_multipliers",
    "linear_step",
    "step",
    "evolve",
    "decay_rate",
]

logger = logging.getLogger(__name__)

# below this |nu - alpha^2| t^2 the oscillatory/hyperbolic forms are replaced by series
_SERIES_CUTOFF = 1e-8


def decay_rate(alpha: float) -> float:
    """Sharp exponential decay rate of the damped linear flow."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if alpha <= 1.0:
        return float(alpha)
    return float(alpha - np.sqrt(alpha * alpha - 1.0))


def _multipliers(alpha: float, nu, t: float):
    """Vectorised ``(m, mt, dm, dmt)`` for ``x'' + 2 alpha x' + nu x = 0``.

    ``m`` is the response to ``(1, 0)``, ``mt`` to ``(0, 1)``; ``dm`` and
    ``dmt`` are their time derivatives.
    """
    nu = np.asarray(nu, dtype=float)
    s2 = nu - alpha * alpha
    z = s2 * t * t
    osc = z > _SERIES_CUTOFF
    hyp = z < -_SERIES_CUTOFF
    ser = ~(osc | hyp)

    decay = np.exp(-alpha * t)
    eC = np.empty_like(s2)  # e^{-alpha t} * C
    eS = np.empty_like(s2)  # e^{-alpha t} * S

    s = np.sqrt(s2[osc])
    eC[osc] = decay * np.cos(s * t)
    eS[osc] = decay * np.sin(s * t) / s

    sig = np.sqrt(-s2[hyp])
    grow = np.exp((sig - alpha) * t)
    shrink = np.exp(-(sig + alpha) * t)
    eC[hyp] = 0.5 * (grow + shrink)
    eS[hyp] = 0.5 * (grow - shrink) / sig

    zs = z[ser]
    eC[ser] = decay * (1.0 - zs / 2.0 + zs * zs / 24.0)
    eS[ser] = decay * t * (1.0 - zs / 6.0 + zs * zs / 120.0)

    m = eC + alpha * eS
    mt = eS
    dm = -nu * mt
    dmt = m - 2.0 * alpha * mt
    return m, mt, dm, dmt


def linear_multipliers(alpha: float, nu: float, t: float) -> tuple[float, float]:
    """Position responses ``(m, mt)`` of one damped mode after time ``t``."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    m, mt, _, _ = _multipliers(alpha, np.array([nu]), t)
    return float(m[0]), float(mt[0])


@dataclass(frozen=True)
class SimulationParams:
    alpha: float
    dt: float = 0.01
    T: float = 20.0
    blowup_norm_cap: float = 1e6
    record_every: int = 10

    def __post_init__(self):
        errors = []
        if not self.alpha >= 0:
            errors.append(f"alpha must be >= 0, got {self.alpha}")
        if not self.dt > 0:
            errors.append(f"dt must be positive, got {self.dt}")
        if not self.T > 0:
            errors.append(f"T must be positive, got {self.T}")
        if not self.blowup_norm_cap > 0:
            errors.append(f"blowup_norm_cap must be positive, got {self.blowup_norm_cap}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            errors.append(f"record_every must be a positive integer, got {self.record_every}")
        if errors:
            raise ValueError("; ".join(errors))


class LinearFlow:
    """Exact damped linear flow on a grid.

    Holds the eigen-decomposition of ``L0 = -Lap_h + I``: eigenvalues
    ``nu`` (ascending) and eigenvectors orthonormal in the weighted inner
    product. Immutable after construction.
    """

    def __init__(self, grid: RadialGrid, alpha: float):
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        self.grid = grid
        self.alpha = float(alpha)
        S = grid.symmetric_stiffness + np.eye(grid.N)
        nu, V = np.linalg.eigh(S)
        sw = np.sqrt(grid.w)
        self.nu = nu
        # modal coefficients c = V^T W^{1/2} u, and back u = W^{-1/2} V c
        self._to_modes = np.ascontiguousarray((V * sw[:, None]).T)
        self._from_modes = np.ascontiguousarray(V / sw[:, None])
        for arr in (self.nu, self._to_modes, self._from_modes):
            arr.setflags(write=False)

    @property
    def modes(self) -> np.ndarray:
        """Eigenvectors as columns, weighted-orthonormal."""
        return self._from_modes

    def to_modes(self, x: np.ndarray) -> np.ndarray:
        return self._to_modes @ x

    def from_modes(self, c: np.ndarray) -> np.ndarray:
        return self._from_modes @ c

    def propagator(self, dt: float):
        return _multipliers(self.alpha, self.nu, dt)

    def apply(self, u: np.ndarray, v: np.ndarray, mult) -> tuple[np.ndarray, np.ndarray]:
        m, mt, dm, dmt = mult
        c = self._to_modes @ np.column_stack((u, v))
        a, b = c[:, 0], c[:, 1]
        c2 = np.column_stack((m * a + mt * b, dm * a + dmt * b))
        out = self._from_modes @ c2
        return out[:, 0], out[:, 1]


def _check_grid(flow: LinearFlow, state: FieldPair) -> None:
    if state.grid is not flow.grid and (state.grid.N, state.grid.R, state.grid.d) != (
        flow.grid.N,
        flow.grid.R,
        flow.grid.d,
    ):
        raise ValueError("state and linear flow live on different grids")


def linear_step(flow: LinearFlow, state: FieldPair, dt: float) -> FieldPair:
    """Advance the damped linear equation exactly by ``dt``."""
    _check_grid(flow, state)
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    u, v = flow.apply(state.u, state.v, flow.propagator(dt))
    return FieldPair(u, v, state.grid)


def _strang(u, v, spec, flow, mult, dt):
    v = v + 0.5 * dt * f_eval(spec, u)
    u, v = flow.apply(u, v, mult)
    v = v + 0.5 * dt * f_eval(spec, u)
    return u, v


def step(state: FieldPair, spec: NonlinearitySpec | None, flow: LinearFlow, dt: float) -> FieldPair:
    """One Strang step (kick, exact linear drift, kick).

    Raises ``FloatingPointError`` when non-finite values appear, which
    signals imminent blow-up rather than a fault.
    """
    _check_grid(flow, state)
    with np.errstate(over="ignore", invalid="ignore"):
        u, v = _strang(state.u, state.v, spec, flow, flow.propagator(dt), dt)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise FloatingPointError("non-finite values after step")
    return FieldPair(u, v, state.grid)


@dataclass
class Trajectory:
    """Sampled output of :func:`evolve`.

    ``times``/``states``/``reports`` are sampled every ``record_every``
    steps starting at ``t = 0``. ``reason`` is one of ``horizon``,
    ``norm_cap`` or ``nonfinite``; for the latter two the blow-up time is
    bracketed by ``[t_last_ok, t_stop]``.
    """

    params: SimulationParams
    spec: Optional[NonlinearitySpec]
    times: np.ndarray
    states: list
    reports: list
    uv: np.ndarray
    l2u_sq: np.ndarray
    linf_u: np.ndarray
    reason: str
    t_last_ok: float
    t_stop: float
    final_state: FieldPair
    final_report: EnergyReport
    max_norm: float = field(default=0.0)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E for r in self.reports])

    @property
    def k0_values(self) -> np.ndarray:
        return np.array([r.K0 for r in self.reports])

    @property
    def norms(self) -> np.ndarray:
        return np.array([r.norm for r in self.reports])

    @property
    def velocity_norms(self) -> np.ndarray:
        return np.sqrt(np.array([r.l2v_sq for r in self.reports]))

    @property
    def ydot(self) -> np.ndarray:
        return self.uv + self.alpha * self.l2u_sq

    def __len__(self) -> int:
        return len(self.times)


class _Recorder:
    def __init__(self, grid: RadialGrid, spec):
        self.grid = grid
        self.spec = spec
        self.times, self.states, self.reports = [], [], []
        self.uv, self.l2u, self.linf = [], [], []

    def record(self, t, u, v):
        state = FieldPair(u, v, self.grid)
        rep = energy_report(state, self.spec)
        self.times.append(t)
        self.states.append(state)
        self.reports.append(rep)
        self.uv.append(self.grid.inner(u, v))
        self.l2u.append(self.grid.l2_sq(u))
        self.linf.append(float(np.max(np.abs(u))))
        return rep


def evolve(
    state0: FieldPair,
    spec: NonlinearitySpec | None,
    params: SimulationParams,
    flow: LinearFlow | None = None,
) -> Trajectory:
    """Integrate until ``T``, the norm cap, or non-finite values."""
    if not isinstance(params, SimulationParams):
        raise TypeError("params must be a SimulationParams")
    grid = state0.grid
    if flow is None:
        flow = LinearFlow(grid, params.alpha)
    elif flow.alpha != params.alpha:
        raise ValueError(f"flow damping {flow.alpha} differs from params.alpha {params.alpha}")
    _check_grid(flow, state0)

    dt = params.dt
    nsteps = int(np.ceil(params.T / dt - 1e-9))
    mult = flow.propagator(dt)
    rec = _Recorder(grid, spec)

    u, v = state0.u.copy(), state0.v.copy()
    last = rec.record(0.0, u, v)
    max_norm = last.norm
    if max_norm > params.blowup_norm_cap:
        return _finish(rec, params, spec, "norm_cap", 0.0, 0.0, state0, last, max_norm)

    reason = "horizon"
    t_last_ok = t = 0.0
    final_u, final_v = u, v
    for k in range(1, nsteps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            un, vn = _strang(u, v, spec, flow, mult, dt)
        t = k * dt
        if not (np.all(np.isfinite(un)) and np.all(np.isfinite(vn))):
            reason = "nonfinite"
            break
        gu = grid.gradient @ un
        norm = float(np.sqrt(np.dot(grid.w_face * gu, gu) + grid.l2_sq(un) + grid.l2_sq(vn)))
        max_norm = max(max_norm, norm)
        if not np.isfinite(norm):
            reason = "nonfinite"
            break
        if norm > params.blowup_norm_cap:
            reason = "norm_cap"
            final_u, final_v = un, vn
            break
        u, v = un, vn
        final_u, final_v = u, v
        t_last_ok = t
        if k % params.record_every == 0:
            rec.record(t, u, v)

    if reason == "horizon":
        t_stop = t_last_ok
        if rec.times[-1] != t_last_ok:
            final_state = FieldPair(final_u, final_v, grid)
            final_report = energy_report(final_state, spec)
        else:
            final_state, final_report = rec.states[-1], rec.reports[-1]
    else:
        t_stop = t
        final_state = FieldPair(final_u, final_v, grid)
        final_report = energy_report(final_state, spec)
        logger.debug("evolution stopped (%s) in [%g, %g]", reason, t_last_ok, t_stop)
    return _finish(rec, params, spec, reason, t_last_ok, t_stop, final_state, final_report, max_norm)


def _finish(rec, params, spec, reason, t_last_ok, t_stop, final_state, final_report, max_norm):
    return Trajectory(
        params=params,
        spec=spec,
        times=np.array(rec.times),
        states=rec.states,
        reports=rec.reports,
        uv=np.array(rec.uv),
        l2u_sq=np.array(rec.l2u),
        linf_u=np.array(rec.linf),
        reason=reason,
        t_last_ok=t_last_ok,
        t_stop=t_stop,
        final_state=final_state,
        final_report=final_report,
        max_norm=max_norm,
    )

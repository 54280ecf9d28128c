"""Energy, Nehari functional and the identities tying them to the flow."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import FieldPair, RadialGrid
from .nonlinearity import F_eval, NonlinearitySpec, ar_slack, f_eval

__all__ = [
    "EnergyReport",
    "CoercivityCheck",
    "energy",
    "k0",
    "energy_report",
    "coercivity_check",
    "dissipation_residual",
]


@dataclass(frozen=True)
class EnergyReport:
    E: float
    K0: float
    h1_sq: float
    l2v_sq: float
    ar_slack: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.h1_sq + self.l2v_sq))


def energy(state: FieldPair, spec: NonlinearitySpec | None) -> float:
    """Lyapunov functional ``int 1/2|grad u|^2 + 1/2 u^2 + 1/2 v^2 - F(u)``."""
    g = state.grid
    return 0.5 * (g.h1_sq(state.u) + g.l2_sq(state.v)) - g.integrate(F_eval(spec, state.u))


def k0(u, spec: NonlinearitySpec | None, grid: RadialGrid) -> float:
    """Nehari functional ``int |grad u|^2 + u^2 - u f(u)``."""
    u = grid.check_field(u, "u")
    return grid.h1_sq(u) - grid.integrate(u * f_eval(spec, u))


def energy_report(state: FieldPair, spec: NonlinearitySpec | None) -> EnergyReport:
    g = state.grid
    u, v = state.u, state.v
    h1 = g.h1_sq(u)
    l2v = g.l2_sq(v)
    Fu = g.integrate(F_eval(spec, u))
    ufu = g.integrate(u * f_eval(spec, u))
    slack = ar_slack(spec, u, g) if spec is not None else 0.0
    return EnergyReport(E=0.5 * (h1 + l2v) - Fu, K0=h1 - ufu, h1_sq=h1, l2v_sq=l2v, ar_slack=slack)


class CoercivityCheck(NamedTuple):
    lhs: float
    rhs: float
    ar_slack: float
    hypothesis_violated: bool


def coercivity_check(state: FieldPair, spec: NonlinearitySpec, tol: float = 1e-10) -> CoercivityCheck:
    """Both sides of ``gamma (||u||_H1^2 + ||v||^2) <= 2(1+gamma) E - K0``.

    The exact discrete identity is
    ``lhs = rhs - ||v||^2 + ar_slack``; when ``ar_slack > tol``
    the supplied ``gamma`` does not satisfy the Ambrosetti-Rabinowitz
    condition on this field and ``hypothesis_violated`` is set.
    """
    rep = energy_report(state, spec)
    gam = spec.gamma
    lhs = gam * (rep.h1_sq + rep.l2v_sq)
    rhs = 2.0 * (1.0 + gam) * rep.E - rep.K0
    scale = tol * max(1.0, abs(rhs))
    return CoercivityCheck(lhs, rhs, rep.ar_slack, rep.ar_slack > scale)


def _uniform(t: np.ndarray) -> None:
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise ValueError("sample times must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ValueError("sample times must be uniformly spaced")


def dissipation_residual(samples, alpha: float, spec: NonlinearitySpec | None = None) -> float:
    """Worst violation of ``E(t2) - E(t1) = -2 alpha int_t1^t2 ||v||^2``.

    ``samples`` is either a :class:`~kgdamp.propagator.Trajectory` or a
    sequence of ``(t, FieldPair)`` pairs (then ``spec`` is required).
    The time integral uses the trapezoidal rule on the samples.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if hasattr(samples, "times") and hasattr(samples, "reports"):
        t = np.asarray(samples.times, dtype=float)
        E = np.array([r.E for r in samples.reports])
        l2v = np.array([r.l2v_sq for r in samples.reports])
    else:
        samples = list(samples)
        if len(samples) < 2:
            raise ValueError("need at least two samples")
        t = np.array([s[0] for s in samples], dtype=float)
        E = np.array([energy(s[1], spec) for s in samples])
        l2v = np.array([s[1].grid.l2_sq(s[1].v) for s in samples])
    if t.size < 2:
        raise ValueError("need at least two samples")
    _uniform(t)
    return _dissipation_from_series(t, E, l2v, alpha)


def _dissipation_from_series(t: np.ndarray, E: np.ndarray, l2v: np.ndarray, alpha: float) -> float:
    dissipated = np.concatenate([[0.0], np.cumsum(0.5 * (l2v[1:] + l2v[:-1]) * np.diff(t))])
    # residual between (t1, t2) is defect[t2] - defect[t1]; the worst pair spans max and min
    defect = E - E[0] + 2.0 * alpha * dissipated
    return float(defect.max() - defect.min())


def quadratic_and_potential(u, spec: NonlinearitySpec, grid: RadialGrid) -> tuple[float, float]:
    """``(||u||_H1^2, int u f(u))``, the two parts of ``K0``."""
    u = grid.check_field(u, "u")
    return grid.h1_sq(u), grid.integrate(u * f_eval(spec, u))

"""Arithmetic of spectral-gap conditions for Lipschitz invariant graphs.

A linear semigroup split as ``X = X1 + X2`` with rates ``beta1 > beta2``
and constants ``C1, C2`` admits an invariant Lipschitz graph for the
perturbation ``R`` when ``(sqrt C1 + sqrt C2)^2 Lip(R) / (beta1 - beta2) < 1``.
This module evaluates that condition, the admissible exponent window
``[gamma2, gamma1]`` and the resulting Lipschitz bounds. It does not
construct the manifolds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "GapConditionReport",
    "ManifoldDims",
    "CompoundReport",
    "lambda_gamma",
    "gap_condition",
    "gamma_roots",
    "lipg_bound",
    "foliation_completeness",
    "center_pair_compound",
    "manifold_dimensions",
]

MIN_TOL = 1e-10


def _validate(C1, C2, beta1, beta2, lipR=0.0):
    errors = []
    if not C1 > 0:
        errors.append(f"C1 must be positive, got {C1}")
    if not C2 > 0:
        errors.append(f"C2 must be positive, got {C2}")
    if not beta2 >= 0:
        errors.append(f"beta2 must be non-negative, got {beta2}")
    if not beta1 > beta2:
        errors.append(f"need beta2 < beta1, got beta1={beta1}, beta2={beta2}")
    if not lipR >= 0:
        errors.append(f"lipR must be non-negative, got {lipR}")
    if errors:
        raise ValueError("; ".join(errors))


def lambda_gamma(C1: float, C2: float, beta1: float, beta2: float, gamma: float) -> float:
    """``C1 / (beta1 - gamma) + C2 / (gamma - beta2)`` on ``(beta2, beta1)``."""
    _validate(C1, C2, beta1, beta2)
    if not beta2 < gamma < beta1:
        raise ValueError(f"gamma={gamma} must lie strictly between beta2={beta2} and beta1={beta1}")
    return C1 / (beta1 - gamma) + C2 / (gamma - beta2)


@dataclass(frozen=True)
class GapConditionReport:
    C1: float
    C2: float
    beta1: float
    beta2: float
    lipR: float
    condition_value: float
    holds: bool
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    lipg_bound: Optional[float] = None


def _condition_value(C1, C2, beta1, beta2, lipR):
    return (math.sqrt(C1) + math.sqrt(C2)) ** 2 / (beta1 - beta2) * lipR


def _roots(C1, C2, beta1, beta2, lipR):
    if lipR == 0:
        return float(beta1), float(beta2)
    # lipR (C1 (g - beta2) + C2 (beta1 - g)) = (beta1 - g)(g - beta2)
    b = lipR * (C1 - C2) - (beta1 + beta2)
    c = beta1 * beta2 + lipR * (C2 * beta1 - C1 * beta2)
    disc = max(b * b - 4.0 * c, 0.0)
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1 = q
    r2 = c / q if q != 0 else 0.0
    hi, lo = max(r1, r2), min(r1, r2)
    return _polish(C1, C2, beta1, beta2, lipR, hi), _polish(C1, C2, beta1, beta2, lipR, lo)


def _polish(C1, C2, beta1, beta2, lipR, g, max_iter=4):
    # Newton on lambda(g) lipR = 1 itself; the cleared quadratic loses digits near the poles
    phi = (C1 / (beta1 - g) + C2 / (g - beta2)) * lipR - 1.0
    for _ in range(max_iter):
        dphi = lipR * (C1 / (beta1 - g) ** 2 - C2 / (g - beta2) ** 2)
        if dphi == 0:
            break
        g_new = g - phi / dphi
        if not beta2 < g_new < beta1:
            break
        phi_new = (C1 / (beta1 - g_new) + C2 / (g_new - beta2)) * lipR - 1.0
        if abs(phi_new) >= abs(phi):
            break
        g, phi = g_new, phi_new
    return float(g)


def gamma_roots(C1: float, C2: float, beta1: float, beta2: float, lipR: float) -> tuple[float, float]:
    """``(gamma1, gamma2)`` solving ``lambda(gamma) lipR = 1``, ``gamma2 < gamma1``."""
    _validate(C1, C2, beta1, beta2, lipR)
    val = _condition_value(C1, C2, beta1, beta2, lipR)
    if not val < 1:
        raise ValueError(f"gap condition fails (value {val:.6g} >= 1); the roots are undefined")
    return _roots(C1, C2, beta1, beta2, lipR)


def _window_min(fn, lo, hi):
    res = minimize_scalar(fn, bounds=(lo, hi), method="bounded", options={"xatol": MIN_TOL * max(1.0, hi)})
    return float(res.fun)


def lipg_bound(C1: float, C2: float, beta1: float, beta2: float, lipR: float) -> float:
    """Bound on ``Lip(g)``: minimum over the window of
    ``C1 C2 lipR gamma / (beta1 (gamma - beta2) (1 - lambda(gamma) lipR))``."""
    g1, g2 = gamma_roots(C1, C2, beta1, beta2, lipR)
    if lipR == 0:
        return 0.0

    def fn(g):
        lam = C1 / (beta1 - g) + C2 / (g - beta2)
        den = beta1 * (g - beta2) * (1.0 - lam * lipR)
        return C1 * C2 * lipR * g / den if den > 0 else np.inf

    return _window_min(fn, g2, g1)


def gap_condition(C1: float, C2: float, beta1: float, beta2: float, lipR: float) -> GapConditionReport:
    _validate(C1, C2, beta1, beta2, lipR)
    val = _condition_value(C1, C2, beta1, beta2, lipR)
    holds = bool(val < 1)
    if not holds:
        return GapConditionReport(C1, C2, beta1, beta2, lipR, val, False)
    g1, g2 = _roots(C1, C2, beta1, beta2, lipR)
    return GapConditionReport(C1, C2, beta1, beta2, lipR, val, True, g1, g2, lipg_bound(C1, C2, beta1, beta2, lipR))


@dataclass(frozen=True)
class CompoundReport:
    first: float
    second: float
    product: float
    holds: bool


def foliation_completeness(C1: float, C2: float, beta1: float, beta2: float, lipR: float) -> CompoundReport:
    """Product of the leaf-map minimum and :func:`lipg_bound`; the foliation
    over the graph is complete when it is below one."""
    g1, g2 = gamma_roots(C1, C2, beta1, beta2, lipR)
    if lipR == 0:
        return CompoundReport(0.0, 0.0, 0.0, True)

    def fn(g):
        lam = C1 / (beta1 - g) + C2 / (g - beta2)
        den = (beta1 - g) * (1.0 - lam * lipR)
        return C1 * C2 * lipR / den if den > 0 else np.inf

    first = _window_min(fn, g2, g1)
    second = lipg_bound(C1, C2, beta1, beta2, lipR)
    return CompoundReport(first, second, first * second, bool(first * second < 1))


def center_pair_compound(C1: float, C2: float, eps: float, eta: float, lipR: float, lipR_tilde: float) -> CompoundReport:
    """Compound smallness check for the centre-stable/centre-unstable pair.

    Forward rates are ``1 - eps > 1 - eta``; the time-reversed problem has
    rates ``1/(1+eps) > 1/(1+eta)`` with the roles of ``C1`` and ``C2``
    exchanged.
    """
    if not 0 <= eps < eta <= 1:
        raise ValueError(f"need 0 <= eps < eta <= 1, got eps={eps}, eta={eta}")
    first = lipg_bound(C1, C2, 1.0 - eps, 1.0 - eta, lipR)
    b1, b2 = 1.0 / (1.0 + eps), 1.0 / (1.0 + eta)
    # reversed window: lambda~ has C2 at the upper pole and C1 at the lower one
    gt2, gt1 = gamma_roots(C2, C1, b1, b2, lipR_tilde)
    if lipR_tilde == 0:
        second = 0.0
    else:

        def fn(g):
            lam = C2 / (b1 - g) + C1 / (g - b2)
            den = (1.0 + eta - 1.0 / g) * (1.0 - lam * lipR_tilde)
            return C1 * C2 * lipR_tilde * (1.0 + eps) * (1.0 + eta) / den if den > 0 else np.inf

        second = _window_min(fn, gt1, gt2)
    return CompoundReport(first, second, first * second, bool(first * second < 1))


@dataclass(frozen=True)
class ManifoldDims:
    dim_u: int
    dim_c: int
    stable_codim_finite: bool = False


def manifold_dimensions(report) -> ManifoldDims:
    """Unstable and centre dimensions from a spectral report.

    Each ``mu < 0`` gives exactly one root ``-alpha + sqrt(alpha^2 - mu) > 0``;
    the centre direction is the (at most one-dimensional) kernel.
    """
    mu = np.asarray(report.mu, dtype=float)
    dim_c = 1 if report.kernel == "one_dimensional" else 0
    return ManifoldDims(int(np.count_nonzero(mu < 0)), dim_c)

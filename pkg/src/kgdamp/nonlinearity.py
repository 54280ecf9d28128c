"""Power-sum nonlinearities ``f(y) = sum a_i |y|^(p_i-1) y - sum b_j |y|^(q_j-1) y``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid

__all__ = ["NonlinearitySpec", "pure_power", "f_eval", "F_eval", "fprime_eval", "ar_slack"]


def _terms(pairs) -> tuple[tuple[float, float], ...]:
    out = []
    for pair in pairs:
        c, e = pair
        out.append((float(c), float(e)))
    return tuple(out)


@dataclass(frozen=True)
class NonlinearitySpec:
    """Coefficients and exponents of a power-sum nonlinearity.

    ``attract`` holds ``(a_i, p_i)`` pairs, ``repel`` holds ``(b_j, q_j)``
    pairs, ``gamma`` is the Ambrosetti-Rabinowitz constant and
    ``beta_holder`` the recorded Hoelder exponent of ``f'``.
    """

    attract: tuple[tuple[float, float], ...]
    repel: tuple[tuple[float, float], ...] = ()
    gamma: float = 1.0
    beta_holder: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "attract", _terms(self.attract))
        object.__setattr__(self, "repel", _terms(self.repel))
        errors = []
        if not self.attract:
            errors.append("at least one attractive term is required")
        for a, p in self.attract:
            if a < 0:
                errors.append(f"attractive coefficient {a} < 0")
            if p <= 1:
                errors.append(f"attractive exponent {p} must exceed 1")
        for b, q in self.repel:
            if b < 0:
                errors.append(f"repulsive coefficient {b} < 0")
            if q <= 1:
                errors.append(f"repulsive exponent {q} must exceed 1")
        if self.attract and not any(a > 0 for a, _ in self.attract):
            errors.append("some attractive coefficient must be positive")
        if self.attract and self.repel:
            pmin = min(p for _, p in self.attract)
            qmax = max(q for _, q in self.repel)
            if qmax >= pmin:
                errors.append(f"need q_j < p_i for all i, j (max q = {qmax}, min p = {pmin})")
        if not self.gamma > 0:
            errors.append(f"gamma must be positive, got {self.gamma}")
        if errors:
            raise ValueError("; ".join(errors))
        if self.beta_holder is None:
            exps = [e for _, e in self.attract + self.repel]
            object.__setattr__(self, "beta_holder", min(1.0, min(exps) - 1.0))

    @property
    def theta(self) -> float:
        """Dominant exponent ``max p_i``."""
        return max(p for a, p in self.attract if a > 0)

    def check_dimension(self, d: int) -> None:
        """Reject exponents that are not energy subcritical in dimension ``d``."""
        if d >= 3:
            crit = (d + 2) / (d - 2)
            bad = [p for _, p in self.attract if p >= crit]
            if bad:
                raise ValueError(f"exponents {bad} are not below the critical value {crit:g} for d={d}")

    def f(self, y):
        return f_eval(self, y)

    def F(self, y):
        return F_eval(self, y)

    def fprime(self, y):
        return fprime_eval(self, y)


def pure_power(theta: float, gamma: float | None = None) -> NonlinearitySpec:
    """``f(y) = |y|^(theta-1) y``; ``gamma`` defaults to the sharp ``(theta-1)/2``."""
    if gamma is None:
        gamma = (theta - 1.0) / 2.0
    return NonlinearitySpec(attract=((1.0, theta),), gamma=gamma)


# ``spec=None`` stands for f = 0 (the linear equation) throughout the package.


def f_eval(spec: NonlinearitySpec | None, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if spec is None:
        return out
    ay = np.abs(y)
    for a, p in spec.attract:
        out = out + a * ay ** (p - 1) * y
    for b, q in spec.repel:
        out = out - b * ay ** (q - 1) * y
    return out


def F_eval(spec: NonlinearitySpec | None, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if spec is None:
        return out
    ay = np.abs(y)
    for a, p in spec.attract:
        out = out + a * ay ** (p + 1) / (p + 1)
    for b, q in spec.repel:
        out = out - b * ay ** (q + 1) / (q + 1)
    return out


def fprime_eval(spec: NonlinearitySpec | None, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if spec is None:
        return out
    ay = np.abs(y)
    for a, p in spec.attract:
        out = out + a * p * ay ** (p - 1)
    for b, q in spec.repel:
        out = out - b * q * ay ** (q - 1)
    return out


def ar_slack(spec: NonlinearitySpec, u, grid: RadialGrid) -> float:
    """Quadrature of ``2(1+gamma) F(u) - u f(u)``; non-positive when the
    Ambrosetti-Rabinowitz condition holds on ``u``."""
    u = grid.check_field(u, "u")
    g = 2.0 * (1.0 + spec.gamma) * F_eval(spec, u) - u * f_eval(spec, u)
    return grid.integrate(g)

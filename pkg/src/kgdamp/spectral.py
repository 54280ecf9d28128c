"""Spectrum of the linearisation ``L = -Lap + 1 + V`` about an equilibrium.

For an equilibrium ``Q`` the potential is ``V = -f'(Q)``. The operator is
assembled with the two-point finite-volume stencil and symmetrised by
``W^{1/2}``, the discrete form of the substitution ``w = r^((d-1)/2) u``.
The result is a symmetric tridiagonal matrix. In one dimension this is
the even sector: Neumann at the origin, Dirichlet at ``R``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.sparse.linalg import eigs

from .grid import RadialGrid, build_grid
from .nonlinearity import NonlinearitySpec, f_eval, fprime_eval

__all__ = [
    "LinearizedOperator",
    "Spectrum",
    "KernelResult",
    "EssentialSpectrum",
    "InstabilityCertificate",
    "SpectralReport",
    "assemble_linearized",
    "operator_from_potential",
    "discrete_spectrum",
    "kernel_defect",
    "kernel_test",
    "a_alpha_spectrum",
    "a_alpha_block",
    "a_alpha_block_eigenvalues",
    "essential_spectrum_descriptor",
    "instability_certificate",
    "observation_bound",
    "spectral_report",
]

logger = logging.getLogger(__name__)

GAP_TOL = 1e-3
KERNEL_TOL = 1e-6
DENSE_BLOCK_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    """Symmetric tridiagonal ``W^{1/2} (-Lap_h + 1 + V) W^{-1/2}``.

    ``potential_fn`` (a callable of ``r``) enables re-assembly on refined
    grids and the continuous kernel test; it is optional.
    """

    grid: RadialGrid
    potential: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    potential_fn: Optional[Callable] = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.grid.N

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def sparse(self) -> sp.csr_matrix:
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def refined(self, factor: int = 2) -> "LinearizedOperator":
        if self.potential_fn is None:
            raise ValueError("refinement needs a potential function")
        return operator_from_potential(self.grid.refined(factor), self.potential_fn)


def _tridiagonal(grid: RadialGrid, V: np.ndarray):
    B = sp.diags(np.sqrt(grid.w_face)) @ grid.gradient @ sp.diags(1.0 / np.sqrt(grid.w))
    S = sp.csr_matrix(B.T @ B)
    diag = S.diagonal() + 1.0 + V
    off = 0.5 * (S.diagonal(1) + S.diagonal(-1))
    return diag, off


def operator_from_potential(grid: RadialGrid, potential) -> LinearizedOperator:
    """``L = -Lap + 1 + V`` with ``V`` given as a callable or grid values."""
    if grid.order != 2:
        grid = build_grid(grid.d, grid.R, grid.N, order=2)
    if callable(potential):
        fn = potential
        V = np.asarray(fn(grid.r), dtype=float) * np.ones(grid.N)
    else:
        fn = None
        V = grid.check_field(potential, "potential")
    diag, off = _tridiagonal(grid, V)
    for arr in (V, diag, off):
        arr.setflags(write=False)
    return LinearizedOperator(grid, V, diag, off, fn)


def _even_spline(r: np.ndarray, V: np.ndarray, R: float):
    # mirror through r = 0 and pin V = 0 past the Dirichlet face
    rr = np.concatenate([-r[::-1], r])
    vv = np.concatenate([V[::-1], V])
    spline = CubicSpline(rr, vv, bc_type="not-a-knot")

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= R, spline(np.clip(x, rr[0], rr[-1])), 0.0)

    return fn


def assemble_linearized(profile, spec: NonlinearitySpec | None = None) -> LinearizedOperator:
    """Linearisation about a :class:`~kgdamp.stationary.StationaryProfile`."""
    if spec is None:
        spec = profile.spec
    grid = profile.grid
    V = -fprime_eval(spec, profile.Q)
    fn = _even_spline(grid.r, V, grid.R)
    op = operator_from_potential(grid, V)
    return LinearizedOperator(op.grid, op.potential, op.diag, op.off, fn)


@dataclass
class Spectrum:
    """Eigenvalues below ``threshold - gap_tol``.

    ``errors`` are refinement estimates ``4/3 |mu_h - mu_{h/2}|`` (NaN if
    the operator cannot be refined); ``extrapolated`` the Richardson
    values. ``near_threshold`` lists eigenvalues within ``gap_tol`` of the
    threshold, reported but not classified.
    """

    mu: np.ndarray
    errors: np.ndarray
    extrapolated: np.ndarray
    near_threshold: np.ndarray
    threshold: float

    def __len__(self) -> int:
        return len(self.mu)


def _eigs_below(op: LinearizedOperator, upper: float) -> np.ndarray:
    lower = float(np.min(op.diag) - 2.0 * np.max(np.abs(op.off), initial=0.0)) - 1.0
    if upper <= lower:
        return np.empty(0)
    vals = sla.eigh_tridiagonal(op.diag, op.off, eigvals_only=True, select="v", select_range=(lower, upper))
    return np.sort(vals)


def discrete_spectrum(
    op: LinearizedOperator,
    count_below: float = 1.0,
    gap_tol: float = GAP_TOL,
    refine: bool = True,
) -> Spectrum:
    vals = _eigs_below(op, count_below)
    mu = vals[vals < count_below - gap_tol]
    near = vals[vals >= count_below - gap_tol]
    errors = np.full(mu.size, np.nan)
    extrap = mu.copy()
    if refine and op.potential_fn is not None and mu.size:
        fine = _eigs_below(op.refined(), count_below)
        k = min(mu.size, fine.size)
        errors[:k] = 4.0 / 3.0 * np.abs(mu[:k] - fine[:k])
        extrap[:k] = fine[:k] + (fine[:k] - mu[:k]) / 3.0
    for a in (mu, errors, extrap, near):
        a.setflags(write=False)
    return Spectrum(mu, errors, extrap, near, float(count_below))


def _as_operator(obj, spec=None) -> LinearizedOperator:
    if isinstance(obj, LinearizedOperator):
        return obj
    return assemble_linearized(obj, spec)


def kernel_defect(op, spec=None, r_match: float = 1.0, r_far: float | None = None) -> float:
    """Normalised Wronskian of the regular and decaying zero-energy solutions.

    Solves ``u'' + (d-1)/r u' = (1 + V) u`` outward from the origin and
    inward from ``r_far`` (seeded with the free decaying solution), then
    returns ``sin`` of the angle between ``(u, u')`` of the two at
    ``r_match``. Zero means a radial kernel element exists.
    """
    op = _as_operator(op, spec)
    if op.potential_fn is None:
        raise ValueError("the kernel test needs a potential function")
    d = op.grid.d
    Vf = op.potential_fn
    if r_far is None:
        r_far = min(op.grid.R, 25.0)
    r_match = min(r_match, 0.5 * r_far)

    def rhs(r, y):
        return [y[1], -(d - 1) / r * y[1] + (1.0 + float(Vf(r))) * y[0]]

    r0 = 1e-5
    c = (1.0 + float(Vf(0.0))) / d
    reg = solve_ivp(rhs, (r0, r_match), [1.0 + 0.5 * c * r0 * r0, c * r0], method="DOP853", rtol=1e-12, atol=1e-14)
    seed = np.exp(-r_far) * r_far ** (-(d - 1) / 2.0)
    dec = solve_ivp(
        rhs,
        (r_far, r_match),
        [seed, -seed * (1.0 + (d - 1) / (2.0 * r_far))],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14 * seed,
    )
    if not (reg.success and dec.success):
        raise RuntimeError(f"kernel integration failed: {reg.message if not reg.success else dec.message}")
    a, b = reg.y[:, -1], dec.y[:, -1]
    return float((a[0] * b[1] - a[1] * b[0]) / (np.hypot(*a) * np.hypot(*b)))


@dataclass(frozen=True)
class KernelResult:
    kernel: str
    defect: float
    min_abs_mu: float
    detectors_agree: bool


def kernel_test(op, spec=None, tol: float = KERNEL_TOL) -> KernelResult:
    """Radial kernel dimension of ``L``: ``trivial`` or ``one_dimensional``.

    Both the Wronskian defect and the extrapolated smallest ``|mu|`` must
    be below ``tol``; a disagreement is warned about and reported.
    """
    op = _as_operator(op, spec)
    defect = kernel_defect(op)
    spec_ = discrete_spectrum(op, count_below=1.0, gap_tol=GAP_TOL)
    if spec_.mu.size:
        min_mu = float(np.min(np.abs(spec_.extrapolated)))
    else:
        min_mu = float("inf")
    by_defect = abs(defect) <= tol
    by_mu = min_mu <= tol
    if by_defect != by_mu:
        warnings.warn(
            f"kernel detectors disagree: defect {defect:.3e}, smallest |mu| {min_mu:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    kernel = "one_dimensional" if by_defect and by_mu else "trivial"
    return KernelResult(kernel, defect, min_mu, by_defect == by_mu)


def a_alpha_spectrum(mu, alpha: float) -> list[complex]:
    """Both roots of ``z^2 + 2 alpha z + mu = 0`` for each ``mu``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    out = []
    for m in np.atleast_1d(np.asarray(mu, dtype=float)):
        disc = alpha * alpha - m
        if disc >= 0:
            q = -alpha - np.sqrt(disc)
            # product of the roots is mu; avoids cancellation in -alpha + sqrt
            other = m / q if q != 0 else 0.0
            out.extend([complex(other), complex(q)])
        else:
            s = np.sqrt(-disc)
            out.extend([complex(-alpha, s), complex(-alpha, -s)])
    return out


def a_alpha_block(op: LinearizedOperator, alpha: float) -> np.ndarray:
    """Dense first-order system ``[[0, I], [-L, -2 alpha I]]``."""
    n = op.N
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -op.matrix()
    A[n:, n:] = -2.0 * alpha * np.eye(n)
    return A


def a_alpha_block_eigenvalues(op: LinearizedOperator, alpha: float, targets=None) -> np.ndarray:
    """Eigenvalues of the assembled block system.

    Small systems use a dense solver; larger ones need ``targets`` and use
    shift-invert near each target.
    """
    if 2 * op.N <= DENSE_BLOCK_LIMIT:
        return sla.eigvals(a_alpha_block(op, alpha))
    if targets is None:
        raise ValueError("targets are required for large block systems")
    n = op.N
    eye = sp.identity(n, format="csr")
    A = sp.bmat([[None, eye], [-op.sparse(), -2.0 * alpha * eye]], format="csc")
    out = []
    for z in targets:
        val = eigs(A, k=1, sigma=complex(z) + 1e-9, return_eigenvectors=False)
        out.append(val[0])
    return np.array(out)


@dataclass(frozen=True)
class EssentialSpectrum:
    """Essential spectrum of the damped linear system.

    It is always part of the line ``Re z = -alpha`` with ``|Im z| >=
    im_min``; for ``alpha > 1`` the whole line plus ``real_interval``.
    """

    alpha: float
    re_line: float
    im_min: float
    real_interval: Optional[tuple[float, float]]

    def contains(self, z: complex, tol: float = 1e-12) -> bool:
        z = complex(z)
        if abs(z.real - self.re_line) <= tol and abs(z.imag) >= self.im_min - tol:
            return True
        if self.real_interval is not None and abs(z.imag) <= tol:
            a, b = self.real_interval
            return a - tol <= z.real <= b + tol
        return False


def essential_spectrum_descriptor(alpha: float) -> EssentialSpectrum:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha <= 1.0:
        return EssentialSpectrum(alpha, -alpha, float(np.sqrt(1.0 - alpha * alpha)), None)
    s = float(np.sqrt(alpha * alpha - 1.0))
    return EssentialSpectrum(alpha, -alpha, 0.0, (-alpha - s, -alpha + s))


@dataclass(frozen=True)
class InstabilityCertificate:
    quad_form: float
    h5f_slack: float
    bound: float
    min_mu: float
    certified: bool


def instability_certificate(profile, spec: NonlinearitySpec | None = None, tol: float = 1e-8) -> InstabilityCertificate:
    """``<L Q, Q>`` against ``-2 gamma ||Q||_H1^2``.

    The bound holds whenever ``int Q^2 f'(Q) - (1 + 2 gamma) Q f(Q) >= 0``;
    the certificate additionally requires a negative eigenvalue of ``L``.
    Tolerances are relative to the size of the integrals involved.
    """
    if spec is None:
        spec = profile.spec
    g = profile.grid
    Q = profile.Q
    h1 = g.h1_sq(Q)
    q2fp = g.integrate(Q * Q * fprime_eval(spec, Q))
    qf = g.integrate(Q * f_eval(spec, Q))
    quad = h1 - q2fp
    slack = q2fp - (1.0 + 2.0 * spec.gamma) * qf
    bound = -2.0 * spec.gamma * h1
    scale = max(1.0, h1, abs(q2fp))
    mu = discrete_spectrum(assemble_linearized(profile, spec), refine=False).mu
    min_mu = float(mu[0]) if mu.size else float("inf")
    certified = bool(h1 > 0 and slack >= -tol * scale and quad <= bound + tol * scale and min_mu < 0)
    return InstabilityCertificate(quad, slack, bound, min_mu, certified)


def _h_obs(T0, s):
    return np.sin(2.0 * T0 * s) / (2.0 * s)


def observation_bound(T0: float) -> float:
    """``inf_{s >= 1} (T0 - sin(2 T0 s) / (2 s))``.

    Stationary points satisfy ``tan x = x`` with ``x = 2 T0 s``; there is
    one in each interval ``(k pi, (k + 1) pi)``. Past ``s = 1/(2 h*)`` the
    tail bound ``1/(2s)`` cannot beat the best value ``h*`` found so far.
    """
    if not T0 > 0:
        raise ValueError(f"T0 must be positive, got {T0}")
    best = _h_obs(T0, 1.0)
    phi = lambda x: x * np.cos(x) - np.sin(x)  # noqa: E731
    x0 = 2.0 * T0
    k = int(np.floor(x0 / np.pi))
    while True:
        a, b = max(k * np.pi, x0), (k + 1) * np.pi
        if best > 0 and a / (2.0 * T0) >= 1.0 / (2.0 * best):
            break
        if phi(a) * phi(b) < 0:
            x = brentq(phi, a, b, xtol=1e-15)
            best = max(best, _h_obs(T0, x / (2.0 * T0)))
        k += 1
    return float(T0 - best)


@dataclass
class SpectralReport:
    mu: np.ndarray
    mu_errors: np.ndarray
    near_threshold: np.ndarray
    kernel: str
    kernel_defect: float
    z: list
    ess_descriptor: EssentialSpectrum
    n_unstable: int
    n_center: int
    quad_form: float
    h5f_slack: float
    certified: bool


def spectral_report(profile, spec: NonlinearitySpec | None, alpha: float) -> SpectralReport:
    spec = spec if spec is not None else profile.spec
    op = assemble_linearized(profile, spec)
    spectrum = discrete_spectrum(op)
    kern = kernel_test(op)
    z = a_alpha_spectrum(spectrum.mu, alpha)
    cert = instability_certificate(profile, spec)
    return SpectralReport(
        mu=spectrum.mu,
        mu_errors=spectrum.errors,
        near_threshold=spectrum.near_threshold,
        kernel=kern.kernel,
        kernel_defect=kern.defect,
        z=z,
        ess_descriptor=essential_spectrum_descriptor(alpha),
        n_unstable=sum(1 for x in z if x.real > 0),
        n_center=1 if kern.kernel == "one_dimensional" else 0,
        quad_form=cert.quad_form,
        h5f_slack=cert.h5f_slack,
        certified=cert.certified,
    )

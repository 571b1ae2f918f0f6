"""Nyström discretization of the combined field integral equation.

For a sound-soft obstacle the unknown surface current eta = d(u_inc + u_s)/dnu
solves

    eta(x) - int_dOmega (d/dnu(x) + ik) G(x, y) eta(y) ds(y) = f(x),

with G = -2 Phi, Phi(x,y) = (i/4) H_0^(1)(k|x-y|) and
f = 2 (d/dnu + ik) u_inc.  Written out, the kernel of the integral operator S
is

    K(x, y) = (ik/2) H_1^(1)(k r) (x-y).nu(x)/r + (k/2) H_0^(1)(k r),

logarithmically singular at r -> 0.  The self block splits K into
K1(t,tau) log(4 sin^2((t-tau)/2)) + K2(t,tau) with both parts smooth and
2pi-periodic, and applies the classical spectral weights for the log kernel
plus the trapezoid rule for the remainder.  Off-diagonal (coupling) blocks are
smooth and use the plain trapezoid rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .geometry import ParametricCurve
from .special_functions import hankel1

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015328606

__all__ = [
    "GridDensity",
    "DiscreteOperator",
    "assemble_self",
    "assemble_coupling",
    "incident_rhs",
    "solve_self",
    "log_quadrature_weights",
    "CfieError",
]


class CfieError(Exception):
    """Discretization-level failure (bad n, singular factorization, ...)."""


@dataclass
class GridDensity:
    """Complex nodal values on one obstacle's uniform parameter grid."""

    obstacle: int
    params: np.ndarray          # (n,) node parameters t_i in [0, 2pi)
    values: np.ndarray          # (n,) complex
    weights: np.ndarray         # (n,) arc-length trapezoid weights |gamma'| 2pi/n

    def __post_init__(self):
        if len(self.values) != len(self.params):
            raise ValueError("value count must equal node count")

    def norm(self) -> float:
        """Discrete L^2(boundary) norm."""
        return float(np.sqrt(np.sum(self.weights * np.abs(self.values) ** 2)))

    def copy_with(self, values: np.ndarray) -> "GridDensity":
        return GridDensity(self.obstacle, self.params, values, self.weights)


@dataclass
class DiscreteOperator:
    """Dense Nyström block with an optional cached LU factorization."""

    matrix: np.ndarray
    source: int
    target: int
    k: float
    is_self_block: bool = False
    _lu: tuple | None = field(default=None, repr=False)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def lu(self):
        if self._lu is None:
            try:
                self._lu = lu_factor(self.matrix)
            except Exception as exc:  # singular factorization
                raise CfieError(
                    f"LU factorization failed for self block {self.target} "
                    f"(k={self.k}): {exc}"
                ) from exc
            if not np.all(np.isfinite(self._lu[0])):
                raise CfieError(f"singular factorization in self block {self.target}")
        return self._lu


def grid_params(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def grid_weights(curve: ParametricCurve, n: int) -> np.ndarray:
    t = grid_params(n)
    return curve.speed(t) * (2.0 * np.pi / n)


def log_quadrature_weights(n: int) -> np.ndarray:
    """Spectral weights R_m for int_0^2pi log(4 sin^2((t-tau)/2)) f(tau) dtau.

    Returns R indexed by grid offset m = (i - j) mod n, exact for
    trigonometric polynomials of degree <= n/2 on an n-point uniform grid
    (n even).
    """
    if n % 2 != 0:
        raise CfieError(f"log quadrature requires even n, got {n}")
    half = n // 2
    m = np.arange(n)
    s = np.arange(1, half)
    # R_m = -(2pi/half) sum_{s<half} cos(s m h)/s - (pi/half^2) cos(half m h)
    h = 2.0 * np.pi / n
    cos_table = np.cos(np.outer(m, s) * h)    # (n, half-1)
    R = -(2.0 * np.pi / half) * cos_table @ (1.0 / s)
    R -= (np.pi / half**2) * np.cos(half * m * h)
    return R


def _kernel_parts(curve_x: ParametricCurve, tx: np.ndarray,
                  curve_y: ParametricCurve, ty: np.ndarray, k: float):
    """Geometry arrays shared by self/coupling assembly.

    Returns (r, cos_x, speed_y) with shapes (len(tx), len(ty)); cos_x is
    (x-y).nu(x)/r.  r may contain zeros on the diagonal of a self block;
    callers mask those before Hankel evaluation.
    """
    x = curve_x.position(tx)                   # (nx, 2)
    y = curve_y.position(ty)                   # (ny, 2)
    nu_x = curve_x.normal(tx)                  # (nx, 2)
    diff = x[:, None, :] - y[None, :, :]       # (nx, ny, 2)
    r = np.hypot(diff[..., 0], diff[..., 1])   # (nx, ny)
    dot = diff[..., 0] * nu_x[:, None, 0] + diff[..., 1] * nu_x[:, None, 1]
    speed_y = curve_y.speed(ty)
    return r, dot, speed_y


def assemble_self(curve: ParametricCurve, k: float, n: int) -> DiscreteOperator:
    """Nyström matrix for I - S_jj with log-singularity splitting.

    The log-part coefficient is
        K1 = [ (ik/2pi) J0(kr) - (k/2pi) J1(kr) cos_x ] |gamma'(tau)|
    and the smooth remainder K2 = K - K1 log(4 sin^2((t-tau)/2)) has the
    diagonal limit
        K2(t,t) = |gamma'| [ k/2 + (ik/pi)(log(k|gamma'|/2) + gamma_E)
                             + kappa/(2pi) ],
    the curvature term being the double-layer diagonal scaled by the
    G = -2 Phi convention.
    """
    if n % 2 != 0 or n < 16:
        raise CfieError(f"assemble_self requires even n >= 16, got {n}")
    t = grid_params(n)
    r, dot, speed = _kernel_parts(curve, t, curve, t, k)
    np.fill_diagonal(r, 1.0)                   # masked; diagonal set explicitly below
    cos_x = dot / r

    z = k * r
    H0 = hankel1(0, z)
    H1 = hankel1(1, z)
    J0, J1 = H0.real, H1.real

    # full kernel and its log-part coefficient (both include |gamma'(tau)|)
    K = ((0.5j * k) * H1 * cos_x + (0.5 * k) * H0) * speed[None, :]
    K1 = ((0.5j * k / np.pi) * J0 - (0.5 * k / np.pi) * J1 * cos_x) * speed[None, :]

    # log(4 sin^2((t_i - t_j)/2)) off the diagonal
    dt = t[:, None] - t[None, :]
    sin2 = 4.0 * np.sin(dt / 2.0) ** 2
    np.fill_diagonal(sin2, 1.0)
    K2 = K - K1 * np.log(sin2)

    kappa = curve.curvature(t)
    diag = speed * (0.5 * k
                    + (1j * k / np.pi) * (np.log(0.5 * k * speed) + EULER_GAMMA)
                    + kappa / (2.0 * np.pi))
    np.fill_diagonal(K2, diag)
    np.fill_diagonal(K1, (0.5j * k / np.pi) * speed)

    R = log_quadrature_weights(n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    S = R[idx] * K1 + (2.0 * np.pi / n) * K2

    mat = np.eye(n, dtype=complex) - S
    return DiscreteOperator(mat, source=0, target=0, k=k, is_self_block=True)


def assemble_coupling(target_curve: ParametricCurve, source_curve: ParametricCurve,
                      k: float, n) -> DiscreteOperator:
    """Trapezoid-rule matrix for the smooth coupling block S_{j j'}.

    ``n`` is either a single node count for both curves or a pair
    (n_target, n_source).
    """
    if isinstance(n, (tuple, list, np.ndarray)):
        n_t, n_s = int(n[0]), int(n[1])
    else:
        n_t = n_s = int(n)
    tx, ty = grid_params(n_t), grid_params(n_s)
    r, dot, speed = _kernel_parts(target_curve, tx, source_curve, ty, k)
    if np.min(r) <= 0.0:
        raise CfieError("assemble_coupling requires disjoint curves")
    cos_x = dot / r
    z = k * r
    H0 = hankel1(0, z)
    H1 = hankel1(1, z)
    K = ((0.5j * k) * H1 * cos_x + (0.5 * k) * H0) * speed[None, :]
    mat = K * (2.0 * np.pi / n_s)
    return DiscreteOperator(mat, source=1, target=0, k=k, is_self_block=False)


def incident_rhs(curve: ParametricCurve, k: float, alpha, n: int,
                 obstacle: int = 0) -> GridDensity:
    """f(x) = 2 (ik alpha.nu(x) + ik) e^{ik alpha.x} at the grid nodes."""
    a = np.asarray(alpha, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > 1e-14:
        raise ValueError("incident direction must be a unit vector")
    t = grid_params(n)
    x = curve.position(t)
    nu = curve.normal(t)
    vals = 2j * k * (1.0 + nu @ a) * np.exp(1j * k * (x @ a))
    return GridDensity(obstacle, t, vals, grid_weights(curve, n))


def solve_self(op: DiscreteOperator, rhs: GridDensity) -> GridDensity:
    """Solve (I - S_jj) eta = rhs via the block's cached LU factorization."""
    if not op.is_self_block:
        raise CfieError("solve_self requires a self block")
    eta = lu_solve(op.lu(), rhs.values)
    return rhs.copy_with(eta)


def evaluate_field(curves, densities, k: float, points: np.ndarray) -> np.ndarray:
    """Diagnostic scattered field u_s(x) = -sum_j int Phi(x,y) eta_j ds(y).

    Plain trapezoid rule; accurate only for points away from the boundary.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    for curve, dens in zip(curves, densities):
        y = curve.position(dens.params)
        diff = pts[:, None, :] - y[None, :, :]
        r = np.hypot(diff[..., 0], diff[..., 1])
        phi = 0.25j * hankel1(0, k * r)
        out -= phi @ (dens.values * dens.weights)
    return out

"""Block operator machinery for multiple scattering.

Discretizes a scene once (self blocks with cached LU, coupling blocks), then
exposes the iteration operator

    (T eta)_j = (I - S_jj)^{-1} sum_{j' != j} S_{jj'} eta_{j'},

the multiple-scattering iterates eta^m = T eta^{m-1} starting from the
single-obstacle solutions g_j = (I - S_jj)^{-1} f_j, Neumann partial sums,
and the direct coupled reference solve (I - S) eta = f.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import cfie
from .cfie import CfieError, DiscreteOperator, GridDensity
from .geometry import Scene

logger = logging.getLogger(__name__)

REFERENCE_UNKNOWN_GUARD = 12000
DEFAULT_ITERATE_CAP = 600

__all__ = [
    "MultiDensity",
    "IterateSequence",
    "DiscreteScene",
    "discretize",
    "initial_iterate",
    "apply_T",
    "neumann_sum",
    "reference_solve",
    "ResourceGuardError",
]


class ResourceGuardError(Exception):
    """Problem size exceeds the dense-solve guard."""


@dataclass
class MultiDensity:
    """One GridDensity per obstacle, eta = (eta_1, ..., eta_J)."""

    components: tuple[GridDensity, ...]

    # keep numpy scalars from broadcasting over the components
    __array_ufunc__ = None

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, j: int) -> GridDensity:
        return self.components[j]

    def norm(self) -> float:
        return float(np.sqrt(sum(c.norm() ** 2 for c in self.components)))

    def copy_with(self, values_list) -> "MultiDensity":
        return MultiDensity(tuple(
            c.copy_with(np.asarray(v)) for c, v in zip(self.components, values_list)
        ))

    # -- vector-space arithmetic (used by the Krylov driver) ----------------

    def __add__(self, other: "MultiDensity") -> "MultiDensity":
        return self.copy_with([a.values + b.values
                               for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "MultiDensity") -> "MultiDensity":
        return self.copy_with([a.values - b.values
                               for a, b in zip(self.components, other.components)])

    def __mul__(self, scalar) -> "MultiDensity":
        return self.copy_with([scalar * a.values for a in self.components])

    __rmul__ = __mul__

    def inner(self, other: "MultiDensity") -> complex:
        """Discrete L^2(boundary) inner product <self, other>."""
        acc = 0.0 + 0.0j
        for a, b in zip(self.components, other.components):
            acc += np.sum(a.weights * a.values * np.conj(b.values))
        return complex(acc)


@dataclass
class IterateSequence:
    """Append-only list of iterates eta^0, eta^1, ... with their norms."""

    iterates: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    def append(self, eta: MultiDensity):
        self.iterates.append(eta)
        self.norms.append(eta.norm())

    def __len__(self):
        return len(self.iterates)

    def __getitem__(self, m: int) -> MultiDensity:
        return self.iterates[m]


@dataclass
class DiscreteScene:
    """Scene + cached Nyström blocks at a fixed discretization."""

    scene: Scene
    n: tuple[int, ...]                       # nodes per obstacle
    self_ops: tuple[DiscreteOperator, ...]   # I - S_jj with cached LU
    couplings: dict                          # (j, j') -> S_{jj'} matrix block
    params: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]

    @property
    def k(self) -> float:
        return self.scene.k

    def zero(self) -> MultiDensity:
        return MultiDensity(tuple(
            GridDensity(j, self.params[j],
                        np.zeros(self.n[j], dtype=complex), self.weights[j])
            for j in range(len(self.n))
        ))

    def density_from(self, values_list) -> MultiDensity:
        return self.zero().copy_with(values_list)


def choose_n(curve, k: float, ppw: float = 10.0, n_min: int = 16) -> int:
    """Smallest even n >= ppw * k * perimeter / (2 pi)."""
    n = int(np.ceil(ppw * k * curve.perimeter() / (2.0 * np.pi)))
    n = max(n, n_min)
    return n + (n % 2)


def discretize(scene: Scene, ppw: float = 10.0, n=None) -> DiscreteScene:
    """Assemble all blocks for a scene.

    ``n`` overrides the points-per-wavelength rule; scalar or per-obstacle.
    """
    J = len(scene.obstacles)
    if n is None:
        ns = tuple(choose_n(c, scene.k, ppw) for c in scene.obstacles)
    elif np.isscalar(n):
        ns = tuple(int(n) for _ in range(J))
    else:
        ns = tuple(int(v) for v in n)

    self_ops = []
    for j, curve in enumerate(scene.obstacles):
        op = cfie.assemble_self(curve, scene.k, ns[j])
        op.source = op.target = j
        self_ops.append(op)

    couplings = {}
    for j in range(J):
        for jp in range(J):
            if j == jp:
                continue
            op = cfie.assemble_coupling(scene.obstacles[j], scene.obstacles[jp],
                                        scene.k, (ns[j], ns[jp]))
            op.source, op.target = jp, j
            couplings[(j, jp)] = op

    params = tuple(cfie.grid_params(ns[j]) for j in range(J))
    weights = tuple(cfie.grid_weights(scene.obstacles[j], ns[j]) for j in range(J))
    logger.info("discretized scene: k=%g, n=%s", scene.k, ns)
    return DiscreteScene(scene, ns, tuple(self_ops), couplings, params, weights)


def incident_multidensity(ds: DiscreteScene) -> MultiDensity:
    """f = (f_1, ..., f_J) on the scene grid."""
    comps = []
    for j, curve in enumerate(ds.scene.obstacles):
        comps.append(cfie.incident_rhs(curve, ds.k, ds.scene.alpha, ds.n[j],
                                       obstacle=j))
    return MultiDensity(tuple(comps))


def initial_iterate(ds: DiscreteScene) -> MultiDensity:
    """g_j = (I - S_jj)^{-1} f_j, per obstacle independently."""
    f = incident_multidensity(ds)
    return MultiDensity(tuple(
        cfie.solve_self(ds.self_ops[j], f[j]) for j in range(len(ds.n))
    ))


def apply_T(ds: DiscreteScene, eta: MultiDensity) -> MultiDensity:
    """(T eta)_j = (I - S_jj)^{-1} sum_{j' != j} S_{jj'} eta_{j'}."""
    J = len(ds.n)
    out = []
    for j in range(J):
        acc = np.zeros(ds.n[j], dtype=complex)
        for jp in range(J):
            if jp == j:
                continue
            acc += ds.couplings[(j, jp)].apply(eta[jp].values)
        rhs = GridDensity(j, ds.params[j], acc, ds.weights[j])
        out.append(cfie.solve_self(ds.self_ops[j], rhs))
    return MultiDensity(tuple(out))


def neumann_sum(ds: DiscreteScene, M: int,
                iterates: IterateSequence | None = None):
    """Partial sum sum_{m=0}^M eta^m plus the retained iterate sequence.

    An existing IterateSequence is extended rather than recomputed, so
    successive calls share work.
    """
    if M < 0:
        raise ValueError("M must be >= 0")
    if M + 1 > DEFAULT_ITERATE_CAP:
        raise ResourceGuardError(
            f"requested {M + 1} iterates exceeds cap {DEFAULT_ITERATE_CAP}")
    if iterates is None:
        iterates = IterateSequence()
    if len(iterates) == 0:
        iterates.append(initial_iterate(ds))
    while len(iterates) <= M:
        iterates.append(apply_T(ds, iterates[len(iterates) - 1]))
    total = iterates[0]
    for m in range(1, M + 1):
        total = total + iterates[m]
    return total, iterates


def block_matrix(ds: DiscreteScene) -> np.ndarray:
    """Full coupled system  [[I-S_11, -S_12], [-S_21, I-S_22]]  (general J)."""
    J = len(ds.n)
    offsets = np.concatenate([[0], np.cumsum(ds.n)])
    N = offsets[-1]
    A = np.zeros((N, N), dtype=complex)
    for j in range(J):
        sl = slice(offsets[j], offsets[j + 1])
        A[sl, sl] = ds.self_ops[j].matrix
        for jp in range(J):
            if jp == j:
                continue
            A[sl, offsets[jp]:offsets[jp + 1]] = -ds.couplings[(j, jp)].matrix
    return A


def reference_solve(ds: DiscreteScene) -> MultiDensity:
    """Direct dense solve of the coupled block system (I - S) eta = f."""
    N = int(sum(ds.n))
    if N > REFERENCE_UNKNOWN_GUARD:
        raise ResourceGuardError(
            f"coupled system has {N} unknowns > guard {REFERENCE_UNKNOWN_GUARD}; "
            "reduce k or points-per-wavelength")
    A = block_matrix(ds)
    f = incident_multidensity(ds)
    rhs = np.concatenate([c.values for c in f])
    sol = lu_solve(lu_factor(A), rhs)
    resid = np.linalg.norm(A @ sol - rhs) / np.linalg.norm(rhs)
    if resid > 1e-12:
        raise CfieError(f"reference solve residual {resid:.2e} exceeds 1e-12")
    offsets = np.concatenate([[0], np.cumsum(ds.n)])
    values = [sol[offsets[j]:offsets[j + 1]] for j in range(len(ds.n))]
    return ds.density_from(values)

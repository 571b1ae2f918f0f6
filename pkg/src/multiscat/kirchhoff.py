"""Kirchhoff beam transport and the truncated preconditioned system.

A beam is a slow envelope tagged with a phase from the reflection cascade:
the pair (m, j) names phi^m on obstacle j, and the beam's grid values are
e^{ik phi^m} A.  The Kirchhoff operator moves a beam to the partner obstacle:
the new phase is the propagated phi^{m+1}, and the amplitude picks up the
stationary-phase transport factor

    B(x) = A(y*) F(x, y*) (psi'')^{-1/2},   F(x, y) = (x-y)/|x-y| . nu(x) / sqrt(|x-y|),

evaluated at the launch point y* of the ray chain, with psi'' the arc-length
second derivative of the combined phase.  The amplitude is zeroed where the
segment [y*, x] meets the target obstacle away from x (shadow side) and
within one grid cell of the shadow boundaries, where the transport factor
degenerates.

The truncated preconditioned operator

    A_{K,N} = I - sum_{l=0}^{N} K^l (T - K)

acts on beam sums: T is the exact grid iteration operator applied beam-wise,
its output re-enveloped against the propagated phase, so every Krylov vector
stays inside the tagged phase family and each application grows the tag range
by N+1.  Inner products collapse beam sums to grid densities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import multiscatter
from .go_phase import IL, SB_ADJACENT, GoPhaseError, PhaseCascade, transport_second_derivative
from .krylov import orthodir
from .multiscatter import DiscreteScene, MultiDensity

logger = logging.getLogger(__name__)

__all__ = [
    "KirchhoffError",
    "Beam",
    "BeamSum",
    "KirchhoffContext",
    "apply_K_pair",
    "apply_K",
    "kirchhoff_rhs",
    "preconditioned_apply",
    "solve_preconditioned",
]


class KirchhoffError(Exception):
    """Beam transport failed (bad second derivative, missing phase depth)."""


@dataclass(frozen=True)
class Beam:
    """Envelope A on obstacle ``obstacle`` against the phase tag ``level``.

    lit_only marks envelopes supported on the illuminated arc (pure Kirchhoff
    outputs); full-support envelopes (grid re-expansions) interpolate
    periodically instead.
    """

    level: int
    obstacle: int
    amplitude: np.ndarray
    lit_only: bool

    def scaled(self, factor) -> "Beam":
        return Beam(self.level, self.obstacle, factor * self.amplitude, self.lit_only)


class BeamSum:
    """Linear combination of beams with distinct (level, obstacle) tags."""

    __array_ufunc__ = None

    def __init__(self, ctx: "KirchhoffContext", beams=()):
        self.ctx = ctx
        self._beams: dict = {}
        for b in beams:
            self._merge(b)

    def _merge(self, b: Beam):
        key = (b.level, b.obstacle)
        old = self._beams.get(key)
        if old is None:
            self._beams[key] = b
        else:
            self._beams[key] = Beam(b.level, b.obstacle,
                                    old.amplitude + b.amplitude,
                                    old.lit_only and b.lit_only)

    @property
    def beams(self):
        return [self._beams[k] for k in sorted(self._beams)]

    def __len__(self):
        return len(self._beams)

    def __add__(self, other: "BeamSum") -> "BeamSum":
        out = BeamSum(self.ctx, self.beams)
        for b in other.beams:
            out._merge(b)
        return out

    def __sub__(self, other: "BeamSum") -> "BeamSum":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "BeamSum":
        return BeamSum(self.ctx, [b.scaled(scalar) for b in self.beams])

    __rmul__ = __mul__

    def collapse(self) -> MultiDensity:
        """Grid density sum_beams e^{ik phi} A."""
        ds = self.ctx.ds
        values = [np.zeros(n, dtype=complex) for n in ds.n]
        for b in self.beams:
            if not b.amplitude.any():
                continue
            values[b.obstacle] += self.ctx.phase_factor(b.level, b.obstacle) \
                * b.amplitude
        return ds.density_from(values)

    def max_level(self) -> int:
        return max((b.level for b in self.beams), default=0)


class KirchhoffContext:
    """Shared phase cascade, transport tables and phase factors for a scene.

    max_depth bounds the reflection depth of available phases; exceeding it
    raises with the depth that would be required.
    """

    def __init__(self, ds: DiscreteScene, max_depth: int | None = None,
                 disable: bool = False):
        self.ds = ds
        self.scene = ds.scene
        self.cascade = PhaseCascade(ds.scene, ds.n)
        self.max_depth = max_depth
        self.disable = disable          # K = 0 diagnostic switch
        self._factors: dict = {}
        self._tables: dict = {}

    def field(self, m: int, j: int):
        if self.max_depth is not None and m > self.max_depth:
            raise KirchhoffError(
                f"phase depth {m} required but context capped at {self.max_depth}")
        return self.cascade.field(m, j)

    def phase_factor(self, m: int, j: int) -> np.ndarray:
        key = (m, j)
        if key not in self._factors:
            self._factors[key] = np.exp(1j * self.scene.k * self.field(m, j).phase)
        return self._factors[key]

    def transport(self, m_out: int, j_out: int) -> dict:
        """Per-node transport data of the (m_out, j_out) field: launch
        parameters, F factor, arc-length psi'', and the amplitude mask."""
        key = (m_out, j_out)
        if key in self._tables:
            return self._tables[key]
        fld = self.field(m_out, j_out)
        curve = fld.curve
        x = curve.position(fld.params)
        nu = curve.normal(fld.params)
        u = fld.arrive_dirs
        r = fld.launch_dist
        F = np.einsum("ij,ij->i", u, nu) / np.sqrt(r)
        psi2 = transport_second_derivative(fld)
        y_star = fld.source.curve.position(fld.launch_params)
        visible = _visible_mask(curve, y_star, x)
        mask = visible & (fld.region != SB_ADJACENT)
        if np.any(psi2[mask] <= 0.0):
            raise KirchhoffError(
                f"non-positive combined-phase second derivative on the lit "
                f"region of field ({m_out}, {j_out})")
        tbl = {"sigma": fld.launch_params, "F": F, "psi2": psi2,
               "mask": mask, "visible": visible}
        self._tables[key] = tbl
        return tbl

    def grid_as_beams(self, md: MultiDensity) -> BeamSum:
        """Re-envelope a grid density against the incident phases (level 0)."""
        beams = []
        for j, comp in enumerate(md):
            amp = comp.values * np.conj(self.phase_factor(0, j))
            beams.append(Beam(0, j, amp, lit_only=False))
        return BeamSum(self, beams)


def _visible_mask(curve, starts, ends, samples: int = 256) -> np.ndarray:
    """True where the open segment (start, end) misses ``curve``.

    ends lie on the curve; the endpoint contact itself does not block.
    Roots of the line-crossing function are bracketed on a coarse parameter
    grid and refined by bisection.
    """
    n = len(ends)
    tgrid = 2.0 * np.pi * np.arange(samples) / samples
    pts = curve.position(tgrid)                        # (S, 2)
    d = ends - starts                                  # (n, 2)
    rel0 = pts[None, :, 0] - starts[:, None, 0]
    rel1 = pts[None, :, 1] - starts[:, None, 1]
    g = rel0 * d[:, None, 1] - rel1 * d[:, None, 0]    # (n, S)
    flips = g * np.roll(g, -1, axis=1) < 0.0
    rows, cols = np.nonzero(flips)
    t_lo = tgrid[cols]
    t_hi = tgrid[cols] + 2.0 * np.pi / samples
    g_lo = g[rows, cols]

    for _ in range(55):
        mid = 0.5 * (t_lo + t_hi)
        pm = curve.position(mid)
        gm = (pm[:, 0] - starts[rows, 0]) * d[rows, 1] \
            - (pm[:, 1] - starts[rows, 1]) * d[rows, 0]
        take_lo = (gm < 0.0) == (g_lo < 0.0)
        t_lo = np.where(take_lo, mid, t_lo)
        g_lo = np.where(take_lo, gm, g_lo)
        t_hi = np.where(take_lo, t_hi, mid)

    root_pts = curve.position(0.5 * (t_lo + t_hi))
    seg2 = np.einsum("ij,ij->i", d, d)
    s = np.einsum("ij,ij->i", root_pts - starts[rows], d[rows]) / seg2[rows]
    blocking = (s > 1e-9) & (s < 1.0 - 1e-7)
    visible = np.ones(n, dtype=bool)
    visible[rows[blocking]] = False
    return visible


def _sample_envelope(ctx: KirchhoffContext, beam: Beam, sigma: np.ndarray) -> np.ndarray:
    """Interpolate a beam's envelope at off-grid source parameters.

    Lit-only envelopes use a spline on the illuminated arc (zero outside);
    full-support envelopes use a periodic spline around the whole curve.
    """
    fld = ctx.field(beam.level, beam.obstacle)
    params = fld.params
    amp = beam.amplitude
    if not beam.lit_only:
        t_ext = np.concatenate([params, [params[0] + 2.0 * np.pi]])
        a_ext = np.concatenate([amp, [amp[0]]])
        return CubicSpline(t_ext, a_ext, bc_type="periodic")(sigma % (2.0 * np.pi))

    lit = np.flatnonzero(fld.region == IL)
    if lit.size < 4:
        raise KirchhoffError("illuminated arc too small to interpolate")
    # Rotate a wrapped arc into one contiguous increasing parameter run.
    gaps = np.diff(lit)
    if gaps.max(initial=1) > 1:
        cut = int(np.argmax(gaps)) + 1
        lit = np.concatenate([lit[cut:], lit[:cut]])
    t_arc = params[lit].copy()
    jumps = np.diff(t_arc) < 0.0
    if np.any(jumps):
        wrap_at = int(np.argmax(jumps)) + 1
        t_arc[wrap_at:] += 2.0 * np.pi
    spline = CubicSpline(t_arc, amp[lit])
    sig = sigma % (2.0 * np.pi)
    sig = np.where(sig < t_arc[0], sig + 2.0 * np.pi, sig)
    inside = (sig >= t_arc[0]) & (sig <= t_arc[-1])
    out = np.zeros(len(sig), dtype=complex)
    out[inside] = spline(sig[inside])
    return out


def apply_K_pair(ctx: KirchhoffContext, beam: Beam) -> Beam:
    """Transport one beam to the partner obstacle (one reflection)."""
    j_out = ctx.scene.other(beam.obstacle)
    m_out = beam.level + 1
    if ctx.disable or not beam.amplitude.any():
        n_out = ctx.ds.n[j_out]
        return Beam(m_out, j_out, np.zeros(n_out, dtype=complex), lit_only=True)
    tbl = ctx.transport(m_out, j_out)
    amp = np.zeros(len(tbl["F"]), dtype=complex)
    idx = np.flatnonzero(tbl["mask"])
    if idx.size:
        a_src = _sample_envelope(ctx, beam, tbl["sigma"][idx])
        amp[idx] = a_src * tbl["F"][idx] / np.sqrt(tbl["psi2"][idx])
    return Beam(m_out, j_out, amp, lit_only=True)


def apply_K(ctx: KirchhoffContext, bs: BeamSum) -> BeamSum:
    """Block-swap Kirchhoff operator extended over a beam sum by linearity."""
    return BeamSum(ctx, [apply_K_pair(ctx, b) for b in bs.beams])


def kirchhoff_rhs(ctx: KirchhoffContext, g: MultiDensity, M: int) -> BeamSum:
    """g_{K,M} = sum_{l=0}^{M} K^l g as a beam sum (g enters at level 0)."""
    power = ctx.grid_as_beams(g)
    acc = power
    for _ in range(M):
        power = apply_K(ctx, power)
        acc = acc + power
    return acc


def neumann_beams(ctx: KirchhoffContext, depth: int) -> BeamSum:
    """Beam representation of the Neumann solution through ``depth``
    reflections: the m-th iterate enveloped against the m-th cascade phase."""
    cur = multiscatter.initial_iterate(ctx.ds)
    beams = []
    for m in range(depth + 1):
        for j, comp in enumerate(cur):
            amp = comp.values * np.conj(ctx.phase_factor(m, j))
            beams.append(Beam(m, j, amp, lit_only=False))
        if m < depth:
            cur = multiscatter.apply_T(ctx.ds, cur)
    return BeamSum(ctx, beams)


def preconditioned_apply(ctx: KirchhoffContext, N: int, eta):
    """Apply A_{K,N} = I - sum_{l=0}^{N} K^l (T - K); beam sums map to beam
    sums (tag range grows by N+1), grid densities to grid densities."""
    if N < 0:
        raise ValueError("truncation order N must be >= 0")
    grid_in = isinstance(eta, MultiDensity)
    bs = ctx.grid_as_beams(eta) if grid_in else eta

    # (T - K) beam-wise: T's grid output is re-enveloped against the
    # propagated phase so the difference carries the level-(m+1) tag.
    diff_beams = []
    for b in bs.beams:
        if not b.amplitude.any():
            continue
        single = BeamSum(ctx, [b]).collapse()
        t_out = multiscatter.apply_T(ctx.ds, single)
        j_out = ctx.scene.other(b.obstacle)
        m_out = b.level + 1
        a_t = t_out[j_out].values * np.conj(ctx.phase_factor(m_out, j_out))
        k_beam = apply_K_pair(ctx, b)
        diff_beams.append(Beam(m_out, j_out, a_t - k_beam.amplitude,
                               lit_only=False))
    diff = BeamSum(ctx, diff_beams)

    acc = diff
    power = diff
    for _ in range(N):
        power = apply_K(ctx, power)
        acc = acc + power
    out = bs - acc
    return out.collapse() if grid_in else out


def solve_preconditioned(ds: DiscreteScene, N: int, M: int, tol: float = 1e-4,
                         max_iter: int = 30, context: KirchhoffContext | None = None,
                         reference: MultiDensity | None = None, callback=None):
    """ORTHODIR on A_{K,N} eta = g_{K,M} over beam sums.

    Returns (solution as a grid density, error_history) where error_history[m]
    is the relative L^2 error of the m-th iterate against the unpreconditioned
    reference solution (starting from the zero initial guess).
    """
    ctx = context if context is not None else KirchhoffContext(ds)
    g = multiscatter.initial_iterate(ds)
    rhs = kirchhoff_rhs(ctx, g, M)
    eta_ref = reference if reference is not None else multiscatter.reference_solve(ds)
    ref_norm = eta_ref.norm()

    errors = [1.0]

    def record(state):
        err = (state.mu.collapse() - eta_ref).norm() / ref_norm
        errors.append(err)
        if callback is not None:
            callback(state, err)

    def inner(a: BeamSum, b: BeamSum) -> complex:
        return a.collapse().inner(b.collapse())

    solution, _ = orthodir(lambda v: preconditioned_apply(ctx, N, v), rhs,
                           inner, tol=tol, max_iter=max_iter, callback=record)
    return solution.collapse(), errors

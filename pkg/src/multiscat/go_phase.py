"""Multi-bounce geometrical-optics phase fields on obstacle boundaries.

The zeroth field on an obstacle is the incident phase alpha . x.  Each later
field lives on the partner obstacle and is built point-by-point: for a target
node x, solve for the launch parameter sigma on the source curve at which

    psi(sigma) = phi_src(sigma) + |x - y(sigma)|

is stationary with the launch leg leaving the source outward; the new phase
is psi(sigma*).  Stationarity is equivalent to the specular reflection law,
so the chains of bounce points recovered from the launch maps obey it.

The stationary solve is run for every target node, not just the lit ones, so
each phase is a globally smooth periodic function of the boundary parameter
(the ray through a shadowed node simply passes through the body first).  The
illuminated / shadow split is the sign of the arrival direction against the
exterior normal, and the two shadow boundaries are located by bisection on
that sign function.  Smoothness is what lets phases be interpolated and
differentiated spectrally, which the stationary-phase amplitude transform
relies on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import ParametricCurve, Scene

logger = logging.getLogger(__name__)

__all__ = [
    "GoPhaseError",
    "TrigSeries",
    "PhaseField",
    "PhaseCascade",
    "phase_zero",
    "propagate_phase",
    "combined_phase_second_derivative",
    "transport_second_derivative",
]

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
FALLBACK_SCAN = 10_000
SB_TOL = 1e-12

IL, SR, SB_ADJACENT = 1, -1, 0


class GoPhaseError(Exception):
    """Ray tracing failed (no stationary point, bad region structure, ...)."""


class TrigSeries:
    """Trigonometric interpolant of a real periodic grid function.

    Built from samples on the uniform grid t_i = 2 pi i / n; evaluates the
    interpolant and its derivatives at arbitrary parameters.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.n = len(values)
        self.coeffs = np.fft.fft(values) / self.n
        self.wavenumbers = np.fft.fftfreq(self.n, d=1.0 / self.n)

    def _coeffs_for(self, deriv: int):
        if deriv == 0:
            return self.coeffs
        c = self.coeffs * (1j * self.wavenumbers) ** deriv
        if deriv % 2 == 1 and self.n % 2 == 0:
            c[self.n // 2] = 0.0    # Nyquist mode has no odd derivative
        return c

    def evaluate(self, t, derivs=(0,)):
        """Values of the requested derivative orders at t; list of arrays."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        coeff_sets = [self._coeffs_for(d) for d in derivs]
        outs = [np.empty(flat.shape, dtype=complex) for _ in derivs]
        for lo in range(0, flat.size, 1024):
            block = flat[lo:lo + 1024, None]
            basis = np.exp(1j * self.wavenumbers[None, :] * block)
            for out, c in zip(outs, coeff_sets):
                out[lo:lo + 1024] = basis @ c
        return [o.real.reshape(t.shape) if t.shape else float(o.real[0])
                for o in outs]

    def __call__(self, t, deriv: int = 0):
        return self.evaluate(t, (deriv,))[0]


@dataclass(frozen=True)
class PhaseField:
    """One phase field phi^m on one obstacle.

    region: +1 illuminated, -1 shadow, 0 within one grid cell of a shadow
    boundary.  launch_params holds the stationary launch parameter on the
    source curve per node (m >= 1); the full bounce chain is recovered by
    following ``source`` recursively (see chain_at).
    """

    m: int
    obstacle: int
    path: int
    curve: ParametricCurve
    params: np.ndarray            # (n,)
    phase: np.ndarray             # (n,)
    region: np.ndarray            # (n,) int8
    sb_params: tuple              # two boundary parameters
    phase_series: TrigSeries
    arrive_dirs: np.ndarray       # (n, 2) unit propagation direction at node
    launch_params: np.ndarray | None = None   # (n,) on source curve
    launch_dist: np.ndarray | None = None     # (n,) |x - y*|
    source: "PhaseField | None" = None

    @property
    def n(self) -> int:
        return len(self.params)

    def launch_at(self, t):
        """Stationary launch parameters for arbitrary target parameters t."""
        if self.m == 0:
            raise GoPhaseError("the incident field has no launch points")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        # Seed from the nearest node's stored solution; the launch map is
        # smooth so one cell away is well inside Newton's basin.
        idx = np.rint(t / (2.0 * np.pi) * self.n).astype(int) % self.n
        x = self.curve.position(t)
        sigma, _ = _stationary_solve(self.source, x, self.launch_params[idx])
        return sigma

    def chain_params_at(self, t):
        """Curve parameters of the bounce chain (X_0, ..., X_m = x)."""
        t = float(t)
        params = [t]
        fld = self
        while fld.m > 0:
            t = float(fld.launch_at(t)[0])
            fld = fld.source
            params.append(t)
        return np.array(params[::-1])

    def chain_curves(self):
        """Curves carrying (X_0, ..., X_m), outermost source first."""
        curves = []
        fld = self
        while fld is not None:
            curves.append(fld.curve)
            fld = fld.source
        return curves[::-1]

    def chain_at(self, t):
        """Bounce points (X_0, ..., X_m) for one target parameter t."""
        ps = self.chain_params_at(t)
        return np.array([c.position(p)
                         for c, p in zip(self.chain_curves(), ps)])

    def il_arc_length(self) -> float:
        """Arc length of the illuminated region between the two boundaries."""
        a, b = self.sb_params
        lit = self.params[self.region == IL]
        if lit.size == 0:
            raise GoPhaseError("no illuminated nodes")
        # Whichever of the two complementary arcs contains the lit nodes.
        inside = (lit[0] - a) % (2.0 * np.pi) < (b - a) % (2.0 * np.pi)
        lo, span = (a, (b - a) % (2.0 * np.pi)) if inside else (b, (a - b) % (2.0 * np.pi))
        ts = lo + np.linspace(0.0, span, 513)
        return float(np.trapezoid(self.curve.speed(ts), ts))


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def phase_zero(curve: ParametricCurve, alpha, n: int, obstacle: int = 0) -> PhaseField:
    """Incident phase alpha . x with its lit/shadow split."""
    a = np.asarray(alpha, dtype=float)
    if abs(np.hypot(a[0], a[1]) - 1.0) > 1e-14:
        raise ValueError(f"|alpha| must be 1, got {np.hypot(a[0], a[1])!r}")
    params = 2.0 * np.pi * np.arange(n) / n
    x = curve.position(params)
    phase = x @ a

    def h(t):
        return float(curve.normal(np.asarray(t, dtype=float)) @ a)

    s = curve.normal(params) @ a
    sb = _two_sign_changes(h, params, s)
    region = _label_regions(params, s, sb)
    return PhaseField(
        m=0, obstacle=obstacle, path=obstacle, curve=curve, params=params,
        phase=phase, region=region, sb_params=sb,
        phase_series=TrigSeries(phase),
        arrive_dirs=np.broadcast_to(a, (n, 2)).copy(),
    )


def _stationary_solve(prev: PhaseField, x, sigma0):
    """Newton for the stationary launch parameter of each target point.

    Solves F(sigma) = phi_src'(sigma) - u . y'(sigma) = 0 with
    u = (x - y)/|x - y|; F' is the combined-phase second derivative in the
    curve parameter, positive at the physical (minimizing) branch.
    Returns (sigma, converged_mask).
    """
    src = prev.curve
    x = np.atleast_2d(x)
    sigma = np.array(sigma0, dtype=float, copy=True)
    active = np.ones(len(sigma), dtype=bool)
    scale = np.maximum(1.0, np.max(src.speed(prev.params)))
    for _ in range(NEWTON_MAX_ITER):
        s = sigma[active]
        phi1, phi2 = prev.phase_series.evaluate(s, (1, 2))
        y = src.position(s)
        yp = src.velocity(s)
        ypp = src.acceleration(s)
        dx = x[active] - y
        r = np.linalg.norm(dx, axis=-1)
        u = dx / r[:, None]
        udyp = np.einsum("ij,ij->i", u, yp)
        F = phi1 - udyp
        Fp = phi2 + (np.einsum("ij,ij->i", yp, yp) - udyp**2) / r \
            - np.einsum("ij,ij->i", u, ypp)
        step = F / np.where(Fp == 0.0, 1.0, Fp)
        sigma[active] -= np.where(Fp == 0.0, 0.0, step)
        done = np.abs(F) < NEWTON_TOL * scale
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    return sigma % (2.0 * np.pi), ~active


def _admissible_psi(prev: PhaseField, x, sigmas):
    """psi = phi_src + |x - y| on a sigma grid, +inf where the launch leg
    would leave the source inward (condition on outgoing bounces)."""
    src = prev.curve
    y = src.position(sigmas)
    nu = src.normal(sigmas)
    phi = prev.phase_series(sigmas)
    dx = x[:, None, :] - y[None, :, :]
    r = np.linalg.norm(dx, axis=-1)
    outward = np.einsum("ilj,lj->il", dx, nu) > 0.0
    psi = phi[None, :] + r
    return np.where(outward, psi, np.inf)


def _fermat_fallback(prev: PhaseField, x):
    """Dense-scan + golden-section minimization of the combined phase."""
    sigmas = 2.0 * np.pi * np.arange(FALLBACK_SCAN) / FALLBACK_SCAN
    psi = _admissible_psi(prev, x, sigmas)
    best = np.argmin(psi, axis=1)
    if not np.all(np.isfinite(psi[np.arange(len(x)), best])):
        raise GoPhaseError("dense scan found no admissible launch point")
    h = 2.0 * np.pi / FALLBACK_SCAN
    out = np.empty(len(x))
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    src = prev.curve

    def psi_at(xi, s):
        y = src.position(np.asarray(s, dtype=float))
        return prev.phase_series(s) + float(np.linalg.norm(xi - y))

    for i, b in enumerate(best):
        a, c = sigmas[b] - h, sigmas[b] + h
        lo, hi = a, c
        m1 = hi - gr * (hi - lo)
        m2 = lo + gr * (hi - lo)
        f1, f2 = psi_at(x[i], m1), psi_at(x[i], m2)
        for _ in range(90):
            if f1 < f2:
                hi, m2, f2 = m2, m1, f1
                m1 = hi - gr * (hi - lo)
                f1 = psi_at(x[i], m1)
            else:
                lo, m1, f1 = m1, m2, f2
                m2 = lo + gr * (hi - lo)
                f2 = psi_at(x[i], m2)
        out[i] = 0.5 * (lo + hi)
    return out


def _two_sign_changes(h, params, s):
    """Locate exactly two roots of the smooth periodic function h by
    bisection on the sign changes of its node samples s."""
    n = len(params)
    flips = [i for i in range(n) if (s[i] < 0.0) != (s[(i + 1) % n] < 0.0)]
    if len(flips) != 2:
        raise GoPhaseError(
            f"expected exactly two shadow boundaries, found {len(flips)}")
    roots = []
    for i in flips:
        a = params[i]
        b = a + 2.0 * np.pi / n
        ha = s[i]
        while b - a > SB_TOL:
            mid = 0.5 * (a + b)
            hm = h(mid)
            if (hm < 0.0) == (ha < 0.0):
                a, ha = mid, hm
            else:
                b = mid
        roots.append((0.5 * (a + b)) % (2.0 * np.pi))
    return tuple(sorted(roots))


def _label_regions(params, s, sb):
    n = len(params)
    region = np.where(s < 0.0, IL, SR).astype(np.int8)
    cell = 2.0 * np.pi / n
    for t0 in sb:
        d = np.abs((params - t0 + np.pi) % (2.0 * np.pi) - np.pi)
        region[d < cell] = SB_ADJACENT
    return region


def propagate_phase(scene: Scene, prev: PhaseField, n: int | None = None) -> PhaseField:
    """Bounce the phase field off its obstacle onto the partner obstacle.

    Every node of the target grid gets a phase (shadowed nodes through the
    body), the arrival-direction sign fixes the lit/shadow labels, and the
    two shadow boundaries are bisected to machine precision.
    """
    j = scene.other(prev.obstacle)
    curve = scene.obstacles[j]
    if n is None:
        n = prev.n
    params = 2.0 * np.pi * np.arange(n) / n
    x = curve.position(params)

    # Seed each node from the admissible minimum over the source grid, then
    # polish by Newton; unconverged or wrong-branch nodes fall back to a
    # dense Fermat scan.
    psi = _admissible_psi(prev, x, prev.params)
    sigma0 = prev.params[np.argmin(psi, axis=1)]
    sigma, ok = _stationary_solve(prev, x, sigma0)
    ok &= _margin_ok(prev, x, sigma)
    if not ok.all():
        bad = np.flatnonzero(~ok)
        logger.info("propagate_phase: %d/%d nodes to dense fallback", len(bad), n)
        sigma_fb = _fermat_fallback(prev, x[bad])
        sigma_fb, ok_fb = _stationary_solve(prev, x[bad], sigma_fb)
        ok_fb &= _margin_ok(prev, x[bad], sigma_fb)
        if not ok_fb.all():
            still = bad[~ok_fb]
            raise GoPhaseError(
                f"stationary launch point unresolved at {len(still)} nodes, "
                f"first parameters {params[still[:5]]}")
        sigma[bad] = sigma_fb

    src = prev.curve
    y = src.position(sigma)
    dx = x - y
    r = np.linalg.norm(dx, axis=-1)
    u = dx / r[:, None]
    phase = prev.phase_series(sigma) + r
    s = np.einsum("ij,ij->i", u, curve.normal(params))

    def h(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xt = curve.position(t)
        sg, okh = _stationary_solve(prev, xt, _seed_near(prev, curve, t))
        if not okh.all():
            raise GoPhaseError(f"stationary solve failed at boundary bisection t={t}")
        ut = _unit(xt - src.position(sg))
        return float(np.einsum("ij,ij->i", ut, curve.normal(t))[0])

    sb = _two_sign_changes(h, params, s)
    region = _label_regions(params, s, sb)
    return PhaseField(
        m=prev.m + 1, obstacle=j, path=prev.path, curve=curve, params=params,
        phase=phase, region=region, sb_params=sb,
        phase_series=TrigSeries(phase), arrive_dirs=u,
        launch_params=sigma, launch_dist=r, source=prev,
    )


def _outgoing_margin(prev: PhaseField, x, sigma):
    """(x - y) . nu(y): positive when the launch leg leaves the source outward."""
    y = prev.curve.position(sigma)
    return np.einsum("ij,ij->i", x - y, prev.curve.normal(sigma))


def _margin_ok(prev: PhaseField, x, sigma):
    """Accept the outgoing-launch condition with a small relative slack.

    Wrong-branch roots sit at margin ~ -|x - y|; the slack only admits the
    genuine grazing limit, where the launch leg is tangent to the source and
    the stationary point is degenerate (the Newton basin is then wide, so the
    solved margin can land a hair on either side of zero).
    """
    y = prev.curve.position(sigma)
    r = np.linalg.norm(x - y, axis=-1)
    margin = np.einsum("ij,ij->i", x - y, prev.curve.normal(sigma))
    return margin > -1e-3 * (1.0 + r)


def _seed_near(prev: PhaseField, curve: ParametricCurve, t):
    """Launch seed for off-grid target parameters from the admissible scan."""
    x = curve.position(np.atleast_1d(np.asarray(t, dtype=float)))
    psi = _admissible_psi(prev, x, prev.params)
    return prev.params[np.argmin(psi, axis=1)]


def _psi_second_derivative(prev: PhaseField, x, sigma):
    """d^2/dsigma^2 of phi_src(sigma) + |x - y(sigma)| (curve parameter)."""
    src = prev.curve
    phi2 = prev.phase_series(sigma, 2)
    y = src.position(sigma)
    yp = src.velocity(sigma)
    ypp = src.acceleration(sigma)
    dx = np.atleast_2d(x) - y
    r = np.linalg.norm(dx, axis=-1)
    u = dx / r[:, None]
    udyp = np.einsum("ij,ij->i", u, yp)
    return phi2 + (np.einsum("ij,ij->i", yp, yp) - udyp**2) / r \
        - np.einsum("ij,ij->i", u, ypp)


def combined_phase_second_derivative(scene: Scene, prev: PhaseField, x) -> float:
    """Arc-length second derivative of the combined phase at its stationary
    launch point for one target point x; positive for admissible scenes."""
    x = np.asarray(x, dtype=float).reshape(1, 2)
    sigma, ok = _stationary_solve(prev, x, _seed_near_point(prev, x))
    if not ok.all():
        sigma = _fermat_fallback(prev, x)
        sigma, ok = _stationary_solve(prev, x, sigma)
        if not ok.all():
            raise GoPhaseError(f"no stationary launch point for {x[0]}")
    psi_tt = _psi_second_derivative(prev, x, sigma)
    speed = prev.curve.speed(sigma)
    val = float(psi_tt[0] / speed[0] ** 2)
    if val <= 0.0:
        raise GoPhaseError(
            f"combined phase has non-positive second derivative {val} at {x[0]}")
    return val


def _seed_near_point(prev: PhaseField, x):
    psi = _admissible_psi(prev, x, prev.params)
    return prev.params[np.argmin(psi, axis=1)]


def transport_second_derivative(field: PhaseField) -> np.ndarray:
    """Arc-length combined-phase second derivatives at every node of a
    propagated field, from its stored launch parameters."""
    if field.m == 0 or field.launch_params is None:
        raise GoPhaseError("transport data requires a propagated field")
    prev = field.source
    x = field.curve.position(field.params)
    psi_tt = _psi_second_derivative(prev, x, field.launch_params)
    return psi_tt / prev.curve.speed(field.launch_params) ** 2


class PhaseCascade:
    """All phase fields phi^m on both obstacles, built on demand.

    field(m, j) is the m-times-reflected phase living on obstacle j; its
    source is field(m-1, other(j)), so the two ladders extend in lock step.
    """

    def __init__(self, scene: Scene, n):
        if len(scene.obstacles) != 2:
            raise GoPhaseError("phase cascades require a two-obstacle scene")
        self.scene = scene
        self.n = (n, n) if np.isscalar(n) else tuple(n)
        self._fields: dict = {}
        for j in (0, 1):
            self._fields[(0, j)] = phase_zero(
                scene.obstacles[j], scene.alpha, self.n[j], obstacle=j)

    def field(self, m: int, j: int) -> PhaseField:
        for mm in range(1, m + 1):
            for jj in (0, 1):
                if (mm, jj) not in self._fields:
                    prev = self._fields[(mm - 1, self.scene.other(jj))]
                    self._fields[(mm, jj)] = propagate_phase(
                        self.scene, prev, n=self.n[jj])
        return self._fields[(m, j)]

    @property
    def depth(self) -> int:
        return max(m for m, _ in self._fields)

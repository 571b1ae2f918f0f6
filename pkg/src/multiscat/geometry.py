"""Smooth closed convex obstacles and pairwise geometric quantities.

Curves are analytic primitives (circle, ellipse, trigonometric-polynomial
curve) parametrized counterclockwise over t in [0, 2pi).  All derivatives are
analytic; nothing is finite-differenced.  A :class:`Scene` bundles the
obstacles with an incident direction and wavenumber and provides the
closest-pair geometry that feeds the convergence-rate formula.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ParametricCurve",
    "Circle",
    "Ellipse",
    "FourierCurve",
    "Scene",
    "closest_pair",
    "curvature_at",
]


class GeometryError(Exception):
    """Raised when a geometric routine fails (non-convergence, bad scene)."""


class ParametricCurve:
    """Closed curve t in [0, 2pi) -> R^2, counterclockwise.

    Subclasses implement ``position``, ``velocity`` and ``acceleration``
    (all vectorized over t).  Exterior normal and signed curvature follow
    the counterclockwise convention: nu = (y', -x')/|gamma'| points away
    from the enclosed region, and kappa > 0 for convex curves.
    """

    def position(self, t):
        raise NotImplementedError

    def velocity(self, t):
        raise NotImplementedError

    def acceleration(self, t):
        raise NotImplementedError

    # -- derived maps ------------------------------------------------------

    def speed(self, t):
        """Arc-length element |gamma'(t)|."""
        v = self.velocity(t)
        return np.hypot(v[..., 0], v[..., 1])

    def tangent(self, t):
        """Unit tangent, shape (..., 2)."""
        v = self.velocity(t)
        return v / self.speed(t)[..., None]

    def normal(self, t):
        """Exterior unit normal, shape (..., 2)."""
        v = self.velocity(t)
        s = self.speed(t)
        return np.stack([v[..., 1], -v[..., 0]], axis=-1) / s[..., None]

    def curvature(self, t):
        """Signed curvature (positive for convex, CCW orientation)."""
        v = self.velocity(t)
        a = self.acceleration(t)
        s = self.speed(t)
        return (v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]) / s**3

    def perimeter(self, n: int = 4096) -> float:
        """Arc length by the trapezoid rule (spectrally accurate here)."""
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return float(np.sum(self.speed(t)) * 2.0 * np.pi / n)

    def is_convex(self, n: int = 2048) -> bool:
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return bool(np.all(self.curvature(t) > 0.0))


@dataclass(frozen=True)
class Circle(ParametricCurve):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    def position(self, t):
        t = np.asarray(t, dtype=float)
        c = np.asarray(self.center)
        return c + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.cos(t), -np.sin(t)], axis=-1)


@dataclass(frozen=True)
class Ellipse(ParametricCurve):
    """Ellipse with semi-axes (a, b) along the coordinate axes."""

    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def __post_init__(self):
        a, b = self.semi_axes
        if a <= 0 or b <= 0:
            raise ValueError(f"ellipse semi-axes must be positive, got {self.semi_axes}")

    def position(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.semi_axes
        c = np.asarray(self.center)
        return c + np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.semi_axes
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.semi_axes
        return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1)


@dataclass(frozen=True)
class FourierCurve(ParametricCurve):
    """Trigonometric-polynomial curve.

    position(t) = center + sum_m cos_coeffs[m]*cos((m+1) t) + sin_coeffs[m]*sin((m+1) t)

    with coefficient arrays of shape (M, 2).  Convexity is the caller's
    responsibility (checked by Scene validation when declared).
    """

    center: tuple[float, float]
    cos_coeffs: tuple = ()   # ((cx, cy), ...) for modes 1..M
    sin_coeffs: tuple = ()

    def _sum(self, t, deriv: int):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2,))
        for m, c in enumerate(self.cos_coeffs, start=1):
            w = float(m) ** deriv
            phase = [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)][deriv]
            out += w * phase(m * t)[..., None] * np.asarray(c, dtype=float)
        for m, c in enumerate(self.sin_coeffs, start=1):
            w = float(m) ** deriv
            phase = [np.sin, np.cos, lambda x: -np.sin(x)][deriv]
            out += w * phase(m * t)[..., None] * np.asarray(c, dtype=float)
        return out

    def position(self, t):
        return np.asarray(self.center) + self._sum(t, 0)

    def velocity(self, t):
        return self._sum(t, 1)

    def acceleration(self, t):
        return self._sum(t, 2)


@dataclass(frozen=True)
class Scene:
    """Obstacles + plane-wave data.  Immutable after construction."""

    obstacles: tuple[ParametricCurve, ...]
    alpha: tuple[float, float]   # incident direction, |alpha| = 1
    k: float                     # wavenumber, 1/length

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if abs(np.hypot(a[0], a[1]) - 1.0) > 1e-14:
            raise ValueError(f"|alpha| must be 1, got {np.hypot(a[0], a[1])!r}")
        if self.k <= 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if not self.obstacles:
            raise ValueError("scene needs at least one obstacle")

    @property
    def alpha_vec(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def other(self, j: int) -> int:
        """Index of the partner obstacle in a two-obstacle scene."""
        if len(self.obstacles) != 2:
            raise GeometryError("other() requires a two-obstacle scene")
        return 1 - j


def _distance_newton(c1: ParametricCurve, c2: ParametricCurve,
                     t1: float, t2: float, max_iter: int = 100):
    """Damped Newton on D(t1,t2) = |gamma1(t1) - gamma2(t2)|^2 / 2."""
    t = np.array([t1, t2], dtype=float)
    for _ in range(max_iter):
        x1, x2 = c1.position(t[0]), c2.position(t[1])
        v1, v2 = c1.velocity(t[0]), c2.velocity(t[1])
        a1, a2 = c1.acceleration(t[0]), c2.acceleration(t[1])
        diff = x1 - x2
        grad = np.array([diff @ v1, -diff @ v2])
        hess = np.array([
            [v1 @ v1 + diff @ a1, -(v1 @ v2)],
            [-(v1 @ v2), v2 @ v2 - diff @ a2],
        ])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        if np.linalg.norm(grad) < 1e-14 * (1.0 + diff @ diff):
            return t
        # damping: halve until the distance does not increase (up to roundoff,
        # so full Newton steps stay accepted near the minimum)
        d0 = diff @ diff
        lam = 1.0
        for _ in range(40):
            trial = t - lam * step
            dt = c1.position(trial[0]) - c2.position(trial[1])
            if dt @ dt <= d0 * (1.0 + 1e-12) + 1e-30:
                break
            lam *= 0.5
        t = t - lam * step
        if np.linalg.norm(lam * step) < 1e-14:
            return t
    raise GeometryError("closest_pair Newton did not converge within iteration cap")


def closest_pair(scene: Scene):
    """Unique minimizing pair between two disjoint convex obstacles.

    Returns
    -------
    (a1, a2, d) : points on each obstacle (shape (2,)) and their distance.

    The minimizer is seeded by a 64x64 parameter scan and polished by damped
    Newton; the stationarity (gradient) condition is verified to 1e-10.
    """
    if len(scene.obstacles) != 2:
        raise GeometryError("closest_pair requires exactly 2 obstacles")
    c1, c2 = scene.obstacles
    for i, c in enumerate((c1, c2)):
        if not c.is_convex():
            raise GeometryError(f"obstacle {i} is not convex")

    ts = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    p1 = c1.position(ts)          # (64, 2)
    p2 = c2.position(ts)          # (64, 2)
    d2 = np.sum((p1[:, None, :] - p2[None, :, :]) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)

    t1, t2 = _distance_newton(c1, c2, ts[i], ts[j])
    a1, a2 = c1.position(t1), c2.position(t2)
    d = float(np.linalg.norm(a1 - a2))
    if d <= 0 or not np.isfinite(d):
        raise GeometryError("obstacles overlap or distance is degenerate")

    # gradient condition: a1-a2 parallel to nu(a2), a2-a1 parallel to nu(a1)
    u = (a1 - a2) / d
    n1, n2 = c1.normal(t1), c2.normal(t2)
    cross1 = u[0] * n1[1] - u[1] * n1[0]
    cross2 = u[0] * n2[1] - u[1] * n2[0]
    if abs(cross1) > 1e-10 or abs(cross2) > 1e-10:
        raise GeometryError("closest_pair stationarity condition violated")
    return a1, a2, d


def closest_pair_params(scene: Scene):
    """Parameter values (t1, t2) of the closest pair (solver internals)."""
    c1, c2 = scene.obstacles
    ts = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
    p1, p2 = c1.position(ts), c2.position(ts)
    d2 = np.sum((p1[:, None, :] - p2[None, :, :]) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    t1, t2 = _distance_newton(c1, c2, ts[i], ts[j])
    return float(t1 % (2 * np.pi)), float(t2 % (2 * np.pi))


def curvature_at(curve: ParametricCurve, t: float) -> float:
    """Signed curvature at parameter t (positive for convex)."""
    return float(curve.curvature(np.asarray(t, dtype=float)))

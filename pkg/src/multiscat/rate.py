"""Two-obstacle convergence-rate predictions and empirical fits.

The Neumann series over reflections contracts, per round trip between two
convex obstacles, by the factor

    R2 = e^{2ikd} / ( sqrt((1+d k1)(1+d k2)) [1 + sqrt(1 - ((1+d k1)(1+d k2))^{-1})] )

in 2D, with d the gap and k1, k2 the curvatures at the closest points.  The
3D analogue replaces the scalar products by determinants of 2x2 curvature
blocks coupled by the rotation between principal frames.  ``empirical_rate``
fits the observed ratio eta^{m+2} ~ R2 eta^m from stored iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Scene, closest_pair, closest_pair_params
from .multiscatter import IterateSequence

__all__ = ["OrbitGeometry", "orbit_geometry", "r2_2d", "r2_3d", "empirical_rate"]


@dataclass(frozen=True)
class OrbitGeometry:
    """Closest-pair data feeding the rate formulas.

    For 2D, ``kappa1``/``kappa2`` are scalars.  For 3D, they are 2x2
    curvature matrices in the principal frames at a1, a2 and ``rotation``
    maps the frame at a1 to the frame at a2.
    """

    d: float
    kappa1: object
    kappa2: object
    k: float
    rotation: np.ndarray | None = None


def orbit_geometry(scene: Scene) -> OrbitGeometry:
    """Extract (d, kappa1, kappa2, k) from a two-obstacle scene."""
    _, _, d = closest_pair(scene)
    t1, t2 = closest_pair_params(scene)
    c1, c2 = scene.obstacles
    return OrbitGeometry(d=d,
                         kappa1=float(c1.curvature(np.asarray(t1))),
                         kappa2=float(c2.curvature(np.asarray(t2))),
                         k=scene.k)


def r2_2d(geom: OrbitGeometry) -> complex:
    """Per-round-trip (two reflections) convergence factor in 2D."""
    d, k1, k2 = geom.d, float(geom.kappa1), float(geom.kappa2)
    if d <= 0:
        raise ValueError("orbit gap d must be positive")
    P = (1.0 + d * k1) * (1.0 + d * k2)
    mod = 1.0 / (np.sqrt(P) * (1.0 + np.sqrt(1.0 - 1.0 / P)))
    return np.exp(2j * geom.k * d) * mod


def r2_3d(geom: OrbitGeometry) -> complex:
    """Per-round-trip factor in 3D with 2x2 principal-curvature blocks.

    R2 = e^{2ikd} / ( sqrt(det[(I+d K1)(I+d K2)])
                      * det[ I + sqrt(I - [T (I+d K1) T^{-1} (I+d K2)]^{-1}) ] )

    with K_j the principal-curvature matrices and T the rotation relating the
    principal frames at a1 and a2.
    """
    from scipy.linalg import sqrtm

    K1 = np.asarray(geom.kappa1, dtype=float)
    K2 = np.asarray(geom.kappa2, dtype=float)
    T = np.eye(2) if geom.rotation is None else np.asarray(geom.rotation, dtype=float)
    d = geom.d
    if d <= 0:
        raise ValueError("orbit gap d must be positive")
    if K1.shape != (2, 2) or K2.shape != (2, 2):
        raise ValueError("3D rate needs 2x2 curvature matrices")
    I = np.eye(2)
    A = I + d * K1
    B = I + d * K2
    front = np.sqrt(np.linalg.det(A @ B))
    Q = T @ A @ np.linalg.inv(T) @ B
    inner = sqrtm(I - np.linalg.inv(Q))
    if not np.all(np.isfinite(inner)):
        raise ValueError("matrix square root failed for the 3D rate bracket")
    bracket = np.linalg.det(I + inner)
    return complex(np.exp(2j * geom.k * d) / (front * bracket))


def empirical_rate(iterates: IterateSequence, m_lo: int, m_hi: int):
    """Fit eta^{m+2} ~ R2 eta^m over a window of stored iterates.

    Returns (modulus, complex_ratio):
      * modulus: geometric mean of the norm ratios ||eta^{m+2}|| / ||eta^m||
        over m in [m_lo, m_hi];
      * complex_ratio: least-squares scalar sum<eta^{m+2}, eta^m> /
        sum<eta^m, eta^m> over the window.
    """
    if m_hi + 2 >= len(iterates):
        raise ValueError(
            f"window [{m_lo},{m_hi}] needs iterates up to {m_hi + 2}, "
            f"have {len(iterates) - 1}")
    if m_lo < 0 or m_lo > m_hi:
        raise ValueError("need 0 <= m_lo <= m_hi")
    ratios = []
    num = 0.0 + 0.0j
    den = 0.0
    for m in range(m_lo, m_hi + 1):
        a, b = iterates[m + 2], iterates[m]
        ratios.append(a.norm() / b.norm())
        num += a.inner(b)
        den += b.inner(b).real
    modulus = float(np.exp(np.mean(np.log(ratios))))
    return modulus, complex(num / den)

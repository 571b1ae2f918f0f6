"""ORTHODIR for operator equations, built two ways from scattering iterates.

The generic driver applies A = I - T directly.  For multiple scattering the
directions p^(j) can instead be assembled from the stored iterates
eta^i = T^i g:

* binomial route (unstable on close obstacles): keep p^(j) in the power
  basis {(I-T)^m g} and expand each basis element as
  (I-T)^n g = sum_l C(n,l) (-1)^l eta^l.  The alternating binomial weights
  reach ~1e17 by n = 60 while the eta^l barely decay when the round-trip
  rate is close to 1, so the expansion cancels catastrophically.
* stable identification: keep p^(j) = sum_i gamma_ij eta^i directly and
  update the coefficients one step at a time,

      gamma_{i,j+1} = gamma_{ij} - gamma_{i-1,j} + sum_l beta_{lj} gamma_{il},

  which never forms large intermediate weights.  Images come from
  difference coefficients: (I-T) p^(j) = sum_i (gamma_ij - gamma_{i-1,j}) eta^i.

Either route applies T only to extend the iterate list (one application per
iteration), so reflection counts match the plain Neumann sum.

pade_accelerate offers a componentwise Wynn epsilon extrapolation of the
Neumann partial sums as a comparison baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "KrylovState",
    "BreakdownError",
    "orthodir",
    "binomial_directions",
    "stable_directions_step",
    "orthodir_identified",
    "pade_accelerate",
]

# Denominators below this are treated as exact breakdown / table singularities.
_TINY = 1e-280


class BreakdownError(RuntimeError):
    """<Ap, Ap> vanished at some iteration; carries the iteration index."""

    def __init__(self, iteration: int):
        super().__init__(f"orthodir breakdown: <Ap, Ap> = 0 at iteration {iteration}")
        self.iteration = iteration


@dataclass
class KrylovState:
    """State of an ORTHODIR run after completing iteration j.

    beta[j] holds the row (beta_0j, ..., beta_jj); gamma (identification mode
    only) holds one coefficient array per direction, gamma[j][i] multiplying
    eta^i in p^(j).
    """

    j: int
    mu: object
    r: object
    p: list = field(default_factory=list)
    Ap: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    gamma: list | None = None


def _norm2(inner_product, v) -> float:
    return float(np.real(inner_product(v, v)))


def orthodir(apply_A, g, inner_product, tol: float = 1e-12, max_iter: int = 200,
             callback=None):
    """Minimal-residual ORTHODIR iteration for A mu = g with mu^(0) = 0.

    Parameters
    ----------
    apply_A : callable(v) -> v
        Linear operator application.  Vectors must support +, -, scalar *.
    inner_product : callable(a, b) -> complex
        Positive-definite inner product (conjugate-linear in ``b``).
    tol : float
        Stop once ||r^(j)|| / ||g|| < tol.
    callback : callable(KrylovState), optional
        Invoked after every completed iteration.

    Returns
    -------
    (solution, residual_history)
        residual_history[m] = ||r^(m)|| / ||g||, starting at 1.0.
    """
    g_norm = math.sqrt(_norm2(inner_product, g))
    if g_norm == 0.0:
        return 0.0 * g, [0.0]

    mu = 0.0 * g
    r = g
    p = [g]
    Ap = [apply_A(g)]
    ap_norm2 = [_norm2(inner_product, Ap[0])]
    alpha_hist: list = []
    beta_hist: list = []
    history = [1.0]

    for j in range(max_iter):
        if not np.isfinite(ap_norm2[j]) or ap_norm2[j] < _TINY:
            raise BreakdownError(j)
        alpha = complex(inner_product(r, Ap[j])) / ap_norm2[j]
        mu = mu + alpha * p[j]
        r = r - alpha * Ap[j]
        rel = math.sqrt(_norm2(inner_product, r)) / g_norm
        history.append(rel)
        alpha_hist.append(alpha)
        converged = rel < tol

        if not converged:
            # One fresh A-application per iteration; the new direction's image
            # is recombined from stored images instead of applying A again.
            A2p = apply_A(Ap[j])
            beta = np.array([-inner_product(A2p, Ap[i]) / ap_norm2[i]
                             for i in range(j + 1)])
            p_next = Ap[j]
            Ap_next = A2p
            for i in range(j + 1):
                b_i = complex(beta[i])
                p_next = p_next + b_i * p[i]
                Ap_next = Ap_next + b_i * Ap[i]
            p.append(p_next)
            Ap.append(Ap_next)
            ap_norm2.append(_norm2(inner_product, Ap_next))
            beta_hist.append(beta)

        if callback is not None:
            callback(KrylovState(j=j, mu=mu, r=r, p=p, Ap=Ap,
                                 alpha=alpha_hist, beta=beta_hist))
        if converged:
            break

    return mu, history


# -- direction assembly from stored iterates --------------------------------

def _combine(iterates, coeffs) -> object:
    """sum_i coeffs[i] * eta^i for the first len(coeffs) iterates."""
    acc = complex(coeffs[0]) * iterates[0]
    for i in range(1, len(coeffs)):
        acc = acc + complex(coeffs[i]) * iterates[i]
    return acc


def _first_difference(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of (I - T) v when v = sum_i coeffs[i] eta^i."""
    out = np.zeros(len(coeffs) + 1, dtype=coeffs.dtype)
    out[:-1] += coeffs
    out[1:] -= coeffs
    return out


def binomial_directions(iterates, j: int):
    """(I - T)^j g expanded binomially over the stored iterates.

    Returns sum_l C(j,l) (-1)^l eta^l; needs eta^0 ... eta^j.
    """
    if len(iterates) < j + 1:
        raise ValueError(f"binomial expansion of order {j} needs {j + 1} "
                         f"iterates, have {len(iterates)}")
    coeffs = np.array([math.comb(j, l) * (-1.0) ** l for l in range(j + 1)])
    return _combine(iterates, coeffs)


def _power_to_eta(c: np.ndarray) -> np.ndarray:
    """eta-basis weights of sum_m c[m] (I-T)^m g via the binomial expansion."""
    out = np.zeros(len(c), dtype=complex)
    for m in range(len(c)):
        if c[m] == 0.0:
            continue
        for l in range(m + 1):
            out[l] += c[m] * math.comb(m, l) * (-1.0) ** l
    return out


def stable_directions_step(state: KrylovState, iterates) -> KrylovState:
    """Append p^(j+1) via the identification update of the gamma coefficients.

    Requires state.gamma for p^(0)..p^(j), the beta row for column j, and the
    iterate eta^(j+1).
    """
    j = len(state.gamma) - 1
    if len(iterates) < j + 2:
        raise ValueError(f"identification step to p^({j + 1}) needs iterate "
                         f"eta^{j + 1}; have eta^0..eta^{len(iterates) - 1}")
    beta = state.beta[j]
    new = _first_difference(state.gamma[j])
    for i in range(j + 1):
        new[: len(state.gamma[i])] += beta[i] * state.gamma[i]
    gamma = state.gamma + [new]
    p_next = _combine(iterates, new)
    return KrylovState(j=state.j, mu=state.mu, r=state.r,
                       p=state.p + [p_next], Ap=state.Ap,
                       alpha=state.alpha, beta=state.beta, gamma=gamma)


def orthodir_identified(apply_T, g, inner_product, tol: float = 1e-12,
                        max_iter: int = 200, mode: str = "stable",
                        callback=None, iterates=None):
    """ORTHODIR on (I - T) mu = g with directions assembled from iterates.

    mode = "stable" uses the gamma identification recursion; mode = "binomial"
    deliberately reproduces the cancellation-prone binomial expansion for the
    comparison experiment.  Both extend the iterate list with one T-application
    per iteration, so reflection counts match the Neumann sum: completing
    iteration j costs iterates up to eta^(j+2) (eta^(j+1) if it converged
    there and stopped).

    Returns (solution, residual_history, state); ``iterates`` may be a list or
    an IterateSequence-like object supporting len/getitem/append.
    """
    if mode not in ("stable", "binomial"):
        raise ValueError(f"unknown mode {mode!r}")
    g_norm = math.sqrt(_norm2(inner_product, g))
    if g_norm == 0.0:
        return 0.0 * g, [0.0], KrylovState(j=-1, mu=0.0 * g, r=g)

    if iterates is None:
        iterates = [g]

    def ensure(m):
        while len(iterates) < m + 1:
            iterates.append(apply_T(iterates[-1]))

    stable = mode == "stable"
    # Power-basis (binomial) or eta-basis (stable) coefficients per direction.
    coeffs = [np.array([1.0 + 0.0j])]

    def assemble(c, shift):
        """Vector for coefficients c shifted by (I-T)^shift."""
        if stable:
            w = c
            for _ in range(shift):
                w = _first_difference(w)
        else:
            w = np.concatenate([np.zeros(shift, dtype=complex), c])
            w = _power_to_eta(w)
        ensure(len(w) - 1)
        return _combine(iterates, w)

    mu = 0.0 * g
    r = g
    p = [g]
    Ap = []
    ap_norm2 = []
    alpha_hist: list = []
    beta_hist: list = []
    history = [1.0]
    state = KrylovState(j=-1, mu=mu, r=r, p=p, Ap=Ap,
                        gamma=coeffs if stable else None)

    for j in range(max_iter):
        Ap.append(assemble(coeffs[j], 1))
        ap_norm2.append(_norm2(inner_product, Ap[j]))
        if not np.isfinite(ap_norm2[j]) or ap_norm2[j] < _TINY:
            raise BreakdownError(j)
        alpha = complex(inner_product(r, Ap[j])) / ap_norm2[j]
        mu = mu + alpha * p[j]
        r = r - alpha * Ap[j]
        history.append(math.sqrt(_norm2(inner_product, r)) / g_norm)
        alpha_hist.append(alpha)

        state = KrylovState(j=j, mu=mu, r=r, p=p, Ap=Ap, alpha=alpha_hist,
                            beta=beta_hist, gamma=coeffs if stable else None)
        if history[-1] < tol:
            if callback is not None:
                callback(state)
            break

        A2p = assemble(coeffs[j], 2)
        beta = np.array([-inner_product(A2p, Ap[i]) / ap_norm2[i]
                         for i in range(j + 1)])
        beta_hist.append(beta)

        if stable:
            state = stable_directions_step(state, iterates)
            coeffs = state.gamma
            p = state.p
        else:
            new = np.concatenate([[0.0], coeffs[j]])
            for i in range(j + 1):
                new[: len(coeffs[i])] += beta[i] * coeffs[i]
            coeffs.append(new)
            p.append(assemble(coeffs[j + 1], 0))
            state.p = p
        if callback is not None:
            callback(state)

    return mu, history, state


# -- Wynn epsilon (Pade) baseline --------------------------------------------

def _as_matrix(partial_sums):
    """Stack vectors into (len, dim) complex; returns (matrix, rebuild)."""
    first = partial_sums[0]
    if isinstance(first, np.ndarray):
        mat = np.stack([np.asarray(s, dtype=complex).ravel() for s in partial_sums])
        shape = np.asarray(first).shape
        return mat, lambda flat: flat.reshape(shape)
    # MultiDensity-like: has .components with .values arrays.
    sizes = [c.values.size for c in first.components]
    splits = np.cumsum(sizes)[:-1]

    def flatten(s):
        return np.concatenate([np.asarray(c.values, dtype=complex).ravel()
                               for c in s.components])

    def rebuild(flat):
        return first.copy_with([part.reshape(c.values.shape) for part, c in
                                zip(np.split(flat, splits), first.components)])

    return np.stack([flatten(s) for s in partial_sums]), rebuild


def pade_accelerate(partial_sums, order: int, return_diagnostics: bool = False):
    """Diagonal Pade extrapolant of a vector sequence via Wynn's epsilon table.

    Applies the scalar epsilon recursion componentwise to the last
    2*order + 1 partial sums and returns the column-2*order entry.  Vanishing
    table differences freeze the affected entries at their previous value and
    are counted in the diagnostics.
    """
    need = 2 * order + 1
    if len(partial_sums) < need:
        raise ValueError(f"pade order {order} needs {need} partial sums, "
                         f"have {len(partial_sums)}")
    mat, rebuild = _as_matrix(partial_sums[len(partial_sums) - need:])

    frozen = 0
    # epsilon_{-1} = 0, padded one row longer so prev[1:-1] aligns in every
    # column: eps_{k+1}^(i) = eps_{k-1}^(i+1) + 1/(eps_k^(i+1) - eps_k^(i)).
    prev = np.zeros((need + 1, mat.shape[1]), dtype=complex)
    curr = mat                         # epsilon_0
    for _ in range(2 * order):
        diff = curr[1:] - curr[:-1]
        bad = np.abs(diff) < _TINY
        frozen += int(np.count_nonzero(bad))
        inv = 1.0 / np.where(bad, 1.0, diff)
        curr, prev = np.where(bad, prev[1:-1], prev[1:-1] + inv), curr

    if frozen:
        logger.warning("pade_accelerate froze %d epsilon-table entries", frozen)
    out = rebuild(curr[0])
    if return_diagnostics:
        return out, frozen
    return out

import numpy as np
import pytest

from multiscat import krylov
from multiscat.krylov import (BreakdownError, binomial_directions, orthodir,
                              orthodir_identified, pade_accelerate,
                              stable_directions_step)
from multiscat.multiscatter import initial_iterate, neumann_sum

import oracles


def vdot_inner(a, b):
    return np.vdot(b, a)


def scaled_random_matrix(n: int, rho: float, seed: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    T = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    return T * (rho / np.abs(np.linalg.eigvals(T)).max())


def random_vector(n: int, seed: int) -> np.ndarray:
    r = np.random.default_rng(seed)
    return r.standard_normal(n) + 1j * r.standard_normal(n)


def test_identity_converges_in_one_iteration():
    g = random_vector(20, 0)
    mu, hist = orthodir(lambda v: v, g, vdot_inner)
    assert len(hist) == 2
    assert hist[1] < 1e-15
    assert np.allclose(mu, g, atol=1e-14)


def test_matches_direct_solve():
    T = scaled_random_matrix(50, 0.5, 11)
    g = random_vector(50, 1)
    mu, hist = orthodir(lambda v: v - T @ v, g, vdot_inner, tol=1e-13,
                        max_iter=100)
    assert hist[-1] < 1e-13
    direct = np.linalg.solve(np.eye(50) - T, g)
    assert np.linalg.norm(mu - direct) / np.linalg.norm(direct) < 1e-12


def test_residuals_non_increasing_and_minimal():
    T = scaled_random_matrix(50, 0.9, 11)
    A = np.eye(50) - T
    g = random_vector(50, 2)
    states = []
    mu, hist = orthodir(lambda v: A @ v, g, vdot_inner, tol=1e-30,
                        max_iter=12, callback=states.append)
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(hist, hist[1:]))
    # minimal residual: no vector in the span of the consumed directions
    # beats the iterate (state.p additionally holds the next, unused one)
    st = states[-1]
    P = np.stack(st.p[: len(st.alpha)], axis=1)
    rng = np.random.default_rng(3)
    r_norm = np.linalg.norm(g - A @ st.mu)
    for _ in range(100):
        c = rng.standard_normal(P.shape[1]) + 1j * rng.standard_normal(P.shape[1])
        trial = st.mu + 1e-3 * (P @ c)
        assert np.linalg.norm(g - A @ trial) >= r_norm * (1.0 - 1e-12)


def test_zero_operator_breaks_down():
    g = random_vector(10, 4)
    with pytest.raises(BreakdownError) as exc:
        orthodir(lambda v: 0.0 * v, g, vdot_inner)
    assert exc.value.iteration == 0


def test_zero_right_hand_side():
    g = np.zeros(8, dtype=complex)
    mu, hist = orthodir(lambda v: v, g, vdot_inner)
    assert np.all(mu == 0.0)
    assert hist == [0.0]


def test_binomial_directions_expansion():
    T = scaled_random_matrix(12, 0.5, 5)
    g = random_vector(12, 6)
    iterates = [g, T @ g, T @ (T @ g)]
    want = iterates[0] - 2.0 * iterates[1] + iterates[2]
    got = binomial_directions(iterates, 2)
    assert np.array_equal(got, want)
    with pytest.raises(ValueError):
        binomial_directions(iterates, 3)


def test_stable_first_direction_coefficients():
    T = scaled_random_matrix(16, 0.6, 7)
    g = random_vector(16, 8)
    states = []
    orthodir_identified(lambda v: T @ v, g, vdot_inner, tol=1e-30, max_iter=2,
                        mode="stable", callback=states.append)
    st = states[0]
    # p^(1) = (I-T)p^(0) + beta_00 p^(0) = (1 + beta_00) eta^0 - eta^1
    beta00 = complex(st.beta[0][0])
    assert st.gamma[1][0] == pytest.approx(1.0 + beta00, abs=1e-15)
    assert st.gamma[1][1] == pytest.approx(-1.0, abs=1e-15)


def test_stable_step_requires_next_iterate():
    T = scaled_random_matrix(10, 0.5, 9)
    g = random_vector(10, 10)
    states = []
    orthodir_identified(lambda v: T @ v, g, vdot_inner, tol=1e-30, max_iter=1,
                        mode="stable", callback=states.append)
    with pytest.raises(ValueError):
        stable_directions_step(states[-1], [g])


@pytest.mark.parametrize("rho", [0.5, 0.9])
def test_identified_equals_direct_orthodir(rho):
    T = scaled_random_matrix(50, rho, 11)
    g = random_vector(50, 1)
    mu_d, hist_d = orthodir(lambda v: v - T @ v, g, vdot_inner, tol=1e-30,
                            max_iter=20)
    mu_s, hist_s, _ = orthodir_identified(lambda v: T @ v, g, vdot_inner,
                                          tol=1e-30, max_iter=20, mode="stable")
    assert len(hist_d) == len(hist_s)
    assert max(abs(a - b) for a, b in zip(hist_d, hist_s)) < 1e-12
    assert np.linalg.norm(mu_d - mu_s) / np.linalg.norm(mu_d) < 1e-12
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(hist_s, hist_s[1:]))


def test_binomial_route_cancels_catastrophically():
    # by j ~ 50 the alternating binomial weights reach 1e17 while the
    # iterates decay only like 0.9^j, so the expansion loses the answer;
    # the gamma update never forms the large intermediates
    T = scaled_random_matrix(50, 0.9, 11)
    g = random_vector(50, 7)
    A = np.eye(50) - T
    mu_s, hist_s, st = orthodir_identified(lambda v: T @ v, g, vdot_inner,
                                           tol=1e-14, max_iter=60, mode="stable")
    mu_b, hist_b, _ = orthodir_identified(lambda v: T @ v, g, vdot_inner,
                                          tol=1e-14, max_iter=60, mode="binomial")
    assert hist_s[-1] < 1e-13
    true_b = np.linalg.norm(g - A @ mu_b) / np.linalg.norm(g)
    assert min(hist_b) > 1e-6
    assert true_b > 1e-6
    assert min(hist_b) / hist_s[-1] > 1e6
    # the stable coefficients stay modest throughout
    assert max(np.abs(c).max() for c in st.gamma) < 1e3


def test_directions_are_a_orthogonal():
    T = scaled_random_matrix(40, 0.8, 13)
    g = random_vector(40, 14)
    states = []
    orthodir(lambda v: v - T @ v, g, vdot_inner, tol=1e-30, max_iter=15,
             callback=states.append)
    Ap = np.stack(states[-1].Ap, axis=1)
    gram = Ap.conj().T @ Ap
    off = gram - np.diag(np.diag(gram))
    scale = np.sqrt(np.outer(np.diag(gram).real, np.diag(gram).real))
    assert np.abs(off / scale).max() < 1e-8


def test_identified_on_scattering_operator(desk, desk_iterates, desk_ref):
    from multiscat.multiscatter import apply_T

    g = initial_iterate(desk)
    inner = lambda a, b: a.inner(b)
    mu, hist, st = orthodir_identified(lambda v: apply_T(desk, v), g, inner,
                                       tol=1e-12, max_iter=30, mode="stable",
                                       iterates=desk_iterates)
    assert hist[-1] < 1e-12
    err = (mu - desk_ref).norm() / desk_ref.norm()
    assert err < 1e-10
    assert max(np.abs(c).max() for c in st.gamma) < 1e6


# -- Pade / epsilon extrapolation -------------------------------------------

def test_pade_sums_geometric_series_exactly():
    z = 0.9
    sums = [np.array([(1.0 - z ** (m + 1)) / (1.0 - z)]) for m in range(5)]
    out = pade_accelerate(sums, 2)
    assert abs(out[0] - 10.0) < 1e-10


def test_pade_matches_scalar_epsilon_oracle():
    # alternating harmonic partial sums -> log 2
    sums = np.cumsum([(-1.0) ** m / (m + 1.0) for m in range(9)])
    want = oracles.wynn_epsilon_scalar(list(sums))
    got = pade_accelerate([np.array([s]) for s in sums], 4)
    assert got[0] == pytest.approx(want, abs=1e-13)
    assert abs(got[0] - np.log(2.0)) < 1e-6


def test_pade_constant_sequence_freezes():
    sums = [np.ones(3) for _ in range(5)]
    out, frozen = pade_accelerate(sums, 2, return_diagnostics=True)
    assert np.allclose(out, 1.0)
    assert frozen > 0


def test_pade_needs_enough_sums():
    sums = [np.zeros(2) for _ in range(4)]
    with pytest.raises(ValueError):
        pade_accelerate(sums, 2)


def test_pade_on_multidensity_partial_sums(tiny, tiny_ref):
    _, seq = neumann_sum(tiny, 14)
    partial = []
    acc = None
    for it in seq.iterates:
        acc = it if acc is None else acc + it
        partial.append(acc)
    out = pade_accelerate(partial, 5)
    plain = (partial[-1] - tiny_ref).norm() / tiny_ref.norm()
    accel = (out - tiny_ref).norm() / tiny_ref.norm()
    assert accel < 0.01 * plain


@pytest.mark.parametrize("z", [0.3 + 0.4j, -0.7, 0.85j])
def test_pade_geometric_complex_ratio(z):
    sums = [np.array([(1.0 - z ** (m + 1)) / (1.0 - z)]) for m in range(7)]
    out = pade_accelerate(sums, 1)
    assert abs(out[0] - 1.0 / (1.0 - z)) < 1e-10

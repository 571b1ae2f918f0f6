import numpy as np
import pytest

from multiscat import multiscatter, rate
from multiscat.cfie import grid_params
from multiscat.geometry import Circle, Scene
from multiscat.multiscatter import (IterateSequence, ResourceGuardError,
                                    apply_T, block_matrix, choose_n,
                                    discretize, incident_multidensity,
                                    initial_iterate, neumann_sum,
                                    reference_solve)

import oracles
from conftest import paper_circles, rel_err, rng


def test_choose_n_rule():
    circle = Circle((0.0, 0.0), 1.0)   # perimeter 2 pi
    assert choose_n(circle, 10.0, ppw=10.0) == 100
    assert choose_n(circle, 10.1, ppw=10.0) == 102   # rounded up to even
    assert choose_n(circle, 0.1, ppw=10.0) == 16     # floor n_min


def test_single_obstacle_T_is_zero():
    scene = Scene((Circle((0.0, 0.0), 1.0),), (1.0, 0.0), 5.0)
    ds = discretize(scene, n=64)
    g = initial_iterate(ds)
    assert apply_T(ds, g).norm() == 0.0


def test_single_obstacle_initial_iterate_is_solution():
    scene = Scene((Circle((0.0, 0.0), 1.0),), (1.0, 0.0), 5.0)
    ds = discretize(scene, n=128)
    g = initial_iterate(ds)
    ref = reference_solve(ds)
    assert rel_err(g, ref) < 1e-13
    exact = oracles.mie_soft_circle_current(5.0, 1.0, (1.0, 0.0), grid_params(128))
    assert rel_err(g, ref.copy_with([exact])) < 1e-8


def test_well_separated_g_decay():
    # The single-obstacle solve approaches the coupled solution like d^{-1/2}
    # (Hankel far-field): quadrupling the gap halves the error.  Transverse
    # offset keeps the second circle out of the first one's shadow.
    errs = {}
    for d in (100.0, 400.0):
        scene = Scene((Circle((0.0, 0.0), 1.0), Circle((0.0, d + 2.0), 1.0)),
                      (1.0, 0.0), 5.0)
        ds = discretize(scene, n=128)
        errs[d] = rel_err(initial_iterate(ds), reference_solve(ds))
    assert errs[400.0] < 0.05
    assert errs[100.0] / errs[400.0] == pytest.approx(2.0, rel=0.15)


def test_apply_T_linearity(tiny):
    r = rng(7)
    vals = [r.standard_normal(n) + 1j * r.standard_normal(n) for n in tiny.n]
    mu = tiny.density_from(vals)
    eta = initial_iterate(tiny)
    a, b = 0.3 - 1.1j, -2.0 + 0.5j
    lhs = apply_T(tiny, a * eta + b * mu)
    rhs = a * apply_T(tiny, eta) + b * apply_T(tiny, mu)
    assert rel_err(lhs, rhs) < 1e-13


def test_neumann_sum_m0_is_g(tiny):
    total, seq = neumann_sum(tiny, 0)
    assert rel_err(total, initial_iterate(tiny)) == 0.0
    assert len(seq) == 1


def test_neumann_iterates_are_T_powers(tiny):
    _, seq = neumann_sum(tiny, 3)
    again = apply_T(tiny, seq[2])
    assert rel_err(seq[3], again) < 1e-14


def test_neumann_sum_extends_existing_sequence(tiny):
    _, seq = neumann_sum(tiny, 4)
    ids = [id(seq[m]) for m in range(5)]
    _, seq2 = neumann_sum(tiny, 8, seq)
    assert seq2 is seq
    assert [id(seq[m]) for m in range(5)] == ids


def test_neumann_converges_to_reference(tiny, tiny_ref):
    total, _ = neumann_sum(tiny, 80)
    assert rel_err(total, tiny_ref) < 1e-10


def test_partial_sum_error_monotone(desk, desk_ref, desk_iterates):
    total = desk_iterates[0]
    errs = [rel_err(total, desk_ref)]
    for m in range(1, 21):
        total = total + desk_iterates[m]
        errs.append(rel_err(total, desk_ref))
    tail = np.array(errs[3:])
    assert np.all(np.diff(tail) < 0.0)


def test_geometric_tail(desk, desk_iterates):
    # ||eta^{m+2} - R2 eta^m|| <= C delta^m with fitted delta < 1
    r2 = rate.r2_2d(rate.orbit_geometry(desk.scene))
    resid = []
    for m in range(8, 21):
        diff = desk_iterates[m + 2] - complex(r2) * desk_iterates[m]
        resid.append(diff.norm())
    fit = np.polyfit(np.arange(8, 21), np.log(resid), 1)
    assert np.exp(fit[0]) < 1.0


def test_reference_solve_residual(tiny, tiny_ref):
    A = block_matrix(tiny)
    f = incident_multidensity(tiny)
    x = np.concatenate([c.values for c in tiny_ref.components])
    b = np.concatenate([c.values for c in f.components])
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-12


def test_iterate_cap_guard(tiny):
    with pytest.raises(ResourceGuardError):
        neumann_sum(tiny, 600)


def test_reference_unknown_guard(monkeypatch, tiny):
    monkeypatch.setattr(multiscatter, "REFERENCE_UNKNOWN_GUARD", 100)
    with pytest.raises(ResourceGuardError):
        reference_solve(tiny)


def test_density_norm_and_inner(tiny):
    g = initial_iterate(tiny)
    n2 = g.inner(g)
    assert isinstance(n2, complex)
    assert n2.real == pytest.approx(g.norm() ** 2, rel=1e-13)
    assert abs(n2.imag) < 1e-13 * n2.real

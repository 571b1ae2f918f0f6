"""Shared scenes and discretizations, session-cached (assembly dominates)."""

import numpy as np
import pytest

from multiscat import multiscatter
from multiscat.geometry import Circle, Ellipse, Scene


def paper_circles(k: float) -> Scene:
    return Scene((Circle((0.0, 0.0), 1.0), Circle((0.9625, -2.6444), 1.5)),
                 (1.0, 0.0), k)


def paper_ellipses(k: float) -> Scene:
    return Scene((Ellipse((0.0, 0.0), (10.0, 1.0)), Ellipse((0.0, -4.5), (7.0, 2.0))),
                 (1.0, 0.0), k)


@pytest.fixture(scope="session")
def desk():
    """circles_desk: paper circle geometry, k=50, the bundled CI grid."""
    return multiscatter.discretize(paper_circles(50.0), n=(500, 750))


@pytest.fixture(scope="session")
def desk_ref(desk):
    return multiscatter.reference_solve(desk)


@pytest.fixture(scope="session")
def desk_iterates(desk):
    _, seq = multiscatter.neumann_sum(desk, 24)
    return seq


@pytest.fixture(scope="session")
def tiny():
    """Same circles at k=8 on a coarse grid; for fast structural tests."""
    return multiscatter.discretize(paper_circles(8.0), n=(96, 144))


@pytest.fixture(scope="session")
def tiny_ref(tiny):
    return multiscatter.reference_solve(tiny)


def rel_err(x, ref) -> float:
    return (x - ref).norm() / ref.norm()


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)

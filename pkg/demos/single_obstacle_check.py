"""Solve the sound-soft circle and show the solver's spectral convergence.

Coarse-grid currents are compared against a fine reference on the shared
nodes; the error should fall off faster than any power of the grid size
until it hits the rounding floor.
"""

import numpy as np

from multiscat.cfie import assemble_self, incident_rhs, solve_self
from multiscat.geometry import Circle


def current(circle: Circle, k: float, n: int) -> np.ndarray:
    rhs = incident_rhs(circle, k, (1.0, 0.0), n)
    return solve_self(assemble_self(circle, k, n), rhs).values


def main():
    k = 10.0
    circle = Circle((0.0, 0.0), 1.0)
    fine = current(circle, k, 512)
    print(f"sound-soft circle, k = {k}")
    print(f"{'n':>6s} {'rel. change vs n=512':>22s}")
    for n in (32, 64, 128, 256):
        eta = current(circle, k, n)
        err = np.linalg.norm(eta - fine[:: 512 // n]) / np.linalg.norm(fine)
        print(f"{n:6d} {err:22.3e}")


if __name__ == "__main__":
    main()

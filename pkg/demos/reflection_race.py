"""Race the solvers on the bundled two-circle scene.

Runs the plain reflection sum, its Pade extrapolation, and both Krylov
variants, then prints how many reflections each needed for twelve digits.
The unstable binomial variant never gets there; its floor is part of the
story.
"""

import pathlib
import tempfile

from multiscat.experiment import bundled_scenario_path, load_config, run


def main():
    cfg = load_config(bundled_scenario_path("circles_desk"))
    with tempfile.TemporaryDirectory() as td:
        cfg.output = td
        artifacts = run(cfg)
        print(f"scene {cfg.scenario}: k = {cfg.k}, grid {cfg.n}")
        print(f"{'method':18s} {'reflections':>12s} {'best log10 err':>15s}")
        for method in cfg.methods:
            rows = []
            with open(artifacts[method], encoding="utf-8") as fh:
                next(fh)
                for ln in fh:
                    cost, log_err, _ = ln.split(",")
                    rows.append((float(cost), float(log_err)))
            reached = next((c for c, l in rows if l <= -12.0), None)
            best = min(l for _, l in rows)
            shown = f"{reached:.0f}" if reached is not None else "never"
            print(f"{method:18s} {shown:>12s} {best:>15.2f}")


if __name__ == "__main__":
    main()

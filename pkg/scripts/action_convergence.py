"""Relative error of the discrete action of the sampled classical path as n grows.

The Grunwald operator is first order, so the error falls like dt for the
ordinary OU process and like dt^(2 alpha gamma - 1) for fractional orders.

    python3 scripts/action_convergence.py
"""
import argparse

import numpy as np

from fou2.kernel import ProcessParams
from fou2.langevin import build_grunwald
from fou2.pathint import BoundaryData, classical_action, classical_path_grid, discrete_action


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params", type=float, nargs=3, action="append", metavar=("ALPHA", "GAMMA", "LAMBDA"))
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 512, 1024, 2048, 4096])
    args = ap.parse_args()
    sets = args.params or [(1.0, 1.0, 1.0), (0.9, 1.0, 0.7), (0.8, 0.9, 0.7)]
    b = BoundaryData(0.3, 1.3, 1.0)
    for s in sets:
        p = ProcessParams(*s)
        exact = classical_action(p, b)
        errs = []
        for n in args.sizes:
            op = build_grunwald(p, b.beta / n, n + 1)
            errs.append(abs(discrete_action(p, classical_path_grid(p, b, n), op) / exact - 1))
        order = np.polyfit(np.log(args.sizes), np.log(errs), 1)[0]
        cells = " ".join(f"{n}:{e:.2e}" for n, e in zip(args.sizes, errs))
        print(f"alpha={p.alpha} gamma={p.gamma} lambda={p.lam}: {cells}  observed order {-order:.2f}")


if __name__ == "__main__":
    main()

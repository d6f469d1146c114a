"""Measure T* for the A_T/E_T budget of 3-fold symmetric data with ||theta0||_{X_4} = 1.

    python scripts/energy_budget.py [--seed 0] [--bound 2.0] [--out budget.csv]
"""
import argparse
import csv

from sqglab.data import random_symmetric
from sqglab.evolve import SolverConfig, run
from sqglab.field import Grid
from sqglab.norms import NormConfig, budget_scaled, find_t_star, xp_norm
from sqglab.symmetry import SymmetryGroup


def datum(n, l, G, seed):
    th = random_symmetric(Grid(n, l), G, seed=seed)
    th = th * (1.0 / xp_norm(th, NormConfig(p=4)))
    return th, xp_norm(th, NormConfig(p=2))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--l", type=float, default=8.0)
    ap.add_argument("--bound", type=float, default=2.0, help="budget bound in units of ||theta0||_{X_2}^2")
    ap.add_argument("--out", default="budget.csv")
    args = ap.parse_args()

    G = SymmetryGroup.rotation_reflection(3)
    r_max = 0.9 * args.l
    th, x2 = datum(128, args.l, G, args.seed)
    traj = run(th, SolverConfig(dt=0.01, t_end=1.0, group=G, resymmetrize_every=1, diagnostics=False))
    t_star = find_t_star(traj, args.bound * x2**2, r_max, candidates=[0.01 * k for k in range(1, 26)])
    if t_star is None:
        raise SystemExit("no candidate T* satisfies the bound")
    print(f"X_2 = {x2:.4f}, T* = {t_star:g}")

    th, x2 = datum(256, args.l, G, args.seed)
    traj = run(th, SolverConfig(dt=0.005, t_end=4 * t_star, group=G, resymmetrize_every=1, diagnostics=False))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "R0", "budget", "budget_over_x2sq"])
        for T, R0, b in budget_scaled(traj, t_star, r_max):
            w.writerow([repr(T), repr(R0), repr(b), repr(b / x2**2)])
            print(f"T = {T:<5g} R0 = {R0:<3g} budget / X_2^2 = {b / x2**2:.3f}")


if __name__ == "__main__":
    main()

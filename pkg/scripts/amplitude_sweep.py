"""Continuation of the sin(3 phi) profile in the amplitude A inside the rotation(3) class.

    python scripts/amplitude_sweep.py [--n 128] [--out sweep_out]

The asymmetry column measures the distance to the reflection-symmetric class.
Large jumps are listed as exploratory symmetry-breaking candidates.
"""
import argparse
from pathlib import Path

import numpy as np

from sqglab.nonlocal_ops import HomogeneousProfile
from sqglab.selfsim import SelfSimConfig, sweep_amplitude
from sqglab.symmetry import SymmetryGroup

DEFAULT_A = [0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--A", type=float, nargs="+", default=DEFAULT_A)
    ap.add_argument("--out", default="sweep_out")
    args = ap.parse_args()

    G, Gbar = SymmetryGroup.rotation_reflection(3), SymmetryGroup.rotation(3)
    f = HomogeneousProfile.from_function(lambda p: np.sin(3 * p), 256, G)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    branch = sweep_amplitude(f, args.A, G, Gbar, SelfSimConfig(n=args.n), out_dir=out / "profiles")
    branch.write_csv(out / "branch.csv")
    for e in branch.entries:
        print(f"A = {e.A:<5g} residual {e.residual:.3e} asymmetry {e.asymmetry:.3e} converged={e.converged}")
    print(f"asymmetry floor (A <= 0.2): {branch.floor:.3e}")
    print("exploratory candidates:", ", ".join(f"{a:g}" for a in branch.breaking_candidates) or "none")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Cauchy study in the regularization strength on the benchmark setup.

Reruns the same configuration with halving eps and prints the space-time
L2 distances between consecutive runs for the density, signal, and
velocity fields.  Decreasing distances indicate the regularized family
converges as eps -> 0; no rate is asserted.
"""

import argparse
import sys

from chemoflow.config import parse_config, reference_config_text
from chemoflow.sweeps import eps_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", default="0.1,0.05,0.025,0.0125")
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--gamma", type=float, default=0.5)
    args = ap.parse_args()

    base = parse_config(reference_config_text(gamma=args.gamma, t_end=args.T))
    eps_list = [float(e) for e in args.eps.split(",")]
    d = eps_sweep(base, eps_list, args.T)
    print("eps:", eps_list)
    for key in ("n", "c", "u"):
        seq = getattr(d, key)
        dec = all(b < a for a, b in zip(seq, seq[1:]))
        print(f"d_{key}: " + "  ".join(f"{v:.6e}" for v in seq) + f"   decreasing={dec}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Robust decoding success rate across platoon shapes under one malicious vehicle.

For every P(n,k) listed, draws `--seeds` weight matrices, lets vehicle
`--attacker` inject Gaussian garbage into its updates, and counts how often each
honest observer recovers x[0] to 1e-6 with fault budget f = 1.

    python3 scripts/attack_sweep.py --shapes 8:1 8:2 12:3 20:3 --seeds 5
"""

import argparse

import numpy as np

from dfc.iteration import Fault, FaultModel, observe, run
from dfc.recovery import RobustDecoder, observability_matrix
from dfc.topology import max_tolerable_faults, platoon, vertex_connectivity
from dfc.weights import random_weights


def sweep(n, k, seeds, attacker, trials, scale):
    g = platoon(n, k)
    L = n - 1
    hits = total = 0
    for seed in range(seeds):
        W = random_weights(g, seed)
        rng = np.random.default_rng(seed)
        x0 = 10 * rng.standard_normal(n)
        observers = [i for i in range(1, n + 1) if i != attacker]
        decoders = [RobustDecoder.build(observability_matrix(W, i, L), 1) for i in observers]
        for _ in range(trials):
            faults = FaultModel((Fault(attacker, values=tuple(scale * rng.standard_normal(L + 1))),))
            tr = run(W, x0, faults, L)
            for i, dec in zip(observers, decoders):
                r = dec.decode(observe(tr, i, L))
                hits += bool(r.success and np.abs(r.x0_estimate - x0).max() <= 1e-6)
                total += 1
    return hits, total, vertex_connectivity(g)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shapes", nargs="+", default=["8:1", "8:2", "12:3", "20:3"])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--attacker", type=int, default=3)
    ap.add_argument("--scale", type=float, default=5.0)
    args = ap.parse_args()

    print(f"{'shape':>8} {'kappa':>5} {'max f':>5} {'exact':>12}")
    for shape in args.shapes:
        n, k = (int(v) for v in shape.split(":"))
        hits, total, kappa = sweep(n, k, args.seeds, args.attacker, args.trials, args.scale)
        print(f"{f'P({n},{k})':>8} {kappa:>5} {max_tolerable_faults(kappa):>5} "
              f"{hits:>5}/{total:<6}")


if __name__ == "__main__":
    main()

"""Orbit data for phase portraits of the bundled examples.

Writes one CSV with columns orbit, t, the model coordinates (last strategy of
each group dropped), H when the game is conservative, and the leaf
invariants. Orbits are integrated concurrently; output order is fixed.

    python3 scripts/phase_portraits.py ex1 --orbits 8 --t1 60 -o ex1_orbits.csv
"""

import argparse
import csv
import sys

import numpy as np

from polyrep.cli import EXAMPLES, example_text, poisson_data
from polyrep.conservative import make_conservative
from polyrep.core import random_interior_point, to_model
from polyrep.dynamics import IntegratorConfig, integrate_batch
from polyrep.gamefile import parse_game_file


def orbits(name, count, t1, samples, seed):
    gf = parse_game_file(example_text(name))
    G = gf.game()
    sig = G.signature
    _, dec = make_conservative(gf.skew_model, sig, gf.model_point)
    pd = poisson_data(gf, dec.model_game(sig))
    rng = np.random.default_rng(seed)
    x0s = [random_interior_point(sig, rng) for _ in range(count)]
    cfg = IntegratorConfig(rtol=float(gf.rtol), atol=float(gf.atol))
    trajs = integrate_batch(G, x0s, (0.0, t1), cfg, t_eval=np.linspace(0.0, t1, samples),
                            hamiltonian=dec.hamiltonian(sig), poisson=pd)
    return sig, trajs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("example", choices=EXAMPLES)
    ap.add_argument("--orbits", type=int, default=8)
    ap.add_argument("--t1", type=float, default=60.0)
    ap.add_argument("--samples", type=int, default=601)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", help="CSV path (default: stdout)")
    args = ap.parse_args(argv)

    sig, trajs = orbits(args.example, args.orbits, args.t1, args.samples, args.seed)
    m = sig.n - sig.p
    k = trajs[0].leaf.shape[1]
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["orbit", "t"] + [f"y_{i + 1}" for i in range(m)] + ["H"] + [f"c_{j + 1}" for j in range(k)])
    for o, tr in enumerate(trajs):
        for r in range(len(tr)):
            w.writerow([o, repr(float(tr.t[r]))] + [repr(float(v)) for v in to_model(sig, tr.x[r])]
                       + [repr(float(tr.H[r]))] + [repr(float(v)) for v in tr.leaf[r]])
    if args.output:
        out.close()


if __name__ == "__main__":
    main()

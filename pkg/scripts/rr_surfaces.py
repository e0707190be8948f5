"""Entropy of the reported answer and mutual information between true and
reported answer for randomized response, over a (p, eps) grid.

Writes two CSV files suitable for surface plots:
    results/rr_entropy.csv   H(o)       in bits
    results/rr_mi.csv        I(r_1; o)  in bits
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from leakscope import wpe
from leakscope.analysis import load_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-steps", type=int, default=21)
    ap.add_argument("--eps-steps", type=int, default=21)
    ap.add_argument("--eps-max", type=float, default=10.0)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    prog = load_corpus("alg1")
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with open(out / "rr_entropy.csv", "w", newline="") as fh, open(out / "rr_mi.csv", "w", newline="") as fm:
        we, wm = csv.writer(fh), csv.writer(fm)
        we.writerow(["p", "eps", "H_o_bits"])
        wm.writerow(["p", "eps", "I_r_o_bits"])
        for p in np.linspace(0, 1, args.p_steps):
            for eps in np.linspace(0, args.eps_max, args.eps_steps):
                a = wpe.prepare(prog, {"p": p, "eps": eps})
                we.writerow([repr(float(p)), repr(float(eps)), repr(wpe.entropy(a, "o"))])
                wm.writerow([repr(float(p)), repr(float(eps)), repr(wpe.mutual_information(a, "r_1", "o"))])
    n = args.p_steps * args.eps_steps
    print(f"{n} grid points in {time.perf_counter() - t0:.2f}s -> {out}/rr_entropy.csv, {out}/rr_mi.csv")


if __name__ == "__main__":
    main()

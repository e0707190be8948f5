"""Compare the entropy of the exact output distribution of three small
programs (estimated from samples) with the entropy of the Gaussian-mixture
approximation.

    s1: x3 := x1 * x2 with standard Gaussians      (approximation larger)
    s2: x3 := x1 + x2                               (equal)
    s3: x3 := x1 * x2 with x1 a two-component GM    (sign under test)
"""
import argparse

from leakscope import gaussmix, gm_metrics, oracle
from leakscope.analysis import load_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    for name in ("s1", "s2", "s3"):
        prog = load_corpus(name)
        g = gaussmix.run_soga(prog).state.marginal(["x3"]).lump()
        h_soga = gm_metrics.gm_entropy_quadrature(g)
        mc = oracle.mc_run(prog, args.n, seed=args.seed)
        h_mc, se = oracle.histogram_entropy_se(mc.column("x3"))
        print(f"{name}: exact~{h_mc:.4f} (SE {se:.4f})  soga {h_soga:.4f}  "
              f"diff {h_mc - h_soga:+.4f} = {(h_mc - h_soga) / se:+.1f} SE")


if __name__ == "__main__":
    main()

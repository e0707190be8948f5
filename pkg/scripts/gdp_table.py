"""Regenerate the Gaussian-mechanism table (five metrics, two privacy levels)
and print each cell next to its reference value."""
import argparse
import json
import time

from leakscope.tables import gdp_table


def fmt(x):
    return "      -   " if x is None else f"{x:10.6f}"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--range", type=float, default=None, help="override the income range constant")
    ap.add_argument("--json", help="also write the cells to this file")
    args = ap.parse_args()
    params = {"range": args.range} if args.range else None
    t0 = time.perf_counter()
    cells = gdp_table(params)
    print(f"{'row':18s} {'eps':>5s} | {'exact':>10s} {'ref':>10s} | {'lower':>10s} {'ref':>10s} | "
          f"{'upper':>10s} {'ref':>10s}")
    for c in cells:
        print(f"{c['row']:18s} {c['eps']:5g} | {fmt(c['exact'])} {fmt(c['ref_exact'])} | "
              f"{fmt(c['lower'] if c['ref_lower'] is not None else None)} {fmt(c['ref_lower'])} | "
              f"{fmt(c['upper'] if c['ref_upper'] is not None else None)} {fmt(c['ref_upper'])}")
    print(f"computed in {time.perf_counter() - t0:.2f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(cells, fh, indent=2)


if __name__ == "__main__":
    main()

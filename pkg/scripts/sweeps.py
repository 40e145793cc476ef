"""Optimised objective as arrival rate, service rate or stream count is scaled."""

import argparse

from stallbound import experiments as X
from stallbound import io


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenarios", nargs="*", default=list(X.SWEEP_DIRECTION))
    ap.add_argument("--out", default="sweeps.csv")
    args = ap.parse_args()
    base = X.sweep_base_instance()
    rows = []
    for scenario in args.scenarios:
        factors, values = X.monotone_sweep(base, scenario)
        ok = X.is_monotone(values, X.SWEEP_DIRECTION[scenario])
        print(f"{scenario}: monotone={ok}", flush=True)
        for f, v in zip(factors, values):
            print(f"  {f:5.2f}  {v:.6g}", flush=True)
            rows.append((scenario, f, v))
    io.write_csv(args.out, ["scenario", "factor", "objective"], rows,
                 io.provenance_line())


if __name__ == "__main__":
    main()

"""Optimise the desk instance with every baseline and the full optimiser."""

import argparse

from stallbound import experiments as X
from stallbound import io
from stallbound.optimizer import BASELINES, compare_strategies


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="baselines.csv")
    ap.add_argument("--files", type=int, default=50)
    ap.add_argument("--strategies", default=",".join(BASELINES))
    args = ap.parse_args()
    inst = X.desk_instance(r=args.files)
    names = [s for s in args.strategies.split(",") if s]
    results = compare_strategies(inst.topology, inst.catalog, capacity=inst.capacity,
                                 names=names)
    rows = [(name, obj) for name, (_, obj) in results.items()]
    io.write_csv(args.out, ["strategy", "objective"], rows,
                 io.provenance_line())
    for name, obj in rows:
        print(f"{name:8s} {obj:.6g}")


if __name__ == "__main__":
    main()

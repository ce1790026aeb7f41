"""Weak-type error rate for beta = (2d + 1)/8, d = 1, 2 (and 3 with --with-3d)."""
import argparse
import logging
from pathlib import Path

from sincfem.experiments import ExperimentConfig, weak_study, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mc", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--with-3d", action="store_true")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for dim in (1, 2, 3) if args.with_3d else (1, 2):
        beta = (2 * dim + 1) / 8
        res = weak_study(ExperimentConfig(study="weak", dim=dim, beta=beta, n_mc=args.mc, seed=args.seed))
        write_csv(res, out / f"weak_d{dim}.csv")
        fit = res.fit
        print(f"d={dim} beta={beta:.3f} rate={fit.rate:.3f} (theory 0.5)"
              f"{'  high variance' if fit.high_variance else ''}")
        for r in res.records:
            print(f"    h={r.h:.4f} err={r.error:.3e} +- {r.stderr:.1e}")


if __name__ == "__main__":
    main()

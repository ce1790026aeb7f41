"""Strong-error rates for every admissible beta = (2d + j)/8 in one dimension.

    python3 scripts/strong_rates.py --dim 2 --out results/
"""
import argparse
import logging
from pathlib import Path

from sincfem.experiments import ExperimentConfig, strong_study, write_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    betas = [(2 * args.dim + j) / 8 for j in range(1, 8 - 2 * args.dim)]
    print(f"{'beta':>6} {'rate':>7} {'theory':>7} {'resid':>7}")
    for beta in betas:
        cfg = ExperimentConfig(study="strong", dim=args.dim, beta=beta, n_samples=args.samples,
                               seed=args.seed, threads=args.threads)
        res = strong_study(cfg)
        write_csv(res, out / f"strong_d{args.dim}_beta{beta:.3f}.csv")
        fit = res.fit
        print(f"{beta:6.3f} {fit.rate:7.3f} {2 * beta - args.dim / 2:7.3f} {fit.residual:7.3f}")


if __name__ == "__main__":
    main()

"""Command line entry point: ``sincfem {sample,strong,weak,quad-check,cov-check}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import (ExperimentConfig, cov_check, parse_config_file, quad_check, strong_study,
                          weak_study, write_csv, write_manifest)
from .fem import assemble, build_mesh
from .quadrature import build_grid, calibrate_k
from .sampler import build_noise_factor, sample_solution, write_field_sample

log = logging.getLogger("sincfem")


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--dim", type=int)
    common.add_argument("--beta", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--calibration", choices=["strong", "weak", "experiment"])
    common.add_argument("--out")
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sincfem", description=__doc__)
    sub = parser.add_subparsers(dest="study", required=True)

    p = sub.add_parser("sample", parents=[common], help="write one field sample")
    p.add_argument("--n", type=int, required=False)
    p.add_argument("--index", type=int, dest="sample_index")
    p.add_argument("--strategy", choices=["global-cholesky", "per-element"])

    p = sub.add_parser("strong", parents=[common], help="strong error study with overkill noise")
    p.add_argument("--meshes", type=_ints, dest="mesh_ns")
    p.add_argument("--samples", type=int, dest="n_samples")
    p.add_argument("--overkill", type=int, dest="n_ok")

    p = sub.add_parser("weak", parents=[common], help="weak-type error study by Monte Carlo")
    p.add_argument("--meshes", type=_ints, dest="mesh_ns")
    p.add_argument("--mc", type=int, dest="n_mc")
    p.add_argument("--strategy", choices=["global-cholesky", "per-element"])

    p = sub.add_parser("quad-check", parents=[common], help="quadrature error vs dense oracle")
    p.add_argument("--n", type=int)
    p.add_argument("--ks", type=_floats)

    p = sub.add_parser("cov-check", parents=[common], help="load covariance checks")
    p.add_argument("--n", type=int)
    p.add_argument("--mc", type=int, dest="n_mc")
    return parser


def make_config(args) -> ExperimentConfig:
    values = parse_config_file(args.config) if args.config else {}
    values.pop("study", None)
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("config", "verbose", "n", "study")}
    values.update(flags)
    if getattr(args, "n", None) is not None:
        values["mesh_ns"] = (args.n,)
    if args.study == "cov-check" and "n_mc" not in values:
        values["n_mc"] = 20000
    return ExperimentConfig(study=args.study, **values).validate()


def _run_sample(cfg: ExperimentConfig, out: Path):
    n = cfg.mesh_ns[0] if cfg.mesh_ns else 32
    mesh = build_mesh(cfg.dim, n)
    fem = assemble(mesh, cfg.kappa)
    grid = build_grid(cfg.beta, calibrate_k(mesh.h, cfg.beta, cfg.dim, cfg.calibration))
    factor = build_noise_factor(mesh, fem, cfg.strategy)
    sample = sample_solution(mesh, fem, grid, factor, seed=cfg.seed, sample_index=cfg.sample_index,
                             calibration=cfg.calibration, threads=cfg.threads)
    write_field_sample(sample, out)
    return {"node_count": grid.node_count, "N_h": mesh.N_h}


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        out = Path(cfg.out or ("field.txt" if cfg.study == "sample" else f"{cfg.study}.csv"))
        extra = {}
        if cfg.study == "sample":
            extra = _run_sample(cfg, out)
        elif cfg.study == "cov-check":
            rows = cov_check(cfg)
            keys = list(rows[0])
            out.write_text("\n".join([",".join(keys)] +
                                     [",".join(str(r[k]) for k in keys) for r in rows]) + "\n")
            extra = {"rows": rows}
        else:
            run = {"strong": strong_study, "weak": weak_study, "quad-check": quad_check}[cfg.study]
            result = run(cfg)
            write_csv(result, out)
            extra = {"diagnostics": result.diagnostics}
            try:
                extra["fit"] = vars(result.fit)
            except ValueError as exc:
                extra["fit_error"] = str(exc)
        write_manifest(cfg, out.with_name(out.name + ".manifest.json"), extra)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"sincfem {args.study}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> int:
    return run_cli()

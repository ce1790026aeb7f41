"""Convergence studies: strong error with shared overkill noise, weak-type
error by Monte Carlo, quadrature and covariance checks, rate regression and
CSV output.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .fem import assemble, build_mesh
from .quadrature import CALIBRATION_MODES, apply_Q, build_grid, calibrate_k, quadrature_discrepancy
from .sampler import STRATEGIES, build_noise_factor, sample_loads
from .spectral import (analytic_solution_sqnorm, eval_overkill_solution, project_overkill_load,
                       sample_overkill, truncation_tail)

log = logging.getLogger(__name__)

STUDIES = ("strong", "weak", "quad-check", "cov-check", "sample")
DEFAULT_OVERKILL = {1: 2 ** 13 + 1, 2: 2 ** 9 + 1, 3: 129}
DEFAULT_MESHES = {
    "strong": {1: (32, 64, 128, 256, 512), 2: (8, 16, 32, 64), 3: (8, 12, 16, 24)},
    "weak": {1: (8, 16, 32, 64, 128), 2: (8, 16, 32, 64), 3: (4, 6, 8, 12)},
}
# rms log-residual above which a fit is reported as high-variance
RESIDUAL_THRESHOLD = 0.2
CSV_HEADER = "h,N_h,k,nodes,error,wall_ms"


class DegenerateDataError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    study: str = "strong"
    dim: int = 1
    beta: float = 0.5
    kappa: float = 0.5
    mesh_ns: tuple[int, ...] = ()
    n_ok: int | None = None
    n_samples: int = 50
    n_mc: int = 1000
    calibration: str = "experiment"
    seed: int = 0
    out: str | None = None
    threads: int = 1
    ks: tuple[float, ...] = (0.5, 0.4, 0.3, 0.25)
    sample_index: int = 0
    strategy: str | None = None
    ref_tol: float | None = None

    def __post_init__(self):
        if not self.mesh_ns and self.study in DEFAULT_MESHES:
            self.mesh_ns = DEFAULT_MESHES[self.study][self.dim]
        self.mesh_ns = tuple(int(n) for n in self.mesh_ns)
        self.ks = tuple(float(k) for k in self.ks)
        if self.n_ok is None:
            self.n_ok = DEFAULT_OVERKILL.get(self.dim)

    def validate(self) -> "ExperimentConfig":
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if any(b <= a for a, b in zip(self.mesh_ns, self.mesh_ns[1:])):
            raise ValueError(f"mesh_ns must be strictly increasing, got {self.mesh_ns}")
        if any(n < 2 for n in self.mesh_ns):
            raise ValueError("every mesh needs n >= 2")
        if self.calibration not in CALIBRATION_MODES:
            raise ValueError(f"unknown calibration {self.calibration!r}")
        if self.strategy is not None and self.strategy not in STRATEGIES:
            raise ValueError(f"unknown factor strategy {self.strategy!r}")
        if self.study in ("strong", "weak") and not 4 * self.beta > self.dim:
            raise ValueError(f"{self.study} study needs 4*beta > dim "
                             f"(got beta={self.beta}, dim={self.dim})")
        if self.n_samples < 1 or self.n_mc < 1:
            raise ValueError("sample counts must be positive")
        return self


@dataclass(frozen=True)
class ErrorRecord:
    h: float
    N_h: int
    k: float
    node_count: int
    error: float
    study: str
    wall_time: float  # milliseconds
    stderr: float = float("nan")


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    residual: float
    high_variance: bool = False


def fit_rate(points, against: str = "log") -> RateFit:
    """Least squares for ``ln err = c + r ln h`` (``against="inverse"``: ``c + r / h``).

    ``points`` are ``(h, err)`` pairs or ``ErrorRecord``s; the residual is the
    root-mean-square of the log residuals.
    """
    pts = [(p.h, p.error) if isinstance(p, ErrorRecord) else tuple(p) for p in points]
    if len(pts) < 2:
        raise DegenerateDataError("degenerate data: need at least two points")
    x, y = np.array(pts, dtype=float).T
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DegenerateDataError("degenerate data: errors must be positive")
    if len(np.unique(x)) != len(x):
        raise DegenerateDataError("degenerate data: abscissae must be distinct")
    X = np.log(x) if against == "log" else 1.0 / x
    Y = np.log(y)
    design = np.column_stack([np.ones_like(X), X])
    (c, r), *_ = np.linalg.lstsq(design, Y, rcond=None)
    resid = Y - design @ np.array([c, r])
    return RateFit(float(r), float(c), float(np.sqrt(np.mean(resid ** 2))))


@dataclass
class StudyResult:
    config: ExperimentConfig
    records: list[ErrorRecord]
    diagnostics: dict = field(default_factory=dict)
    against: str = "log"

    @property
    def fit(self) -> RateFit:
        if self.against == "inverse":
            fit = fit_rate([(r.k, r.error) for r in self.records], against="inverse")
        else:
            fit = fit_rate(self.records)
        high = fit.residual > RESIDUAL_THRESHOLD
        if self.config.study == "weak":
            high = high or any(not (r.stderr <= 0.5 * r.error) for r in self.records)
        return dataclasses.replace(fit, high_variance=high)


def _setup(cfg, n):
    mesh = build_mesh(cfg.dim, n)
    fem = assemble(mesh, cfg.kappa)
    grid = build_grid(cfg.beta, calibrate_k(mesh.h, cfg.beta, cfg.dim, cfg.calibration))
    return mesh, fem, grid


def strong_study(cfg: ExperimentConfig, zero_noise: bool = False) -> StudyResult:
    """Average L2 distance between overkill and approximate solutions per mesh.

    Each of the ``n_samples`` overkill noises is shared by all meshes: it is
    evaluated spectrally for the reference and projected exactly onto the
    hat functions for the approximation.
    """
    cfg.validate()
    setups = [_setup(cfg, n) for n in cfg.mesh_ns]
    S = cfg.n_samples
    ref = [np.zeros((m.N_h, S)) for m, _, _ in setups]
    loads = [np.zeros((m.N_h, S)) for m, _, _ in setups]
    prep_ms = [0.0] * len(setups)
    for i in range(S):
        noise = sample_overkill(cfg.dim, cfg.n_ok, cfg.kappa, cfg.seed, sample_index=i)
        if zero_noise:
            noise = dataclasses.replace(noise, xi=np.zeros_like(noise.xi))
        for j, (mesh, _, _) in enumerate(setups):
            t0 = time.perf_counter()
            ref[j][:, i] = eval_overkill_solution(noise, cfg.beta, mesh)
            loads[j][:, i] = project_overkill_load(noise, mesh)
            prep_ms[j] += 1e3 * (time.perf_counter() - t0)

    records = []
    for j, (mesh, fem, grid) in enumerate(setups):
        t0 = time.perf_counter()
        V = ref[j] - apply_Q(grid, fem, loads[j], threads=cfg.threads)
        errs = np.sqrt(np.maximum(np.sum(V * (fem.mass @ V), axis=0), 0.0))
        wall = prep_ms[j] + 1e3 * (time.perf_counter() - t0)
        records.append(ErrorRecord(mesh.h, mesh.N_h, grid.k, grid.node_count,
                                   float(np.mean(errs)), "strong", wall,
                                   float(np.std(errs, ddof=1) / np.sqrt(S)) if S > 1 else float("nan")))
        log.info("strong n=%d N_h=%d nodes=%d err=%.4e", mesh.n, mesh.N_h, grid.node_count,
                 records[-1].error)

    diagnostics = {}
    if not zero_noise:
        tail = truncation_tail(cfg.dim, cfg.kappa, cfg.beta, cfg.n_ok)
        min_sq = min(r.error for r in records) ** 2
        diagnostics = {"truncation_tail": tail, "tail_ratio": tail / min_sq if min_sq > 0 else math.inf}
        if diagnostics["tail_ratio"] > 0.01:
            log.warning("overkill truncation tail %.3e exceeds 1%% of the smallest squared error %.3e",
                        tail, min_sq)
    return StudyResult(cfg, records, diagnostics)


_CHUNK = 250


def weak_study(cfg: ExperimentConfig) -> StudyResult:
    """``|E||u||^2 - E||u_hk||^2|`` with the exact series as reference.

    Loads are independent ``N(0, M)`` draws; mesh ``n`` uses stream indices
    ``n * 10**7 + i``.
    """
    cfg.validate()
    tol = cfg.ref_tol if cfg.ref_tol is not None else (1e-6 if cfg.dim < 3 else 1e-4)
    reference = analytic_solution_sqnorm(cfg.dim, cfg.kappa, cfg.beta, tol)
    records, estimates = [], []
    for n in cfg.mesh_ns:
        t0 = time.perf_counter()
        mesh, fem, grid = _setup(cfg, n)
        factor = build_noise_factor(mesh, fem, cfg.strategy)
        vals = []
        for start in range(0, cfg.n_mc, _CHUNK):
            idx = [n * 10 ** 7 + i for i in range(start, min(start + _CHUNK, cfg.n_mc))]
            U = apply_Q(grid, fem, sample_loads(factor, idx, cfg.seed), threads=cfg.threads)
            vals.append(np.sum(U * (fem.mass @ U), axis=0))
        vals = np.concatenate(vals)
        estimate = float(np.mean(vals))
        estimates.append(estimate)
        stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else float("nan")
        wall = 1e3 * (time.perf_counter() - t0)
        records.append(ErrorRecord(mesh.h, mesh.N_h, grid.k, grid.node_count,
                                   abs(reference - estimate), "weak", wall, stderr))
        log.info("weak n=%d estimate=%.6f ref=%.6f stderr=%.2e", n, estimate, reference, stderr)
    return StudyResult(cfg, records, {"reference": reference, "reference_tol": tol,
                                      "estimates": estimates})


def quad_check(cfg: ExperimentConfig) -> StudyResult:
    """Quadrature discrepancy against the dense oracle for each step in ``ks``."""
    cfg.validate()
    n = cfg.mesh_ns[0] if cfg.mesh_ns else 32
    mesh = build_mesh(cfg.dim, n)
    fem = assemble(mesh, cfg.kappa)
    records = []
    for k in cfg.ks:
        t0 = time.perf_counter()
        err = quadrature_discrepancy(fem, cfg.beta, k)
        grid = build_grid(cfg.beta, k)
        records.append(ErrorRecord(mesh.h, mesh.N_h, k, grid.node_count, err, "quad-check",
                                   1e3 * (time.perf_counter() - t0)))
    return StudyResult(cfg, records, {"target_slope": -math.pi ** 2 / 2}, against="inverse")


def cov_check(cfg: ExperimentConfig) -> list[dict]:
    """Factorization identity and sample covariance z-scores for both strategies."""
    cfg.validate()
    n = cfg.mesh_ns[0] if cfg.mesh_ns else 8
    mesh = build_mesh(cfg.dim, n)
    fem = assemble(mesh, cfg.kappa)
    M = fem.mass.toarray()
    rows = []
    for strategy in STRATEGIES:
        factor = build_noise_factor(mesh, fem, strategy)
        C = factor.covariance().toarray()
        identity = float(np.max(np.abs(C - M)) / np.max(np.abs(M)))
        B = sample_loads(factor, range(cfg.n_mc), cfg.seed)
        zscore = covariance_zscores(B, M)
        rows.append({"strategy": strategy, "identity_residual": identity,
                     "max_zscore": float(np.max(np.abs(zscore))), "n_draws": cfg.n_mc})
    return rows


def covariance_zscores(B: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Entrywise ``(C_hat - M) / se`` for zero-mean Gaussian columns of ``B``."""
    n = B.shape[1]
    C = B @ B.T / n
    d = np.diag(M)
    se = np.sqrt((np.outer(d, d) + M * M) / n)
    return (C - M) / se


# -- output ------------------------------------------------------------------

def write_csv(result: StudyResult, path) -> None:
    lines = [CSV_HEADER]
    for r in result.records:
        lines.append(f"{r.h!r},{r.N_h},{r.k!r},{r.node_count},{r.error!r},{r.wall_time:.1f}")
    try:
        fit = result.fit
        lines += [f"#rate={fit.rate!r}", f"#intercept={fit.intercept!r}",
                  f"#residual={fit.residual!r}", f"#high_variance={str(fit.high_variance).lower()}"]
    except DegenerateDataError as exc:
        lines.append(f"#fit_error={exc}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Records as dicts plus the footer entries."""
    rows, footer = [], {}
    text = Path(path).read_text().splitlines()
    keys = text[0].split(",")
    for line in text[1:]:
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            footer[key] = val
        elif line:
            rows.append(dict(zip(keys, line.split(","))))
    return rows, footer


def write_manifest(cfg: ExperimentConfig, path, extra: dict | None = None) -> None:
    from . import __version__
    manifest = {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in dataclasses.asdict(cfg).items()},
        "versions": {"sincfem": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    manifest.update(extra or {})
    Path(path).write_text(json.dumps(manifest, indent=2, default=float) + "\n")


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file with ``ExperimentConfig`` field names."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown or malformed entry {raw!r}")
        out[key] = _coerce(key, val)
    return out


def _coerce(key, val):
    if key in ("mesh_ns",):
        return tuple(int(v) for v in val.split(",") if v.strip())
    if key == "ks":
        return tuple(float(v) for v in val.split(",") if v.strip())
    if key in ("dim", "n_samples", "n_mc", "seed", "threads", "sample_index"):
        return int(val)
    if key == "n_ok":
        return None if val.lower() == "none" else int(val)
    if key in ("beta", "kappa"):
        return float(val)
    if key == "ref_tol":
        return None if val.lower() == "none" else float(val)
    return None if val.lower() == "none" else val

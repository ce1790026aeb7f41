"""White-noise load vectors and samples of the fractional field.

A load vector of the projected white noise is ``b = g + G z`` with
``z ~ N(0, I)`` and ``G G^T = M``.  ``G`` is either the sparse Cholesky
factor of the assembled mass matrix or, without any global factorization,
the Cholesky factor of the cell mass matrix applied cell by cell (each cell
draws its own ``z``; summing ``G_e G_e^T`` over cells reassembles ``M``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import FemMatrices, Mesh, cell_node_map, element_mass_matrix, interior_map
from .linalg import cholesky_sparse
from .quadrature import QuadratureGrid, apply_Q
from .rng import standard_normals
from .spectral import OverkillNoise, project_overkill_load

STRATEGIES = ("global-cholesky", "per-element")
FORMAT_VERSION = 1


def default_strategy(dim: int) -> str:
    return "per-element" if dim == 3 else "global-cholesky"


@dataclass(frozen=True)
class NoiseFactor:
    strategy: str
    N_h: int
    G: sp.csr_array | None = None
    element_factor: np.ndarray | None = None
    connectivity: np.ndarray | None = field(default=None, repr=False)

    def covariance(self) -> sp.csr_array:
        """``G G^T`` (global) or the scatter-sum of ``G_e G_e^T`` (per-element)."""
        if self.strategy == "global-cholesky":
            return sp.csr_array(self.G @ self.G.T)
        Ce = self.element_factor @ self.element_factor.T
        conn = self.connectivity
        rows = np.repeat(conn, conn.shape[1], axis=1)
        cols = np.tile(conn, (1, conn.shape[1]))
        keep = (rows >= 0) & (cols >= 0)
        vals = np.broadcast_to(Ce.ravel(), rows.shape)
        return sp.csr_array(sp.coo_array((vals[keep], (rows[keep], cols[keep])),
                                         shape=(self.N_h, self.N_h)))

    def apply(self, z: np.ndarray) -> np.ndarray:
        """``G z``; per-element ``z`` has shape ``(cells, 2**dim[, m])``."""
        if self.strategy == "global-cholesky":
            return self.G @ z
        local = np.tensordot(z, self.element_factor, axes=([1], [1]))
        if local.ndim == 3:  # (cells, m, 2**dim) -> (cells, 2**dim, m)
            local = local.transpose(0, 2, 1)
        conn = self.connectivity
        keep = conn >= 0
        if local.ndim == 2:
            return np.bincount(conn[keep], weights=local[keep], minlength=self.N_h)
        out = np.zeros((self.N_h, local.shape[2]))
        np.add.at(out, conn[keep], local[keep])
        return out

    @property
    def z_shape(self) -> tuple[int, ...]:
        if self.strategy == "global-cholesky":
            return (self.N_h,)
        return self.connectivity.shape


def build_noise_factor(mesh: Mesh, fem: FemMatrices, strategy: str | None = None) -> NoiseFactor:
    strategy = default_strategy(mesh.dim) if strategy is None else strategy
    if strategy == "global-cholesky":
        return NoiseFactor(strategy, mesh.N_h, G=cholesky_sparse(fem.mass))
    if strategy == "per-element":
        Ge = np.linalg.cholesky(element_mass_matrix(mesh))
        conn = interior_map(mesh)[cell_node_map(mesh)]
        return NoiseFactor(strategy, mesh.N_h, element_factor=Ge, connectivity=conn)
    raise ValueError(f"unknown factor strategy {strategy!r}")


def sample_load(factor: NoiseFactor, g_load=None, seed: int = 0, sample_index: int = 0,
                zero_noise: bool = False) -> np.ndarray:
    """One draw of ``g + G z`` from the ``(seed, "load", sample_index)`` stream.

    ``zero_noise`` forces ``z = 0`` and returns the deterministic part.
    """
    g = np.zeros(factor.N_h) if g_load is None else np.asarray(g_load, dtype=float)
    if zero_noise:
        return g.copy()
    z = standard_normals(seed, "load", sample_index, factor.z_shape)
    return g + factor.apply(z)


def sample_loads(factor: NoiseFactor, indices, seed: int = 0, g_load=None) -> np.ndarray:
    """``(N_h, len(indices))`` block of independent load draws."""
    return np.column_stack([sample_load(factor, g_load, seed, i) for i in indices])


@dataclass
class FieldSample:
    mesh: Mesh
    coefficients: np.ndarray
    beta: float
    kappa: float
    seed: int
    sample_index: int
    k: float
    K_minus: int
    K_plus: int
    calibration: str = "experiment"

    def __post_init__(self):
        if len(self.coefficients) != self.mesh.N_h:
            raise ValueError("coefficient length does not match mesh")


def sample_solution(mesh: Mesh, fem: FemMatrices, grid: QuadratureGrid, factor: NoiseFactor,
                    g_load=None, seed: int = 0, sample_index: int = 0,
                    zero_noise: bool = False, calibration: str = "experiment",
                    threads: int = 1) -> FieldSample:
    b = sample_load(factor, g_load, seed, sample_index, zero_noise=zero_noise)
    u = apply_Q(grid, fem, b, threads=threads)
    return FieldSample(mesh, u, grid.beta, fem.kappa, seed, sample_index,
                       grid.k, grid.K_minus, grid.K_plus, calibration)


def shared_noise_solution(mesh: Mesh, fem: FemMatrices, grid: QuadratureGrid,
                          noise: OverkillNoise, calibration: str = "experiment") -> FieldSample:
    """Approximation driven by the projection of a given overkill noise."""
    u = apply_Q(grid, fem, project_overkill_load(noise, mesh))
    return FieldSample(mesh, u, grid.beta, fem.kappa, noise.seed, noise.sample_index,
                       grid.k, grid.K_minus, grid.K_plus, calibration)


# -- text format -------------------------------------------------------------

_HEADER_KEYS = ("format-version", "dim", "n", "beta", "kappa", "k", "K-", "K+",
                "seed", "sample_index", "calibration")


def write_field_sample(sample: FieldSample, path) -> None:
    """Header lines ``# key = value`` then one coefficient per line (lexicographic)."""
    head = {
        "format-version": FORMAT_VERSION, "dim": sample.mesh.dim, "n": sample.mesh.n,
        "beta": repr(sample.beta), "kappa": repr(sample.kappa), "k": repr(sample.k),
        "K-": sample.K_minus, "K+": sample.K_plus, "seed": sample.seed,
        "sample_index": sample.sample_index, "calibration": sample.calibration,
    }
    lines = [f"# {key} = {head[key]}" for key in _HEADER_KEYS]
    lines += [repr(float(c)) for c in sample.coefficients]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_sample(path) -> FieldSample:
    head, values = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            head[key.strip()] = val.strip()
        elif line.strip():
            values.append(float(line))
    if int(head["format-version"]) != FORMAT_VERSION:
        raise ValueError(f"unsupported field sample format {head['format-version']}")
    mesh = Mesh(int(head["dim"]), int(head["n"]))
    return FieldSample(mesh, np.array(values), float(head["beta"]), float(head["kappa"]),
                       int(head["seed"]), int(head["sample_index"]), float(head["k"]),
                       int(head["K-"]), int(head["K+"]), head.get("calibration", "experiment"))

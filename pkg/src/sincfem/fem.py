"""Uniform tensor-product meshes on the unit cube and Q1 Galerkin matrices.

Only interior nodes carry degrees of freedom (homogeneous Dirichlet data).
Interior nodes are numbered lexicographically with the last axis fastest,
which matches ``scipy.sparse.kron(axis0, kron(axis1, ...))``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .linalg import as_csr, cg_solve


@dataclass(frozen=True)
class Mesh:
    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need n >= 2 subintervals per axis, got {self.n}")

    @property
    def h(self) -> float:
        """Cell diameter (length of the cell diagonal)."""
        return float(np.sqrt(self.dim) / self.n)

    @property
    def N_h(self) -> int:
        return (self.n - 1) ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n - 1,) * self.dim

    def multi_index(self, index: int) -> tuple[int, ...]:
        """Lexicographic interior index -> (i_1, ..., i_dim), each in 1..n-1."""
        return tuple(int(i) + 1 for i in np.unravel_index(index, self.shape))

    def node_index(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(i - 1 for i in multi), self.shape))

    def node_coord(self, index: int) -> np.ndarray:
        return np.array(self.multi_index(index), dtype=float) / self.n

    @cached_property
    def axis_nodes(self) -> np.ndarray:
        return np.arange(1, self.n) / self.n

    def coords(self) -> np.ndarray:
        """``(N_h, dim)`` array of interior node coordinates."""
        grids = np.meshgrid(*([self.axis_nodes] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


def build_mesh(dim: int, n: int) -> Mesh:
    return Mesh(dim, n)


def mass_1d(n: int) -> sp.csr_array:
    h = 1.0 / n
    m = n - 1
    return as_csr(sp.diags([np.full(m - 1, h / 6), np.full(m, 4 * h / 6), np.full(m - 1, h / 6)],
                           [-1, 0, 1], shape=(m, m)))


def stiffness_1d(n: int) -> sp.csr_array:
    h = 1.0 / n
    m = n - 1
    return as_csr(sp.diags([np.full(m - 1, -1 / h), np.full(m, 2 / h), np.full(m - 1, -1 / h)],
                           [-1, 0, 1], shape=(m, m)))


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return as_csr(out)


@dataclass(frozen=True)
class FemMatrices:
    mass: sp.csr_array
    stiffness_laplace: sp.csr_array
    operator_matrix: sp.csr_array
    kappa: float


def assemble(mesh: Mesh, kappa: float) -> FemMatrices:
    """Mass, Laplace stiffness and ``kappa^2 M + K`` by Kronecker products."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    M1, K1 = mass_1d(mesh.n), stiffness_1d(mesh.n)
    d = mesh.dim
    M = _kron_all([M1] * d)
    K = None
    for axis in range(d):
        term = _kron_all([K1 if a == axis else M1 for a in range(d)])
        K = term if K is None else K + term
    K = as_csr(K)
    A = as_csr(kappa ** 2 * M + K)
    return FemMatrices(M, K, A, float(kappa))


# -- element-level data (used by per-element noise and the assembly check) --

def element_mass_matrix(mesh: Mesh) -> np.ndarray:
    """Mass matrix of one cell, local vertices ordered lexicographically."""
    e = (1.0 / mesh.n) / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    out = e
    for _ in range(mesh.dim - 1):
        out = np.kron(out, e)
    return out


def element_stiffness_matrix(mesh: Mesh) -> np.ndarray:
    hx = 1.0 / mesh.n
    m = hx / 6 * np.array([[2.0, 1.0], [1.0, 2.0]])
    k = 1 / hx * np.array([[1.0, -1.0], [-1.0, 1.0]])
    total = 0
    for axis in range(mesh.dim):
        out = np.ones((1, 1))
        for a in range(mesh.dim):
            out = np.kron(out, k if a == axis else m)
        total = total + out
    return total


def cell_node_map(mesh: Mesh) -> np.ndarray:
    """``(n**dim, 2**dim)`` flat indices into the full ``(n+1)**dim`` vertex grid."""
    d, n = mesh.dim, mesh.n
    cells = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), -1).reshape(-1, d)
    offsets = np.array(list(itertools.product((0, 1), repeat=d)))
    verts = cells[:, None, :] + offsets[None, :, :]
    return np.ravel_multi_index(tuple(verts[..., a] for a in range(d)), (n + 1,) * d)


def interior_map(mesh: Mesh) -> np.ndarray:
    """Full-grid flat vertex index -> interior index, -1 on the boundary."""
    d, n = mesh.dim, mesh.n
    full = np.full((n + 1,) * d, -1, dtype=np.int64)
    inner = (slice(1, n),) * d
    full[inner] = np.arange(mesh.N_h).reshape(mesh.shape)
    return full.ravel()


def assemble_elementwise(mesh: Mesh, kappa: float) -> FemMatrices:
    """Cell-by-cell assembly; slow, kept as an independent check."""
    conn = interior_map(mesh)[cell_node_map(mesh)]
    Me, Ke = element_mass_matrix(mesh), element_stiffness_matrix(mesh)
    rows = np.repeat(conn, conn.shape[1], axis=1)
    cols = np.tile(conn, (1, conn.shape[1]))
    keep = (rows >= 0) & (cols >= 0)
    nc = conn.shape[0]
    shape = (mesh.N_h, mesh.N_h)

    def build(E):
        vals = np.broadcast_to(E.ravel(), (nc, E.size))
        return as_csr(sp.coo_array((vals[keep], (rows[keep], cols[keep])), shape=shape))

    M, K = build(Me), build(Ke)
    return FemMatrices(M, K, as_csr(kappa ** 2 * M + K), float(kappa))


def project_onto_Vh(mesh: Mesh, fem: FemMatrices, load) -> np.ndarray:
    """Coefficients of the L2 projection given the load vector ``<g, phi_i>``."""
    load = np.asarray(load, dtype=float)
    if load.shape[0] != mesh.N_h:
        raise ValueError("load vector length does not match mesh")
    return cg_solve(fem.mass, load, rel_tol=1e-13)


_GAUSS_ORDER = 5


def load_vector_from_function(mesh: Mesh, f) -> np.ndarray:
    """``<f, phi_i>`` by 5-point Gauss-Legendre per axis on every cell.

    Exact when ``f`` is a polynomial of degree at most 8 in each variable
    (the hat contributes one more degree per axis).
    ``f`` takes an ``(npts, dim)`` array of points and returns ``(npts,)``.
    """
    d, n = mesh.dim, mesh.n
    hx = 1.0 / n
    t, w = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
    t = 0.5 * (t + 1)
    w = 0.5 * w
    # reference-cell points, weights and Q1 shape values
    ref = np.stack(np.meshgrid(*([t] * d), indexing="ij"), -1).reshape(-1, d)
    wref = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    offsets = np.array(list(itertools.product((0, 1), repeat=d)))
    shape = np.prod(np.where(offsets[None, :, :] == 1, ref[:, None, :], 1 - ref[:, None, :]), axis=2)

    cells = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), -1).reshape(-1, d)
    pts = (cells[:, None, :] + ref[None, :, :]) * hx
    fv = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(len(cells), len(ref))
    local = (fv * wref[None, :]) @ shape * hx ** d
    conn = interior_map(mesh)[cell_node_map(mesh)]
    keep = conn >= 0
    return np.bincount(conn[keep], weights=local[keep], minlength=mesh.N_h)


def l2_error_norm(fem: FemMatrices, v) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != fem.mass.shape[0]:
        raise ValueError("vector length does not match matrices")
    return float(np.sqrt(max(v @ (fem.mass @ v), 0.0)))

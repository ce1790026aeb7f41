"""Sinc quadrature of the inverse fractional power of the discrete operator.

With ``L_h`` the Galerkin operator of ``kappa^2 - Laplace`` the quadrature is

    Q = (2 k sin(pi beta) / pi) * sum_{l=-K-}^{K+} exp(2 beta y_l) (I + exp(2 y_l) L_h)^{-1},
    y_l = l k.

Applied to a field given by its load vector ``b`` each resolvent term is the
solution of ``(M + exp(2 y) A) x = b``, so every solve is sparse SPD. For
``y > 0`` the equivalent system ``(exp(-2 y) M + A) x' = b`` is solved and
``exp(-2 y)`` moves into the weight.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .fem import FemMatrices
from .linalg import DENSE_CAP, DenseCapError, cg_solve, generalized_eig_dense, m_operator_norm

CALIBRATION_MODES = ("strong", "weak", "experiment")


@dataclass(frozen=True)
class QuadratureGrid:
    beta: float
    k: float
    K_minus: int
    K_plus: int
    nodes: np.ndarray = field(repr=False)
    prefactor: float

    @property
    def node_count(self) -> int:
        return self.K_minus + self.K_plus + 1

    @property
    def weights(self) -> np.ndarray:
        return self.prefactor * np.exp(2 * self.beta * self.nodes)


def build_grid(beta: float, k: float) -> QuadratureGrid:
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not k > 0:
        raise ValueError("step k must be positive")
    K_minus = math.ceil(math.pi ** 2 / (4 * beta * k * k))
    K_plus = math.ceil(math.pi ** 2 / (4 * (1 - beta) * k * k))
    nodes = k * np.arange(-K_minus, K_plus + 1, dtype=float)
    prefactor = 2 * k * math.sin(math.pi * beta) / math.pi
    return QuadratureGrid(float(beta), float(k), K_minus, K_plus, nodes, prefactor)


def weak_K(h: float, alpha: float, beta: float, dim: int) -> float:
    """Magnitude of the weak-error calibration function ``K_{alpha,beta}(h)``."""
    lh = abs(math.log(h))
    ab = alpha * beta
    if math.isclose(ab, 1.0, rel_tol=0, abs_tol=1e-12):
        return dim * lh + max(0.0, math.log(lh))
    if ab < 1:
        return dim * ab * lh
    return dim * (2 * ab - 1) * lh


def weak_f(h: float, alpha: float, beta: float, dim: int) -> float:
    """The factor multiplying exp(-pi^2/(2k)) in the weak error bound."""
    if math.isclose(alpha * beta, 1.0, rel_tol=0, abs_tol=1e-12):
        return abs(math.log(h))
    return h ** (dim * (alpha * beta - 1))


def calibrate_k(h: float, beta: float, dim: int, mode: str = "experiment",
                alpha: float | None = None) -> float:
    """Quadrature step tied to the mesh size.

    ``strong`` and ``weak`` take the admissible upper bounds with equality;
    ``experiment`` is ``k = 1 / (beta |ln h|)``.
    """
    if not 0 < h < 1:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    alpha = 2.0 / dim if alpha is None else alpha
    lh = abs(math.log(h))
    if mode == "experiment":
        return 1.0 / (beta * lh)
    if mode == "strong":
        return math.pi ** 2 / (2 * dim * alpha * beta * lh)
    if mode == "weak":
        return math.pi ** 2 / (2 * weak_K(h, alpha, beta, dim))
    raise ValueError(f"unknown calibration mode {mode!r}")


class ResolventSolveError(RuntimeError):
    def __init__(self, node: int, cause: Exception):
        super().__init__(f"resolvent solve failed at quadrature node l={node}: {cause}")
        self.node = node


def _resolvent_solve(fem: FemMatrices, y: float, b: np.ndarray, solver: str):
    # for y > 0 solve (e^{-2y} M + A) x = b instead; the caller folds e^{-2y}
    # into the weight so neither factor overflows
    if y > 0:
        S = (math.exp(-2 * y) * fem.mass + fem.operator_matrix).tocsc()
    else:
        S = (fem.mass + math.exp(2 * y) * fem.operator_matrix).tocsc()
    if solver == "direct":
        return spla.splu(S).solve(b)
    if solver == "cg":
        return cg_solve(S.tocsr(), b, rel_tol=1e-10)
    raise ValueError(f"unknown solver {solver!r}")


def apply_Q(grid: QuadratureGrid, fem: FemMatrices, b, solver: str = "direct",
            threads: int = 1) -> np.ndarray:
    """Coefficients of ``Q`` applied to the field with load vector ``b``.

    ``b`` may be a vector or an ``(N_h, m)`` block of independent loads.
    Node solves may run concurrently; the weighted sum is always accumulated
    in node order.
    """
    b = np.asarray(b, dtype=float)
    if b.shape[0] != fem.mass.shape[0]:
        raise ValueError("load vector length does not match matrices")
    y = grid.nodes
    weights = grid.prefactor * np.exp(np.where(y > 0, 2 * (grid.beta - 1) * y, 2 * grid.beta * y))
    labels = np.arange(-grid.K_minus, grid.K_plus + 1)

    def solve(j):
        try:
            return _resolvent_solve(fem, float(y[j]), b, solver)
        except Exception as exc:
            raise ResolventSolveError(int(labels[j]), exc) from exc

    out = np.zeros_like(b)
    idx = range(len(y))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            for j, x in zip(idx, pool.map(solve, idx)):
                out += weights[j] * x
    else:
        for j in idx:
            out += weights[j] * solve(j)
    return out


def dense_frac_inverse(fem: FemMatrices, beta: float, b, cap: int = DENSE_CAP) -> np.ndarray:
    """Exact ``L_h^{-beta}`` applied to the field with load ``b``, via eigenpairs."""
    eig = generalized_eig_dense(fem.operator_matrix, fem.mass, cap=cap)
    V = eig.eigenvectors
    b = np.asarray(b, dtype=float)
    coeff = V.T @ b
    scale = eig.eigenvalues ** (-beta)
    return V @ (scale[:, None] * coeff if coeff.ndim == 2 else scale * coeff)


def Q_matrix(grid: QuadratureGrid, fem: FemMatrices, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense coefficient matrix of ``Q`` (columns: images of basis coefficients)."""
    n = fem.mass.shape[0]
    if n > cap:
        raise DenseCapError(f"dimension {n} exceeds dense cap {cap}")
    return apply_Q(grid, fem, fem.mass.toarray())


def frac_inverse_matrix(fem: FemMatrices, beta: float, cap: int = DENSE_CAP) -> np.ndarray:
    return dense_frac_inverse(fem, beta, fem.mass.toarray(), cap=cap)


def quadrature_discrepancy(fem: FemMatrices, beta: float, k: float, cap: int = DENSE_CAP) -> float:
    """``||Q - L_h^{-beta}||`` in the operator norm induced by the mass matrix."""
    grid = build_grid(beta, k)
    Lb = frac_inverse_matrix(fem, beta, cap)
    D = Q_matrix(grid, fem, cap) - Lb
    return m_operator_norm(D, fem.mass, cap=cap, sym_scale=float(np.max(np.abs(Lb))))

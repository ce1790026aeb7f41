"""Sparse and small dense symmetric linear algebra.

Sparse matrices are scipy CSR arrays throughout (``indptr`` / ``indices`` /
``data`` are the row offsets, column indices and values).  The dense routines
here are reference oracles and refuse to run above ``DENSE_CAP``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

DENSE_CAP = 4096


class ConvergenceError(RuntimeError):
    """Iterative solver ran out of iterations."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class DenseCapError(ValueError):
    pass


def as_csr(A) -> sp.csr_array:
    """Canonical CSR copy: sorted indices, no duplicates, explicit zeros kept."""
    A = sp.csr_array(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def check_csr(A: sp.csr_array, symmetric: bool = False) -> None:
    """Raise ``ValueError`` if the CSR structural invariants do not hold."""
    nrows = A.shape[0]
    ptr = A.indptr
    if len(ptr) != nrows + 1 or ptr[0] != 0 or np.any(np.diff(ptr) < 0):
        raise ValueError("row offsets malformed")
    if ptr[-1] != len(A.indices) or ptr[-1] != len(A.data):
        raise ValueError("row offsets do not match index/value arrays")
    for i in range(nrows):
        cols = A.indices[ptr[i]:ptr[i + 1]]
        if np.any(np.diff(cols) <= 0):
            raise ValueError(f"column indices not strictly increasing in row {i}")
    if symmetric:
        diff = A - A.T
        if diff.nnz and np.max(np.abs(diff.data)) > 0:
            raise ValueError("matrix not symmetric")


def spmv(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f"dimension mismatch: matrix has {A.shape[1]} columns, vector {x.shape[0]}")
    return A @ x


def cg_solve(A, b, rel_tol: float = 1e-10, max_iter: int | None = None,
             jacobi: bool = True) -> np.ndarray:
    """Preconditioned conjugate gradients for SPD ``A``.

    ``b`` may be a vector or an ``(n, m)`` block; block columns are iterated
    independently (vectorized) and each must reach
    ``||b - A x|| <= rel_tol * ||b||``.
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    b = np.asarray(b, dtype=float)
    vector = b.ndim == 1
    B = b[:, None] if vector else b
    n = A.shape[0]
    if B.shape[0] != n:
        raise ValueError("dimension mismatch")
    if max_iter is None:
        max_iter = 10 * n
    dinv = 1.0 / A.diagonal() if jacobi else np.ones(n)
    dinv = dinv[:, None]

    X = np.zeros_like(B)
    R = B.copy()
    bnorm = np.linalg.norm(B, axis=0)
    target = rel_tol * bnorm
    active = bnorm > 0
    Z = dinv * R
    P = Z.copy()
    rz = np.sum(R * Z, axis=0)
    rnorm = bnorm.copy()
    for _ in range(max_iter):
        active &= rnorm > target
        if not active.any():
            break
        AP = A @ P
        pap = np.sum(P * AP, axis=0)
        alpha = np.where(active, rz / np.where(active, pap, 1.0), 0.0)
        X += alpha * P
        R -= alpha * AP
        rnorm = np.linalg.norm(R, axis=0)
        Z = dinv * R
        rz_new = np.sum(R * Z, axis=0)
        beta = np.where(active, rz_new / np.where(active, rz, 1.0), 0.0)
        P = Z + beta * P
        rz = rz_new
    else:
        active &= rnorm > target
        if active.any():
            worst = float(np.max(rnorm[active] / bnorm[active]))
            raise ConvergenceError(
                f"CG did not converge in {max_iter} iterations "
                f"(relative residual {worst:.3e})", worst)
    return X[:, 0] if vector else X


def _lower_bandwidth(A) -> int:
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(coo.row - coo.col))


def cholesky_sparse(A) -> sp.csr_array:
    """Lower Cholesky factor ``G`` with ``G @ G.T == A`` in natural ordering.

    Fill in natural ordering stays inside the profile of ``A``, so the factor
    is computed in LAPACK band storage and returned as CSR.
    """
    A = as_csr(A)
    n = A.shape[0]
    p = _lower_bandwidth(A)
    band = np.zeros((p + 1, n))
    coo = sp.tril(A).tocoo()
    band[coo.row - coo.col, coo.col] = coo.data
    try:
        cb = sla.cholesky_banded(band, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix not positive definite") from exc
    rows, cols, vals = [], [], []
    for off in range(p + 1):
        j = np.arange(n - off)
        v = cb[off, : n - off]
        keep = v != 0
        rows.append(j[keep] + off)
        cols.append(j[keep])
        vals.append(v[keep])
    G = sp.coo_array((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                     shape=(n, n))
    return as_csr(G)


@dataclass(frozen=True)
class DenseEig:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def jacobi_eigh(S: np.ndarray, tol: float = 1e-14, max_sweeps: int = 50):
    """Cyclic Jacobi rotations for a dense symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0:
        w = np.diag(A).copy()
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order]
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def generalized_eig_dense(A, M, cap: int = DENSE_CAP, method: str = "lapack") -> DenseEig:
    """Solve ``A v = lam M v`` with ``V.T @ M @ V = I``, ascending ``lam``.

    The problem is reduced with the Cholesky factor of ``M`` to a standard
    symmetric one; ``method="jacobi"`` solves that with cyclic Jacobi
    rotations, ``"lapack"`` with ``scipy.linalg.eigh``.
    """
    A, M = _dense(A), _dense(M)
    n = A.shape[0]
    if n > cap:
        raise DenseCapError(
            f"dense reference requested for dimension {n} > cap {cap}; "
            "dense oracles are meant for small meshes only")
    G = np.linalg.cholesky(M)
    Ginv_A = sla.solve_triangular(G, A, lower=True)
    S = sla.solve_triangular(G, Ginv_A.T, lower=True)
    S = 0.5 * (S + S.T)
    if method == "jacobi":
        w, Y = jacobi_eigh(S)
    elif method == "lapack":
        w, Y = np.linalg.eigh(S)
    else:
        raise ValueError(f"unknown method {method!r}")
    V = sla.solve_triangular(G.T, Y, lower=False)
    return DenseEig(w, V)


def m_operator_norm(T: np.ndarray | Callable, M, cap: int = DENSE_CAP,
                    sym_tol: float = 1e-8, sym_scale: float | None = None) -> float:
    """Operator norm of a coefficient map w.r.t. the norm ``sqrt(x.T M x)``.

    ``T`` is the coefficient matrix or a callable applied column-wise to the
    identity.  ``T`` must be ``M``-self-adjoint: the transformed matrix may
    be asymmetric by at most ``sym_tol * sym_scale`` (default scale: its
    largest entry).  Pass ``sym_scale`` when ``T`` is a small difference of
    larger operators.
    """
    M = _dense(M)
    n = M.shape[0]
    if n > cap:
        raise DenseCapError(f"dimension {n} exceeds dense cap {cap}")
    Tm = T(np.eye(n)) if callable(T) else _dense(T)
    G = np.linalg.cholesky(M)
    B = G.T @ sla.solve_triangular(G, Tm.T, lower=True).T
    asym = np.max(np.abs(B - B.T))
    scale = np.max(np.abs(B)) if sym_scale is None else sym_scale
    if asym > sym_tol * max(scale, 1e-300):
        raise ValueError(f"operator is not M-self-adjoint (asymmetry {asym:.3e})")
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (B + B.T)))))

"""Closed-form spectral objects of ``kappa^2 - Laplace`` on the unit cube.

Eigenpairs, white-noise and solution norms, truncated Karhunen-Loeve noise
(the "overkill" reference used in strong error studies) and Matern
covariance diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .fem import Mesh
from .rng import standard_normals


def _theta(theta) -> np.ndarray:
    t = np.atleast_1d(np.asarray(theta, dtype=np.int64))
    if t.ndim != 1 or np.any(t < 1):
        raise ValueError("multi-index components must be >= 1")
    return t


def eigenvalue(theta, kappa: float) -> float:
    t = _theta(theta)
    return float(kappa ** 2 + np.pi ** 2 * np.sum(t * t))


def eigenfunction_eval(theta, x) -> float:
    t = _theta(theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.prod(np.sqrt(2.0) * np.sin(np.pi * t * x)))


def _ball_squares(dim: int, r2: int) -> np.ndarray:
    """All |theta|^2 <= r2 over theta in N^dim."""
    m = math.isqrt(r2)
    j2 = np.arange(1, m + 1) ** 2
    acc = j2
    for _ in range(dim - 1):
        acc = (acc[:, None] + j2[None, :]).ravel()
        acc = acc[acc <= r2]
    return acc[acc <= r2]


def sorted_eigenvalues(dim: int, kappa: float, J: int) -> np.ndarray:
    """The ``J`` smallest eigenvalues, nondecreasing, with multiplicity."""
    if J < 1:
        raise ValueError("J must be >= 1")
    # orthant ball volume ~ (pi/4)^{d/2} r^d / Gamma(d/2+1)
    r = max(2.0, (J * special.gamma(dim / 2 + 1) * (4 / np.pi) ** (dim / 2)) ** (1 / dim) + dim)
    while True:
        sq = _ball_squares(dim, int(r * r))
        if sq.size >= J:
            break
        r *= 1.5
    sq = np.sort(sq, kind="stable")[:J]
    return kappa ** 2 + np.pi ** 2 * sq.astype(float)


def noise_dual_norm_expectation(dim: int, kappa: float, N: int, s: float) -> float:
    """Mean square of the truncated white noise in the dual norm of order ``s``."""
    lam = sorted_eigenvalues(dim, kappa, N)
    return float(np.sum(lam ** (-s)))


def noise_dual_norm_samples(dim: int, kappa: float, N: int, s: float,
                            n_draws: int, seed: int) -> np.ndarray:
    """Draws of ``sum_j lam_j^{-s} xi_j^2`` for the ``N``-term noise."""
    lam = sorted_eigenvalues(dim, kappa, N)
    xi = standard_normals(seed, "noise-norm", 0, (n_draws, N))
    return (xi * xi) @ lam ** (-s)


# ---------------------------------------------------------------------------
# E ||u||^2 = sum_theta lam_theta^{-2 beta}

_MAX_LATTICE_POINTS = 5 * 10 ** 7


def _orthant_tail(dim: int, kappa: float, beta: float, rho: float) -> float:
    """Integral of (kappa^2 + pi^2 |x|^2)^{-2 beta} over {x > 0, |x| > rho}."""
    rho = max(rho, 0.0)
    sphere = 2 * np.pi ** (dim / 2) / special.gamma(dim / 2) / 2 ** dim
    a, b = dim / 2, 2 * beta - dim / 2
    if kappa == 0:
        if rho == 0:
            return np.inf
        val = rho ** (dim - 4 * beta) * np.pi ** (-4 * beta) / (4 * beta - dim)
    else:
        # t = pi^2 r^2, z = t / (kappa^2 + t) turns the radial integral into an
        # incomplete beta function
        z0 = np.pi ** 2 * rho ** 2 / (kappa ** 2 + np.pi ** 2 * rho ** 2)
        val = (kappa ** (dim - 4 * beta) / (2 * np.pi ** dim) * special.beta(a, b)
               * special.betaincc(a, b, z0))
    return float(sphere * val)


def _tail_bounds(dim, kappa, beta, R):
    """Lower/upper bounds on the lattice sum over |theta| > R."""
    sd = np.sqrt(dim)
    upper = _orthant_tail(dim, kappa, beta, R - sd)
    lower = _orthant_tail(dim, kappa, beta, R + sd)
    if dim > 1:
        lower -= dim * _orthant_tail(dim - 1, kappa, beta, R + sd - 1)
    return max(lower, 0.0), upper


def _ball_sum(dim, kappa, beta, R):
    r2 = int(math.floor(R * R))
    m = math.isqrt(r2)
    j2 = np.arange(1, m + 1, dtype=float) ** 2
    k2 = kappa ** 2
    if dim == 1:
        return float(np.sum((k2 + np.pi ** 2 * j2) ** (-2 * beta)))
    total = 0.0
    for a in range(1, m + 1):
        rest = r2 - a * a
        if rest < 1:
            break
        if dim == 2:
            q = j2[: math.isqrt(rest)]
            total += np.sum((k2 + np.pi ** 2 * (a * a + q)) ** (-2 * beta))
        else:
            mb = math.isqrt(rest)
            q = j2[:mb][:, None] + j2[:mb][None, :]
            q = q[q <= rest]
            total += np.sum((k2 + np.pi ** 2 * (a * a + q)) ** (-2 * beta))
    return float(total)


def analytic_solution_sqnorm(dim: int, kappa: float, beta: float, tol: float = 1e-8) -> float:
    """``sum_theta lam_theta^{-2 beta}`` to within ``tol``.

    The lattice sum over the ball ``|theta| <= R`` is exact; the remainder is
    bracketed between two orthant integrals and the midpoint is returned.
    ``R`` is grown until half the bracket width is below ``tol``.
    """
    if 4 * beta <= dim:
        raise ValueError(f"series diverges for 4*beta <= dim (beta={beta}, dim={dim})")
    if tol <= 0:
        raise ValueError("tol must be positive")
    R = 8.0
    while True:
        lo, hi = _tail_bounds(dim, kappa, beta, R)
        if 0.5 * (hi - lo) <= tol:
            break
        R *= 1.25
        if (np.pi / 4) ** (dim / 2) * R ** dim / special.gamma(dim / 2 + 1) > _MAX_LATTICE_POINTS:
            raise ValueError(f"tol={tol} needs too many lattice points in dim {dim}; loosen tol")
    return _ball_sum(dim, kappa, beta, R) + 0.5 * (lo + hi)


def truncation_tail(dim: int, kappa: float, beta: float, N_ok: int) -> float:
    """Upper bound on ``E ||u - u_ok||^2``, the series outside the box ``1..N_ok``.

    Every omitted multi-index has some component above ``N_ok``; bounding the
    sum over the remaining components and that component by integrals gives
    ``dim * int_{N_ok}^inf C (kappa^2 + pi^2 t^2)^{(dim-1)/2 - 2 beta} dt``.
    """
    if 4 * beta <= dim:
        raise ValueError("series diverges for 4*beta <= dim")
    m = dim - 1
    if m == 0:
        const, power = 1.0, -2 * beta
    else:
        # orthant integral of (c + pi^2 |y|^2)^{-2 beta} over R_+^m equals const * c^power
        const = _orthant_tail(m, 1.0, beta, 0.0)
        power = m / 2 - 2 * beta
    g = lambda t: (kappa ** 2 + np.pi ** 2 * t * t) ** power
    val, _ = integrate.quad(g, N_ok, np.inf, epsabs=0, epsrel=1e-10, limit=200)
    return float(dim * const * val)


# ---------------------------------------------------------------------------
# overkill white noise

@dataclass(frozen=True)
class OverkillNoise:
    dim: int
    N_ok: int
    kappa: float
    seed: int
    xi: np.ndarray
    sample_index: int = 0


def sample_overkill(dim: int, N_ok: int, kappa: float, seed: int,
                    sample_index: int = 0) -> OverkillNoise:
    if N_ok < 1:
        raise ValueError("N_ok must be >= 1")
    xi = standard_normals(seed, "overkill", sample_index, (N_ok,) * dim)
    return OverkillNoise(dim, N_ok, float(kappa), int(seed), xi, int(sample_index))


def overkill_eigenvalues(dim: int, N_ok: int, kappa: float) -> np.ndarray:
    j2 = np.arange(1, N_ok + 1, dtype=float) ** 2
    lam = np.full((N_ok,) * dim, kappa ** 2)
    for a in range(dim):
        shape = [1] * dim
        shape[a] = N_ok
        lam = lam + np.pi ** 2 * j2.reshape(shape)
    return lam


def _sines(N_ok: int, n: int) -> np.ndarray:
    """``sin(pi m i / n)`` for interior i (rows) and modes m (columns), argument reduced exactly."""
    i = np.arange(1, n, dtype=np.int64)[:, None]
    m = np.arange(1, N_ok + 1, dtype=np.int64)[None, :]
    return np.sin(np.pi * ((i * m) % (2 * n)) / n)


def sine_hat_integral(N_ok: int, n: int) -> np.ndarray:
    """``S[i, m] = int sqrt(2) sin(m pi x) phi_i(x) dx`` for 1D hats of width 1/n."""
    m = np.arange(1, N_ok + 1, dtype=float)
    factor = 4 * np.sin(m * np.pi / (2 * n)) ** 2 * n / (m * m * np.pi ** 2)
    return np.sqrt(2.0) * _sines(N_ok, n) * factor[None, :]


def _contract(coef: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Apply the same ``(n-1, N_ok)`` matrix along every axis of ``coef``."""
    out = coef
    for _ in range(coef.ndim):
        # contract the leading axis, append the mesh axis at the end
        out = np.tensordot(out, E, axes=([0], [1]))
    return out.ravel()


def eval_overkill_solution(noise: OverkillNoise, beta: float, mesh: Mesh) -> np.ndarray:
    """Nodal values of ``sum_theta lam_theta^{-beta} xi_theta e_theta`` at interior nodes."""
    if noise.dim != mesh.dim:
        raise ValueError("noise and mesh dimensions differ")
    coef = overkill_eigenvalues(noise.dim, noise.N_ok, noise.kappa) ** (-beta) * noise.xi
    E = np.sqrt(2.0) * _sines(noise.N_ok, mesh.n)
    return _contract(coef, E)


def project_overkill_load(noise: OverkillNoise, mesh: Mesh) -> np.ndarray:
    """Load vector ``<W_ok, phi_i>`` with exact sine-hat integrals."""
    if noise.dim != mesh.dim:
        raise ValueError("noise and mesh dimensions differ")
    return _contract(noise.xi, sine_hat_integral(noise.N_ok, mesh.n))


# ---------------------------------------------------------------------------
# Matern diagnostics

@dataclass(frozen=True)
class MaternParams:
    sigma2: float
    nu: float
    kappa: float

    def __post_init__(self):
        if min(self.sigma2, self.nu, self.kappa) <= 0:
            raise ValueError("Matern parameters must be positive")


def _bessel_k_half_integer(nu, x):
    n = int(round(nu - 0.5))
    s = sum(math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k)) / (2 * x) ** k
            for k in range(n + 1))
    return math.sqrt(math.pi / (2 * x)) * math.exp(-x) * s


_GL_T, _GL_W = np.polynomial.legendre.leggauss(20)


def _bessel_k_integral(nu, x):
    # K_nu(x) e^x = int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt
    logg = lambda t: -x * (np.cosh(t) - 1) + nu * t
    tpeak = math.asinh(nu / x)
    top = logg(tpeak)
    T = tpeak + 1.0
    while logg(T) > top - 45:
        T *= 1.5
    width = min(0.1, 0.5 / math.sqrt(x + nu + 1))
    npan = int(math.ceil(T / width))
    edges = np.linspace(0, T, npan + 1)
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (b - a) * _GL_T[None, :] + 0.5 * (a + b)
    g = np.exp(-x * (np.cosh(t) - 1) - top) * 0.5 * (np.exp(nu * t) + np.exp(-nu * t))
    val = np.sum(0.5 * (b - a) * _GL_W[None, :] * g)
    return float(val * math.exp(top - x))


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind ``K_nu(x)`` for ``x > 0``."""
    if x <= 0:
        raise ValueError("bessel_k needs x > 0")
    nu = abs(float(nu))
    if abs(nu - round(nu - 0.5) - 0.5) < 1e-15:
        return _bessel_k_half_integer(nu, x)
    return _bessel_k_integral(nu, x)


def matern_covariance(r: float, p: MaternParams) -> float:
    if r < 0:
        raise ValueError("distance must be nonnegative")
    if r == 0:
        return p.sigma2
    z = p.kappa * r
    logc = (1 - p.nu) * math.log(2) - math.lgamma(p.nu) + p.nu * math.log(z)
    return p.sigma2 * math.exp(logc) * bessel_k(p.nu, z)


def spde_to_matern(beta: float, kappa: float, dim: int) -> MaternParams:
    """Matern parameters of the stationary solution on all of R^dim."""
    nu = 2 * beta - dim / 2
    if nu <= 0:
        raise ValueError("need 4*beta > dim for a positive smoothness")
    sigma2 = (special.gamma(nu) / special.gamma(2 * beta) * (4 * np.pi) ** (-dim / 2)
              * kappa ** (dim - 4 * beta))
    return MaternParams(float(sigma2), float(nu), float(kappa))

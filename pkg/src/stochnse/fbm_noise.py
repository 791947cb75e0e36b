"""Haar wavelet coefficients of fractional Brownian noise, H in (1/2, 1).

Every coefficient is a Wiener integral ``xi(f) = int f dB^H``; for
piecewise constant ``f, g`` the covariance

    E[xi(f) xi(g)] = H(2H-1) int int f(s) g(t) |t - s|**(2H-2) dt ds

is a finite sum over pairs of constancy intervals, each pair contributing
the increment covariance
``(|b-c|**2H + |a-d|**2H - |a-c|**2H - |b-d|**2H) / 2``
for ``[a, b] x [c, d]``.  The factor ``H(2H-1)`` makes ``Var B^H(1) = 1``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .stats import SlopeFit, fit_slope, member_seed, rng_for
from .wavelet_basis import HAAR, CoefficientField, check_index, level_slice

PSD_TOL = 1e-10


class CovarianceError(ArithmeticError):
    """The assembled covariance is not positive semidefinite within tolerance."""


def _check_hurst(H):
    if not 0.5 < H < 1.0:
        raise ValueError(f"Hurst parameter must lie in (1/2, 1), got {H}")


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    max_level: int = 8

    def __post_init__(self):
        _check_hurst(self.hurst)
        if self.max_level < 0:
            raise ValueError("max_level must be non-negative")

    @property
    def kernel_constant(self):
        return self.hurst * (2 * self.hurst - 1)

    def check_besov_smoothness(self, s):
        if not -0.5 < s < self.hurst - 1:
            raise ValueError(f"Besov smoothness must lie in (-1/2, H-1) = (-0.5, {self.hurst - 1}), got {s}")


# -- closed form --------------------------------------------------------------

def _pieces(kind, j, k):
    """Constancy intervals ``(a, b, weight)`` of an L2-normalized Haar function."""
    check_index(j, k)
    h = 2.0 ** -j
    amp = 2.0 ** (j / 2)
    a = k * h
    if kind == "scaling":
        return [(a, a + h / 2, amp), (a + h / 2, a + h, amp)]
    if kind == "wavelet":
        return [(a, a + h / 2, amp), (a + h / 2, a + h, -amp)]
    raise ValueError(f"kind must be 'wavelet' or 'scaling', got {kind!r}")


def _increment_cov(a1, b1, a2, b2, H):
    ld = np.longdouble
    two_h = ld(2 * H)
    a1, b1, a2, b2 = (np.asarray(x, dtype=ld) for x in (a1, b1, a2, b2))
    return (np.abs(b1 - a2) ** two_h + np.abs(a1 - b2) ** two_h
            - np.abs(a1 - a2) ** two_h - np.abs(b1 - b2) ** two_h) / 2


def covariance_entry(spec_or_h, j, k, l, j2=None, kind1="wavelet", kind2="wavelet"):
    """``E[xi(f_{j,k}) xi(g_{j2,l})]`` for Haar functions, exact up to rounding.

    ``j2`` defaults to ``j``; ``kind1``/``kind2`` select wavelet or scaling
    functions, so cross-level and coarse entries are covered as well.
    """
    H = spec_or_h.hurst if isinstance(spec_or_h, FbmSpec) else float(spec_or_h)
    _check_hurst(H)
    j2 = j if j2 is None else j2
    total = np.longdouble(0)
    for a1, b1, w1 in _pieces(kind1, j, k):
        for a2, b2, w2 in _pieces(kind2, j2, l):
            total += np.longdouble(w1 * w2) * _increment_cov(a1, b1, a2, b2, H)
    return float(total)


def _pyramid_pieces(max_level):
    """Interval endpoints and weights of all pyramid-layout functions, shape (n, 2)."""
    n = 1 << (max_level + 1)
    A = np.empty((n, 2))
    B = np.empty((n, 2))
    W = np.empty((n, 2))
    A[0], B[0], W[0] = (0.0, 0.5), (0.5, 1.0), (1.0, 1.0)
    for j in range(max_level + 1):
        h = 2.0 ** -j
        k = np.arange(1 << j)
        sl = level_slice(j)
        A[sl, 0], A[sl, 1] = k * h, k * h + h / 2
        B[sl, 0], B[sl, 1] = k * h + h / 2, (k + 1) * h
        W[sl, 0], W[sl, 1] = 2.0 ** (j / 2), -(2.0 ** (j / 2))
    return A, B, W


@lru_cache(maxsize=16)
def joint_covariance(H, max_level):
    """Covariance of ``(a0, zeta_{j,k} : j <= max_level)`` in pyramid order."""
    _check_hurst(H)
    A, B, W = _pyramid_pieces(max_level)
    n = A.shape[0]
    C = np.zeros((n, n), dtype=np.longdouble)
    for p in range(2):
        for q in range(2):
            R = _increment_cov(A[:, p, None], B[:, p, None], A[None, :, q], B[None, :, q], H)
            C += np.outer(W[:, p], W[:, q]).astype(np.longdouble) * R
    C = np.asarray(C, dtype=float)
    C = (C + C.T) / 2
    C.setflags(write=False)
    return C


def check_psd(C, tol=PSD_TOL):
    """Smallest eigenvalue of ``C``; raises if below ``-tol * trace``."""
    lam_min = float(np.linalg.eigvalsh(C)[0])
    if lam_min < -tol * float(np.trace(C)):
        raise CovarianceError(f"covariance not PSD: smallest eigenvalue {lam_min:.3e}")
    return lam_min


@dataclass(frozen=True, eq=False)
class LevelCovariance:
    level: int
    hurst: float
    matrix: np.ndarray

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# j={self.level},H={self.hurst!r}\n")
        np.savetxt(buf, self.matrix, delimiter=",", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        first, _, rest = text.partition("\n")
        meta = dict(item.split("=") for item in first.lstrip("# ").split(","))
        M = np.loadtxt(io.StringIO(rest), delimiter=",", ndmin=2)
        return cls(int(meta["j"]), float(meta["H"]), M)


def build_level_covariance(spec, j):
    """Covariance matrix of the level-``j`` detail coefficients.

    Only symmetrization is applied; a matrix that fails the PSD check is an
    error, never clipped.
    """
    if not 0 <= j <= spec.max_level:
        raise ValueError(f"level {j} outside 0..{spec.max_level}")
    sl = level_slice(j)
    C = np.array(joint_covariance(spec.hurst, j)[sl, sl])
    check_psd(C)
    return LevelCovariance(j, spec.hurst, C)


@lru_cache(maxsize=16)
def _joint_factor(H, max_level):
    C = np.array(joint_covariance(H, max_level))
    try:
        return linalg.cholesky(C, lower=True)
    except linalg.LinAlgError:
        lam, V = np.linalg.eigh(C)
        if lam[0] < -PSD_TOL * lam.sum():
            raise CovarianceError(f"joint covariance not PSD: smallest eigenvalue {lam[0]:.3e}") from None
        return V * np.sqrt(np.clip(lam, 0.0, None))


def sample_coefficients(spec, max_level, seed):
    """One draw of the joint Gaussian coefficient vector up to ``max_level``."""
    L = _joint_factor(spec.hurst, max_level)
    z = rng_for(seed).standard_normal(L.shape[0])
    return CoefficientField(L @ z, HAAR)


def sample_coefficient_batch(spec, max_level, M, seed):
    """``M`` independent draws, member ``i`` seeded by ``member_seed(seed, i)``.

    Returns an ``(M, 2**(max_level+1))`` array in pyramid layout.
    """
    L = _joint_factor(spec.hurst, max_level)
    n = L.shape[0]
    Z = np.empty((M, n))
    for i in range(M):
        Z[i] = rng_for(member_seed(seed, i)).standard_normal(n)
    return Z @ L.T


# -- fractional Gaussian noise on a time grid ---------------------------------

def fgn_autocovariance(H, n, dt=1.0):
    k = np.arange(n, dtype=float)
    g = 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))
    return g * dt ** (2 * H)


@lru_cache(maxsize=32)
def _fgn_factor(H, n):
    C = linalg.toeplitz(fgn_autocovariance(H, n))
    return linalg.cholesky(C, lower=True)


def fbm_increments_on_grid(hurst, n_steps, seed, dt=None, n_paths=None):
    """Increments of ``B^H`` on ``n_steps`` cells of width ``dt`` (default ``1/n_steps``).

    Exact stationary-increment covariance via Cholesky of the fGn Toeplitz
    matrix.  ``hurst`` may be an :class:`FbmSpec` or any value in (0, 1);
    ``n_paths`` draws independent rows from one generator.
    """
    H = hurst.hurst if isinstance(hurst, FbmSpec) else float(hurst)
    if not 0 < H < 1:
        raise ValueError(f"Hurst parameter must lie in (0, 1), got {H}")
    if n_steps < 1 or n_steps & (n_steps - 1):
        raise ValueError(f"n_steps must be a power of two, got {n_steps}")
    dt = 1.0 / n_steps if dt is None else float(dt)
    L = _fgn_factor(H, n_steps)
    rng = rng_for(seed)
    shape = (n_steps,) if n_paths is None else (n_paths, n_steps)
    z = rng.standard_normal(shape)
    return (z @ L.T) * dt ** H


# -- reports ------------------------------------------------------------------

def diagonal_variance_fit(spec, levels=range(2, 9), normalization="orthonormal"):
    """log2-slope of the mean diagonal covariance over ``levels``.

    ``normalization='orthonormal'`` uses the L2-normalized coefficients
    (expected slope ``1 - 2H``); ``'unit'`` uses the amplitude-one Haar
    functions ``psi(2**j t - k)``, i.e. variances scaled by ``2**-j``
    (expected slope ``-2H``).
    """
    levels = list(levels)
    C = joint_covariance(spec.hurst, max(levels))
    means = []
    for j in levels:
        d = np.diag(C)[level_slice(j)].mean()
        means.append(d if normalization == "orthonormal" else d * 2.0 ** -j)
    return fit_slope(np.array(levels, dtype=float), np.log2(means))


@dataclass
class BesovDichotomyReport:
    s: float
    hurst: float
    M: int
    level_means: np.ndarray
    level_stderr: np.ndarray
    expected_levels: np.ndarray
    partial_sums: np.ndarray
    fit: SlopeFit

    @property
    def bounded(self):
        """Level contributions decay geometrically (upper 95% band below 0)."""
        return self.fit.band[1] < 0

    @property
    def growing(self):
        return self.fit.band[0] > 0 and bool(np.all(np.diff(self.partial_sums) > 0))

    def records(self):
        recs = [dict(kind="fbm_besov", level=j - 1, statistic=float(m), stderr=float(se),
                     expected=float(e), partial_sum=float(ps))
                for j, (m, se, e, ps) in enumerate(zip(self.level_means, self.level_stderr,
                                                       self.expected_levels, self.partial_sums))]
        recs.append(dict(kind="fbm_besov_fit", **self.fit.to_dict(), s=self.s, hurst=self.hurst,
                         bounded=self.bounded, growing=self.growing))
        return recs


def besov_dichotomy_report(spec, s, max_level, M, seed, fit_levels=None):
    """Empirical ``E||P_J xi||^2_{B^s_{2,2}}`` as ``J`` grows, from ``M`` joint draws.

    The first entry of the per-level arrays is the coarse term ``a0**2``;
    ``partial_sums[J + 1]`` is the norm of the projection onto levels ``<= J``.
    """
    from .wavelet_basis import level_besov_terms

    X = sample_coefficient_batch(spec, max_level, M, seed)
    T = level_besov_terms(X, s, 2.0)
    means = T.mean(axis=0)
    ses = T.std(axis=0, ddof=1) / np.sqrt(M)
    C = joint_covariance(spec.hurst, max_level)
    expected = level_besov_terms(np.sqrt(np.diag(C)), s, 2.0)
    levels = list(range(2, max_level + 1)) if fit_levels is None else list(fit_levels)
    y = np.log2(means[[j + 1 for j in levels]])
    sy = ses[[j + 1 for j in levels]] / (means[[j + 1 for j in levels]] * np.log(2))
    fit = fit_slope(np.array(levels, dtype=float), y, sy)
    return BesovDichotomyReport(s, spec.hurst, M, means, ses, expected, np.cumsum(means), fit)

"""Truncated symmetric power-law Levy noise and its wavelet coefficients.

The Levy measure is ``nu(dz) = c |z|**(-1-alpha) 1{|z| <= z_max} dz``.
Jumps larger than a truncation level ``eps`` form a compound Poisson
process; they are generated in decreasing order of size from the points
of a unit-rate Poisson process on the tail-mass axis (inverse tail-CDF
applied to cumulative exponential sums).  Consequently one seed yields
nested jump sets for every truncation level: the sample at ``eps1 < eps2``
contains exactly the sample at ``eps2`` plus the jumps in ``(eps1, eps2]``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .stats import SlopeFit, fit_slope, member_seed, member_seeds, rng_for
from .wavelet_basis import (
    HAAR,
    CoefficientField,
    besov_norm_p,
    evaluate,
    haar_analysis,
    level_slice,
)

_CHUNK = 4096


@dataclass(frozen=True)
class LevyMeasureSpec:
    alpha: float
    amplitude: float = 1.0
    z_max: float = np.inf

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not self.z_max > 0:
            raise ValueError(f"z_max must be positive, got {self.z_max}")

    def tail_mass(self, eps):
        """``nu(R \\ [-eps, eps])``."""
        return tail_mass(self, eps)

    def tail_inverse(self, mass):
        """Jump size ``y`` with ``nu(|z| > y) = mass`` (vectorized)."""
        mass = np.asarray(mass, dtype=float)
        floor = self.z_max ** -self.alpha if np.isfinite(self.z_max) else 0.0
        return (self.alpha * mass / (2.0 * self.amplitude) + floor) ** (-1.0 / self.alpha)

    def abs_moment(self, p, lo=0.0, hi=None):
        """``int_{lo < |z| <= hi} |z|**p nu(dz)``; infinite when divergent."""
        hi = self.z_max if hi is None else min(hi, self.z_max)
        if hi <= lo:
            return 0.0
        a, c = self.alpha, self.amplitude
        e = p - a
        if e == 0:
            return 2 * c * (np.log(hi) - np.log(lo)) if lo > 0 else np.inf
        if e < 0 and lo == 0:
            return np.inf
        if e > 0 and not np.isfinite(hi):
            return np.inf
        top = hi ** e if np.isfinite(hi) else 0.0
        bottom = lo ** e if lo > 0 else 0.0
        return 2 * c * (top - bottom) / e

    def to_dict(self):
        return {"alpha": self.alpha, "amplitude": self.amplitude,
                "z_max": None if not np.isfinite(self.z_max) else self.z_max}


def tail_mass(spec, eps):
    """Total mass ``rho_eps`` of the jumps larger than ``eps``."""
    if not eps > 0:
        raise ValueError(f"truncation level must be positive, got {eps}")
    if eps >= spec.z_max:
        return 0.0
    top = spec.z_max ** -spec.alpha if np.isfinite(spec.z_max) else 0.0
    return 2.0 * spec.amplitude / spec.alpha * (eps ** -spec.alpha - top)


@dataclass(frozen=True, eq=False)
class JumpSample:
    """Jumps ``(tau_n, Y_n)`` of the compound Poisson process with ``|Y_n| > eps``.

    Jumps are stored in decreasing order of ``|Y|``; ``stream`` identifies
    the random stream so that coupled samples can be recognised.
    """

    times: np.ndarray
    sizes: np.ndarray
    eps: float
    horizon: float = 1.0
    stream: tuple = field(default=None)

    @property
    def count(self):
        return len(self.sizes)

    def restrict(self, eps):
        """The coupled sample at a coarser truncation level ``eps >= self.eps``."""
        if eps < self.eps:
            raise ValueError("can only restrict to a larger truncation level")
        keep = np.abs(self.sizes) > eps
        return JumpSample(self.times[keep], self.sizes[keep], eps, self.horizon, self.stream)

    def band(self, lo, hi):
        """Jumps with ``lo < |Y| <= hi`` (same stream)."""
        a = np.abs(self.sizes)
        keep = (a > lo) & (a <= hi)
        return JumpSample(self.times[keep], self.sizes[keep], lo, self.horizon, self.stream)

    def __eq__(self, other):
        if not isinstance(other, JumpSample):
            return NotImplemented
        return (self.eps == other.eps and self.horizon == other.horizon
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.sizes, other.sizes))

    __hash__ = None

    def path(self, t):
        """Right-continuous path ``L(t) = sum_{tau_n <= t} Y_n``."""
        order = np.argsort(self.times, kind="stable")
        tt, cum = self.times[order], np.cumsum(self.sizes[order])
        idx = np.searchsorted(tt, np.asarray(t, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


def _stream_key(seed):
    if isinstance(seed, np.random.SeedSequence):
        return (seed.entropy, tuple(seed.spawn_key))
    return (seed, ())


def sample_large_jumps(spec, eps, seed, horizon=1.0):
    """Jumps of size ``|Y| > eps`` on ``[0, horizon]``, deterministic given ``seed``.

    ``seed`` is an int or a :class:`numpy.random.SeedSequence`.
    """
    if not eps > 0:
        raise ValueError(f"truncation level must be positive, got {eps}")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    key = _stream_key(ss)
    rho = tail_mass(spec, eps)
    if rho == 0.0:
        empty = np.empty(0)
        return JumpSample(empty, empty, eps, horizon, key)
    g_mass, g_time, g_sign = (np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3))
    masses, times, signs = [], [], []
    last = 0.0
    # unit-rate points on [0, inf) of the mass axis, scaled by the horizon
    while True:
        gam = last + np.cumsum(g_mass.standard_exponential(_CHUNK))
        t = g_time.random(_CHUNK)
        u = g_sign.random(_CHUNK)
        last = gam[-1]
        stop = gam / horizon >= rho
        if stop.any():
            n = int(np.argmax(stop))
            masses.append(gam[:n] / horizon)
            times.append(t[:n])
            signs.append(u[:n])
            break
        masses.append(gam / horizon)
        times.append(t)
        signs.append(u)
    m = np.concatenate(masses)
    sizes = spec.tail_inverse(m) * np.where(np.concatenate(signs) < 0.5, -1.0, 1.0)
    return JumpSample(np.concatenate(times) * horizon, sizes, eps, horizon, key)


def levy_coefficient(jumps, family, j, k, kind="wavelet"):
    """``sum_n f(tau_n) Y_n`` with ``f = psi_{j,k}`` or ``phi_{j,k}``."""
    if jumps.count == 0:
        return 0.0
    return float(np.dot(evaluate(family, j, k, kind, jumps.times), jumps.sizes))


def _haar_values(times, sizes, max_level):
    n_cells = 1 << (max_level + 1)
    cells = np.minimum((times * n_cells).astype(np.int64), n_cells - 1)
    sums = np.bincount(cells, weights=sizes, minlength=n_cells)
    return haar_analysis(sums)


def field_from_jumps(jumps, max_level, family=HAAR):
    """Wavelet coefficient field of the jump measure up to level ``max_level``."""
    if jumps.horizon != 1.0:
        raise ValueError("coefficient fields live on [0, 1]; sample with horizon=1")
    if family.kind == "haar":
        return CoefficientField(_haar_values(jumps.times, jumps.sizes, max_level), family)
    vals = np.zeros(1 << (max_level + 1))
    vals[0] = levy_coefficient(jumps, family, 0, 0, "scaling")
    for j in range(max_level + 1):
        vals[level_slice(j)] = [levy_coefficient(jumps, family, j, k) for k in range(1 << j)]
    return CoefficientField(vals, family)


def synthesize_levy_field(spec, eps, max_level, seed, family=HAAR):
    """Coefficients of the ``eps``-truncated Levy noise on [0, 1] from one jump sample."""
    if max_level < 0:
        raise ValueError("max_level must be non-negative")
    return field_from_jumps(sample_large_jumps(spec, eps, seed), max_level, family)


def coupled_difference(fine, coarse, max_level, family=HAAR):
    """``xi_fine - xi_coarse`` for two samples drawn from one jump stream.

    Raises if the samples are not coupled, i.e. if ``coarse`` is not the
    restriction of ``fine`` to its truncation level.
    """
    if fine.eps > coarse.eps:
        fine, coarse = coarse, fine
    if fine.stream is None or fine.stream != coarse.stream or fine.restrict(coarse.eps) != coarse:
        raise ValueError("samples are not coupled: the coarse jumps must be a restriction of the fine ones")
    return field_from_jumps(fine.band(fine.eps, coarse.eps), max_level, family)


# -- Monte Carlo reports ------------------------------------------------------

@dataclass
class LevelStatistic:
    level: int
    mean: float
    stderr: float
    n: int


def _summary_records(kind, stats, fit, extra):
    recs = [dict(kind=kind, level=s.level, statistic=s.mean, stderr=s.stderr, n=s.n) for s in stats]
    recs.append(dict(kind=kind + "_fit", **fit.to_dict(), **extra))
    return recs


@dataclass
class MomentScalingReport:
    p: float
    target_slope: float
    levels: list
    fit: SlopeFit

    def to_ndjson(self):
        recs = _summary_records("moment", self.levels, self.fit,
                                {"p": self.p, "target_slope": self.target_slope})
        return "".join(json.dumps(r) + "\n" for r in recs)


def moment_scaling_report(spec, eps, p, max_level, M, seed, fit_levels=None):
    """Monte Carlo estimate of ``E|zeta_{j,k}|**p`` per level and its log2-slope in ``j``.

    Levels ``2..max_level`` enter the least-squares fit unless ``fit_levels``
    is given.  The bound to compare against is ``p/2 - 1``.
    """
    if M < 100:
        raise ValueError(f"M={M} samples is too few for a slope fit (need >= 100)")
    if not spec.alpha < p < 2:
        raise ValueError(f"p must lie in (alpha, 2) = ({spec.alpha}, 2), got {p}")
    if not np.isfinite(spec.abs_moment(p, eps)):
        raise ValueError("p-th moment of the truncated jump law is infinite; set a finite z_max")
    acc = np.zeros(max_level + 1)
    acc2 = np.zeros(max_level + 1)
    for ss in member_seeds(seed, M):
        v = field_from_jumps(sample_large_jumps(spec, eps, ss), max_level).values
        a = np.abs(v) ** p
        for j in range(max_level + 1):
            lv = a[level_slice(j)]
            acc[j] += lv.sum()
            acc2[j] += np.dot(lv, lv)
    stats = []
    for j in range(max_level + 1):
        n = M * (1 << j)
        mean = acc[j] / n
        var = max(acc2[j] / n - mean * mean, 0.0)
        # shifts within a level are treated as independent replicates
        stats.append(LevelStatistic(j, mean, np.sqrt(var / n), n))
    levels = list(range(2, max_level + 1)) if fit_levels is None else list(fit_levels)
    x = np.array(levels, dtype=float)
    y = np.log2([stats[j].mean for j in levels])
    sy = np.array([stats[j].stderr / (stats[j].mean * np.log(2)) for j in levels])
    return MomentScalingReport(p, p / 2 - 1, stats, fit_slope(x, y, sy))


@dataclass
class TruncationReport:
    p: float
    s: float
    target_slope: float
    points: list
    fit: SlopeFit

    def to_ndjson(self):
        recs = [dict(kind="truncation", eps=e, statistic=m, stderr=se) for e, m, se in self.points]
        recs.append(dict(kind="truncation_fit", **self.fit.to_dict(), p=self.p, s=self.s,
                         target_slope=self.target_slope))
        return "".join(json.dumps(r) + "\n" for r in recs)


def truncation_convergence_report(spec, eps_list, p, s, max_level, M, seed):
    """Fit of ``log E||xi_e - xi_e'||^p`` against ``log min(e, e')`` for consecutive levels.

    Each member draws one jump stream at the smallest level; all other
    truncations are restrictions of it, so differences contain exactly the
    jumps between the two levels.  The bound's exponent is ``2 - p``.
    """
    if not s < 1.0 / p - 1.0:
        raise ValueError(f"need s < 1/p - 1 = {1 / p - 1:.4g}, got s={s}")
    if M < 100:
        raise ValueError(f"M={M} samples is too few for a slope fit (need >= 100)")
    eps = sorted(set(float(e) for e in eps_list))
    if len(eps) < 3:
        raise ValueError("need at least three truncation levels")
    sums = np.zeros((M, len(eps) - 1))
    for i, ss in enumerate(member_seeds(seed, M)):
        fine = sample_large_jumps(spec, eps[0], ss)
        for q in range(len(eps) - 1):
            band = fine.band(eps[q], eps[q + 1])
            v = _haar_values(band.times, band.sizes, max_level)
            sums[i, q] = besov_norm_p(v, s, p)
    means = sums.mean(axis=0)
    ses = sums.std(axis=0, ddof=1) / np.sqrt(M)
    x = np.log(eps[:-1])
    y = np.log(means)
    sy = ses / means
    points = [(e, float(m), float(se)) for e, m, se in zip(eps[:-1], means, ses)]
    return TruncationReport(p, s, 2.0 - p, points, fit_slope(x, y, sy))


@dataclass
class SmallBallReport:
    alpha: float
    eps_grid: list
    hits: list
    M: int
    fit: SlopeFit
    censored: list

    @property
    def alpha_hat(self):
        return -self.fit.slope

    @property
    def probabilities(self):
        return [h / self.M for h in self.hits]

    def to_ndjson(self):
        recs = [dict(kind="small_ball", eps=e, hits=h, prob=h / self.M, censored=e in self.censored)
                for e, h in zip(self.eps_grid, self.hits)]
        recs.append(dict(kind="small_ball_fit", **self.fit.to_dict(), alpha=self.alpha,
                         alpha_hat=self.alpha_hat))
        return "".join(json.dumps(r) + "\n" for r in recs)


def simulate_sup_abs(spec, M, seed, n_grid=4096, eps0=1e-3, batch=1000):
    """``sup_{t <= 1} |L(t)|`` on a uniform grid for ``M`` independent paths.

    Jumps above ``eps0`` are placed exactly (summed within grid cells);
    jumps below are replaced by a Brownian motion with the matched variance
    ``int_{|z| <= eps0} z**2 nu(dz)``.
    """
    rho = tail_mass(spec, eps0)
    sigma2 = spec.abs_moment(2.0, 0.0, eps0)
    out = np.empty(M)
    for b in range((M + batch - 1) // batch):
        rng = rng_for(member_seed(seed, b))
        m = min(batch, M - b * batch)
        counts = rng.poisson(rho, size=m)
        total = int(counts.sum())
        sizes = spec.tail_inverse(rho * rng.random(total)) * np.where(rng.random(total) < 0.5, -1.0, 1.0)
        cells = np.minimum((rng.random(total) * n_grid).astype(np.int64), n_grid - 1)
        owner = np.repeat(np.arange(m), counts)
        incr = np.bincount(owner * n_grid + cells, weights=sizes, minlength=m * n_grid).reshape(m, n_grid)
        incr += rng.standard_normal((m, n_grid)) * np.sqrt(sigma2 / n_grid)
        path = np.cumsum(incr, axis=1)
        out[b * batch: b * batch + m] = np.abs(path).max(axis=1)
    return out


def small_ball_report(spec, eps_grid, M, seed, n_grid=4096, eps0=1e-3):
    """Estimate ``P(sup|L| <= eps)`` on a grid and the exponent of ``-log P ~ K eps**-alpha``.

    The exponent is the negated slope of ``log(-log P)`` against ``log eps``.
    Grid points with no hits (or only hits) are censored and excluded from
    the fit.
    """
    sup = simulate_sup_abs(spec, M, seed, n_grid=n_grid, eps0=eps0)
    grid = sorted(float(e) for e in eps_grid)
    hits = [int(np.count_nonzero(sup <= e)) for e in grid]
    keep = [i for i, h in enumerate(hits) if 0 < h < M]
    censored = [grid[i] for i in range(len(grid)) if i not in keep]
    if len(keep) < 2:
        raise ValueError(f"too few uncensored grid points for a fit (censored: {censored})")
    P = np.array([hits[i] / M for i in keep])
    x = np.log([grid[i] for i in keep])
    y = np.log(-np.log(P))
    # delta method: var log(-log P) = (1 - P) / (M P log(P)^2)
    sy = np.sqrt((1 - P) / (M * P)) / np.abs(np.log(P))
    return SmallBallReport(spec.alpha, grid, hits, M, fit_slope(x, y, sy), censored)

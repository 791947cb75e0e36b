"""Seed derivation and small fitting helpers shared by the Monte Carlo reports."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def member_seed(seed, index):
    """Seed of ensemble member ``index`` derived from ``seed``.

    Children are addressed by spawn key, so member ``i`` receives the same
    stream whatever the ensemble size.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (int(index),))
    return np.random.SeedSequence(int(seed), spawn_key=(int(index),))


def member_seeds(seed, M, start=0):
    for i in range(start, start + M):
        yield member_seed(seed, i)


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    n_points: int
    residual_stderr: float = float("nan")

    @property
    def band(self):
        """Two-sided 95% band ``slope +- 1.96 stderr``."""
        return self.slope - 1.96 * self.stderr, self.slope + 1.96 * self.stderr

    def to_dict(self):
        d = asdict(self)
        d["ci_low"], d["ci_high"] = self.band
        return d


def fit_slope(x, y, sy=None):
    """Ordinary least squares line through ``(x, y)``.

    ``stderr`` propagates the per-point standard errors ``sy`` through the
    OLS weights when they are given; otherwise the residual-based error is
    used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    res_se = float(np.sqrt(np.dot(resid, resid) / (len(x) - 2) / sxx)) if len(x) > 2 else float("nan")
    if sy is not None:
        c = xc / sxx
        se = float(np.sqrt(np.dot(c * c, np.asarray(sy, dtype=float) ** 2)))
    else:
        se = res_se
    return SlopeFit(slope, intercept, se, len(x), res_se)

"""Haar and periodized Daubechies multiresolution analysis on [0, 1].

Conventions
-----------
All dilates and translates are L2-orthonormal::

    psi_{j,k}(t) = 2**(j/2) * psi(2**j * t - k),   k = 0, ..., 2**j - 1
    phi_{j,k}(t) = 2**(j/2) * phi(2**j * t - k)

Daubechies functions are periodized onto [0, 1), which keeps exactly
``2**j`` shifts per level.  The Haar pieces are half-open except at the
right end point: ``t = 1`` belongs to the last cell of every level, so the
system covers the closed interval.

Coefficient fields use the pyramid layout ``values[0] = a0`` (coefficient
of ``phi_{0,0}``) and ``values[2**j + k] = lambda_{j,k}``, so a field of
maximal level ``J`` is a contiguous array of length ``2**(J + 1)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

NORMALIZATION = "L2-orthonormal"
CASCADE_ITERATIONS = 12


class WaveletDomainError(ValueError):
    """Raised for dyadic indices outside the admissible shift range."""


def daubechies_filter(order):
    """Scaling filter of the Daubechies wavelet with ``order`` vanishing moments.

    Obtained by spectral factorization of the Daubechies polynomial with
    the minimum-phase choice of roots.  The filter is normalized so that
    ``sum(h) == sqrt(2)`` and ``sum(h**2) == 1``.  ``order=1`` is Haar.
    """
    if order < 1:
        raise ValueError(f"Daubechies order must be positive, got {order}")
    poly = np.array([comb(order - 1 + k, k) for k in range(order)], dtype=float)
    h = np.array([1.0])
    for _ in range(order):
        h = np.convolve(h, [1.0, 1.0])
    if order > 1:
        # roots in y = sin^2(w/2); each gives z + 1/z = 2 - 4y
        for y in np.roots(poly[::-1]):
            b = 2.0 - 4.0 * y
            z = np.roots([1.0, -b, 1.0])
            z_in = z[np.argmin(np.abs(z))]
            h = np.convolve(h, [1.0, -z_in])
    h = np.real(h)
    return h * np.sqrt(2.0) / h.sum()


@dataclass(frozen=True)
class WaveletFamily:
    """A compactly supported orthonormal wavelet family.

    ``order`` counts vanishing moments; order 1 is Haar and the filter has
    ``2 * order`` taps.
    """

    kind: str = "haar"
    order: int = 1
    filter: tuple = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("haar", "daubechies"):
            raise ValueError(f"unknown wavelet kind {self.kind!r}")
        if self.kind == "haar" and self.order != 1:
            raise ValueError("Haar family has order 1")
        if self.order < 1:
            raise ValueError("order must be a positive integer")
        if self.filter is None:
            h = (2 ** -0.5, 2 ** -0.5) if self.kind == "haar" else tuple(daubechies_filter(self.order))
            object.__setattr__(self, "filter", tuple(float(x) for x in h))

    @classmethod
    def haar(cls):
        return cls("haar", 1)

    @classmethod
    def daubechies(cls, order):
        return cls("daubechies", order)

    @property
    def support_width(self):
        return 2 * self.order - 1

    @property
    def label(self):
        return "haar" if self.kind == "haar" else f"db{self.order}"


HAAR = WaveletFamily.haar()


def n_shifts(j):
    """Number of admissible shifts at level ``j`` (``|J_j|``)."""
    return 1 << j


def check_index(j, k):
    if j < 0:
        raise WaveletDomainError(f"level must be non-negative, got j={j}")
    if not 0 <= k < n_shifts(j):
        raise WaveletDomainError(f"index (j={j}, k={k}) outside J_j = [0, {n_shifts(j) - 1}]")


# -- Daubechies cascade tables ------------------------------------------------

@lru_cache(maxsize=None)
def _cascade_tables(filter_taps, iterations=CASCADE_ITERATIONS):
    """Scaling function and wavelet sampled on ``[0, L-1]`` with step ``2**-iterations``.

    Integer samples come from the eigenvector of the refinement matrix;
    each refinement sweep then fills in the next dyadic level, so the
    tables are exact at every grid point up to rounding.
    """
    h = np.asarray(filter_taps)
    L = len(h)
    width = L - 1
    # phi(m) = sqrt2 * sum_n h_n phi(2m - n) on integers m = 0..width
    A = np.zeros((width + 1, width + 1))
    for m in range(width + 1):
        for l in range(width + 1):
            n = 2 * m - l
            if 0 <= n < L:
                A[m, l] = np.sqrt(2.0) * h[n]
    w, v = np.linalg.eig(A)
    idx = np.argmin(np.abs(w - 1.0))
    phi = np.real(v[:, idx])
    phi = phi / phi.sum()
    step = 1
    for _ in range(iterations):
        # phi(i / 2step) = sqrt2 * sum_n h_n phi((i - n step) / step)
        idx = np.arange(width * 2 * step + 1)
        new = np.zeros(len(idx))
        for n in range(L):
            src = idx - n * step
            ok = (src >= 0) & (src < len(phi))
            new[ok] += np.sqrt(2.0) * h[n] * phi[src[ok]]
        phi = new
        step *= 2
    n_grid = len(phi)
    psi = np.zeros(n_grid)
    g = np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])
    idx_all = np.arange(n_grid)
    for n in range(L):
        src = 2 * idx_all - n * step
        ok = (src >= 0) & (src < n_grid)
        psi[ok] += np.sqrt(2.0) * g[n] * phi[src[ok]]
    return phi, psi, step


def _interp_table(table, step, x):
    """Linear interpolation of a cascade table at real points ``x``."""
    pos = np.asarray(x, dtype=float) * step
    out = np.zeros(pos.shape)
    inside = (pos >= 0) & (pos <= len(table) - 1)
    p = pos[inside]
    i0 = np.minimum(np.floor(p).astype(np.int64), len(table) - 2)
    frac = p - i0
    out[inside] = (1.0 - frac) * table[i0] + frac * table[i0 + 1]
    return out


# -- evaluation ---------------------------------------------------------------

def _haar_mother(x, kind, right_closed):
    x = np.asarray(x, dtype=float)
    in_unit = (x >= 0) & ((x < 1) | (right_closed & (x == 1)))
    if kind == "scaling":
        return np.where(in_unit, 1.0, 0.0)
    return np.where(in_unit, np.where(x < 0.5, 1.0, -1.0), 0.0)


def evaluate(family, j, k, kind, t):
    """Value of ``psi_{j,k}`` (``kind='wavelet'``) or ``phi_{j,k}`` at ``t`` in [0, 1].

    Vectorized over ``t``.  Points outside [0, 1] evaluate to 0.
    """
    check_index(j, k)
    if kind not in ("wavelet", "scaling"):
        raise ValueError(f"kind must be 'wavelet' or 'scaling', got {kind!r}")
    t = np.asarray(t, dtype=float)
    scale = 2.0 ** (j / 2)
    on_interval = (t >= 0) & (t <= 1)
    if family.kind == "haar":
        x = (1 << j) * t - k
        right_closed = (t == 1) & (k == n_shifts(j) - 1)
        vals = scale * _haar_mother(x, kind, right_closed)
        return np.where(on_interval, vals, 0.0)
    phi, psi, step = _cascade_tables(family.filter)
    table = phi if kind == "scaling" else psi
    width = family.support_width
    # periodize: sum over integer translates m with 2^j (t + m) - k in [0, width]
    x0 = (1 << j) * np.mod(t, 1.0) - k
    total = np.zeros(t.shape)
    n_per = 1 << j
    m_lo = -int(np.ceil((width + 1) / n_per)) - 1
    m_hi = int(np.ceil((width + n_per) / n_per)) + 1
    for m in range(m_lo, m_hi + 1):
        total += _interp_table(table, step, x0 + m * n_per)
    return np.where(on_interval, scale * total, 0.0)


# -- coefficient fields -------------------------------------------------------

def level_slice(j):
    return slice(1 << j, 1 << (j + 1))


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Wavelet coefficients ``{lambda_{j,k}: j <= J}`` and ``a0`` in pyramid layout."""

    values: np.ndarray
    family: WaveletFamily = HAAR

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = v.shape[-1]
        if v.ndim != 1 or n < 2 or n & (n - 1):
            raise ValueError("values must be a 1-d array whose length is a power of two >= 2")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, max_level, family=HAAR):
        return cls(np.zeros(1 << (max_level + 1)), family)

    @classmethod
    def from_parts(cls, coarse, details, family=HAAR):
        """Build from ``a0`` and a sequence of per-level detail arrays."""
        vals = [np.atleast_1d(float(coarse))]
        for j, d in enumerate(details):
            d = np.asarray(d, dtype=float)
            if d.shape != (1 << j,):
                raise WaveletDomainError(f"level {j} needs {1 << j} coefficients, got {d.shape}")
            vals.append(d)
        return cls(np.concatenate(vals), family)

    @property
    def max_level(self):
        return len(self.values).bit_length() - 2

    @property
    def coarse(self):
        return float(self.values[0])

    def level(self, j):
        if not 0 <= j <= self.max_level:
            raise WaveletDomainError(f"level {j} outside 0..{self.max_level}")
        return self.values[level_slice(j)]

    def __getitem__(self, jk):
        j, k = jk
        check_index(j, k)
        if j > self.max_level:
            return 0.0
        return float(self.values[(1 << j) + k])

    def _check_compatible(self, other):
        if self.family != other.family or len(self.values) != len(other.values):
            raise ValueError("coefficient fields differ in family or max level")

    def __add__(self, other):
        self._check_compatible(other)
        return CoefficientField(self.values + other.values, self.family)

    def __sub__(self, other):
        self._check_compatible(other)
        return CoefficientField(self.values - other.values, self.family)

    def __mul__(self, c):
        return CoefficientField(float(c) * self.values, self.family)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, CoefficientField):
            return NotImplemented
        return self.family == other.family and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.family, self.values.tobytes()))

    def to_ndjson(self):
        """Header line followed by one ``{j, k, value}`` record per detail coefficient.

        The coarse coefficient is stored as ``{"j": -1, "k": 0, ...}``.
        """
        header = {
            "family": self.family.kind,
            "order": self.family.order,
            "max_level": self.max_level,
            "normalization": NORMALIZATION,
        }
        lines = [json.dumps(header), json.dumps({"j": -1, "k": 0, "value": self.coarse})]
        for j in range(self.max_level + 1):
            for k, v in enumerate(self.level(j)):
                lines.append(json.dumps({"j": j, "k": k, "value": float(v)}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = json.loads(lines[0])
        if header.get("normalization") != NORMALIZATION:
            raise ValueError(f"unsupported normalization {header.get('normalization')!r}")
        family = WaveletFamily(header["family"], int(header["order"]))
        out = np.zeros(1 << (int(header["max_level"]) + 1))
        for ln in lines[1:]:
            rec = json.loads(ln)
            j, k = int(rec["j"]), int(rec["k"])
            if j == -1:
                out[0] = rec["value"]
            else:
                check_index(j, k)
                out[(1 << j) + k] = rec["value"]
        return cls(out, family)


def besov_weights(max_level, s, p):
    """Per-entry weights ``w`` such that ``||f||^p = sum(w * |values|**p)``.

    Level ``j`` carries ``2**(j*(s - 1/p)*p) * 2**(j*p/2)``, i.e. the usual
    ``2**(j*(s + 1/2 - 1/p)*p)`` for L2-normalized coefficients; ``a0``
    carries weight 1.
    """
    w = np.empty(1 << (max_level + 1))
    w[0] = 1.0
    for j in range(max_level + 1):
        w[level_slice(j)] = 2.0 ** (j * (s - 1.0 / p) * p) * 2.0 ** (j * p / 2.0)
    return w


def _check_besov(p):
    if not np.isfinite(p) or p < 1:
        raise ValueError(f"Besov integrability p must lie in [1, inf), got {p}")


def besov_norm_p(values, s, p):
    """``||.||_{B^s_{p,p}}**p`` for pyramid-layout arrays; batched over leading axes."""
    _check_besov(p)
    values = np.asarray(values, dtype=float)
    max_level = values.shape[-1].bit_length() - 2
    return np.abs(values) ** p @ besov_weights(max_level, s, p)


def besov_seminorm(field, s, p):
    """Besov ``B^s_{p,p}(0,1)`` sequence norm of a coefficient field."""
    return float(besov_norm_p(field.values, s, p)) ** (1.0 / p)


def level_besov_terms(values, s, p):
    """Per-level contributions ``2**(j(s-1/p)p) 2**(jp/2) sum_k |lambda_{j,k}|**p``.

    Returns an array of shape ``(..., J + 2)`` whose first column is ``|a0|**p``.
    """
    _check_besov(p)
    values = np.asarray(values, dtype=float)
    max_level = values.shape[-1].bit_length() - 2
    a = np.abs(values) ** p * besov_weights(max_level, s, p)
    cols = [a[..., 0]] + [a[..., level_slice(j)].sum(axis=-1) for j in range(max_level + 1)]
    return np.stack(cols, axis=-1)


def project_Gn(field, n):
    """Keep ``a0`` and detail levels ``j <= n``; zero the rest."""
    if n > field.max_level:
        raise WaveletDomainError(f"n={n} exceeds max level {field.max_level}")
    out = np.array(field.values)
    out[1 << (n + 1):] = 0.0
    return CoefficientField(out, field.family)


def project_complement(field, n):
    """Keep only detail levels ``j > n``."""
    if n > field.max_level:
        raise WaveletDomainError(f"n={n} exceeds max level {field.max_level}")
    out = np.array(field.values)
    out[: 1 << (n + 1)] = 0.0
    return CoefficientField(out, field.family)


def haar_scaling_coefficients(values, n):
    """Haar coefficients ``<f, phi_{n,k}>`` reconstructed from ``a0`` and details below ``n``.

    Batched over leading axes; returns shape ``(..., 2**n)``.
    """
    values = np.asarray(values, dtype=float)
    if n > values.shape[-1].bit_length() - 1:
        raise WaveletDomainError(f"level {n} needs details up to level {n - 1}")
    g = values[..., :1]
    r = 2 ** -0.5
    for j in range(n):
        d = values[..., level_slice(j)]
        nxt = np.empty(values.shape[:-1] + (2 << j,))
        nxt[..., 0::2] = r * (g + d)
        nxt[..., 1::2] = r * (g - d)
        g = nxt
    return g


def haar_analysis(cell_sums):
    """Haar coefficients of a measure given its masses on ``2**(J+1)`` equal cells.

    ``cell_sums[..., c]`` is the mass of cell ``[c 2**-(J+1), (c+1) 2**-(J+1))``.
    Returns pyramid-layout values of maximal level ``J`` (batched).
    """
    s = np.asarray(cell_sums, dtype=float)
    n = s.shape[-1]
    if n < 2 or n & (n - 1):
        raise ValueError("number of cells must be a power of two >= 2")
    max_level = n.bit_length() - 2
    out = np.empty(s.shape)
    for j in range(max_level, -1, -1):
        left, right = s[..., 0::2], s[..., 1::2]
        out[..., level_slice(j)] = 2.0 ** (j / 2) * (left - right)
        s = left + right
    out[..., 0] = s[..., 0]
    return out


def filter_orthogonality_report(family, tol=1e-12):
    """Maximal deviation of ``sum_n h_n h_{n+2l}`` from ``delta_l`` over all shifts ``l``.

    With the ``sum(h) = sqrt(2)`` normalization the target at ``l = 0`` is 1.
    """
    h = np.asarray(family.filter, dtype=float)
    L = len(h)
    devs = {}
    for l in range(-(L // 2) + 1, L // 2):
        shift = 2 * l
        if shift >= 0:
            acc = float(np.dot(h[: L - shift], h[shift:])) if shift < L else 0.0
        else:
            acc = float(np.dot(h[-shift:], h[: L + shift]))
        target = 1.0 if l == 0 else 0.0
        devs[l] = abs(acc - target)
    max_dev = max(devs.values())
    return {"family": family.label, "max_deviation": max_dev, "per_shift": devs, "ok": max_dev < tol}


verify_filter_orthogonality = filter_orthogonality_report

"""Stokes eigenbasis on the torus ``[0, 2*pi)**2`` and saturating mode sets.

Each site ``j`` of the half lattice ``{j1 > 0} | {j1 = 0, j2 > 0}`` carries
two eigenfunctions

    e_j^sin(x) = sin(j.x) jhat_perp / (pi*sqrt(2)),
    e_j^cos(x) = cos(j.x) jhat_perp / (pi*sqrt(2)),

with ``jhat_perp = (-j2, j1)/|j|``; both are divergence free, unit in L2
and have Stokes eigenvalue ``|j|**2``.  The constant fields ``(1, 0)`` and
``(0, 1)`` (scaled by ``1/(2*pi)``) complete the basis but are not part of
the mean-zero dynamical state.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

SIN, COS = "sin", "cos"
CONST_X, CONST_Y = "const_x", "const_y"
PARITIES = (SIN, COS, CONST_X, CONST_Y)
AMPLITUDE = 1.0 / (np.pi * np.sqrt(2.0))
CONST_AMPLITUDE = 1.0 / (2.0 * np.pi)


class ModeError(ValueError):
    """Invalid mode index or parity."""


def in_half_lattice(j1, j2):
    return j1 > 0 or (j1 == 0 and j2 > 0)


@dataclass(frozen=True, order=True)
class ModeIndex:
    j1: int
    j2: int
    parity: str = SIN

    def __post_init__(self):
        if self.parity not in PARITIES:
            raise ModeError(f"unknown parity {self.parity!r}")
        if self.parity in (CONST_X, CONST_Y):
            if (self.j1, self.j2) != (0, 0):
                raise ModeError("constant modes live at j = (0, 0)")
        elif not in_half_lattice(self.j1, self.j2):
            raise ModeError(f"{self.parity} modes need j in the half lattice, got ({self.j1}, {self.j2})")

    @property
    def j(self):
        return (self.j1, self.j2)

    @property
    def perp(self):
        return (-self.j2, self.j1)

    @property
    def is_constant(self):
        return self.parity in (CONST_X, CONST_Y)

    @property
    def direction(self):
        """Unit vector carried by the mode."""
        if self.parity == CONST_X:
            return np.array([1.0, 0.0])
        if self.parity == CONST_Y:
            return np.array([0.0, 1.0])
        return np.array(self.perp, dtype=float) / np.hypot(self.j1, self.j2)

    def to_dict(self):
        return {"j1": self.j1, "j2": self.j2, "parity": self.parity}


def eigenfunction_eval(mode, x):
    """Value of the L2-normalized eigenfunction at points ``x`` of shape ``(..., 2)``.

    Returns an array of shape ``(..., 2)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    if mode.is_constant:
        scalar = np.full(x.shape[:-1], CONST_AMPLITUDE)
    else:
        phase = mode.j1 * x[..., 0] + mode.j2 * x[..., 1]
        scalar = AMPLITUDE * (np.sin(phase) if mode.parity == SIN else np.cos(phase))
    return scalar[..., None] * mode.direction


def stokes_eigenvalue(mode):
    if isinstance(mode, ModeIndex):
        return 0.0 if mode.is_constant else float(mode.j1 ** 2 + mode.j2 ** 2)
    j1, j2 = mode
    return float(j1 ** 2 + j2 ** 2)


def half_lattice(N):
    """Half-lattice sites with ``|j|_inf <= N`` as an ``(n, 2)`` int array, sorted by (|j|^2, j1, j2)."""
    sites = [(j1, j2) for j1 in range(0, N + 1) for j2 in range(-N, N + 1) if in_half_lattice(j1, j2)]
    sites.sort(key=lambda p: (p[0] ** 2 + p[1] ** 2, p[0], p[1]))
    return np.array(sites, dtype=int).reshape(-1, 2)


@dataclass(eq=False)
class SpectralVelocity:
    """Mean-zero divergence-free field truncated at ``|j|_inf <= N``.

    ``sin`` and ``cos`` hold the coefficients of ``e_j^sin`` and ``e_j^cos``
    for the sites of :func:`half_lattice`; a leading batch axis is allowed.
    """

    N: int
    sin: np.ndarray
    cos: np.ndarray
    sites: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sites = half_lattice(self.N)
        self.sin = np.asarray(self.sin, dtype=float)
        self.cos = np.asarray(self.cos, dtype=float)
        n = len(self.sites)
        if self.sin.shape[-1] != n or self.cos.shape != self.sin.shape:
            raise ValueError(f"expected coefficient arrays with trailing length {n}")

    @classmethod
    def zeros(cls, N, batch=()):
        n = len(half_lattice(N))
        return cls(N, np.zeros(tuple(batch) + (n,)), np.zeros(tuple(batch) + (n,)))

    @classmethod
    def from_modes(cls, N, values):
        """Build from ``{ModeIndex: value}``; modes outside the truncation raise."""
        u = cls.zeros(N)
        for mode, v in values.items():
            arr, i = u._slot(mode)
            arr[i] = v
        return u

    def _slot(self, mode):
        if mode.is_constant:
            raise ModeError("constant modes are not part of the mean-zero state")
        i = self.index_of(mode.j)
        return (self.sin if mode.parity == SIN else self.cos), i

    def index_of(self, j):
        hits = np.flatnonzero((self.sites[:, 0] == j[0]) & (self.sites[:, 1] == j[1]))
        if hits.size == 0:
            raise ModeError(f"mode {tuple(j)} outside truncation N={self.N}")
        return int(hits[0])

    def __getitem__(self, mode):
        arr, i = self._slot(mode)
        return arr[..., i]

    def modes(self):
        for j1, j2 in self.sites:
            yield ModeIndex(int(j1), int(j2), SIN)
            yield ModeIndex(int(j1), int(j2), COS)

    @property
    def eigenvalues(self):
        return (self.sites ** 2).sum(axis=1).astype(float)

    def energy(self):
        """``|u|^2`` in L2 (orthonormal basis)."""
        return (self.sin ** 2 + self.cos ** 2).sum(axis=-1)

    def enstrophy(self):
        """``|grad u|^2 = sum |j|^2 (a_j^2 + b_j^2)``."""
        return ((self.sin ** 2 + self.cos ** 2) * self.eigenvalues).sum(axis=-1)

    def evaluate(self, x):
        """Direct synthesis at points ``x`` of shape ``(..., 2)`` (unbatched fields only)."""
        x = np.asarray(x, dtype=float)
        phase = x[..., 0, None] * self.sites[:, 0] + x[..., 1, None] * self.sites[:, 1]
        scal = AMPLITUDE * (np.sin(phase) * self.sin + np.cos(phase) * self.cos)
        dirs = np.stack([-self.sites[:, 1], self.sites[:, 0]], axis=1) / np.sqrt(self.eigenvalues)[:, None]
        return scal @ dirs

    def copy(self):
        return SpectralVelocity(self.N, self.sin.copy(), self.cos.copy())

    def __add__(self, other):
        self._check(other)
        return SpectralVelocity(self.N, self.sin + other.sin, self.cos + other.cos)

    def __sub__(self, other):
        self._check(other)
        return SpectralVelocity(self.N, self.sin - other.sin, self.cos - other.cos)

    def __mul__(self, c):
        return SpectralVelocity(self.N, self.sin * c, self.cos * c)

    __rmul__ = __mul__

    def inner(self, other):
        self._check(other)
        return (self.sin * other.sin + self.cos * other.cos).sum(axis=-1)

    def _check(self, other):
        if self.N != other.N:
            raise ValueError(f"truncation mismatch: {self.N} vs {other.N}")

    def restrict(self, N):
        """Coefficients on the smaller truncation ``N`` (shared modes only)."""
        if N > self.N:
            raise ValueError("can only restrict to a smaller truncation")
        small = half_lattice(N)
        idx = [self.index_of(j) for j in small]
        return SpectralVelocity(N, self.sin[..., idx], self.cos[..., idx])

    def embed(self, N):
        """Zero-padded copy on the larger truncation ``N``."""
        big = SpectralVelocity.zeros(N, self.sin.shape[:-1])
        idx = [big.index_of(j) for j in self.sites]
        big.sin[..., idx] = self.sin
        big.cos[..., idx] = self.cos
        return big


# -- mode sets ------------------------------------------------------------------

@dataclass(frozen=True)
class ModeSet:
    """Symmetric finite ``K`` in Z^2 containing the origin."""

    members: frozenset

    def __post_init__(self):
        m = frozenset((int(a), int(b)) for a, b in self.members)
        object.__setattr__(self, "members", m)
        if (0, 0) not in m:
            raise ModeError("mode set must contain (0, 0)")
        bad = [p for p in m if (-p[0], -p[1]) not in m]
        if bad:
            raise ModeError(f"mode set not symmetric, e.g. {bad[0]} without its negative")

    @classmethod
    def from_generators(cls, points):
        """Symmetric closure of ``points`` together with the origin."""
        pts = {(0, 0)}
        for a, b in points:
            pts |= {(a, b), (-a, -b)}
        return cls(frozenset(pts))

    @property
    def dim(self):
        return len(self.members)

    def __contains__(self, p):
        return tuple(p) in self.members

    def __len__(self):
        return len(self.members)

    def sorted(self):
        return sorted(self.members)

    def half(self):
        """Members in the half lattice (one representative per +-pair, origin dropped)."""
        return sorted(p for p in self.members if in_half_lattice(*p))

    def forced_modes(self):
        """Sin and cos eigenfunctions attached to the half-lattice members."""
        return [ModeIndex(a, b, par) for a, b in self.half() for par in (SIN, COS)]

    def radius(self):
        return max(max(abs(a), abs(b)) for a, b in self.members)

    def to_csv(self):
        return "j1,j2\n" + "".join(f"{a},{b}\n" for a, b in self.sorted())

    @classmethod
    def from_csv(cls, text):
        rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, dtype=int, ndmin=2)
        return cls(frozenset(map(tuple, rows)))


STANDARD_GENERATOR = ModeSet.from_generators([(1, 0), (0, 1), (1, 1), (1, -1)])


def saturate_step(K):
    """``K | {m + n : m, n in K, |m| != |n|, m ^ n != 0}``."""
    P = np.array(K.sorted(), dtype=np.int64)
    norm2 = (P ** 2).sum(axis=1)
    new = set(K.members)
    for i in range(len(P)):
        wedge = P[i, 0] * P[:, 1] - P[i, 1] * P[:, 0]
        ok = (wedge != 0) & (norm2 != norm2[i])
        new.update(map(tuple, (P[i] + P[ok]).tolist()))
    return ModeSet(frozenset(new))


@dataclass
class SaturationReport:
    radius: int
    covered: bool
    iterations: int
    missing: list
    history: list
    fixpoint: bool
    closure: ModeSet

    def to_ndjson(self):
        lines = [json.dumps(h) for h in self.history]
        lines.append(json.dumps({"radius": self.radius, "covered": self.covered,
                                 "iterations": self.iterations, "fixpoint": self.fixpoint,
                                 "missing": [list(p) for p in self.missing]}))
        return "\n".join(lines) + "\n"


def _window_missing(K, R):
    return [(a, b) for a in range(-R, R + 1) for b in range(-R, R + 1) if (a, b) not in K.members]


def is_saturating_up_to(K, radius, max_iters=32):
    """Iterate :func:`saturate_step` until ``{|l|_inf <= radius}`` is covered.

    Stops early at a fixpoint (no growth); non-coverage is reported, not raised.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    history = [{"i": 0, "size": len(K), "newly_added": len(K)}]
    missing = _window_missing(K, radius)
    it = 0
    fixpoint = False
    while missing and it < max_iters:
        nxt = saturate_step(K)
        it += 1
        history.append({"i": it, "size": len(nxt), "newly_added": len(nxt) - len(K)})
        if len(nxt) == len(K):
            fixpoint = True
            break
        K = nxt
        missing = _window_missing(K, radius)
    return SaturationReport(radius, not missing, it, missing, history, fixpoint, K)

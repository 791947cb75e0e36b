"""Pseudospectral Galerkin solver for ``du + kappa A u dt + B(u, u) dt = dZ`` on the torus.

State: real coefficients over the sin/cos Stokes eigenfunctions with
``|j|_inf <= N`` (see :class:`~stochnse.torus_spectral.SpectralVelocity`),
optionally with a leading ensemble axis.  Internally each half-lattice site
``j`` maps to the complex amplitude ``s(j) = (b_j - i a_j) / (2 sqrt(2) pi)``
of ``e^{i j.x} jhat_perp``; products are formed on a collocation grid.
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import fft as sfft

from .levy_noise import LevyMeasureSpec, sample_large_jumps
from .stats import member_seed
from .torus_spectral import COS, SIN, ModeIndex, ModeSet, SpectralVelocity, half_lattice

SCHEMES = ("integrating_factor_euler", "imex_euler")
DEALIAS = ("two_thirds", "none")
TWO_SQRT2_PI = 2.0 * math.sqrt(2.0) * math.pi


class SolverDivergence(ArithmeticError):
    """Non-finite coefficients; ``step`` is the index of the failing step."""

    def __init__(self, step, members=None):
        self.step = step
        self.members = members
        super().__init__(f"non-finite state at step {step}" + (f" (members {members})" if members else ""))


@dataclass(frozen=True)
class SolverConfig:
    kappa: float
    N: int
    dt: float
    T: float
    dealias: str = "two_thirds"
    scheme: str = "integrating_factor_euler"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("viscosity kappa must be positive")
        if self.N < 1:
            raise ValueError("truncation N must be >= 1")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if abs(self.n_steps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        if self.dt > self.stability_bound:
            raise ValueError(f"dt={self.dt} exceeds the heuristic bound 0.5/(kappa N^2)={self.stability_bound:.3g}")
        if self.dealias not in DEALIAS:
            raise ValueError(f"dealias must be one of {DEALIAS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def stability_bound(self):
        return 0.5 / (self.kappa * self.N ** 2)

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def to_dict(self):
        return asdict(self)


# -- transforms ---------------------------------------------------------------

def grid_size(N, dealias):
    if dealias == "two_thirds":
        return sfft.next_fast_len(3 * N + 1, real=True)
    return 2 * N + 2


class SpectralOps:
    """Index maps between half-lattice coefficients and rfft2 arrays."""

    _cache = {}

    def __new__(cls, N, dealias="two_thirds"):
        key = (N, dealias)
        if key not in cls._cache:
            obj = super().__new__(cls)
            obj._setup(N, dealias)
            cls._cache[key] = obj
        return cls._cache[key]

    def _setup(self, N, dealias):
        self.N, self.dealias = N, dealias
        n = self.n = grid_size(N, dealias)
        self.shape = (n, n // 2 + 1)
        sites = self.sites = half_lattice(N)
        j1, j2 = sites[:, 0], sites[:, 1]
        flip = j2 < 0
        self.flip = flip
        self.pos = (np.where(flip, -j1, j1) % n, np.where(flip, -j2, j2))
        axis = j2 == 0
        self.extra_idx = np.flatnonzero(axis)
        self.extra_pos = ((-j1[axis]) % n, np.zeros(axis.sum(), dtype=int))
        k1 = np.fft.fftfreq(n, 1.0 / n)[:, None]
        k2 = np.arange(n // 2 + 1)[None, :]
        kk = np.hypot(k1, k2)
        safe = np.where(kk > 0, kk, 1.0)
        self.k1, self.k2 = k1, k2
        self.perp_x = np.where(kk > 0, -k2 / safe, 0.0)
        self.perp_y = np.where(kk > 0, k1 / safe, 0.0)
        self.curl = 1j * kk
        self._synth = np.stack([self.perp_x, self.perp_y, self.curl])
        self.eig = (sites ** 2).sum(axis=1).astype(float)

    def scalar_spectrum(self, a, b):
        """rfft2 array of ``uhat`` with ``u = sum uhat(k) e^{ik.x} khat_perp``."""
        s = (b - 1j * a) / TWO_SQRT2_PI
        U = np.zeros(a.shape[:-1] + self.shape, dtype=complex)
        U[..., self.pos[0], self.pos[1]] = np.where(self.flip, -np.conj(s), s)
        if self.extra_idx.size:
            U[..., self.extra_pos[0], self.extra_pos[1]] = -np.conj(s[..., self.extra_idx])
        return U

    def to_grid(self, U):
        n = (self.n, self.n)
        ux = sfft.irfft2(U * self.perp_x, s=n, norm="forward")
        uy = sfft.irfft2(U * self.perp_y, s=n, norm="forward")
        return ux, uy

    def vorticity_grid(self, U):
        return sfft.irfft2(U * self.curl, s=(self.n, self.n), norm="forward")

    def project(self, fx, fy):
        """Leray projection of a grid vector field onto the truncated basis, as ``(a, b)``."""
        P = sfft.rfft2(fx, norm="forward") * self.perp_x + sfft.rfft2(fy, norm="forward") * self.perp_y
        p = P[..., self.pos[0], self.pos[1]]
        s = np.where(self.flip, -np.conj(p), p)
        return -TWO_SQRT2_PI * s.imag, TWO_SQRT2_PI * s.real

    def advection(self, a, b):
        """Coefficients of ``B(u, u) = Pi(omega * (-u_y, u_x))``."""
        U = self.scalar_spectrum(a, b)[..., None, :, :]
        g = sfft.irfft2(U * self._synth, s=(self.n, self.n), norm="forward")
        ux, uy, w = g[..., 0, :, :], g[..., 1, :, :], g[..., 2, :, :]
        F = sfft.rfft2(np.stack([-w * uy, w * ux], axis=-3), norm="forward")
        p = (F[..., 0, :, :] * self.perp_x + F[..., 1, :, :] * self.perp_y)[..., self.pos[0], self.pos[1]]
        s = np.where(self.flip, -np.conj(p), p)
        return -TWO_SQRT2_PI * s.imag, TWO_SQRT2_PI * s.real


def bilinear_term(u, v, dealias="two_thirds"):
    """``Pi(u . grad v)`` in conservative form ``div(u (x) v)`` (valid as ``div u = 0``)."""
    if u.N != v.N:
        raise ValueError(f"truncation mismatch: {u.N} vs {v.N}")
    ops = SpectralOps(u.N, dealias)
    ux, uy = ops.to_grid(ops.scalar_spectrum(u.sin, u.cos))
    vx, vy = ops.to_grid(ops.scalar_spectrum(v.sin, v.cos))
    ik1, ik2 = 1j * ops.k1, 1j * ops.k2
    n = (ops.n, ops.n)

    def div(px, py):
        return sfft.irfft2(ik1 * sfft.rfft2(px, norm="forward") + ik2 * sfft.rfft2(py, norm="forward"),
                           s=n, norm="forward")

    a, b = ops.project(div(ux * vx, uy * vx), div(ux * vy, uy * vy))
    return SpectralVelocity(u.N, a, b)


# -- forcing ------------------------------------------------------------------

@dataclass(eq=False)
class ForcingPath:
    """Per-mode increments on the solver grid.

    ``increments`` has shape ``(..., n_steps, len(modes))``; ``modes`` lists
    the sin/cos eigenfunctions attached to the half-lattice part of ``K``.
    """

    K: ModeSet
    increments: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=float)
        if self.increments.shape[-1] != len(self.modes):
            raise ValueError(f"expected {len(self.modes)} forced modes, got {self.increments.shape[-1]}")

    @property
    def modes(self):
        return self.K.forced_modes()

    @property
    def n_steps(self):
        return self.increments.shape[-2]

    @property
    def batch_shape(self):
        return self.increments.shape[:-2]

    def slice(self, start, stop=None):
        return ForcingPath(self.K, self.increments[..., start:stop, :], dict(self.source))

    def member(self, i):
        return ForcingPath(self.K, self.increments[i], dict(self.source))

    def targets(self, N):
        """Indices ``(parity_is_cos, site_index)`` of the forced modes in truncation ``N``."""
        sites = half_lattice(N)
        lookup = {tuple(p): i for i, p in enumerate(sites.tolist())}
        idx, cos = [], []
        for m in self.modes:
            if m.j not in lookup:
                raise ValueError(f"forced mode {m.j} outside truncation N={N}")
            idx.append(lookup[m.j])
            cos.append(m.parity == COS)
        return np.array(cos), np.array(idx, dtype=int)


def zero_forcing(K, config, batch=()):
    n = len(K.forced_modes())
    return ForcingPath(K, np.zeros(tuple(batch) + (config.n_steps, n)), {"kind": "zero"})


def levy_jumps_on_grid(spec, eps, seed, config):
    """Exact large jumps of one mode process summed into the grid cells."""
    jumps = sample_large_jumps(spec, eps, seed, horizon=config.T)
    cells = np.minimum((jumps.times / config.dt).astype(int), config.n_steps - 1)
    return np.bincount(cells, weights=jumps.sizes, minlength=config.n_steps)


def levy_forcing(K, spec, eps, config, seed, members=None, scale=1.0):
    """Independent truncated Levy processes on every forced mode.

    Mode ``q`` of member ``i`` uses ``member_seed(member_seed(seed, i), q)``;
    ``members=None`` gives a single path seeded by ``member_seed(seed, q)``.
    """
    modes = K.forced_modes()

    def one(ss):
        return np.stack([levy_jumps_on_grid(spec, eps, member_seed(ss, q), config)
                         for q in range(len(modes))], axis=-1)

    if members is None:
        inc = one(seed)
    else:
        inc = np.stack([one(member_seed(seed, i)) for i in members])
    return ForcingPath(K, scale * inc, {"kind": "levy", **spec.to_dict(), "eps": eps, "scale": scale})


def fbm_forcing(K, hurst, config, seed, members=None, scale=1.0):
    """Independent fBm increments on every forced mode (grid padded to a power of two)."""
    from .fbm_noise import fbm_increments_on_grid

    hurst = getattr(hurst, "hurst", hurst)
    n_modes = len(K.forced_modes())
    n_pad = 1 << max(config.n_steps - 1, 1).bit_length()

    def one(ss):
        X = fbm_increments_on_grid(hurst, n_pad, ss, dt=config.dt, n_paths=n_modes)
        return X[:, : config.n_steps].T

    if members is None:
        inc = one(seed)
    else:
        inc = np.stack([one(member_seed(seed, i)) for i in members])
    return ForcingPath(K, scale * inc, {"kind": "fbm", "hurst": float(hurst), "scale": scale})


def control_forcing(K, v, config):
    """Deterministic control ``v`` in ``L^2(0, T; H_d)``.

    ``v`` is an array ``(n_steps, n_forced)`` of values at the left grid
    points or a callable ``t -> array(n_forced)``; increments are ``v dt``.
    """
    if callable(v):
        v = np.stack([np.asarray(v(t), dtype=float) for t in config.times[:-1]])
    v = np.asarray(v, dtype=float)
    if v.shape[-2] != config.n_steps:
        raise ValueError(f"control needs {config.n_steps} time samples, got {v.shape[-2]}")
    return ForcingPath(K, v * config.dt, {"kind": "control"})


# -- time stepping ------------------------------------------------------------

def _decay(config, dt):
    eig = SpectralOps(config.N, config.dealias).eig
    if config.scheme == "integrating_factor_euler":
        return np.exp(-config.kappa * eig * dt)
    return 1.0 / (1.0 + config.kappa * eig * dt)


def _raw_step(ops, a, b, dt, factor, dZa, dZb, scheme, nonlinear=True):
    if nonlinear:
        Ba, Bb = ops.advection(a, b)
        a, b = a - dt * Ba, b - dt * Bb
    if scheme == "integrating_factor_euler":
        return factor * a + dZa, factor * b + dZb
    return factor * (a + dZa), factor * (b + dZb)


def _scatter(increments, targets, shape):
    cos, idx = targets
    dZa = np.zeros(shape)
    dZb = np.zeros(shape)
    if increments is not None:
        dZa[..., idx[~cos]] = increments[..., ~cos]
        dZb[..., idx[cos]] = increments[..., cos]
    return dZa, dZb


def step(state, config, dZ=None, forcing_modes=None, step_index=0, nonlinear=True):
    """One step of the configured scheme.

    ``dZ`` holds increments for the modes of ``forcing_modes`` (a
    :class:`ModeSet`); both may be omitted for the unforced step.
    """
    ops = SpectralOps(config.N, config.dealias)
    factor = _decay(config, config.dt)
    if dZ is not None:
        targets = ForcingPath(forcing_modes, np.zeros((1, len(forcing_modes.forced_modes())))).targets(config.N)
        dZa, dZb = _scatter(np.asarray(dZ, dtype=float), targets, state.sin.shape)
    else:
        dZa = dZb = 0.0
    a, b = _raw_step(ops, state.sin, state.cos, config.dt, factor, dZa, dZb, config.scheme, nonlinear)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise SolverDivergence(step_index)
    return SpectralVelocity(config.N, a, b)


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    snapshot_times: np.ndarray
    snapshots: list
    energy: np.ndarray
    enstrophy: np.ndarray
    final: SpectralVelocity
    diverged: np.ndarray = None
    config: SolverConfig = None

    def to_ndjson(self, member=None):
        """One line per (snapshot, mode): ``{t, mode: [j1, j2, parity], value}``."""
        out = io.StringIO()
        for t, snap in zip(self.snapshot_times, self.snapshots):
            if member is not None:
                snap = SpectralVelocity(snap.N, snap.sin[member], snap.cos[member])
            for m in snap.modes():
                out.write(json.dumps({"t": float(t), "mode": [m.j1, m.j2, m.parity],
                                      "value": float(snap[m])}) + "\n")
        return out.getvalue()

    def diagnostics_csv(self, member=None):
        e, z = self.energy, self.enstrophy
        if e.ndim > 1:
            e, z = e[member or 0], z[member or 0]
        rows = "".join(f"{float(t)!r},{float(a)!r},{float(b)!r}\n" for t, a, b in zip(self.times, e, z))
        return "t,energy,enstrophy\n" + rows

    def to_binary(self):
        """Little-endian: magic ``b'NSE1'``, ``<iii`` (N, n_snapshots, n_sites), then
        ``<f8`` snapshot times, then per snapshot the sin block and the cos block
        (``<f8``, site order of ``half_lattice(N)``).  Unbatched records only."""
        n_sites = len(half_lattice(self.final.N))
        if self.final.sin.ndim != 1:
            raise ValueError("binary export supports single trajectories")
        head = b"NSE1" + struct.pack("<iii", self.final.N, len(self.snapshots), n_sites)
        body = [np.asarray(self.snapshot_times, dtype="<f8").tobytes()]
        for s in self.snapshots:
            body += [s.sin.astype("<f8").tobytes(), s.cos.astype("<f8").tobytes()]
        return head + b"".join(body)

    @staticmethod
    def from_binary(blob):
        if blob[:4] != b"NSE1":
            raise ValueError("not a trajectory blob")
        N, n_snap, n_sites = struct.unpack("<iii", blob[4:16])
        data = np.frombuffer(blob[16:], dtype="<f8")
        times = data[:n_snap]
        rest = data[n_snap:].reshape(n_snap, 2, n_sites)
        return times, [SpectralVelocity(N, r[0].copy(), r[1].copy()) for r in rest]


def solve(u0, forcing, config, snapshot_every=None, on_divergence="raise", nonlinear=True):
    """Integrate from ``u0`` over ``config.n_steps`` steps with the given forcing.

    Batched forcing (leading axis) runs an ensemble; ``u0`` is broadcast.
    With ``on_divergence='flag'`` non-finite members are zeroed, marked in
    ``diverged`` and the run continues.
    """
    if u0.N != config.N:
        raise ValueError(f"initial datum truncation {u0.N} != config N {config.N}")
    if forcing is not None and forcing.n_steps != config.n_steps:
        raise ValueError(f"forcing has {forcing.n_steps} steps, config needs {config.n_steps}")
    ops = SpectralOps(config.N, config.dealias)
    factor = _decay(config, config.dt)
    batch = np.broadcast_shapes(u0.sin.shape[:-1], forcing.batch_shape if forcing is not None else ())
    shape = batch + (len(ops.sites),)
    a = np.broadcast_to(u0.sin, shape).copy()
    b = np.broadcast_to(u0.cos, shape).copy()
    targets = forcing.targets(config.N) if forcing is not None else None
    diverged = np.zeros(batch, dtype=bool)
    energy = np.empty(batch + (config.n_steps + 1,))
    enstrophy = np.empty_like(energy)
    snaps, snap_t = [], []

    def record(i):
        sq = a * a + b * b
        energy[..., i] = sq.sum(axis=-1)
        enstrophy[..., i] = (sq * ops.eig).sum(axis=-1)
        if snapshot_every and i % snapshot_every == 0:
            snaps.append(SpectralVelocity(config.N, a.copy(), b.copy()))
            snap_t.append(i * config.dt)

    record(0)
    # non-finite states are detected explicitly; silence the intermediate overflow warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(config.n_steps):
            if forcing is not None:
                dZa, dZb = _scatter(forcing.increments[..., i, :], targets, shape)
            else:
                dZa = dZb = 0.0
            a, b = _raw_step(ops, a, b, config.dt, factor, dZa, dZb, config.scheme, nonlinear)
            bad = ~(np.isfinite(a).all(axis=-1) & np.isfinite(b).all(axis=-1))
            if bad.any():
                if on_divergence == "raise":
                    raise SolverDivergence(i, np.flatnonzero(bad).tolist() if bad.ndim else None)
                diverged |= bad
                a[bad] = 0.0
                b[bad] = 0.0
            record(i + 1)
    final = SpectralVelocity(config.N, a, b)
    return TrajectoryRecord(config.times, np.array(snap_t), snaps, energy, enstrophy, final,
                            diverged, config)


def controlled_solve(u0, v, config, K):
    """The solution operator ``R_T(u0, v)``: final state under deterministic control ``v``."""
    return solve(u0, control_forcing(K, v, config), config).final


def single_mode(N, mode, value=1.0):
    return SpectralVelocity.from_modes(N, {mode: value})


__all__ = [
    "SolverConfig", "SolverDivergence", "SpectralOps", "bilinear_term", "ForcingPath", "zero_forcing",
    "levy_forcing", "fbm_forcing", "control_forcing", "step", "solve", "controlled_solve",
    "TrajectoryRecord", "single_mode", "ModeIndex", "SIN", "COS", "LevyMeasureSpec",
]

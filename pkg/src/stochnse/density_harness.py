"""Monte Carlo checks for the law of ``pi_F u(T, u0)``.

Absolute continuity cannot be verified from finitely many samples; it is
operationalized as *no atoms* (no repeated values and no excess of
near-coincident pairs) together with a stable kernel density estimate.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sstats
from scipy.spatial import cKDTree

from .fbm_noise import FbmSpec, sample_coefficient_batch
from .levy_noise import JumpSample, LevyMeasureSpec, field_from_jumps, sample_large_jumps
from .nse_solver import SolverConfig, fbm_forcing, levy_forcing, solve, zero_forcing
from .stats import member_seed, rng_for
from .torus_spectral import SIN, STANDARD_GENERATOR, ModeIndex, ModeSet, SpectralVelocity
from .wavelet_basis import haar_scaling_coefficients, level_slice

MAX_EXCLUSION_RATE = 0.01


class EnsembleFailure(RuntimeError):
    """Too many diverged members."""


class DegenerateSampleError(ValueError):
    """A coordinate has zero variance; run :func:`atom_test` to inspect the atom."""


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionSubspace:
    modes: tuple

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("projection modes must be distinct")
        if any(m.is_constant for m in modes):
            raise ValueError("constant modes are not part of the state")
        object.__setattr__(self, "modes", modes)

    @property
    def dim(self):
        return len(self.modes)

    def check(self, N):
        for m in self.modes:
            if max(abs(m.j1), abs(m.j2)) > N:
                raise ValueError(f"mode {m.j} outside truncation N={N}")

    def project(self, u):
        """``(..., dim)`` array of coefficients of ``u`` on the modes."""
        return np.stack([u[m] for m in self.modes], axis=-1)

    def to_list(self):
        return [m.to_dict() for m in self.modes]


DEFAULT_F = ProjectionSubspace((ModeIndex(2, 1, SIN),))


@dataclass(frozen=True)
class ForcingSpec:
    """Noise law on the forced modes ``K``.

    ``kind`` is ``'levy'``, ``'fbm'`` or ``'none'``; ``scale`` multiplies
    every increment.
    """

    kind: str = "levy"
    K: ModeSet = STANDARD_GENERATOR
    alpha: float = 1.5
    amplitude: float = 1.0
    z_max: float = 1.0
    eps: float = 0.01
    hurst: float = 0.75
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("levy", "fbm", "none"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "levy":
            LevyMeasureSpec(self.alpha, self.amplitude, self.z_max)
            if not self.eps > 0:
                raise ValueError("eps must be positive")
        if self.kind == "fbm":
            FbmSpec(self.hurst)

    def build(self, config, seed, members):
        if self.kind == "levy":
            spec = LevyMeasureSpec(self.alpha, self.amplitude, self.z_max)
            return levy_forcing(self.K, spec, self.eps, config, seed, members=members, scale=self.scale)
        if self.kind == "fbm":
            return fbm_forcing(self.K, self.hurst, config, seed, members=members, scale=self.scale)
        return zero_forcing(self.K, config, batch=(len(members),))

    def to_dict(self):
        d = asdict(self)
        d["K"] = [list(p) for p in self.K.sorted()]
        return d


def config_hash(*parts):
    """sha256 over the canonical JSON of the given parts (arrays as lists)."""
    def enc(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, SpectralVelocity):
            return {"N": o.N, "sin": o.sin.tolist(), "cos": o.cos.tolist()}
        if hasattr(o, "to_dict"):
            return o.to_dict()
        if isinstance(o, ProjectionSubspace):
            return o.to_list()
        raise TypeError(type(o))
    blob = json.dumps(parts, default=enc, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- ensembles ----------------------------------------------------------------

@dataclass(eq=False)
class EnsembleSample:
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def to_csv(self):
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.provenance, sort_keys=True) + "\n")
        buf.write(",".join(f"x{i}" for i in range(self.dim)) + "\n")
        np.savetxt(buf, self.values, delimiter=",", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        first, _, rest = text.partition("\n")
        prov = json.loads(first[2:])
        vals = np.loadtxt(io.StringIO(rest), delimiter=",", skiprows=1, ndmin=2)
        return cls(vals, prov)


def run_ensemble(config, u0, F, M, base_seed, forcing=ForcingSpec(), chunk=100):
    """``M`` independent samples of ``pi_F u(T, u0)``.

    Member ``i`` draws its noise from ``member_seed(base_seed, i)``, so the
    result does not depend on ``chunk``.  Diverged members are dropped and
    counted; more than 1% diverged raises :class:`EnsembleFailure`.
    """
    if M < 100:
        raise ValueError("ensembles need M >= 100")
    F.check(config.N)
    out, dropped = [], []
    for start in range(0, M, chunk):
        members = range(start, min(start + chunk, M))
        path = forcing.build(config, base_seed, members)
        rec = solve(u0, path, config, on_divergence="flag")
        vals = F.project(rec.final)
        dropped += [start + i for i in np.flatnonzero(rec.diverged)]
        out.append(vals[~rec.diverged])
    values = np.concatenate(out)
    prov = {
        "config_hash": config_hash(config, forcing, u0, F),
        "seed": base_seed if isinstance(base_seed, int) else str(base_seed),
        "seed_range": [0, M],
        "excluded": len(dropped),
        "excluded_members": dropped,
        "solver": config.to_dict(),
        "forcing": forcing.to_dict(),
        "F": F.to_list(),
    }
    if len(dropped) > MAX_EXCLUSION_RATE * M:
        raise EnsembleFailure(f"{len(dropped)} of {M} members diverged")
    return EnsembleSample(values, prov)


# -- atoms --------------------------------------------------------------------

@dataclass
class AtomReport:
    M: int
    max_duplicate_mass: int
    nn_statistic: int
    nn_null_mean: float
    nn_pvalue: float
    level: float
    verdict: str

    @property
    def atom(self):
        return self.verdict == "atom detected"

    def to_dict(self):
        return asdict(self)


def _close_pairs(x, tau_rel):
    tree = cKDTree(x)
    med = np.median(tree.query(x, k=2)[0][:, 1])
    if med == 0:
        return len(x)
    return len(tree.query_pairs(tau_rel * med, output_type="ndarray"))


def atom_test(sample, level=0.01, min_samples=500, n_boot=100, tau_rel=1e-3, seed=0):
    """Atom diagnostics for a sample of shape ``(M, d)`` (or ``(M,)``).

    (a) ``max_duplicate_mass``: largest multiplicity of an exactly repeated
    row.  (b) ``nn_statistic``: number of unordered pairs (standardized
    coordinates) closer than ``tau_rel`` times the median nearest-neighbour
    distance; its null law is Poisson with mean estimated by a smoothed
    bootstrap (resampling plus Gaussian jitter at Silverman
    bandwidth, i.e. draws from a continuous law close to the sample's).
    An atom is reported if a row repeats or the Poisson upper tail p-value
    falls below ``level``.
    """
    x = sample.values if isinstance(sample, EnsembleSample) else np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    M, d = x.shape
    if M < min_samples:
        raise ValueError(f"atom_test needs at least {min_samples} samples, got {M}")
    _, counts = np.unique(x, axis=0, return_counts=True)
    mult = int(counts.max())
    sd = x.std(axis=0)
    if np.any(sd == 0):
        return AtomReport(M, mult, M, 0.0, 0.0, level, "atom detected")
    z = (x - x.mean(axis=0)) / sd
    stat = _close_pairs(z, tau_rel)
    h = (4.0 / ((d + 2) * M)) ** (1.0 / (d + 4))
    rng = rng_for(seed)
    boots = [_close_pairs(z[rng.integers(0, M, M)] + h * rng.standard_normal((M, d)), tau_rel)
             for _ in range(n_boot)]
    lam = max(float(np.mean(boots)), 1.0 / n_boot)
    p = float(sstats.poisson.sf(stat - 1, lam))
    verdict = "atom detected" if (mult >= 2 or p < level) else "no atoms"
    return AtomReport(M, mult, stat, lam, p, level, verdict)


# -- density estimates --------------------------------------------------------

@dataclass(eq=False)
class DensityEstimate:
    grids: list
    values: np.ndarray
    bandwidth: np.ndarray

    @property
    def cell_volume(self):
        return float(np.prod([g[1] - g[0] for g in self.grids]))

    def integral(self):
        return float(self.values.sum() * self.cell_volume)

    def to_csv(self):
        mesh = np.meshgrid(*self.grids, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        head = ",".join([f"x{i}" for i in range(len(self.grids))] + ["density"])
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack(cols), delimiter=",", fmt="%.10g", header=head, comments="")
        return buf.getvalue()


def silverman_bandwidth(x):
    """Per-coordinate rule-of-thumb bandwidth."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    M, d = x.shape
    sd = x.std(axis=0, ddof=1)
    if d == 1:
        iqr = np.subtract(*np.percentile(x[:, 0], [75, 25]))
        spread = min(sd[0], iqr / 1.34) if iqr > 0 else sd[0]
        return np.array([0.9 * spread * M ** -0.2])
    return sd * (4.0 / ((d + 2) * M)) ** (1.0 / (d + 4))


def density_grid(x, h, points_per_h=5, max_points=None):
    """Regular grids spanning the sample range plus three bandwidths."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    d = x.shape[1]
    if max_points is None:
        max_points = {1: 4096, 2: 256, 3: 64}[d]
    grids = []
    for i in range(d):
        lo, hi = x[:, i].min() - 3 * h[i], x[:, i].max() + 3 * h[i]
        n = int(np.ceil((hi - lo) / (h[i] / points_per_h))) + 1
        grids.append(np.linspace(lo, hi, min(max(n, 64), max_points)))
    return grids


def kde(sample, bandwidth="silverman", grids=None):
    """Gaussian product-kernel density estimate on a regular grid (``dim <= 3``)."""
    x = sample.values if isinstance(sample, EnsembleSample) else np.asarray(sample, dtype=float)
    x = x.reshape(len(x), -1)
    M, d = x.shape
    if d > 3:
        raise ValueError("gridded KDE supports at most three dimensions")
    if np.any(x.std(axis=0) == 0):
        raise DegenerateSampleError("zero variance in a coordinate; the sample has an atom (see atom_test)")
    if isinstance(bandwidth, str):
        if bandwidth != "silverman":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        h = silverman_bandwidth(x)
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,)).copy()
    if grids is None:
        grids = density_grid(x, h)
    # separable kernels: per-axis weight matrices, contracted over samples
    norm = 1.0 / (M * np.prod(h) * (2 * np.pi) ** (d / 2))
    kern = [np.exp(-0.5 * ((g[:, None] - x[None, :, i]) / h[i]) ** 2) for i, g in enumerate(grids)]
    if d == 1:
        vals = kern[0].sum(axis=1)
    elif d == 2:
        vals = kern[0] @ kern[1].T
    else:
        vals = np.einsum("am,bm,cm->abc", *kern)
    return DensityEstimate(grids, vals * norm, h)


def common_grids(samples, h):
    allx = np.concatenate([np.asarray(s).reshape(len(s), -1) for s in samples])
    return density_grid(allx, h)


def l1_distance(est_a, est_b):
    """``int |rho_a - rho_b|`` for estimates on identical grids."""
    if len(est_a.grids) != len(est_b.grids) or not all(
            np.array_equal(a, b) for a, b in zip(est_a.grids, est_b.grids)):
        raise ValueError("density estimates live on different grids")
    return float(np.abs(est_a.values - est_b.values).sum() * est_a.cell_volume)


def kde_l1(x, y, bandwidth):
    """L1 distance between the KDEs of two samples on a shared grid."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (x.shape[1],))
    g = common_grids([x, y], h)
    return l1_distance(kde(x, h, g), kde(y, h, g))


# -- continuity in the initial condition --------------------------------------

@dataclass
class ContinuityReport:
    deltas: list
    distances: list
    floor_distances: list
    noise_floor: float
    negative_deltas: list
    negative_distances: list
    bandwidth: float
    kendall_tau: float
    nonincreasing: bool
    above_floor: bool
    negative_control_decays: bool
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.nonincreasing and not self.negative_control_decays

    def records(self):
        recs = [dict(kind="continuity", delta=d, distance=v, **self.provenance)
                for d, v in zip(self.deltas, self.distances)]
        recs += [dict(kind="continuity_floor", distance=v, **self.provenance) for v in self.floor_distances]
        recs += [dict(kind="continuity_negative", delta=d, distance=v, **self.provenance)
                 for d, v in zip(self.negative_deltas, self.negative_distances)]
        recs.append(dict(kind="continuity_verdict", noise_floor=self.noise_floor, bandwidth=self.bandwidth,
                         kendall_tau=self.kendall_tau, nonincreasing=self.nonincreasing,
                         above_floor=self.above_floor,
                         negative_control_decays=self.negative_control_decays, passed=self.passed,
                         **self.provenance))
        return recs

    def to_ndjson(self):
        return "".join(json.dumps(r) + "\n" for r in self.records())


def continuity_from_sampler(sampler, deltas, M, seed, bandwidth=None, n_floor=1,
                            negative_sampler=None, negative_deltas=(0.125, 0.0)):
    """Continuity check for a generic ensemble generator.

    ``sampler(delta, stream_seed, M)`` returns ``M`` samples of the law at
    ``u0 + delta w``.  The reference uses stream 0; every perturbed ensemble
    (and ``delta = 0``) shares stream 1, so distances differ only through
    ``delta``.  Streams ``2 .. n_floor + 1`` supply further same-law
    ensembles; all pairwise distances among same-law ensembles form the
    noise floor.  ``negative_sampler`` has the same signature and draws
    from a different law; its distances must stay above the floor.
    """
    streams = [member_seed(seed, i) for i in range(n_floor + 3)]
    ref = np.asarray(sampler(0.0, streams[0], M))
    if bandwidth is None:
        bandwidth = float(silverman_bandwidth(ref)[0])
    deltas = sorted(set(float(d) for d in deltas) | {0.0}, reverse=True)
    perturbed = {d: np.asarray(sampler(d, streams[1], M)) for d in deltas}
    same_law = [ref, perturbed[0.0]] + [np.asarray(sampler(0.0, streams[2 + i], M)) for i in range(n_floor)]
    floor = [kde_l1(same_law[i], same_law[k], bandwidth)
             for i in range(len(same_law)) for k in range(i + 1, len(same_law))]
    dist = [kde_l1(ref, perturbed[d], bandwidth) for d in deltas]
    noise_floor = float(max(floor))
    # nonincreasing up to the Monte Carlo floor
    noninc = all(dist[i + 1] <= dist[i] + noise_floor for i in range(len(dist) - 1))
    # largest perturbation separated from the floor: the trend is not flat noise
    above = dist[0] > noise_floor
    tau = float(sstats.kendalltau(deltas, dist).statistic) if len(deltas) > 2 else float("nan")
    neg_d, neg = [], []
    if negative_sampler is not None:
        neg_d = [float(d) for d in negative_deltas]
        neg = [kde_l1(ref, np.asarray(negative_sampler(d, streams[1], M)), bandwidth) for d in neg_d]
    neg_decays = bool(neg) and min(neg) <= 2 * noise_floor
    return ContinuityReport(deltas, dist, floor, noise_floor, neg_d, neg, bandwidth, tau,
                            noninc, above, neg_decays)


def continuity_in_initial_condition(config, u0, w, F, M, seed, forcing=ForcingSpec(),
                                    deltas=(0.5, 0.25, 0.125), bandwidth=None, n_floor=1,
                                    negative_forcing=None, negative_deltas=(0.125, 0.0)):
    """L1 distances between KDEs of ``pi_F u(T, u0)`` and ``pi_F u(T, u0 + delta w)``.

    ``w`` is normalized to unit L2 norm.  ``negative_forcing`` (a different
    noise law) supplies the planted-discontinuity control.
    """
    if F.dim != 1:
        raise ValueError("continuity check is implemented for dim F = 1")
    w = w * (1.0 / np.sqrt(w.energy()))

    def make(fspec):
        def sampler(delta, ss, m):
            return run_ensemble(config, u0 + w * delta, F, m, ss, fspec).values[:, 0]
        return sampler

    rep = continuity_from_sampler(make(forcing), deltas, M, seed, bandwidth, n_floor,
                                  make(negative_forcing) if negative_forcing is not None else None,
                                  negative_deltas)
    rep.provenance = {"config_hash": config_hash(config, forcing, u0, w, F), "seed": seed, "M": M}
    return rep


# -- conditional kernels of the noise -----------------------------------------

@dataclass(frozen=True)
class DiscreteJumpSpec:
    """Compound Poisson noise with jumps of size exactly +-``size`` (rate ``rate``)."""

    rate: float = 40.0
    size: float = 1.0

    def to_dict(self):
        return asdict(self)


def noise_coefficients(source, n, M, seed):
    """``(M, 2**(n+1))`` pyramid-layout Haar coefficients of the noise on [0, 1]."""
    if isinstance(source, FbmSpec):
        return sample_coefficient_batch(source, n, M, seed)
    out = np.empty((M, 1 << (n + 1)))
    if isinstance(source, tuple):
        spec, eps = source
        for i in range(M):
            out[i] = field_from_jumps(sample_large_jumps(spec, eps, member_seed(seed, i)), n).values
        return out
    if isinstance(source, DiscreteJumpSpec):
        for i in range(M):
            rng = rng_for(member_seed(seed, i))
            k = rng.poisson(source.rate)
            t = rng.random(k)
            y = np.where(rng.random(k) < 0.5, -source.size, source.size)
            out[i] = field_from_jumps(JumpSample(t, y, source.size / 2), n).values
        return out
    raise TypeError("source must be FbmSpec, (LevyMeasureSpec, eps) or DiscreteJumpSpec")


@dataclass
class CellResult:
    k: int
    cell: int
    lo: float
    hi: float
    count: int
    report: AtomReport = None

    def to_dict(self):
        d = {"k": self.k, "cell": self.cell, "lo": self.lo, "hi": self.hi, "count": self.count,
             "skipped": self.report is None}
        if self.report is not None:
            d.update(self.report.to_dict())
        return d


@dataclass
class ConditionalProbeReport:
    level: int
    M: int
    test_level: float
    cells: list
    source: dict

    @property
    def tested(self):
        return [c for c in self.cells if c.report is not None]

    @property
    def skipped(self):
        return [c for c in self.cells if c.report is None]

    @property
    def atoms_detected(self):
        return sum(c.report.atom for c in self.tested)

    def to_ndjson(self):
        lines = [json.dumps({"kind": "probe_cell", "n": self.level, **c.to_dict()}) for c in self.cells]
        lines.append(json.dumps({"kind": "probe_summary", "n": self.level, "M": self.M,
                                 "tested": len(self.tested), "skipped": len(self.skipped),
                                 "atoms_detected": self.atoms_detected, "level": self.test_level,
                                 "source": self.source}))
        return "\n".join(lines) + "\n"


def conditional_kernel_probe(source, n, M, seed, n_cells=None, min_cell=200, level=0.01):
    """Atom tests for ``zeta_{n,k}`` given ``gamma_{n,k} = <xi, phi_{n,k}>`` in quantile cells.

    For every shift ``k`` the coarse coefficient ``gamma_{n,k}`` is binned
    into ``n_cells`` equal-count cells (default ``M // (2 min_cell)``);
    cells with at least ``min_cell`` members are tested, the rest skipped.
    The per-cell level is Bonferroni-corrected over all tested cells.
    """
    if not 0 <= n <= 4:
        raise ValueError("probe levels are limited to n <= 4")
    X = noise_coefficients(source, n, M, seed)
    gamma = haar_scaling_coefficients(X, n)
    zeta = X[:, level_slice(n)]
    if n_cells is None:
        n_cells = max(1, M // (2 * min_cell))
    cells = []
    for k in range(1 << n):
        edges = np.quantile(gamma[:, k], np.linspace(0, 1, n_cells + 1))
        lab = np.clip(np.searchsorted(edges, gamma[:, k], side="right") - 1, 0, n_cells - 1)
        for c in range(n_cells):
            sel = lab == c
            cells.append((k, c, float(edges[c]), float(edges[c + 1]), sel))
    n_tests = max(1, sum(int(s.sum()) >= min_cell for *_, s in cells))
    out = []
    for k, c, lo, hi, sel in cells:
        cnt = int(sel.sum())
        rep = None
        if cnt >= min_cell:
            rep = atom_test(zeta[sel, k], level=level / n_tests, min_samples=min_cell,
                            seed=member_seed(seed, 10_000 + len(out)))
        out.append(CellResult(k, c, lo, hi, cnt, rep))
    if isinstance(source, FbmSpec):
        src = {"kind": "fbm", "hurst": source.hurst}
    elif isinstance(source, tuple):
        src = {"kind": "levy", **source[0].to_dict(), "eps": source[1]}
    else:
        src = {"kind": "discrete", **source.to_dict()}
    return ConditionalProbeReport(n, M, level, out, src)

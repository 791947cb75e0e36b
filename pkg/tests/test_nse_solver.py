import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from oracles import dense_bilinear
from stochnse.fbm_noise import FbmSpec
from stochnse.levy_noise import LevyMeasureSpec
from stochnse.nse_solver import (
    ForcingPath,
    SolverConfig,
    SolverDivergence,
    SpectralOps,
    TrajectoryRecord,
    bilinear_term,
    control_forcing,
    controlled_solve,
    fbm_forcing,
    levy_forcing,
    single_mode,
    solve,
    step,
    zero_forcing,
)
from stochnse.stats import member_seed
from stochnse.torus_spectral import COS, SIN, STANDARD_GENERATOR, ModeIndex, SpectralVelocity, half_lattice


def _random_field(N, seed, decay=1.0):
    rng = np.random.default_rng(seed)
    n = len(half_lattice(N))
    w = 1.0 / (1.0 + (half_lattice(N) ** 2).sum(axis=1)) ** decay
    return SpectralVelocity(N, rng.normal(size=n) * w, rng.normal(size=n) * w)


@pytest.mark.parametrize("seed", range(3))
def test_bilinear_matches_dense_convolution(seed):
    u, v = _random_field(4, seed), _random_field(4, seed + 100)
    a, b = dense_bilinear(u, v)
    B = bilinear_term(u, v)
    scale = np.abs(np.concatenate([a, b])).max()
    np.testing.assert_allclose(B.sin, a, atol=1e-12 * scale)
    np.testing.assert_allclose(B.cos, b, atol=1e-12 * scale)


def test_vorticity_advection_matches_conservative_form():
    u = _random_field(6, 7)
    ops = SpectralOps(6)
    a, b = ops.advection(u.sin, u.cos)
    B = bilinear_term(u, u)
    np.testing.assert_allclose(a, B.sin, atol=1e-12)
    np.testing.assert_allclose(b, B.cos, atol=1e-12)


def test_antisymmetry_on_random_pairs():
    worst = 0.0
    for s in range(100):
        u, v = _random_field(5, 2 * s), _random_field(5, 2 * s + 1)
        B = bilinear_term(u, v)
        worst = max(worst, abs(B.inner(v)) / (np.sqrt(B.energy() * v.energy()) + 1e-300))
    assert worst < 1e-12


@given(st.integers(1, 5), st.integers(-5, 5), st.sampled_from([SIN, COS]), st.floats(-3, 3))
def test_single_mode_is_steady_for_euler(j1, j2, par, c):
    u = single_mode(5, ModeIndex(j1, j2, par), c)
    assert np.abs(bilinear_term(u, u).sin).max() < 1e-12
    assert np.abs(bilinear_term(u, u).cos).max() < 1e-12


def test_exact_linear_decay():
    cfg = SolverConfig(0.1, 8, 1e-3, 0.2)
    u0 = _random_field(8, 1)
    out = solve(u0, None, cfg, nonlinear=False).final
    f = np.exp(-0.1 * u0.eigenvalues * 0.2)
    np.testing.assert_allclose(out.sin, f * u0.sin, rtol=1e-12)
    mode = ModeIndex(2, 1, COS)
    fin = solve(single_mode(8, mode, 2.0), None, cfg).final
    assert fin[mode] == pytest.approx(2.0 * np.exp(-0.1 * 5 * 0.2), rel=1e-12)


def test_energy_balance_defect_is_first_order():
    u0 = _random_field(8, 3) * 3.0
    defects = []
    for dt in (2e-3, 1e-3, 5e-4):
        cfg = SolverConfig(0.1, 8, dt, 0.2)
        rec = solve(u0, None, cfg)
        dissip = 2 * 0.1 * integrate.trapezoid(rec.enstrophy, rec.times)
        defects.append(abs(rec.energy[-1] - rec.energy[0] + dissip))
    r1, r2 = defects[0] / defects[1], defects[1] / defects[2]
    assert 1.7 < r1 < 2.3 and 1.7 < r2 < 2.3


def test_restart_is_bitwise():
    cfg = SolverConfig(0.1, 6, 1e-3, 0.1)
    half = SolverConfig(0.1, 6, 1e-3, 0.05)
    forcing = levy_forcing(STANDARD_GENERATOR, LevyMeasureSpec(1.5, 1, 1), 0.05, cfg, 4)
    full = solve(_random_field(6, 2), forcing, cfg).final
    mid = solve(_random_field(6, 2), forcing.slice(0, 50), half).final
    end = solve(mid, forcing.slice(50), half).final
    assert np.array_equal(full.sin, end.sin) and np.array_equal(full.cos, end.cos)


def test_step_matches_solve():
    cfg = SolverConfig(0.1, 6, 1e-3, 0.002)
    forcing = levy_forcing(STANDARD_GENERATOR, LevyMeasureSpec(1.5, 1, 1), 0.01, cfg, 9)
    u = _random_field(6, 5)
    for i in range(2):
        u = step(u, cfg, forcing.increments[i], STANDARD_GENERATOR, i)
    ref = solve(_random_field(6, 5), forcing, cfg).final
    np.testing.assert_array_equal(u.sin, ref.sin)


def test_batch_equals_single_members():
    cfg = SolverConfig(0.1, 6, 1e-3, 0.05)
    forcing = levy_forcing(STANDARD_GENERATOR, LevyMeasureSpec(1.5, 1, 1), 0.05, cfg, 4, members=range(3), scale=2)
    u0 = _random_field(6, 2)
    batch = solve(u0, forcing, cfg).final
    for i in range(3):
        single = levy_forcing(STANDARD_GENERATOR, LevyMeasureSpec(1.5, 1, 1), 0.05, cfg, member_seed(4, i), scale=2)
        np.testing.assert_array_equal(single.increments, forcing.increments[i])
        np.testing.assert_allclose(solve(u0, single, cfg).final.sin, batch.sin[i], rtol=1e-13, atol=1e-15)


def test_galerkin_truncation_converges():
    cfg24 = SolverConfig(0.1, 24, 5e-4, 0.2)
    u0 = _random_field(16, 11, decay=2.0) * 2.0
    a = solve(u0, None, SolverConfig(0.1, 16, 5e-4, 0.2)).final
    b = solve(u0.embed(24), None, cfg24).final.restrict(16)
    assert np.sqrt((a - b).energy() / a.energy()) < 1e-6


def test_controlled_solve_is_nonlinear_and_spreads():
    cfg = SolverConfig(0.1, 8, 1e-3, 0.3)
    n = len(STANDARD_GENERATOR.forced_modes())
    u0 = SpectralVelocity.zeros(8)
    v1 = np.zeros((cfg.n_steps, n))
    v1[:, 0] = 5.0  # (0,1) sin
    v2 = np.zeros((cfg.n_steps, n))
    v2[:, 2] = 5.0  # (1,-1) sin; equal-norm pairs do not interact
    r = lambda v: controlled_solve(u0, v, cfg, STANDARD_GENERATOR)
    defect = r(v1 + v2) - r(v1) - r(v2)
    assert np.sqrt(defect.energy()) > 1e-4
    # energy leaves the forced modes through the nonlinearity
    forced = {m.j for m in STANDARD_GENERATOR.forced_modes()}
    out = r(v1 + v2)
    outside = [i for i, s in enumerate(out.sites.tolist()) if tuple(s) not in forced]
    assert np.abs(out.sin[outside]).max() + np.abs(out.cos[outside]).max() > 1e-4


def test_control_forcing_callable_and_length():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1)
    n = len(STANDARD_GENERATOR.forced_modes())
    f = control_forcing(STANDARD_GENERATOR, lambda t: np.full(n, t), cfg)
    assert f.increments.shape == (10, n)
    assert f.increments[3, 0] == pytest.approx(0.03 * 0.01)
    with pytest.raises(ValueError):
        control_forcing(STANDARD_GENERATOR, np.zeros((9, n)), cfg)


def test_fbm_forcing_shape_and_determinism():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1)
    f = fbm_forcing(STANDARD_GENERATOR, FbmSpec(0.75), cfg, 3, members=range(2))
    assert f.increments.shape == (2, 10, 8)
    g = fbm_forcing(STANDARD_GENERATOR, 0.75, cfg, 3, members=range(2))
    np.testing.assert_array_equal(f.increments, g.increments)


def test_divergence_raise_and_flag():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1)
    inc = np.zeros((2, 10, 8))
    inc[1, 3, 0] = np.inf
    forcing = ForcingPath(STANDARD_GENERATOR, inc)
    with pytest.raises(SolverDivergence) as err:
        solve(SpectralVelocity.zeros(4), forcing, cfg)
    assert err.value.step == 3 and err.value.members == [1]
    rec = solve(SpectralVelocity.zeros(4), forcing, cfg, on_divergence="flag")
    assert rec.diverged.tolist() == [False, True]


@pytest.mark.parametrize("kw", [dict(kappa=0), dict(N=0), dict(dt=0.3), dict(T=0.1005), dict(dealias="x"), dict(scheme="rk4")])
def test_config_validation(kw):
    base = dict(kappa=0.1, N=4, dt=1e-2, T=0.1)
    base.update(kw)
    with pytest.raises(ValueError):
        SolverConfig(**base)


def test_input_mismatches():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1)
    with pytest.raises(ValueError):
        solve(SpectralVelocity.zeros(5), None, cfg)
    with pytest.raises(ValueError):
        solve(SpectralVelocity.zeros(4), zero_forcing(STANDARD_GENERATOR, SolverConfig(0.1, 4, 1e-2, 0.2)), cfg)
    with pytest.raises(ValueError):
        bilinear_term(SpectralVelocity.zeros(4), SpectralVelocity.zeros(5))


def test_imex_scheme_runs_and_decays():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1, scheme="imex_euler")
    mode = ModeIndex(1, 0, SIN)
    fin = solve(single_mode(4, mode), None, cfg).final
    assert fin[mode] == pytest.approx((1 / (1 + 0.1 * 1e-2)) ** 10, rel=1e-12)


def test_binary_and_ndjson_round_trip():
    cfg = SolverConfig(0.1, 4, 1e-2, 0.1)
    rec = solve(_random_field(4, 8), None, cfg, snapshot_every=5)
    times, snaps = TrajectoryRecord.from_binary(rec.to_binary())
    np.testing.assert_array_equal(times, rec.snapshot_times)
    for a, b in zip(snaps, rec.snapshots):
        np.testing.assert_array_equal(a.sin, b.sin)
        np.testing.assert_array_equal(a.cos, b.cos)
    lines = [json.loads(x) for x in rec.to_ndjson().splitlines()]
    assert len(lines) == len(rec.snapshots) * 2 * len(half_lattice(4))
    first = lines[0]
    assert first["t"] == 0.0 and first["value"] == rec.snapshots[0][ModeIndex(*first["mode"])]
    csv = rec.diagnostics_csv().splitlines()
    assert csv[0] == "t,energy,enstrophy" and len(csv) == cfg.n_steps + 2
    with pytest.raises(ValueError):
        TrajectoryRecord.from_binary(b"XXXX")

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_closure
from stochnse.torus_spectral import (
    CONST_X,
    CONST_Y,
    COS,
    SIN,
    STANDARD_GENERATOR,
    ModeError,
    ModeIndex,
    ModeSet,
    SpectralVelocity,
    eigenfunction_eval,
    half_lattice,
    is_saturating_up_to,
    saturate_step,
    stokes_eigenvalue,
)

TEN_MODES = [ModeIndex(1, 0, SIN), ModeIndex(1, 0, COS), ModeIndex(0, 1, SIN), ModeIndex(1, -1, COS),
             ModeIndex(2, 1, SIN), ModeIndex(2, 1, COS), ModeIndex(1, 2, SIN), ModeIndex(3, -2, COS),
             ModeIndex(0, 0, CONST_X), ModeIndex(0, 0, CONST_Y)]


def _grid(n=32):
    # the trapezoid rule is exact for trigonometric polynomials of degree < n
    x = 2 * np.pi * np.arange(n) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.stack([X, Y], axis=-1), (2 * np.pi / n) ** 2


def test_gram_matrix_is_identity():
    pts, w = _grid()
    vals = [eigenfunction_eval(m, pts) for m in TEN_MODES]
    G = np.array([[np.sum(a * b) * w for b in vals] for a in vals])
    np.testing.assert_allclose(G, np.eye(len(TEN_MODES)), atol=1e-10)


@pytest.mark.parametrize("mode", TEN_MODES[:8])
def test_modes_are_divergence_free(mode):
    h = 1e-5
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 2 * np.pi, (20, 2))
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    div = ((eigenfunction_eval(mode, x + ex)[:, 0] - eigenfunction_eval(mode, x - ex)[:, 0])
           + (eigenfunction_eval(mode, x + ey)[:, 1] - eigenfunction_eval(mode, x - ey)[:, 1])) / (2 * h)
    assert np.abs(div).max() < 1e-8


@pytest.mark.parametrize("mode", TEN_MODES[:8])
def test_laplacian_eigenvalue(mode):
    h = 1e-3
    x = np.array([[0.3, 1.1], [2.0, 4.5]])
    lap = sum(eigenfunction_eval(mode, x + s * e) for s in (-1, 1) for e in (np.array([h, 0.0]), np.array([0.0, h])))
    lap = (lap - 4 * eigenfunction_eval(mode, x)) / h ** 2
    np.testing.assert_allclose(-lap, stokes_eigenvalue(mode) * eigenfunction_eval(mode, x), atol=1e-4)


def test_constant_modes_have_zero_eigenvalue():
    assert stokes_eigenvalue(ModeIndex(0, 0, CONST_X)) == 0.0
    assert stokes_eigenvalue((3, 4)) == 25.0


@pytest.mark.parametrize("args", [(0, 0, SIN), (-1, 0, SIN), (0, -2, COS), (1, 0, CONST_X), (1, 0, "tan")])
def test_invalid_modes(args):
    with pytest.raises(ModeError):
        ModeIndex(*args)


@given(st.integers(1, 8))
def test_half_lattice_counts_and_order(N):
    sites = half_lattice(N)
    assert len(sites) == ((2 * N + 1) ** 2 - 1) // 2
    full = {tuple(s) for s in sites} | {tuple(-s) for s in sites}
    assert len(full) == 2 * len(sites) and (0, 0) not in full
    n2 = (sites ** 2).sum(axis=1)
    assert np.all(np.diff(n2) >= 0)


def test_evaluate_matches_mode_sum():
    rng = np.random.default_rng(3)
    u = SpectralVelocity(3, rng.normal(size=24), rng.normal(size=24))
    x = rng.uniform(0, 2 * np.pi, (7, 2))
    direct = sum(u[m] * eigenfunction_eval(m, x) for m in u.modes())
    np.testing.assert_allclose(u.evaluate(x), direct, atol=1e-12)


def test_energy_and_enstrophy_by_quadrature():
    rng = np.random.default_rng(4)
    u = SpectralVelocity(3, rng.normal(size=24), rng.normal(size=24))
    pts, w = _grid()
    vals = u.evaluate(pts)
    assert u.energy() == pytest.approx(np.sum(vals ** 2) * w, rel=1e-12)
    assert u.enstrophy() >= u.energy()


def test_from_modes_and_indexing():
    u = SpectralVelocity.from_modes(4, {ModeIndex(2, 1, SIN): 1.5, ModeIndex(0, 3, COS): -2.0})
    assert u[ModeIndex(2, 1, SIN)] == 1.5 and u[ModeIndex(0, 3, COS)] == -2.0
    assert u[ModeIndex(2, 1, COS)] == 0.0
    with pytest.raises(ModeError):
        u[ModeIndex(5, 0, SIN)]


def test_restrict_embed_round_trip():
    rng = np.random.default_rng(5)
    u = SpectralVelocity(3, rng.normal(size=(2, 24)), rng.normal(size=(2, 24)))
    big = u.embed(6)
    assert big.sin.shape == (2, len(half_lattice(6)))
    back = big.restrict(3)
    np.testing.assert_array_equal(back.sin, u.sin)
    np.testing.assert_allclose(big.energy(), u.energy())
    with pytest.raises(ValueError):
        u.restrict(4)


def test_arithmetic_and_mismatch():
    a = SpectralVelocity.from_modes(2, {ModeIndex(1, 0, SIN): 1.0})
    b = SpectralVelocity.from_modes(2, {ModeIndex(1, 0, SIN): 2.0})
    assert (a + b)[ModeIndex(1, 0, SIN)] == 3.0
    assert (2 * a - b).energy() == 0.0
    assert a.inner(b) == 2.0
    with pytest.raises(ValueError):
        a + SpectralVelocity.zeros(3)


def test_standard_generator_saturates_radius_eight():
    rep = is_saturating_up_to(STANDARD_GENERATOR, 8)
    assert rep.covered and rep.iterations == 4 and not rep.missing
    assert [h["size"] for h in rep.history] == [9, 17, 45, 141, 525]


@pytest.mark.parametrize("gen,steps", [([(1, 0), (0, 1), (1, 1), (1, -1)], 3), ([(1, 0), (1, 2)], 3), ([(2, 1), (1, 3)], 2)])
def test_saturation_matches_brute_force(gen, steps):
    K = ModeSet.from_generators(gen)
    pts = set(K.members)
    ref, ref_sizes = brute_force_closure(pts, steps)
    for s in range(steps):
        K = saturate_step(K)
        assert len(K) == ref_sizes[s + 1]
    assert set(K.members) == ref


def test_collinear_generator_is_a_fixpoint():
    K = ModeSet.from_generators([(1, 0), (2, 0)])
    rep = is_saturating_up_to(K, 2)
    assert not rep.covered and rep.fixpoint and rep.iterations == 1
    assert (0, 1) in rep.missing


@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=1, max_size=4))
def test_saturation_is_monotone_and_symmetric(gen):
    K = ModeSet.from_generators(gen)
    K2 = saturate_step(K)
    assert K.members <= K2.members
    assert all((-a, -b) in K2 for a, b in K2.members)


def test_asymmetric_set_rejected():
    with pytest.raises(ModeError):
        ModeSet(frozenset({(0, 0), (1, 0)}))
    with pytest.raises(ModeError):
        ModeSet(frozenset({(1, 0), (-1, 0)}))


def test_mode_set_csv_round_trip_and_forced_modes():
    K = ModeSet.from_csv(STANDARD_GENERATOR.to_csv())
    assert K == STANDARD_GENERATOR
    assert len(K.forced_modes()) == 2 * len(K.half()) == 8
    assert K.radius() == 1


def test_saturation_report_ndjson():
    text = is_saturating_up_to(STANDARD_GENERATOR, 3).to_ndjson()
    assert text.count("\n") == len(text.strip().splitlines())
    assert '"covered": true' in text.splitlines()[-1]

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import haar_pieces, kernel_covariance_quad
from stochnse.fbm_noise import (
    CovarianceError,
    FbmSpec,
    LevelCovariance,
    besov_dichotomy_report,
    build_level_covariance,
    check_psd,
    covariance_entry,
    diagonal_variance_fit,
    fbm_increments_on_grid,
    fgn_autocovariance,
    joint_covariance,
    sample_coefficient_batch,
    sample_coefficients,
)
from stochnse.wavelet_basis import level_slice


def _random_tuples(n, seed=20):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        H = float(rng.uniform(0.55, 0.95))
        j, j2 = (int(v) for v in rng.integers(0, 5, 2))
        k = int(rng.integers(0, 2 ** j))
        l = int(rng.integers(0, 2 ** j2))
        out.append((H, j, k, j2, l))
    return out


@pytest.mark.parametrize("H,j,k,j2,l", _random_tuples(50))
def test_closed_form_matches_quadrature(H, j, k, j2, l):
    exact = covariance_entry(H, j, k, l, j2=j2)
    quad = kernel_covariance_quad(H, haar_pieces("wavelet", j, k), haar_pieces("wavelet", j2, l))
    assert exact == pytest.approx(quad, rel=1e-8, abs=1e-12)


def test_scaling_entries_match_quadrature():
    for H in (0.6, 0.8):
        q = kernel_covariance_quad(H, haar_pieces("scaling", 0, 0), haar_pieces("wavelet", 2, 1))
        assert covariance_entry(H, 0, 0, 1, j2=2, kind1="scaling") == pytest.approx(q, rel=1e-8)


def test_frozen_entries():
    # Var xi(psi_00) = 2**(2-2H) - 1
    assert covariance_entry(0.75, 0, 0, 0) == pytest.approx(0.41421356237309503, rel=1e-14)
    assert covariance_entry(0.75, 0, 0, 0, kind1="scaling", kind2="scaling") == pytest.approx(1.0, rel=1e-14)


@given(st.floats(0.51, 0.99), st.integers(0, 10))
def test_diagonal_self_similarity(H, j):
    k = (2 ** j) // 3
    expect = 2.0 ** (j * (1 - 2 * H)) * (2.0 ** (2 - 2 * H) - 1)
    assert covariance_entry(H, j, k, k) == pytest.approx(expect, rel=1e-10)


@given(st.floats(0.51, 0.99), st.integers(1, 6), st.data())
def test_stationarity_within_level(H, j, data):
    k = data.draw(st.integers(0, 2 ** j - 2))
    l = data.draw(st.integers(0, 2 ** j - 2))
    a = covariance_entry(H, j, k, l)
    b = covariance_entry(H, j, k + 1, l + 1)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-14)
    assert covariance_entry(H, j, k, l) == pytest.approx(covariance_entry(H, j, l, k), rel=1e-12)


@pytest.mark.parametrize("H", [0.55, 0.75, 0.9])
def test_diagonal_slopes_are_exact(H):
    spec = FbmSpec(H)
    assert diagonal_variance_fit(spec).slope == pytest.approx(1 - 2 * H, abs=1e-10)
    assert diagonal_variance_fit(spec, normalization="unit").slope == pytest.approx(-2 * H, abs=1e-10)


def test_near_white_limit_is_nearly_diagonal():
    C = build_level_covariance(FbmSpec(0.51, 4), 4).matrix
    off = np.abs(C - np.diag(np.diag(C))).max()
    assert off / np.diag(C).min() < 0.01


@pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
def test_joint_covariance_psd(H):
    C = joint_covariance(H, 7)
    assert check_psd(C) > -1e-10 * np.trace(C)
    assert not C.flags.writeable


def test_check_psd_raises():
    with pytest.raises(CovarianceError):
        check_psd(np.diag([1.0, -0.5]))


def test_level_block_matches_joint():
    spec = FbmSpec(0.7, 5)
    C = joint_covariance(0.7, 5)
    for j in range(6):
        np.testing.assert_allclose(build_level_covariance(spec, j).matrix, C[level_slice(j), level_slice(j)], rtol=1e-12)
    with pytest.raises(ValueError):
        build_level_covariance(spec, 6)


def test_level_csv_round_trip():
    lc = build_level_covariance(FbmSpec(0.8, 3), 3)
    back = LevelCovariance.from_csv(lc.to_csv())
    assert back.level == 3 and back.hurst == 0.8
    np.testing.assert_array_equal(back.matrix, lc.matrix)


@pytest.mark.parametrize("kw", [dict(hurst=0.5), dict(hurst=1.0), dict(hurst=0.7, max_level=-1)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        FbmSpec(**kw)


def test_besov_range_check():
    spec = FbmSpec(0.75)
    spec.check_besov_smoothness(-0.3)
    for s in (-0.5, -0.25, 0.0):
        with pytest.raises(ValueError):
            spec.check_besov_smoothness(s)


def test_sampled_variances_within_three_se():
    spec = FbmSpec(0.75, 5)
    X = sample_coefficient_batch(spec, 5, 4000, 3)
    C = joint_covariance(0.75, 5)
    for j in range(6):
        sl = level_slice(j)
        emp = (X[:, sl] ** 2).mean()
        target = np.diag(C)[sl].mean()
        # per-coordinate variance of x**2 is 2 sigma**4; coordinates are correlated, use the worst case
        se = np.sqrt(2) * target / np.sqrt(4000)
        assert abs(emp - target) < 3 * se


def test_sampled_marginals_gaussian():
    X = sample_coefficient_batch(FbmSpec(0.75, 4), 4, 2000, 8)
    sd = np.sqrt(np.diag(joint_covariance(0.75, 4)))
    cols = [0, 1, 2, 5, 12, 31]
    pvals = [stats.kstest(X[:, c] / sd[c], "norm").pvalue for c in cols]
    assert min(pvals) > 0.001 / len(cols)


def test_batch_members_match_single_draws():
    spec = FbmSpec(0.65, 3)
    from stochnse.stats import member_seed
    X = sample_coefficient_batch(spec, 3, 5, 11)
    for i in range(5):
        np.testing.assert_allclose(X[i], sample_coefficients(spec, 3, member_seed(11, i)).values, rtol=1e-12)


def test_fgn_autocovariance_white_at_half():
    np.testing.assert_allclose(fgn_autocovariance(0.5, 6), [1, 0, 0, 0, 0, 0], atol=1e-15)


def test_fgn_path_statistics():
    H = 0.75
    inc = fbm_increments_on_grid(H, 256, 4, n_paths=4000)
    B1 = inc.sum(axis=1)
    assert B1.var(ddof=1) == pytest.approx(1.0, abs=4 * np.sqrt(2 / 4000))
    paths = np.cumsum(inc, axis=1)
    idx = np.array([4, 16, 64, 256]) - 1
    t = (idx + 1) / 256
    slope = np.polyfit(np.log(t), np.log(paths[:, idx].var(axis=0)), 1)[0]
    assert slope == pytest.approx(2 * H, abs=0.05)


def test_fgn_grid_validation():
    with pytest.raises(ValueError):
        fbm_increments_on_grid(0.7, 100, 0)
    with pytest.raises(ValueError):
        fbm_increments_on_grid(1.2, 64, 0)


def test_besov_dichotomy_small_run():
    spec = FbmSpec(0.75, 7)
    lo = besov_dichotomy_report(spec, -0.4, 7, 600, 1)
    hi = besov_dichotomy_report(spec, -0.1, 7, 600, 1)
    assert lo.fit.slope < 0 < hi.fit.slope
    assert hi.growing
    recs = hi.records()
    assert recs[-1]["kind"] == "fbm_besov_fit"

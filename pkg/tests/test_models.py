import math

import numpy as np
import pytest
from scipy import special, stats

from statichedge.config import student_t_claim
from statichedge.errors import DomainError
from statichedge.models import (Empirical, GaussianClaims, MarketModel, PositivityWarning, ShiftedLognormal,
                                StandardNormal, build_asset, claim_expected_shortfall, claim_quantile,
                                driver_from_skew, exact_central_moments, expanded_central_moments, gaussian_claim,
                                lognormal_skew_for_shape, normalize_problem, univariate_model)

DRIVERS = [StandardNormal(), ShiftedLognormal(-0.3), ShiftedLognormal(0.5), ShiftedLognormal(-1.75)]


@pytest.mark.parametrize("drv", DRIVERS, ids=repr)
def test_driver_is_standardized(drv):
    assert drv.moment(1) == pytest.approx(0.0, abs=1e-12)
    assert drv.moment(2) == pytest.approx(1.0, abs=1e-10)
    assert drv.moment(3) == pytest.approx(drv.mu3, abs=1e-8)
    assert drv.moment(4) == pytest.approx(drv.mu4, rel=1e-8)
    assert drv.mu4 >= 1.0 + drv.mu3 ** 2


def test_empirical_driver_is_standardized(rng):
    drv = Empirical(rng.gamma(3.0, size=5000))
    samples = drv.sample(np.random.default_rng(1), 400_000)
    assert samples.mean() == pytest.approx(0.0, abs=0.01)
    assert samples.std() == pytest.approx(1.0, abs=0.01)
    assert drv.mu3 > 0


def test_lognormal_shape_and_skew_roundtrip():
    skew = lognormal_skew_for_shape(0.5)
    assert skew == pytest.approx(-1.7502, abs=1e-4)
    assert driver_from_skew(skew).shape == pytest.approx(0.5, rel=1e-10)
    assert isinstance(driver_from_skew(0.0), StandardNormal)


@pytest.mark.parametrize("kind", ["normal", "lognormal"])
@pytest.mark.parametrize("sigma", [0.0, 0.05, 0.2, 0.5])
@pytest.mark.parametrize("skew", [0.0, -0.3, -1.0])
def test_unit_mean(kind, sigma, skew):
    asset = build_asset(kind, sigma, driver_from_skew(skew))
    assert asset.raw_moment_m1(1) == pytest.approx(0.0, abs=1e-12)
    assert asset.central_moment(1) == pytest.approx(0.0, abs=1e-12)


def test_build_asset_examples():
    assert build_asset("lognormal", 0.0).variance == 0.0
    assert build_asset("lognormal", 0.25).variance == pytest.approx(math.expm1(0.0625), rel=1e-12)
    normal = build_asset("normal", 0.15)
    assert normal.variance == pytest.approx(0.0225, rel=1e-12)
    assert normal.central_moment(3) == pytest.approx(0.0, abs=1e-14)


def test_build_asset_errors():
    with pytest.raises(DomainError):
        build_asset("lognormal", 0.3, ShiftedLognormal(0.3))  # right tail too heavy for E[exp(sigma Y)]
    with pytest.raises(DomainError):
        build_asset("normal", -0.1)
    with pytest.raises(ValueError):
        build_asset("cauchy", 0.1)


def test_lognormal_variance_by_mc():
    asset = build_asset("lognormal", 0.25)
    rng = np.random.default_rng(3)
    x = asset.value(rng.standard_normal(2_000_000))
    assert x.mean() == pytest.approx(1.0, abs=4 * x.std() / math.sqrt(x.size))
    assert x.var() == pytest.approx(math.expm1(0.0625), rel=0.005)


def test_exact_central_moments_examples():
    assert exact_central_moments(build_asset("lognormal", 0.0)) == (0.0, 0.0, 0.0)
    m2, _, _ = exact_central_moments(build_asset("lognormal", 0.1))
    assert m2 == pytest.approx(math.expm1(0.01), rel=1e-12)
    drv = driver_from_skew(-0.3)
    s = 0.2
    got = exact_central_moments(build_asset("normal", s, drv))
    assert got == pytest.approx((s ** 2, s ** 3 * drv.mu3, s ** 4 * drv.mu4), rel=1e-10)
    with pytest.raises(DomainError):
        exact_central_moments(build_asset("lognormal", 0.1), upto=5)


def test_expanded_central_moments():
    assert expanded_central_moments(0.0, -0.3, 4.0) == (0.0, 0.0, 0.0)
    m2, m3, m4 = expanded_central_moments(0.1, 0.0, 3.0)
    assert m2 == pytest.approx(0.010050, abs=1e-12)
    assert m3 == pytest.approx(0.0003, abs=1e-15)
    assert m4 == pytest.approx(0.0003, abs=1e-15)


@pytest.mark.parametrize("skew", [0.0, -0.3, -1.0])
def test_expanded_moments_error_is_fifth_order(skew):
    drv = driver_from_skew(skew)
    ratios = []
    for s in (0.0125, 0.025, 0.05):
        exact = np.array(exact_central_moments(build_asset("lognormal", s, drv)))
        approx = np.array(expanded_central_moments(s, drv.mu3, drv.mu4))
        ratios.append(np.abs(exact - approx) / s ** 4)
    ratios = np.array(ratios)
    # the remainder is O(sigma^5): halving sigma at least roughly halves error / sigma^4
    assert np.all(ratios < 1.5)
    assert np.all(ratios[0] <= 0.6 * ratios[1]) and np.all(ratios[1] <= 0.6 * ratios[2])


def test_claim_quantile_examples():
    q = claim_quantile(gaussian_claim(0.388), 0.005)
    assert q == pytest.approx(0.388 * special.ndtri(0.995), abs=1e-10)
    assert q == pytest.approx(0.99942, abs=1e-5)
    assert claim_quantile(gaussian_claim(0.43), 0.01) == pytest.approx(1.0003, abs=1e-3)
    q2 = claim_quantile(GaussianClaims(np.eye(2)), 0.005)
    assert q2 == pytest.approx(math.sqrt(2) * special.ndtri(0.995), abs=1e-10)


def test_claim_quantile_hits_tail_probability():
    claims = student_t_claim(6.0, 0.3)
    q = claim_quantile(claims, 0.01)
    assert claims.agg_sf(q) == pytest.approx(0.01, abs=1e-12)
    assert q == pytest.approx(0.3 * stats.t.ppf(0.99, 6.0), rel=1e-9)
    with pytest.raises(DomainError):
        claim_quantile(claims, 1.5)


def test_gaussian_expected_shortfall():
    s = 0.388
    u = special.ndtri(0.995)
    es = claim_expected_shortfall(gaussian_claim(s), 0.005)
    assert es == pytest.approx(s * math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) / 0.005, rel=1e-9)


def test_student_t_derivatives_match_density():
    claims = student_t_claim(7.0, 0.5)
    y = np.linspace(-2, 2, 9)
    h = 1e-5
    for k in range(3):
        fd = (claims.agg_pdf_derivative(y + h, k) - claims.agg_pdf_derivative(y - h, k)) / (2 * h)
        np.testing.assert_allclose(claims.agg_pdf_derivative(y, k + 1), fd, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(claims.agg_pdf(y), stats.t.pdf(y / 0.5, 7.0) / 0.5, rtol=1e-12)


def test_gaussian_claims_joint_moments():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    claims = GaussianClaims(cov)
    assert claims.joint_raw_moment((1, 1)) == pytest.approx(0.5)
    assert claims.joint_raw_moment((2, 2)) == pytest.approx(2.0 * 1.0 + 2 * 0.25)
    assert claims.joint_raw_moment((3, 0)) == pytest.approx(0.0)
    assert claims.joint_raw_moment((4, 0)) == pytest.approx(3 * 4.0)


def test_gaussian_aggregate_partial_moments():
    s = 0.7
    claims = gaussian_claim(s)
    for y in (-0.5, 0.3, 1.4):
        for k in range(4):
            ref = stats.norm(scale=s).expect(lambda x: x ** k, lb=y)
            assert claims.agg_partial_moment(y, k) == pytest.approx(ref, rel=1e-9, abs=1e-13)


def test_density_claims_match_gaussian_aggregate():
    claims = GaussianClaims([[1.0, 0.3], [0.3, 0.5]])
    dens = claims.as_density_claims()
    for y in (-1.0, 0.5, 2.0):
        assert dens.agg_pdf(y) == pytest.approx(claims.agg_pdf(y), rel=1e-8)
        assert dens.agg_pdf_derivative(y, 1) == pytest.approx(claims.agg_pdf_derivative(y, 1), rel=1e-7)
        assert dens.agg_sf(y) == pytest.approx(claims.agg_sf(y), rel=1e-7)


def test_market_model_validation():
    a = build_asset("lognormal", 0.1)
    with pytest.raises(DomainError):
        MarketModel((a, a), gaussian_claim(1.0))
    with pytest.raises(DomainError):
        MarketModel((a, a), GaussianClaims(np.eye(2)), asset_corr=[[1.0, 1.5], [1.5, 1.0]])
    with pytest.warns(PositivityWarning):
        univariate_model(build_asset("normal", 0.15), gaussian_claim(1.0))


def test_market_model_covariance_against_sampling():
    assets = (build_asset("lognormal", 0.2, driver_from_skew(-0.3)), build_asset("lognormal", 0.3))
    model = MarketModel(assets, GaussianClaims(np.eye(2)), asset_corr=[[1.0, 0.6], [0.6, 1.0]])
    u = model.sample_assets(np.random.default_rng(5), 2_000_000)
    np.testing.assert_allclose(u.mean(axis=0), 0.0, atol=2e-3)
    np.testing.assert_allclose(np.cov(u.T), model.covariance, rtol=0.01)
    lead = model.leading_covariance
    assert lead[0, 0] == pytest.approx(0.04) and lead[1, 1] == pytest.approx(0.09)


def test_normalize_problem_examples():
    ident = normalize_problem([1.0], [0.0], 0.0)
    assert ident.map_phi([0.7]) == pytest.approx([0.7])
    assert ident.cash_offset == 0.0
    rep = normalize_problem([2.0], [3.0], 0.0)
    assert rep.map_phi([5.0]) == pytest.approx([4.0])
    assert rep.cash_offset == -6.0
    with pytest.raises(DomainError):
        normalize_problem([0.0], [1.0])


def test_normalize_roundtrip(rng):
    mx, ml = rng.uniform(0.5, 2.0, 3), rng.normal(size=3)
    rep = normalize_problem(mx, ml, 1.3)
    phi = rng.normal(size=3)
    np.testing.assert_allclose(rep.unmap_phi(rep.map_phi(phi)), phi, rtol=1e-14)
    assert rep.normalized_risk(rep.risk_from_normalized(0.42)) == pytest.approx(0.42)


def test_normalization_preserves_surplus_and_risk():
    """Raw surplus A0 + <X, phi - L> equals the normalized surplus minus the cash offset."""
    rng = np.random.default_rng(9)
    mx, ml, a0 = np.array([2.0]), np.array([3.0]), 0.5
    n = 400_000
    x = mx * np.exp(0.2 * rng.standard_normal((n, 1)) - 0.02)
    ell = ml + 0.4 * rng.standard_normal((n, 1))
    phi = np.array([4.0])
    raw = ((x - mx) * phi).sum(axis=1) + a0 - (x * ell).sum(axis=1)
    rep = normalize_problem(mx, ml, a0)
    xt, lt, pt = rep.map_assets(x), rep.map_claims(ell), rep.map_phi(phi)
    normalized = ((xt - 1) * pt).sum(axis=1) - (xt * lt).sum(axis=1)
    np.testing.assert_allclose(raw, normalized + rep.cash_offset, atol=1e-9)
    var_norm = -np.quantile(normalized, 0.005)
    var_raw = -np.quantile(raw, 0.005)
    assert var_raw == pytest.approx(rep.risk_from_normalized(var_norm), abs=1e-9)

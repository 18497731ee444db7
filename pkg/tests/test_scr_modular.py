import math

import numpy as np
import pytest
from scipy import special

from statichedge.errors import DomainError
from statichedge.expansions import phi_star_var2_multi
from statichedge.mc_oracle import McConfig, SurplusSimulation
from statichedge.models import GaussianClaims, MarketModel, build_asset, claim_quantile
from statichedge.scr_modular import (SOLVENCY_ALPHA, aggregate_sqrt, scr_comparison_report, scr_example_model,
                                     scr_integrated, scr_market)

U = special.ndtri(1 - SOLVENCY_ALPHA)


@pytest.fixture(scope="module")
def setup():
    model = scr_example_model(0.15)
    cfg = McConfig(n_samples=1_000_000, seed=5, n_chunks=16, alpha=SOLVENCY_ALPHA, jobs=1)
    return model, cfg, SurplusSimulation(model, cfg)


def test_aggregate_sqrt():
    assert aggregate_sqrt(1.0, 0.0) == 1.0
    assert aggregate_sqrt(0.0, 2.5) == 2.5
    assert aggregate_sqrt(3.0, 4.0) == 5.0
    with pytest.raises(DomainError):
        aggregate_sqrt(-1.0, 1.0)


def test_example_model_claim_module_is_one(setup):
    model, _, _ = setup
    assert claim_quantile(model.claims, SOLVENCY_ALPHA) == pytest.approx(1.0, abs=1e-12)
    assert model.assets[0].vol_kind.value == "normal"


def test_market_module_vanishes_at_reference(setup):
    model, cfg, sim = setup
    phi_star = float(phi_star_var2_multi(model, SOLVENCY_ALPHA).phi_star[0])
    assert scr_market(model, phi_star, "ENP", cfg, sim=sim) == 0.0
    assert scr_market(model, 0.0, "RP", cfg, sim=sim) == 0.0
    assert scr_market(model, phi_star, "ENP", cfg, sim=sim, literal=True) == pytest.approx(phi_star)
    assert scr_market(model, 0.5, "RP", cfg, sim=sim, literal=True) > 0.0
    with pytest.raises(DomainError):
        scr_market(model, 0.0, "XYZ", cfg, sim=sim)


def test_enp_market_module_normal_closed_form(setup):
    model, cfg, sim = setup
    phi_star = float(phi_star_var2_multi(model, SOLVENCY_ALPHA).phi_star[0])
    got = scr_market(model, 0.0, "ENP", cfg, phi_star, sim)
    assert got == pytest.approx(abs(phi_star) * 0.15 * U, rel=0.02)


def test_integrated_equals_claim_module_without_asset_risk():
    model = scr_example_model(0.0)
    cfg = McConfig(n_samples=400_000, seed=2, n_chunks=8, alpha=SOLVENCY_ALPHA, jobs=1)
    sim = SurplusSimulation(model, cfg)
    for phi in (0.0, 0.8, 2.0):
        est = scr_integrated(model, phi, cfg, sim)
        assert abs(est.value - 1.0) <= 3 * est.std_error


def test_report_shape_and_properties(setup):
    model, cfg, sim = setup
    phi_star = float(phi_star_var2_multi(model, SOLVENCY_ALPHA).phi_star[0])
    grid = np.concatenate([[0.0], np.linspace(phi_star - 0.5, phi_star + 0.5, 11), [3.0]])
    rep = scr_comparison_report(model, grid, cfg, phi_star, sim=sim)
    assert rep.scr_L == 1.0 and rep.phi_star == phi_star
    assert rep.scale == pytest.approx(1.0, abs=1e-12)
    assert rep.scr_integrated.shape == grid.shape
    # integrated SCR is smallest near the economic neutral position
    assert abs(grid[int(np.argmin(rep.scr_integrated))] - phi_star) <= 0.15
    # ENP-modular tracks the integrated SCR near phi*, and the gap grows away from it
    near = np.abs(grid - phi_star) < 0.2
    gap = np.abs(rep.scr_modular_enp / rep.scr_integrated - 1.0)
    assert np.all(gap[near] <= 0.05)
    assert gap[-1] > 5 * gap[near].max()
    # the replicating-portfolio reference understates the integrated SCR at phi = 0
    assert rep.scr_modular_rp[0] < rep.scr_integrated[0]
    assert rep.scr_modular_rp[0] == 1.0
    assert rep.enp_max_rel_gap >= gap[near].max()


def test_understatement_flags(setup):
    model, cfg, sim = setup
    rep = scr_comparison_report(model, [0.0, 0.5, 1.0], cfg, sim=sim, understate_threshold=0.0)
    assert rep.understated[0]
    assert rep.understatement_region[0] == 0.0
    rep = scr_comparison_report(model, [0.0, 0.5, 1.0], cfg, sim=sim, understate_threshold=0.9)
    assert rep.understatement_region is None


def test_multi_asset_rejected():
    model = MarketModel((build_asset("lognormal", 0.1), build_asset("lognormal", 0.1)), GaussianClaims(np.eye(2)))
    cfg = McConfig(n_samples=10_000, n_chunks=4, alpha=0.1)
    with pytest.raises(DomainError):
        scr_integrated(model, 1.0, cfg)


def test_integrated_scr_at_zero_matches_exact_value(setup):
    """At phi = 0 the surplus is -X L, normal given X; conditional quadrature gives 1.0487329."""
    model, cfg, sim = setup
    est = scr_integrated(model, 0.0, cfg, sim)
    assert abs(est.value - 1.0487328807240013) <= 3 * est.std_error

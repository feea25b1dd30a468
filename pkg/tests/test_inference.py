import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fppe.inference import (
    ConfidenceEllipsoid,
    confidence_interval_rev,
    confidence_region_beta,
    estimate_active_set,
    hessian_entry,
    infer,
    influence_estimates,
    numerical_hessian,
    plugin_covariances,
    projected_hessian_pinv,
)
from fppe.market import ItemBatch, MarketDefinition, ValueDistribution, sample_items
from fppe.solver import solve_fppe

INTERIOR_MARKET = MarketDefinition(
    budgets=np.array([0.2, 0.2]), value_process=ValueDistribution.uniform()
)


def zero_batch(n, t):
    return ItemBatch(values=np.zeros((n, t)), supply_weight=1.0 / t)


# ---------------------------------------------------------------------------
# active set
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "beta,eps,expected",
    [
        ([1.0], 0.1, [0]),
        ([0.5], 0.1, [1]),
        ([0.95], 0.1, [0]),  # 0.95 >= 0.9
    ],
)
def test_estimate_active_set_threshold(beta, eps, expected):
    np.testing.assert_array_equal(
        estimate_active_set(np.asarray(beta), eps), expected
    )


@settings(max_examples=50, deadline=None)
@given(
    beta=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=6),
    eps=st.floats(min_value=1e-4, max_value=0.99),
)
def test_active_set_property(beta, eps):
    ind = estimate_active_set(np.asarray(beta), eps)
    for b, flag in zip(beta, ind):
        assert flag == (1 if b < 1 - eps else 0)


def test_active_set_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        estimate_active_set(np.array([0.5]), 0.0)
    with pytest.raises(ValueError):
        estimate_active_set(np.array([0.5]), 1.0)


# ---------------------------------------------------------------------------
# numerical Hessian
# ---------------------------------------------------------------------------

def test_hessian_log_barrier_only():
    batch = zero_batch(1, 4)
    budgets = np.array([0.5])
    est = numerical_hessian(batch, budgets, np.array([0.5]), 0.01)[0, 0]
    # exact stencil value on -0.5*log(beta); its O(eps^2) bias against the
    # analytic curvature b/beta^2 = 2 is ~1.6e-3 at eps = 0.01
    exact = -0.5 * (np.log(0.52) - 2 * np.log(0.5) + np.log(0.48)) / (4 * 0.01**2)
    assert est == pytest.approx(2.0, abs=2e-3)
    assert est == pytest.approx(exact, abs=1e-10)


def test_hessian_bias_shrinks_quadratically():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = int(rng.integers(1, 5))
        budgets = rng.uniform(0.2, 2.0, n)
        beta = rng.uniform(0.3, 0.95, n)
        batch = zero_batch(n, 3)
        exact = np.diag(budgets / beta**2)
        err1 = np.abs(numerical_hessian(batch, budgets, beta, 0.02) - exact).max()
        err2 = np.abs(numerical_hessian(batch, budgets, beta, 0.01) - exact).max()
        assert err1 / err2 >= 3.5


def test_hessian_exact_when_winners_stable():
    # disjoint-support market: the price term is linear in each beta around
    # the evaluation point, so only the log barrier contributes and the
    # stencil equals its closed-form second difference
    batch = ItemBatch(values=np.array([[1.0, 0.0], [0.0, 0.7]]), supply_weight=0.5)
    budgets = np.array([0.3, 0.4])
    beta = np.array([0.8, 0.9])
    eps = 0.05
    est = numerical_hessian(batch, budgets, beta, eps)
    assert est[0, 1] == 0.0 and est[1, 0] == 0.0
    log_stencil = [
        -b * (np.log(bi + 2 * eps) - 2 * np.log(bi) + np.log(bi - 2 * eps)) / (4 * eps**2)
        for b, bi in zip(budgets, beta)
    ]
    np.testing.assert_allclose(np.diag(est), log_stencil, rtol=1e-10)
    np.testing.assert_allclose(np.diag(est), budgets / beta**2, rtol=1e-2)


def test_hessian_domain_error():
    batch = zero_batch(2, 2)
    with pytest.raises(ValueError, match="smaller epsilon"):
        numerical_hessian(batch, np.ones(2), np.array([0.5, 0.05]), 0.03)
    # per-entry evaluation still works for coordinates away from zero
    assert hessian_entry(batch, np.ones(2), np.array([0.5, 0.05]), 0.03, 0, 0) > 0
    with pytest.raises(ValueError):
        hessian_entry(batch, np.ones(2), np.array([0.5, 0.05]), 0.03, 1, 1)


def test_default_smoothing_exponent_in_recommended_band():
    import inspect

    d_default = inspect.signature(infer).parameters["d"].default
    assert 0.32 < d_default < 0.47


# ---------------------------------------------------------------------------
# projected pseudo-inverse
# ---------------------------------------------------------------------------

def test_projected_pinv_full():
    out = projected_hessian_pinv(np.diag([2.0, 4.0]), np.array([1, 1]))
    np.testing.assert_allclose(out, np.diag([0.5, 0.25]))


def test_projected_pinv_empty():
    out = projected_hessian_pinv(np.diag([2.0, 4.0]), np.array([0, 0]))
    np.testing.assert_array_equal(out, np.zeros((2, 2)))


def test_projected_pinv_block():
    out = projected_hessian_pinv(np.array([[2.0, 1.0], [1.0, 4.0]]), np.array([0, 1]))
    np.testing.assert_allclose(out, [[0.0, 0.0], [0.0, 0.25]])


def test_projected_pinv_singular_block():
    with pytest.raises(np.linalg.LinAlgError, match="cond"):
        projected_hessian_pinv(np.zeros((2, 2)), np.array([1, 1]))


# ---------------------------------------------------------------------------
# influence estimates
# ---------------------------------------------------------------------------

def test_influences_all_capped():
    mdef = MarketDefinition(
        budgets=np.array([5.0, 5.0]), value_process=ValueDistribution.uniform()
    )
    batch = sample_items(mdef, 50, seed=2)
    sol = solve_fppe(batch, mdef.budgets)
    assert sol.beta.min() == 1.0
    pinv = np.zeros((2, 2))
    dbeta, drev = influence_estimates(sol, batch, pinv)
    np.testing.assert_array_equal(dbeta, np.zeros((2, 50)))
    np.testing.assert_allclose(drev, sol.prices - sol.revenue, atol=1e-12)


def test_influences_constant_batch_zero_revenue_influence():
    mdef = MarketDefinition(
        budgets=np.array([0.4, 6.0]),
        value_process=ValueDistribution.constant([1.0, 0.5]),
    )
    batch = sample_items(mdef, 200, seed=1)
    sol = solve_fppe(batch, mdef.budgets)
    rep = infer(sol, batch, mdef.budgets, alpha=0.1)
    dbeta, drev = influence_estimates(sol, batch, rep.projected_pinv)
    np.testing.assert_allclose(drev, np.zeros(200), atol=1e-9)


def test_influences_center_to_zero():
    batch = sample_items(INTERIOR_MARKET, 400, seed=9)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    rep = infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1)
    dbeta, drev = influence_estimates(sol, batch, rep.projected_pinv)
    assert np.abs(dbeta.mean(axis=1)).max() <= 1e-12
    assert abs(drev.mean()) <= 1e-12


def test_influences_require_unit_total_supply():
    batch = ItemBatch(values=np.array([[1.0, 0.5]]), supply_weight=1.0)  # sigma != 1/t
    sol = solve_fppe(batch, np.array([0.4]))
    with pytest.raises(ValueError, match="1/t"):
        influence_estimates(sol, batch, np.zeros((1, 1)))


# ---------------------------------------------------------------------------
# plug-in covariances
# ---------------------------------------------------------------------------

def test_covariances_zero_when_influences_vanish():
    batch = sample_items(INTERIOR_MARKET, 60, seed=4)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    rep = infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1)
    covs = plugin_covariances(
        np.zeros((2, 60)),
        np.zeros(60),
        sol,
        batch,
        rep.hessian,
        rep.projected_pinv,
        INTERIOR_MARKET.budgets,
    )
    np.testing.assert_array_equal(covs.sigma_beta, np.zeros((2, 2)))
    np.testing.assert_array_equal(covs.sigma_u, np.zeros((2, 2)))
    assert covs.var_nsw == 0.0 and covs.var_rev == 0.0


def test_sigma_delta_zero_when_all_budgets_bind():
    batch = sample_items(INTERIOR_MARKET, 500, seed=11)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    rep = infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1)
    assert rep.active_indicator.tolist() == [1, 1]
    # I - H @ inv(H) = 0 exactly in the all-below-cap case
    np.testing.assert_allclose(rep.sigma_delta, np.zeros((2, 2)), atol=1e-10)


def test_revenue_variance_vanishes_when_all_budgets_spent():
    # all multipliers below the cap: revenue equals total budget, so its
    # estimated variance must shrink with t
    var_by_t = {}
    for t in (500, 4000):
        batch = sample_items(INTERIOR_MARKET, t, seed=100 + t)
        sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
        rep = infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1)
        var_by_t[t] = rep.var_rev
    assert var_by_t[4000] < var_by_t[500]
    assert var_by_t[4000] < 1e-4


def test_active_rows_of_sigma_beta_are_exactly_zero():
    mdef = MarketDefinition(
        budgets=np.array([0.15, 4.0]), value_process=ValueDistribution.uniform()
    )
    batch = sample_items(mdef, 300, seed=8)
    sol = solve_fppe(batch, mdef.budgets)
    rep = infer(sol, batch, mdef.budgets, alpha=0.1)
    assert rep.active_indicator.tolist() == [1, 0]
    assert np.all(rep.sigma_beta[1, :] == 0.0)
    assert np.all(rep.sigma_beta[:, 1] == 0.0)
    eigs = np.linalg.eigvalsh(rep.sigma_beta)
    assert eigs.min() >= -1e-8


def test_monte_carlo_cross_check_revenue_variance():
    # resampling oracle at reduced scale; the full-precision version runs in
    # the acceptance suite
    mdef = MarketDefinition(
        budgets=np.array([0.2, 3.0]), value_process=ValueDistribution.uniform()
    )
    t, trials = 200, 300
    revs, plugins = [], []
    for k in range(trials):
        batch = sample_items(mdef, t, seed=50_000 + k)
        sol = solve_fppe(batch, mdef.budgets)
        revs.append(sol.revenue)
        plugins.append(infer(sol, batch, mdef.budgets, alpha=0.1).var_rev)
    mc = t * np.var(revs, ddof=1)
    ratio = mc / np.median(plugins)
    assert 0.65 < ratio < 1.5


# ---------------------------------------------------------------------------
# confidence sets
# ---------------------------------------------------------------------------

def test_ci_rev_degenerate():
    batch = sample_items(INTERIOR_MARKET, 50, seed=3)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    lo, hi = confidence_interval_rev(sol, 0.0, 50, 0.1)
    assert lo == hi == sol.revenue


def test_ci_rev_quantile_value():
    batch = sample_items(INTERIOR_MARKET, 50, seed=3)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    lo, hi = confidence_interval_rev(sol, 1.0, 100, 0.1)
    half = (hi - lo) / 2
    assert round(half * 10, 4) == 1.6449  # z_{0.05} to 4 decimals


def test_ci_rev_rejects_negative_variance():
    batch = sample_items(INTERIOR_MARKET, 50, seed=3)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    with pytest.raises(ValueError):
        confidence_interval_rev(sol, -1e-3, 50, 0.1)


def test_cr_beta_degenerate_point():
    region = confidence_region_beta(np.array([0.4, 0.8]), np.zeros((2, 2)), 100, 0.1)
    assert region.contains(np.array([0.4, 0.8]))
    assert not region.contains(np.array([0.4 + 1e-6, 0.8]))


def test_cr_beta_chi_square_radius():
    region = confidence_region_beta(np.array([0.5, 0.5]), np.eye(2), 1, 0.1)
    assert round(region.radius, 4) == 2.1460  # sqrt of chi2(2) 90% quantile


def test_cr_beta_membership_rank_deficient():
    shape = np.diag([1.0, 0.0])
    region = ConfidenceEllipsoid(center=np.zeros(2), shape=shape, radius=0.5)
    assert region.contains(np.array([0.4, 0.0]))
    assert not region.contains(np.array([0.6, 0.0]))
    assert not region.contains(np.array([0.1, 1e-3]))  # null direction must match
    assert region.contains(np.array([0.1, 1e-12]))


def test_cr_beta_rejects_non_psd():
    with pytest.raises(ValueError):
        confidence_region_beta(np.array([0.5]), np.array([[-1.0]]), 10, 0.1)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def test_infer_matches_manual_composition_exactly():
    batch = sample_items(INTERIOR_MARKET, 250, seed=17)
    budgets = INTERIOR_MARKET.budgets
    sol = solve_fppe(batch, budgets)
    report = infer(sol, batch, budgets, alpha=0.1, d=0.4)

    eps = 250 ** -0.4
    indicator = estimate_active_set(sol.beta, eps)
    hess = numerical_hessian(batch, budgets, sol.beta, eps)
    pinv = projected_hessian_pinv(hess, indicator)
    dbeta, drev = influence_estimates(sol, batch, pinv)
    covs = plugin_covariances(dbeta, drev, sol, batch, hess, pinv, budgets)

    assert report.epsilon == eps
    np.testing.assert_array_equal(report.active_indicator, indicator)
    np.testing.assert_array_equal(report.hessian, hess)
    np.testing.assert_array_equal(report.projected_pinv, pinv)
    np.testing.assert_array_equal(report.sigma_beta, covs.sigma_beta)
    np.testing.assert_array_equal(report.sigma_u, covs.sigma_u)
    np.testing.assert_array_equal(report.sigma_delta, covs.sigma_delta)
    assert report.var_rev == covs.var_rev
    assert report.var_nsw == covs.var_nsw
    assert report.ci_rev == confidence_interval_rev(sol, covs.var_rev, 250, 0.1)


def test_infer_zero_value_market():
    batch = zero_batch(2, 40)
    budgets = np.array([0.5, 1.5])
    sol = solve_fppe(batch, budgets)
    np.testing.assert_array_equal(sol.beta, [1.0, 1.0])
    report = infer(sol, batch, budgets, alpha=0.1)
    np.testing.assert_array_equal(report.active_indicator, [0, 0])
    np.testing.assert_array_equal(report.sigma_beta, np.zeros((2, 2)))
    assert report.var_rev == 0.0
    assert report.ci_rev == (0.0, 0.0)


def test_infer_validates_parameters():
    batch = sample_items(INTERIOR_MARKET, 30, seed=1)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    with pytest.raises(ValueError):
        infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1, d=0.6)
    with pytest.raises(ValueError):
        infer(sol, batch, INTERIOR_MARKET.budgets, alpha=1.2)


def test_infer_ci_contains_point_estimate():
    batch = sample_items(INTERIOR_MARKET, 120, seed=21)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    report = infer(sol, batch, INTERIOR_MARKET.budgets, alpha=0.1)
    lo, hi = report.ci_rev
    assert lo <= sol.revenue <= hi
    assert report.cr_beta.contains(sol.beta)


def test_interior_identity_price_reconstruction():
    # with every budget binding and no ties, prices are recovered by
    # mu_bar' H^{-1} mu(theta) up to estimation error
    batch = sample_items(INTERIOR_MARKET, 2000, seed=7)
    sol = solve_fppe(batch, INTERIOR_MARKET.budgets)
    eps = 2000 ** -0.4
    hess = numerical_hessian(batch, INTERIOR_MARKET.budgets, sol.beta, eps)
    mu = sol.allocation * batch.values
    reconstructed = sol.item_utility @ np.linalg.inv(hess) @ mu
    deviation = np.abs(sol.prices - reconstructed)
    assert np.median(deviation) <= 0.05

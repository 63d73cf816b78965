import numpy as np
import pytest

from p2pcontracts import market
from p2pcontracts.market import Contract, MarketParams, ValidationError


def test_baseline_shape(params):
    assert params.n == 3
    assert np.array_equal(params.status_quo_disutility(), [175.0, 305.0, 166.0])


@pytest.mark.parametrize(
    "kwargs, path",
    [
        (dict(mu=[1.0], Sigma=[[1.0]], gamma=[1.0]), "mu"),
        (dict(mu=[1.0, 2.0], Sigma=[[1.0, 2.0], [2.0, 1.0]], gamma=[1.0, 1.0]), "sigma"),
        (dict(mu=[1.0, 2.0], Sigma=np.eye(2), gamma=[1.0]), "gamma"),
        (dict(mu=[1.0, -2.0], Sigma=np.eye(2), gamma=[1.0, 1.0]), "mu[1]"),
        (dict(mu=[1.0, 2.0], Sigma=np.eye(2), gamma=[0.0, 1.0]), "gamma[0]"),
        (dict(mu=[1.0, 2.0], Sigma=[[1.0, 0.5], [0.0, 1.0]], gamma=[1.0, 1.0]), "sigma"),
    ],
)
def test_invalid_params(kwargs, path):
    with pytest.raises(ValidationError) as info:
        MarketParams(gamma_R=0.01, **kwargs)
    assert info.value.path == path


def test_negative_reinsurer_aversion():
    with pytest.raises(ValidationError):
        MarketParams([1.0, 1.0], np.eye(2), [1.0, 1.0], -0.1)


def test_status_quo_has_zero_gains(params):
    c = market.status_quo(3)
    w = market.welfare(params, c)
    assert np.array_equal(w.omega_members, np.zeros(3))
    assert w.omega_reinsurer == 0.0
    assert w.feasible and w.all_ir
    e = market.evaluate(params, c)
    assert np.allclose(e.rho_members, params.status_quo_disutility())
    assert e.rho_R == 0.0


def test_evaluate_by_hand(params):
    # two-member pool, even split, half ceded at 10% loading
    p2 = MarketParams([10.0, 20.0], [[4.0, 1.0], [1.0, 9.0]], [1.0, 2.0], 0.5)
    A = np.array([[0.25, 0.25], [0.25, 0.25]])
    p = np.array([0.5, 0.5])
    eta = np.array([0.1, 0.1])
    e = market.evaluate(p2, Contract(A, p, eta))
    var_row = 0.0625 * (4 + 2 + 9)
    assert np.allclose(e.rho_members, [7.5 + 0.5 * var_row, 7.5 + var_row])
    assert np.allclose(e.premiums, [5.5, 11.0])
    assert e.rho_R == pytest.approx(15.0 + 0.25 * 0.25 * 15)
    assert e.v_reinsurer == pytest.approx(0.25 * 0.25 * 15 - 1.5)


def test_feasibility_residuals():
    p2 = MarketParams([10.0, 20.0], np.eye(2), [1.0, 1.0], 0.0)
    ok = Contract(np.eye(2) * 0.5, [0.5, 0.5], [0.0, 0.0])
    assert market.check_feasibility(p2, ok).ok
    bad = Contract(np.eye(2) * 0.5, [0.4, 0.5], [0.0, 0.0])
    f = market.check_feasibility(p2, bad)
    assert not f.ok
    assert f.zero_conserving_residual == pytest.approx(0.1)
    assert f.fairness_residual == pytest.approx(1.0)
    assert not market.welfare(p2, bad).feasible


def test_dimension_mismatch(params):
    with pytest.raises(market.DimensionMismatch):
        market.evaluate(params, market.status_quo(2))
    with pytest.raises(market.DimensionMismatch):
        market.welfare(params, Contract(np.eye(3), np.zeros(2), np.zeros(3)))


def test_welfare_matches_disutility_differences(params, rng):
    # on feasible contracts the reduced welfare form equals status quo minus u
    from p2pcontracts.pareto import mutualization

    for _ in range(5):
        p = rng.uniform(0, 1, 3)
        c = Contract(mutualization(params, p), p, rng.uniform(0, 1, 3))
        e = market.evaluate(params, c)
        w = market.welfare(params, c)
        assert w.feasible
        assert np.allclose(w.omega_members, params.status_quo_disutility() - e.u_members)
        assert w.omega_reinsurer == pytest.approx(-e.v_reinsurer)


def test_random_market_is_valid(rng):
    for n in (2, 3, 5):
        m = market.random_market(rng, n)
        assert m.n == n and 0.0 <= m.gamma_R <= 0.05

import numpy as np
import pytest

from p2pcontracts import bowley, linalg, market, oracle, pareto
from p2pcontracts.conditions import INCONCLUSIVE
from p2pcontracts.market import MarketParams

BO1_ETA = [0.345775, 0.725918, 0.460025]
BO1_P_CONSISTENT = [0.265399, 0.318127, 0.269785]
BO2_P = [0.148915, 0.445595, 0.244199]


def twins(n, gamma_R=0.0, mu=1.0, var=1.0, gamma=1.0):
    return MarketParams(np.full(n, mu), var * np.eye(n), np.full(n, gamma), gamma_R)


def test_follower_matrix_is_pd(params):
    linalg.cholesky(bowley.follower_matrix(params))


def test_follower_zero_loading_cedes_everything(params):
    c = bowley.follower(params, np.zeros(3))
    assert np.allclose(c.p, 1.0, atol=1e-14)


def test_follower_matches_oracle(params, rng):
    for _ in range(5):
        eta = rng.uniform(0, 1, 3)
        c = bowley.follower(params, eta)
        A, p = oracle.kkt_solve_rs(params, include_reinsurer_term=False, eta=eta)
        assert np.max(np.abs(A - c.A)) <= 1e-8 and np.max(np.abs(p - c.p)) <= 1e-8
        assert market.check_feasibility(params, c).ok


def test_follower_does_not_clamp(params):
    c = bowley.follower(params, np.full(3, 5.0))
    assert np.min(c.p) < 0
    assert not bowley.in_unit_box(c.p)


def test_leader_baseline(params):
    sol = bowley.leader(params)
    assert np.allclose(sol.eta_star, BO1_ETA, atol=1e-6)
    assert np.allclose(sol.p_star, BO1_P_CONSISTENT, atol=1e-6)
    assert sol.omega_R_closed == pytest.approx(34.7780, abs=1e-4)
    w = market.welfare(params, sol.contract)
    assert w.omega_reinsurer == pytest.approx(sol.omega_R_closed, rel=1e-8)
    assert sol.bowley_optimal
    for name in ("unicond", "MIRcond", "deltaINE", "ir_direct", "feasibility"):
        assert name in sol.condition_report


def test_leader_risk_neutral_halves(params):
    sol = bowley.leader(params.with_gamma_R(0.0))
    assert np.max(np.abs(sol.p_star - 0.5)) <= 1e-10


def test_leader_single_baseline(params):
    sol = bowley.leader_single(params)
    assert sol.single_loading == pytest.approx(0.495050, abs=1e-6)
    assert np.allclose(sol.eta_star, sol.single_loading)
    assert np.allclose(sol.p_star, BO2_P, atol=1e-6)
    e = sol.condition_report["single_loading_nonneg"]
    assert e.details["gamma_R_limit"] == pytest.approx(0.0027382, abs=1e-6)
    assert not e.passed  # sufficient check only; the loading is still positive
    assert sol.condition_report["eta_nonnegative"].passed


def test_reply_identity(params):
    sol = bowley.leader(params)
    assert np.max(np.abs(sol.p_star - bowley.optimal_reply_identity(params))) <= 1e-9


def test_unicond(params):
    sol = bowley.leader(params)
    assert bowley.check_unicond(params, sol.eta_star).passed
    zero = bowley.check_unicond(params, np.zeros(3))
    # zero loading sits on the strict lower edge
    assert not zero.passed
    assert np.all(zero.details["lower_slack"] == 0)
    big = bowley.check_unicond(params, np.full(3, 1e3))
    assert not big.passed
    assert np.all(big.details["upper_slack"] < 0)


def test_unicond_upper_slack_identity(params):
    # half of the exact window slack equals the upper unicond slack at eta*
    sol = bowley.leader(params)
    upper = bowley.check_unicond(params, sol.eta_star).details["upper_slack"]
    exact = bowley.loading_window_bounds(params)["unicond_exact"].slacks
    assert np.allclose(0.5 * exact, upper, rtol=1e-10)


def test_mircond_identical_members():
    # reduces to (gamma sigma^2 / 2)(1 - 4/n) for n identical independent members
    for n in (2, 3, 6):
        e = bowley.check_mircond(twins(n, var=4.0, gamma=0.5))
        assert np.allclose(e.slacks, 0.5 * 0.5 * 4.0 * (1 - 4 / n))
    assert not bowley.check_mircond(twins(2)).passed
    assert bowley.check_mircond(twins(6)).passed


def test_mircond_baseline(params):
    e = bowley.check_mircond(params)
    assert not e.passed
    # direct IR holds anyway
    assert market.welfare(params, bowley.leader(params).contract).all_ir


def test_deltaine():
    e = bowley.check_deltaine(twins(2))
    assert e.passed and e.details["rhs"] == 0.0
    S = np.array([[2.0, 1.5, 0.6], [1.5, 2.0, 0.0], [0.6, 0.0, 2.0]])
    q = MarketParams([1.0, 1.0, 1.0], S, [1.0, 1.0, 1.0], 0.1)
    e = bowley.check_deltaine(q)
    assert e.status == INCONCLUSIVE


def test_deltaine_baseline(params):
    e = bowley.check_deltaine(params)
    assert e.details["delta_M"] == pytest.approx(44.49017413426378, rel=1e-10)
    assert e.details["delta_Sigma"] == pytest.approx(6732.0)
    assert e.details["lhs"] < e.details["rhs"]
    assert np.all(bowley.leader(params).eta_star >= 0)


def test_loading_window_risk_neutral(params):
    q = params.with_gamma_R(0.0)
    r = bowley.loading_window_bounds(q)
    e = r["unicond_riskneutral"]
    assert e.details["max_gap"] <= 1e-10
    assert e.passed


def test_loading_window_baseline(params):
    r = bowley.loading_window_bounds(params)
    exact = r["unicond_exact"].details["implicit_term"]
    assert np.allclose(exact, [45.870384790143724, 49.73246564829979, 43.030161532638694])
    v = r["varah_bound"].details["bound"]
    s = r["spectral_bound"].details["bound"]
    assert v == pytest.approx(74.21801369600448)
    assert s == pytest.approx(84.72453740588337)
    assert np.all(exact <= v) and np.all(exact <= s)
    assert r["unicond_by_bound"].notes == ["tighter bound: varah"]


def test_varah_needs_positive_kappa(params):
    S = np.full((3, 3), 0.6) + 0.4 * np.eye(3)
    q = MarketParams([1.0, 1.0, 1.0], S, [0.01] * 3, 0.5)
    with pytest.raises(bowley.KappaNonpositive):
        bowley.varah_bound(q)
    r = bowley.loading_window_bounds(q)
    assert r["varah_bound"].status == INCONCLUSIVE
    assert "spectral_bound" in r


def test_compare(params):
    sol = pareto.solve_rs(params)
    c1 = bowley.compare(params, sol, bowley.leader(params))
    c2 = bowley.compare(params, sol, bowley.leader_single(params))
    assert c1.total_welfare_gap == pytest.approx(268.951 - 264.272, abs=2e-3)
    assert c2.total_welfare_gap == pytest.approx(268.951 - 263.888, abs=2e-3)
    assert not c1.bowley_is_jpo and not c2.bowley_is_jpo
    q = params.with_gamma_R(0.0)
    c0 = bowley.compare(q, pareto.solve_rs(q), bowley.leader(q))
    assert np.allclose(c0.p_gap, 0.5, atol=1e-10)
    with pytest.raises(bowley.ParamsMismatch):
        bowley.compare(params, sol, bowley.leader(q))
    with pytest.raises(bowley.ParamsMismatch):
        bowley.compare(q, sol, bowley.leader(q))

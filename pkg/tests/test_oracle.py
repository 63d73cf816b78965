import numpy as np
import pytest

from p2pcontracts import bowley, oracle, pareto
from p2pcontracts.market import MarketParams

from conftest import random_markets


def _scale(params):
    return max(1.0, float(np.max(np.abs(params.Sigma))))


def test_pool_optimum_is_stationary(params):
    A, p = oracle.kkt_solve_rs(params)
    assert oracle.stationarity_residual(params, A, p) <= 1e-8 * _scale(params)
    sol = pareto.solve_rs(params)
    assert np.max(np.abs(A - sol.A_star)) <= 1e-8
    assert np.max(np.abs(p - sol.p_star)) <= 1e-8


def test_follower_reply_is_stationary(params, rng):
    eta = rng.uniform(0, 1, 3)
    A, p = oracle.kkt_solve_rs(params, include_reinsurer_term=False, eta=eta)
    assert oracle.stationarity_residual(params, A, p, eta=eta) <= 1e-8 * _scale(params)


def test_closed_forms_match_oracle_on_random_markets():
    for q in random_markets(7, 20, sizes=(2, 3, 4, 5), gamma_R_max=0.05):
        A, p = oracle.kkt_solve_rs(q)
        sol = pareto.solve_rs(q)
        assert np.max(np.abs(A - sol.A_star)) <= 1e-8
        assert np.max(np.abs(p - sol.p_star)) <= 1e-8
        A0 = oracle.kkt_solve_rs2(q.mu, q.Sigma, q.gamma)
        assert np.max(np.abs(A0 - pareto.no_reinsurer_allocation(q))) <= 1e-8


def test_identical_members_share_symmetrically():
    q = MarketParams([2.0, 2.0], [[4.0, 1.0], [1.0, 4.0]], [0.5, 0.5], 0.1)
    A, p = oracle.kkt_solve_rs(q)
    assert A[0, 0] == pytest.approx(A[1, 1], abs=1e-12)
    assert A[0, 1] == pytest.approx(A[1, 0], abs=1e-12)
    assert p[0] == pytest.approx(p[1], abs=1e-12)


def test_no_reinsurer_single_member():
    assert np.array_equal(oracle.kkt_solve_rs2([1.0], [[1.0]], [1.0]), [[1.0]])


def test_fd_gradient_quadratic():
    g = oracle.fd_gradient(lambda x: float(x @ x), [1.0, 2.0])
    assert np.allclose(g, [2.0, 4.0], atol=1e-8)


def test_fd_gradient_rejects_nonfinite():
    with pytest.raises(oracle.NonFiniteEvaluation):
        oracle.fd_gradient(lambda x: float("nan") if x[0] < 0 else float(x[0]), [0.0])


def test_leader_first_order_conditions(params):
    fm = oracle.FollowerMap(params)
    eta = bowley.leader(params).eta_star
    g = oracle.fd_gradient(lambda e: float(fm.leader_objective(e)), eta)
    assert np.max(np.abs(g)) <= 1e-6 * _scale(params)
    off = oracle.fd_gradient(lambda e: float(fm.leader_objective(e)), 1.1 * eta)
    assert np.max(np.abs(off)) > 1.0


def test_follower_map_matches_closed_form(params, rng):
    fm = oracle.FollowerMap(params)
    eta = rng.uniform(0, 1, 3)
    assert np.max(np.abs(fm.p(eta) - bowley.follower(params, eta).p)) <= 1e-10


def test_grid_leader_near_optimum(params):
    eta = bowley.leader(params).eta_star
    res = oracle.grid_leader(params, eta - 0.1, eta + 0.1, 21)
    assert np.all(np.abs(res.best_eta - eta) <= res.step + 1e-12)


def test_grid_single_loading(params):
    t, _ = oracle.grid_single_loading(params)
    assert abs(t - bowley.leader_single(params).single_loading) <= 1e-4
    assert abs(t - 0.495050) <= 1e-4


def test_grid_limited_to_three_members():
    q = MarketParams([1.0] * 4, np.eye(4), [1.0] * 4, 0.1)
    with pytest.raises(oracle.GridTooLarge):
        oracle.grid_leader(q, 0.0, 1.0, 3)


def test_singular_system_detected():
    # two members with perfectly collinear losses
    q_mu = np.array([1.0, 1.0])
    S = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-17]])
    with pytest.raises((oracle.SingularKkt, np.linalg.LinAlgError)):
        oracle.kkt_solve_rs_raw(q_mu, S, [1.0, 1.0], 0.0)

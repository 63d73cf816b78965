import json

import numpy as np
import pytest

from p2pcontracts import bowley, game, lp, market, pareto
from p2pcontracts.market import MarketParams

# worths recomputed from the KKT oracle solutions (see test_game_matches_oracle_values)
BASELINE_VALUES = {
    3: 137.6264193792581,
    5: 71.93099942253326,
    6: 116.7067210127633,
    7: 219.0123373027768,
    9: 45.0,
    10: 128.5714285714286,
    11: 199.18185887365766,
    12: 54.0,
    13: 110.84684965215367,
    14: 196.70341673331987,
    15: 268.9513730119748,
}


@pytest.fixture
def g(params):
    return game.build_game(params)


def test_labels():
    assert game.coalition_label(0b1011, 3) == "{1,2,R}"
    assert game.coalition_label(0, 3) == "{}"


def test_baseline_values(g):
    assert len(g.values) == 16
    for mask, v in BASELINE_VALUES.items():
        assert g.values[mask] == pytest.approx(v, rel=1e-10)
    for mask in (0, 1, 2, 4, 8):
        assert g.values[mask] == 0.0
    assert g.grand_value == pytest.approx(268.951, abs=1e-3)
    assert g.members_value == pytest.approx(219.012, abs=1e-3)


def test_single_member_with_reinsurer_by_hand(params):
    # one member alone cedes gamma_i / (gamma_R + gamma_i); gain = gamma_i^2 sigma^2 / (2(gamma_i + gamma_R))
    for i in range(3):
        gi, s2 = params.gamma[i], params.Sigma[i, i]
        expected = gi**2 * s2 / (2 * (gi + params.gamma_R))
        assert game.coalition_value(params, [i], True) == pytest.approx(expected, rel=1e-12)


def test_coalition_value_edges(params):
    assert game.coalition_value(params, [1], False) == 0.0
    assert game.coalition_value(params, [], True) == 0.0
    with pytest.raises(game.EmptyCoalition):
        game.coalition_value(params, [], False)
    assert game.coalition_value(params, [0, 1, 2], False) == pytest.approx(219.012, abs=1e-3)


def test_reinsurer_never_hurts(g):
    R = g.reinsurer_bit
    for mask in range(R):
        assert g.values[mask | R] >= g.values[mask] >= 0.0


def test_symmetric_twins():
    q = MarketParams([10.0, 10.0], 4.0 * np.eye(2), [0.5, 0.5], 0.0)
    g = game.build_game(q)
    assert g.values[0b101] == pytest.approx(g.values[0b110], rel=1e-12)


def test_too_many_members():
    rng = np.random.default_rng(0)
    q = market.random_market(rng, 17)
    with pytest.raises(game.TooManyMembers):
        game.build_game(q)


def test_size_weighted_variant_breaks_zero_conservation(params):
    A = game.alone_allocation_by_size(params.mu, params.Sigma, params.gamma)
    assert np.max(np.abs(A.sum(axis=0) - 1.0)) > 1e-3


def test_json_round_trip(g):
    back = game.CoalitionGame.from_json(g.to_json())
    assert back.n == 3 and back.values == g.values
    assert set(json.loads(g.to_json())["values"]) == {str(m) for m in range(16)}


def test_check_core_jpo1(params, g):
    sol = pareto.solve_rs(params)
    jpo1 = pareto.jpo_equal_split(params, sol, bowley.leader(params).contract).contract
    w = market.welfare(params, jpo1)
    res = game.check_core(g, w.allocation())
    assert res.in_core and not res.violated


def test_check_core_all_to_reinsurer(g):
    res = game.check_core(g, [0, 0, 0, g.grand_value])
    assert not res.in_core
    assert 7 in [m for m, _ in res.violated]
    assert [s for _, s in res.violated] == sorted(s for _, s in res.violated)


def test_check_core_efficiency(g):
    c = game.find_core_element(g)
    res = game.check_core(g, c + np.array([1.0, 0, 0, 0]))
    assert not res.in_core and res.efficiency_gap == pytest.approx(1.0)


def test_find_core_element(g):
    c = game.find_core_element(g)
    assert game.check_core(g, c).in_core


def test_find_core_element_degenerate():
    values = {m: 0.0 for m in range(8)}
    values[7] = 1.0
    g = game.CoalitionGame(2, values)
    c = game.find_core_element(g)
    assert game.check_core(g, c).in_core and c.sum() == pytest.approx(1.0)


def test_empty_core_certificate():
    # three-agent majority game: every pair is worth 1, the grand coalition 1
    values = {0: 0.0, 1: 0.0, 2: 0.0, 4: 0.0, 3: 1.0, 5: 1.0, 6: 1.0, 7: 1.0}
    g = game.CoalitionGame(2, values)
    with pytest.raises(lp.Infeasible) as info:
        game.find_core_element(g)
    y = info.value.certificate
    assert y is not None and np.sum(y) > 1.0


def test_core_bound(params, g):
    sol = pareto.solve_rs(params)
    e = game.check_core_bound(params, sol, g)
    assert np.allclose(e.details["marginal_contribution"], [72.24795627865501, 158.10452335982103, 69.76951413831705])
    assert not e.passed
    q = MarketParams([1.0, 2.0], [[1.0, 0.2], [0.2, 2.0]], [1.0, 0.5], 0.0)
    e0 = game.check_core_bound(q, pareto.solve_rs(q), game.build_game(q))
    assert e0.slacks.shape == (2,)


def test_stability(params, g):
    sol = pareto.solve_rs(params)
    bo1 = bowley.leader(params)
    jpo1 = pareto.jpo_equal_split(params, sol, bo1.contract).contract
    assert game.check_stability(params, g, jpo1).stable
    s = game.check_stability(params, g, bo1.contract)
    assert not s.stable and not s.jp_optimal
    greedy = pareto.loadings_from_welfare(params, sol, np.zeros(3))
    s = game.check_stability(params, g, greedy)
    assert s.jp_optimal and not s.stable
    assert 7 in [m for m, _ in s.core.violated]

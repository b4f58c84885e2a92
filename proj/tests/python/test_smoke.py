"""Smoke tests for the python bindings."""

import math

import pytest

import bisimlab as bl


def test_toy_mdp_round_trip():
    mdp, policy = bl.toy_example_mdp(0.9)
    assert mdp.n_states == 3
    assert mdp.state_names == ["s1", "s2", "s3"]
    assert policy.prob(2, 0) == 1.0
    assert bl.validate_mdp(mdp, policy) == []
    assert bl.marginal_reward(mdp, policy, 0) == pytest.approx(0.25)


def test_revised_fixed_point_matches_closed_form():
    gamma = 0.9
    mdp, policy = bl.toy_example_mdp(gamma)
    result = bl.solve_fixed_point("revised", mdp, policy)
    assert result["converged"]
    assert result["u"][0][1] == pytest.approx(2 / ((2 - gamma) * (4 - gamma)), abs=1e-8)
    assert result["u"][0][2] == pytest.approx(1 / (4 - 2 * gamma), abs=1e-8)

    classic = bl.solve_fixed_point("classic", mdp, policy)
    assert max(abs(x) for row in classic["u"] for x in row) <= 1e-8


def test_wasserstein_point_masses():
    value, coupling = bl.wasserstein1([1.0, 0.0], [0.0, 1.0], [[0.0, 7.0], [3.0, 0.0]])
    assert value == pytest.approx(7.0)
    assert coupling[0][1] == pytest.approx(1.0)


def test_make_mdp_validates():
    with pytest.raises(ValueError):
        bl.make_mdp([[[0.5, 0.6], [1.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]]],
                    [[0.0, 0.0], [0.0, 0.0]],
                    [[0.5, 0.5], [0.5, 0.5]],
                    0.9)


def test_distances():
    assert bl.distance_simsr([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert bl.distance_mico([1.0, 0.0], [1.0, 0.0], 0.1) == pytest.approx(
        1.0 + 0.1 * math.acos(0.9999), abs=1e-12
    )


def test_policy_values_geometric_series():
    mdp, policy = bl.toy_example_mdp(0.9)
    values = bl.policy_values(mdp, policy)
    assert values["converged"]
    assert values["v"][2] == pytest.approx(2.5, abs=1e-8)


def test_reward_gap_inequality():
    mdp, policy = bl.toy_example_mdp(0.9)
    delta1, delta2 = bl.reward_gap_comparison(mdp, policy)
    for i in range(3):
        for j in range(3):
            assert delta2[i][j] <= delta1[i][j] + 1e-12
    assert delta1[0][1] == pytest.approx(0.25)
    assert delta2[0][1] == 0.0


def test_aggregate_states():
    mdp, policy = bl.toy_example_mdp(0.9)
    classic = bl.solve_fixed_point("classic", mdp, policy)
    assert bl.aggregate_states(classic["u"], 0.0) == [0, 0, 0]


def test_train_deterministic():
    mdp, policy = bl.toy_example_mdp(0.9)
    kwargs = dict(embed_dim=4, distance="simsr", steps=200, batch_size=8,
                  record_interval=50, seed=11)
    a = bl.train(mdp, policy, **kwargs)
    b = bl.train(mdp, policy, **kwargs)
    assert a["encoder_losses"] == b["encoder_losses"]
    assert a["c_values"] == b["c_values"]
    assert a["distance_table"] == b["distance_table"]
    assert all(0.0 < c < 1.0 for c in a["c_values"])


def test_toy_verification_passes():
    all_pass, checks = bl.verify_toy_closed_forms(0.5)
    assert all_pass
    assert all(c["abs_error"] <= 1e-8 for c in checks)

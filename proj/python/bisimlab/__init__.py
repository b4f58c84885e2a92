"""Exact bisimulation metrics and desk-scale representation learning on tabular MDPs."""

from ._core import (
    PolicyTable,
    TabularMdp,
    __version__,
    aggregate_states,
    distance_mico,
    distance_simsr,
    load_mdp,
    make_mdp,
    marginal_reward,
    marginal_transition,
    policy_values,
    reward_gap_comparison,
    run_verification_suite,
    solve_fixed_point,
    toy_example_mdp,
    train,
    validate_mdp,
    verify_toy_closed_forms,
    wasserstein1,
)

__all__ = [
    "PolicyTable",
    "TabularMdp",
    "__version__",
    "aggregate_states",
    "distance_mico",
    "distance_simsr",
    "load_mdp",
    "make_mdp",
    "marginal_reward",
    "marginal_transition",
    "policy_values",
    "reward_gap_comparison",
    "run_verification_suite",
    "solve_fixed_point",
    "toy_example_mdp",
    "train",
    "validate_mdp",
    "verify_toy_closed_forms",
    "wasserstein1",
]

#pragma once

#include "bisimlab/mdp.hpp"
#include "bisimlab/metrics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bisim {

struct BoundReport {
    double max_violation = 0.0;  // max over pairs of lhs - rhs
    std::pair<int, int> worst_pair{-1, -1};
    double tolerance = 0.0;
    bool satisfied = false;  // max_violation <= tolerance
};

// Prop-style check |V(s_i) - V(s_j)| <= U(s_i,s_j). The tolerance applied is
// 10*tol; values are evaluated to Bellman residual tol*(1-gamma) so solver
// error cannot masquerade as a violation.
BoundReport check_value_bound(const TabularMdp& mdp, const PolicyTable& policy,
                              const StateMetricTable& u_fixed, double tol);

// Same over X x X: |Q(x_i) - Q(x_j)| <= G(x_i,x_j).
BoundReport check_q_bound(const TabularMdp& mdp, const PolicyTable& policy,
                          const PairMetricTable& g_fixed, double tol);

struct GapComparison {
    StateMetricTable delta1;  // E_{a_i,a_j}|r(s_i,a_i) - r(s_j,a_j)|
    StateMetricTable delta2;  // |r^pi_{s_i} - r^pi_{s_j}|, pointwise <= delta1
};

GapComparison reward_gap_comparison(const TabularMdp& mdp, const PolicyTable& policy);

// The 3-state / 3-action deterministic toy MDP: a0 self-loops everywhere,
// a1 moves s1 -> s3, a2 moves s2 -> s3; pi uniform over {a0,a1} at s1,
// {a0,a2} at s2, a0 at s3. Rewards r(s1,a1) = r(s2,a2) = 1/2 and
// r(s3,a0) = 1/4: the one scale on which the classic fixed point is zero on
// every pair while the revised fixed point matches the closed forms. Cells
// the policy never selects are self-loops with reward 0 and zero policy mass.
std::pair<TabularMdp, PolicyTable> toy_example_mdp(double gamma = 0.9);

struct QuantityCheck {
    std::string quantity;
    double expected = 0.0;
    double actual = 0.0;
    double abs_error = 0.0;
    bool pass = false;
};

struct ToyVerification {
    std::vector<QuantityCheck> checks;
    bool all_pass = true;
};

// Solves classic and revised fixed points on the toy MDP and compares them
// with the closed forms: classic distance identically 0 on off-diagonal
// pairs; U(s1,s2) = 2/((2-gamma)(4-gamma)), U(s1,s3) = U(s3,s2) = 1/(4-2gamma),
// U(s3,s3) = 0. Tolerance 1e-8 per quantity.
ToyVerification verify_toy_closed_forms(double gamma);

// Single-linkage clustering at threshold epsilon: transitive closure of
// u(i,j) <= epsilon. Returns one label per state, each label the smallest
// state index in its cluster, which makes the output relabel-invariant.
std::vector<int> aggregate_states(const StateMetricTable& u, double epsilon);

}  // namespace bisim

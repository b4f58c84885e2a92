#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bisimlab/analysis.hpp"
#include "bisimlab/random_mdp.hpp"
#include "bisimlab/verify.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace bisim;

TEST_CASE("toy MDP construction matches the figure") {
    auto [mdp, policy] = toy_example_mdp(0.9);
    CHECK(mdp.n_states == 3);
    CHECK(mdp.n_actions == 3);
    CHECK(mdp.r(2, 0) == 0.25);
    CHECK(mdp.r(0, 1) == 0.5);
    CHECK(policy.pi(2, 0) == 1.0);
    CHECK(policy.pi(0, 0) == 0.5);
    CHECK(policy.pi(0, 2) == 0.0);
    CHECK(mdp.p(0, 1, 2) == 1.0);  // a1 moves s1 -> s3
    CHECK(mdp.p(1, 2, 2) == 1.0);  // a2 moves s2 -> s3
    CHECK(mdp.p(0, 2, 0) == 1.0);  // unused cells self-loop
    CHECK(validate_mdp(mdp, policy).ok());
    CHECK_THROWS_AS(toy_example_mdp(1.0), std::invalid_argument);
}

TEST_CASE("value bound: tight on the 2-state witness, satisfied on the toy") {
    const double tol = 1e-9;
    auto [mdp, policy] = oracle::two_state_selfloop(0.9);
    SolveResult fixed = solve_fixed_point(OperatorKind::revised, mdp, policy);
    BoundReport report = check_value_bound(mdp, policy, fixed.u, tol);
    CHECK(report.satisfied);
    CHECK(std::abs(report.max_violation) <= 10 * tol);  // |V gap| = U = 1/(1-gamma)

    BoundReport q_report = check_q_bound(mdp, policy, *fixed.g, tol);
    CHECK(q_report.satisfied);
    CHECK(std::abs(q_report.max_violation) <= 10 * tol);

    auto [toy_mdp, toy_policy] = toy_example_mdp(0.9);
    SolveResult toy_fixed = solve_fixed_point(OperatorKind::revised, toy_mdp, toy_policy);
    CHECK(check_value_bound(toy_mdp, toy_policy, toy_fixed.u, tol).satisfied);
    CHECK(check_q_bound(toy_mdp, toy_policy, *toy_fixed.g, tol).satisfied);
}

TEST_CASE("value and Q bounds hold across random MDPs") {
    Rng rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        auto [mdp, policy] = random_mdp(rng);
        SolveResult fixed = solve_fixed_point(OperatorKind::revised, mdp, policy);
        REQUIRE(fixed.trace.converged);
        BoundReport vb = check_value_bound(mdp, policy, fixed.u, 1e-9);
        BoundReport qb = check_q_bound(mdp, policy, *fixed.g, 1e-9);
        CHECK(vb.satisfied);
        CHECK(qb.satisfied);
    }
}

TEST_CASE("reward gap comparison: toy values, diagonal, deterministic policies") {
    auto [mdp, policy] = toy_example_mdp(0.9);
    GapComparison gaps = reward_gap_comparison(mdp, policy);
    CHECK(gaps.delta1.at(0, 1) == doctest::Approx(0.25));  // (1/4)(0 + 1/2 + 1/2 + 0)
    CHECK(gaps.delta2.at(0, 1) == 0.0);
    for (int s = 0; s < 3; ++s) CHECK(gaps.delta2.at(s, s) == 0.0);

    auto [det_mdp, det_policy] = oracle::two_state_selfloop(0.9);
    GapComparison det = reward_gap_comparison(det_mdp, det_policy);
    CHECK(det.delta1.at(0, 1) == det.delta2.at(0, 1));
}

TEST_CASE("delta2 <= delta1 pointwise on random instances") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        auto [mdp, policy] = random_mdp(rng);
        GapComparison gaps = reward_gap_comparison(mdp, policy);
        for (size_t k = 0; k < gaps.delta1.d.size(); ++k)
            CHECK(gaps.delta2.d[k] <= gaps.delta1.d[k] + 1e-12);
    }
}

TEST_CASE("toy closed forms verify across gammas, separation holds") {
    for (double gamma : {0.1, 0.5, 0.9, 0.99}) {
        ToyVerification report = verify_toy_closed_forms(gamma);
        CHECK(report.all_pass);
        for (const QuantityCheck& c : report.checks) CHECK(c.abs_error <= 1e-8);
    }
    for (double gamma : {0.05, 0.35, 0.65, 0.95}) {
        auto [mdp, policy] = toy_example_mdp(gamma);
        double revised = solve_fixed_point(OperatorKind::revised, mdp, policy).u.at(0, 1);
        double classic = solve_fixed_point(OperatorKind::classic, mdp, policy).u.at(0, 1);
        CHECK(revised > 1e-6);
        CHECK(std::abs(classic) <= 1e-8);
    }
}

TEST_CASE("state aggregation: thresholds, partitions, relabeling invariance") {
    auto [mdp, policy] = toy_example_mdp(0.9);
    StateMetricTable classic = solve_fixed_point(OperatorKind::classic, mdp, policy).u;
    StateMetricTable revised = solve_fixed_point(OperatorKind::revised, mdp, policy).u;

    // all classic distances are exactly zero: one cluster at epsilon 0
    std::vector<int> merged = aggregate_states(classic, 0.0);
    CHECK(merged == std::vector<int>{0, 0, 0});

    // revised distances are strictly positive off-diagonal: all singletons
    std::vector<int> split = aggregate_states(revised, 0.0);
    CHECK(split == std::vector<int>{0, 1, 2});

    // epsilon at least the max entry collapses everything
    double max_entry = *std::max_element(revised.d.begin(), revised.d.end());
    CHECK(aggregate_states(revised, max_entry) == std::vector<int>{0, 0, 0});

    CHECK_THROWS_AS(aggregate_states(revised, -1.0), std::invalid_argument);
}

TEST_CASE("aggregation is a partition and invariant under relabeling") {
    Rng rng(81);
    for (int trial = 0; trial < 20; ++trial) {
        int n = rng.uniform_int(2, 6);
        StateMetricTable table(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) table.at(i, j) = table.at(j, i) = rng.uniform(0.0, 1.0);
        double eps = rng.uniform(0.0, 1.0);
        std::vector<int> labels = aggregate_states(table, eps);

        // labels form a partition: every state points at its cluster's smallest member
        for (int i = 0; i < n; ++i) {
            CHECK(labels[i] <= i);
            CHECK(labels[labels[i]] == labels[i]);
        }

        // permuting states permutes the partition
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        StateMetricTable permuted(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) permuted.at(perm[i], perm[j]) = table.at(i, j);
        std::vector<int> permuted_labels = aggregate_states(permuted, eps);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                bool same_before = labels[i] == labels[j];
                bool same_after = permuted_labels[perm[i]] == permuted_labels[perm[j]];
                CHECK(same_before == same_after);
            }
    }
}

TEST_CASE("single linkage closes chains transitively") {
    StateMetricTable table(3);
    table.at(0, 1) = table.at(1, 0) = 0.1;
    table.at(1, 2) = table.at(2, 1) = 0.1;
    table.at(0, 2) = table.at(2, 0) = 5.0;
    CHECK(aggregate_states(table, 0.2) == std::vector<int>{0, 0, 0});
}

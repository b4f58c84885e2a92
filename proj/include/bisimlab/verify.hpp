#pragma once

#include "bisimlab/analysis.hpp"
#include "bisimlab/metrics.hpp"
#include "bisimlab/transport.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bisim {

// Brute-force reference for small transport instances: enumerates every
// candidate basis (m+n-1 cells), solves each spanning tree by leaf peeling
// and keeps the cheapest feasible vertex. Independent of the simplex path;
// practical for supports up to ~4x4.
double wasserstein1_vertex_oracle(const std::vector<double>& mu, const std::vector<double>& nu,
                                  const std::vector<double>& cost);

struct SuiteOptions {
    uint64_t seed = 2024;
    int n_cases = 100;
    double tol = 1e-9;
    double toy_gamma = 0.9;
    int threads = 1;  // independent cases may run in parallel; results are order-fixed

    // Test seam: replaces the revised pair update inside the contraction check
    // so a broken operator demonstrably trips the suite.
    std::function<PairMetricTable(const TabularMdp&, const PolicyTable&, const StateMetricTable&)>
        pair_op_override;
};

struct SuiteCheck {
    std::string quantity;
    double expected = 0.0;
    double actual = 0.0;
    double abs_error = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::vector<SuiteCheck> checks;
    bool all_pass = true;
};

// Seeded random-MDP property suite covering the contraction bounds, fixed
// point uniqueness, geometric residual decay, the value/Q bounds with the
// 2-state tightness witness, the reward-gap inequality, the weighted scaling
// identity and the transport-vs-oracle comparison, plus the toy closed forms.
SuiteReport run_verification_suite(const SuiteOptions& options = {});

}  // namespace bisim

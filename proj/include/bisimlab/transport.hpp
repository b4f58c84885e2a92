#pragma once

#include <vector>

namespace bisim {

struct TransportPlan {
    double value = 0.0;
    int n_rows = 0;
    int n_cols = 0;
    std::vector<double> coupling;  // [i][j]; row sums = mu, column sums = nu

    double at(int i, int j) const { return coupling[static_cast<size_t>(i) * n_cols + j]; }
};

// Exact Wasserstein-1 between finite discrete distributions under ground cost
// `cost` (row-major, mu.size() x nu.size(), nonnegative finite entries).
// Transportation simplex: north-west-corner start, cycle pivoting, Bland's
// rule on the entering cell, lexicographic (smallest cell index) leaving ties.
// Zero-weight atoms are dropped before solving and reinserted as zero rows.
// Throws std::invalid_argument on dimension mismatch or invalid distributions.
TransportPlan wasserstein1(const std::vector<double>& mu, const std::vector<double>& nu,
                           const std::vector<double>& cost);

}  // namespace bisim

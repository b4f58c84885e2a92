#include "bisimlab/random_mdp.hpp"

#include <cmath>

namespace bisim {

namespace {

// Uniform simplex sample via normalized exponentials, last entry patched so
// the row sums to 1 exactly in floating point.
void fill_simplex_row(Rng& rng, double* row, int n) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        row[k] = -std::log(1.0 - rng.unit());
        sum += row[k];
    }
    double acc = 0.0;
    for (int k = 0; k < n - 1; ++k) {
        row[k] /= sum;
        acc += row[k];
    }
    row[n - 1] = 1.0 - acc;
    if (row[n - 1] < 0.0) row[n - 1] = 0.0;  // fp dust on nearly-degenerate rows
}

}  // namespace

std::pair<TabularMdp, PolicyTable> random_mdp(Rng& rng, const RandomMdpSpec& spec) {
    const int n = rng.uniform_int(spec.min_states, spec.max_states);
    const int na = rng.uniform_int(spec.min_actions, spec.max_actions);
    const double gamma = rng.uniform(spec.min_gamma, spec.max_gamma);

    TabularMdp mdp = TabularMdp::zeros(n, na, gamma);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < na; ++a) {
            fill_simplex_row(rng, &mdp.transition[(static_cast<size_t>(s) * na + a) * n], n);
            mdp.r(s, a) = rng.uniform(spec.reward_lo, spec.reward_hi);
        }
    }

    PolicyTable pi;
    pi.n_states = n;
    pi.n_actions = na;
    pi.probs.resize(static_cast<size_t>(n) * na);
    for (int s = 0; s < n; ++s) fill_simplex_row(rng, &pi.probs[static_cast<size_t>(s) * na], na);
    return {mdp, pi};
}

}  // namespace bisim

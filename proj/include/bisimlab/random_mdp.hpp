#pragma once

#include "bisimlab/mdp.hpp"

namespace bisim {

struct RandomMdpSpec {
    int min_states = 2;
    int max_states = 6;
    int min_actions = 1;
    int max_actions = 4;
    double min_gamma = 0.5;
    double max_gamma = 0.99;
    double reward_lo = -1.0;
    double reward_hi = 1.0;
};

// Dense random instance: transition and policy rows drawn from the uniform
// simplex, rewards uniform in [reward_lo, reward_hi]. Rows are patched to sum
// to 1 exactly so validate_mdp accepts them at the 1e-12 tolerance.
std::pair<TabularMdp, PolicyTable> random_mdp(Rng& rng, const RandomMdpSpec& spec = {});

}  // namespace bisim

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace bisim {

// Canonical flattening of the joint space X = S x A. Every table indexed by
// state-action pairs uses this layout.
inline int pair_index(int s, int a, int n_actions) { return s * n_actions + a; }

// Probability rows must sum to 1 within this tolerance on load/validation.
// Inputs that miss it are rejected, never renormalized.
inline constexpr double kRowSumTol = 1e-12;

struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // [s][a][s'], each (s,a) row a distribution
    std::vector<double> reward;      // [s][a]
    double gamma = 0.0;              // in (0,1)
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p(int s, int a, int s2) {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<size_t>(s) * n_actions + a]; }
    double& r(int s, int a) { return reward[static_cast<size_t>(s) * n_actions + a]; }

    int n_pairs() const { return n_states * n_actions; }
    double max_abs_reward() const;

    // Allocates zeroed tables and default names; transitions must be filled in.
    static TabularMdp zeros(int n_states, int n_actions, double gamma);
};

struct PolicyTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs;  // [s][a], rows sum to 1

    double pi(int s, int a) const { return probs[static_cast<size_t>(s) * n_actions + a]; }
    double& pi(int s, int a) { return probs[static_cast<size_t>(s) * n_actions + a]; }

    static PolicyTable uniform(int n_states, int n_actions);
};

struct ValueTable {
    std::vector<double> v;  // [s]
    std::vector<double> q;  // [s][a]
    double residual = 0.0;  // sup-norm Bellman residual of v
    double tol = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct Violation {
    std::string kind;  // row-sum | negative-entry | gamma-range | nonfinite | shape
    int row = -1;      // flattened (s,a) for transition rows, s for policy rows
    double magnitude = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Violations are data, not failures: returns one entry per broken invariant.
ValidationReport validate_mdp(const TabularMdp& mdp, const PolicyTable& policy);

// r_s^pi = sum_a pi(a|s) r(s,a)
double marginal_reward(const TabularMdp& mdp, const PolicyTable& policy, int s);

// P_s^pi = sum_a pi(a|s) P(.|s,a); sums to 1 within kRowSumTol
std::vector<double> marginal_transition(const TabularMdp& mdp, const PolicyTable& policy, int s);

// Jacobi policy evaluation. The returned v is the iterate whose measured
// Bellman residual is reported; q(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) v(s').
// Exhausting max_iters sets converged = false instead of throwing.
ValueTable policy_values(const TabularMdp& mdp, const PolicyTable& policy, double tol = 1e-9,
                         int max_iters = 100000);

// Deterministic generator. The 53-bit unit draw keeps sequences stable across
// standard library implementations.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(uint64_t seed) : gen(seed) {}

    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        int span = hi - lo + 1;
        int k = static_cast<int>(unit() * span);
        return lo + (k >= span ? span - 1 : k);
    }
    // Index drawn by cumulative weight; weights need not be exactly normalized.
    int sample(const double* w, int n);
};

struct Step {
    int action = -1;
    double reward = 0.0;
    int next_state = -1;
};

// a ~ pi(.|s), s' ~ P(.|s,a), reward = r(s,a). Same seed, same trajectory.
Step sample_transition(const TabularMdp& mdp, const PolicyTable& policy, Rng& rng, int s);

}  // namespace bisim

#pragma once

#include "bisimlab/mdp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bisim {

// Symmetric nonnegative pairwise table over states.
struct StateMetricTable {
    int n = 0;
    std::vector<double> d;  // [i][j]

    StateMetricTable() = default;
    StateMetricTable(int n_, double fill = 0.0) : n(n_), d(static_cast<size_t>(n_) * n_, fill) {}

    double at(int i, int j) const { return d[static_cast<size_t>(i) * n + j]; }
    double& at(int i, int j) { return d[static_cast<size_t>(i) * n + j]; }
    double sup_norm() const;
};

// Same, over state-action pairs in the pair_index layout.
struct PairMetricTable {
    int n = 0;  // n_states * n_actions
    std::vector<double> g;

    PairMetricTable() = default;
    PairMetricTable(int n_, double fill = 0.0) : n(n_), g(static_cast<size_t>(n_) * n_, fill) {}

    double at(int x, int y) const { return g[static_cast<size_t>(x) * n + y]; }
    double& at(int x, int y) { return g[static_cast<size_t>(x) * n + y]; }
    double sup_norm() const;
};

double sup_distance(const StateMetricTable& a, const StateMetricTable& b);
double sup_distance(const PairMetricTable& a, const PairMetricTable& b);

enum class OperatorKind { classic, mico, revised, weighted };

OperatorKind operator_kind_from_string(const std::string& name);
std::string to_string(OperatorKind kind);

// Classic on-policy operator: |r^pi gap| + gamma * W1 under ground cost d.
// Transport solves are cached per unordered pair within the sweep.
StateMetricTable apply_classic_operator(const TabularMdp& mdp, const PolicyTable& policy,
                                        const StateMetricTable& d);

// Independent-coupling variant keeping the |r^pi gap| reward term.
StateMetricTable apply_mico_operator(const TabularMdp& mdp, const PolicyTable& policy,
                                     const StateMetricTable& u);

// U(s_i,s_j) = E_{a_i,a_j ~ pi}[ G((s_i,a_i),(s_j,a_j)) ]
StateMetricTable apply_revised_u(const TabularMdp& mdp, const PolicyTable& policy,
                                 const PairMetricTable& g);

// G(x_i,x_j) = |r gap| + gamma * E_{s_i',s_j' ~ P}[ U(s_i',s_j') ]
PairMetricTable apply_revised_g(const TabularMdp& mdp, const PolicyTable& policy,
                                const StateMetricTable& u);

// (1-c) * |r gap| + c * E_{s_i',s_j' ~ P}[ U(s_i',s_j') ], c in (0,1)
PairMetricTable apply_weighted_g(const TabularMdp& mdp, const PolicyTable& policy,
                                 const StateMetricTable& u, double c);

struct SolveTrace {
    int iterations = 0;
    std::vector<double> residuals;  // sup-norm change per sweep
    bool converged = false;
    double final_residual = 0.0;
};

enum class InitKind { zero, upper_bound };

struct SolveOptions {
    double tol = 1e-9;
    int max_iters = 0;  // 0: Banach a-priori bound with 10x safety factor
    InitKind init = InitKind::zero;
    // Default sweep recomputes U from the current G (Eq. 2) and then G from
    // that fresh U (Eq. 3); the trace residual is the pair-table change, which
    // provably decays at rate <= gamma (<= c for weighted) every sweep.
    // The synchronous flag instead applies both operators to the previous
    // sweep's tables; its max-of-both residual only contracts every other
    // sweep, so the per-sweep rate guarantee does not apply.
    bool synchronous = false;
    double weight_c = 0.5;  // weighted operator only
};

struct SolveResult {
    StateMetricTable u;
    std::optional<PairMetricTable> g;  // revised and weighted operators only
    SolveTrace trace;
};

int default_max_iters(double gamma, double max_abs_reward, double tol);

// Fixed-point iteration for any of the four operators. Stops once the
// sup-norm update falls to tol * (1 - gamma), which by the a-posteriori
// contraction bound puts the returned tables within tol of the unique fixed
// point. Ties at exactly the threshold resolve to converged; exhausting
// max_iters sets converged = false instead of throwing.
SolveResult solve_fixed_point(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                              const SolveOptions& options = {});

// ||F(a) - F(b)||_inf / ||a - b||_inf for the state-table operators
// (classic, mico, and the revised composition F_u . F_g).
double contraction_ratio(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                         const StateMetricTable& a, const StateMetricTable& b, double weight_c = 0.5);

// Pair-table composition (revised: F_g . F_u; weighted: W_c . F_u).
double contraction_ratio(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                         const PairMetricTable& a, const PairMetricTable& b, double weight_c = 0.5);

}  // namespace bisim

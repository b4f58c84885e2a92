#include "bisimlab/metrics.hpp"

#include "bisimlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bisim {

double StateMetricTable::sup_norm() const {
    double m = 0.0;
    for (double x : d) m = std::max(m, std::abs(x));
    return m;
}

double PairMetricTable::sup_norm() const {
    double m = 0.0;
    for (double x : g) m = std::max(m, std::abs(x));
    return m;
}

double sup_distance(const StateMetricTable& a, const StateMetricTable& b) {
    double m = 0.0;
    for (size_t k = 0; k < a.d.size(); ++k) m = std::max(m, std::abs(a.d[k] - b.d[k]));
    return m;
}

double sup_distance(const PairMetricTable& a, const PairMetricTable& b) {
    double m = 0.0;
    for (size_t k = 0; k < a.g.size(); ++k) m = std::max(m, std::abs(a.g[k] - b.g[k]));
    return m;
}

OperatorKind operator_kind_from_string(const std::string& name) {
    if (name == "classic") return OperatorKind::classic;
    if (name == "mico") return OperatorKind::mico;
    if (name == "revised") return OperatorKind::revised;
    if (name == "weighted") return OperatorKind::weighted;
    throw std::invalid_argument("unknown operator: " + name);
}

std::string to_string(OperatorKind kind) {
    switch (kind) {
        case OperatorKind::classic: return "classic";
        case OperatorKind::mico: return "mico";
        case OperatorKind::revised: return "revised";
        case OperatorKind::weighted: return "weighted";
    }
    return "?";
}

StateMetricTable apply_classic_operator(const TabularMdp& mdp, const PolicyTable& policy,
                                        const StateMetricTable& d) {
    const int n = mdp.n_states;
    std::vector<double> r_pi(n);
    std::vector<std::vector<double>> p_pi(n);
    for (int s = 0; s < n; ++s) {
        r_pi[s] = marginal_reward(mdp, policy, s);
        p_pi[s] = marginal_transition(mdp, policy, s);
    }
    StateMetricTable out(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double w = wasserstein1(p_pi[i], p_pi[j], d.d).value;
            double val = std::abs(r_pi[i] - r_pi[j]) + mdp.gamma * w;
            out.at(i, j) = val;
            out.at(j, i) = val;  // cost table is symmetric, so is the optimum
        }
    }
    return out;
}

StateMetricTable apply_mico_operator(const TabularMdp& mdp, const PolicyTable& policy,
                                     const StateMetricTable& u) {
    const int n = mdp.n_states;
    std::vector<double> r_pi(n);
    std::vector<std::vector<double>> p_pi(n);
    for (int s = 0; s < n; ++s) {
        r_pi[s] = marginal_reward(mdp, policy, s);
        p_pi[s] = marginal_transition(mdp, policy, s);
    }
    StateMetricTable out(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double exp_u = 0.0;
            for (int si = 0; si < n; ++si) {
                if (p_pi[i][si] == 0.0) continue;
                for (int sj = 0; sj < n; ++sj) exp_u += p_pi[i][si] * p_pi[j][sj] * u.at(si, sj);
            }
            double val = std::abs(r_pi[i] - r_pi[j]) + mdp.gamma * exp_u;
            out.at(i, j) = val;
            out.at(j, i) = val;
        }
    }
    return out;
}

StateMetricTable apply_revised_u(const TabularMdp& mdp, const PolicyTable& policy,
                                 const PairMetricTable& g) {
    const int n = mdp.n_states;
    const int na = mdp.n_actions;
    StateMetricTable out(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int ai = 0; ai < na; ++ai) {
                double wi = policy.pi(i, ai);
                if (wi == 0.0) continue;
                for (int aj = 0; aj < na; ++aj) {
                    double wj = policy.pi(j, aj);
                    if (wj == 0.0) continue;
                    acc += wi * wj * g.at(pair_index(i, ai, na), pair_index(j, aj, na));
                }
            }
            out.at(i, j) = acc;
            out.at(j, i) = acc;
        }
    }
    return out;
}

namespace {

PairMetricTable pair_update(const TabularMdp& mdp, const StateMetricTable& u, double reward_w,
                            double next_w) {
    const int n = mdp.n_states;
    const int na = mdp.n_actions;
    const int nx = n * na;
    PairMetricTable out(nx);
    for (int x = 0; x < nx; ++x) {
        const int si = x / na, ai = x % na;
        for (int y = x; y < nx; ++y) {
            const int sj = y / na, aj = y % na;
            double exp_u = 0.0;
            for (int s1 = 0; s1 < n; ++s1) {
                double p1 = mdp.p(si, ai, s1);
                if (p1 == 0.0) continue;
                for (int s2 = 0; s2 < n; ++s2) {
                    double p2 = mdp.p(sj, aj, s2);
                    if (p2 == 0.0) continue;
                    exp_u += p1 * p2 * u.at(s1, s2);
                }
            }
            double val = reward_w * std::abs(mdp.r(si, ai) - mdp.r(sj, aj)) + next_w * exp_u;
            out.at(x, y) = val;
            out.at(y, x) = val;
        }
    }
    return out;
}

}  // namespace

PairMetricTable apply_revised_g(const TabularMdp& mdp, const PolicyTable& policy,
                                const StateMetricTable& u) {
    (void)policy;  // Eq-level update touches only rewards and dynamics
    return pair_update(mdp, u, 1.0, mdp.gamma);
}

PairMetricTable apply_weighted_g(const TabularMdp& mdp, const PolicyTable& policy,
                                 const StateMetricTable& u, double c) {
    (void)policy;
    if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("apply_weighted_g: c must lie in (0,1)");
    return pair_update(mdp, u, 1.0 - c, c);
}

int default_max_iters(double gamma, double max_abs_reward, double tol) {
    // Banach a-priori sweep count for the upper-bound init, 10x safety factor.
    if (max_abs_reward <= tol) return 10;
    double bound = tol * (1.0 - gamma) / (2.0 * max_abs_reward);
    if (bound >= 1.0) return 10;
    int sweeps = static_cast<int>(std::ceil(std::log(bound) / std::log(gamma)));
    return 10 * std::max(sweeps, 1);
}

SolveResult solve_fixed_point(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                              const SolveOptions& options) {
    if (options.tol <= 0.0) throw std::invalid_argument("solve_fixed_point: tol must be positive");
    const double upper = 2.0 * mdp.max_abs_reward() / (1.0 - mdp.gamma);
    const double init_value = options.init == InitKind::zero ? 0.0 : upper;
    // ||x_k - x*|| <= gamma/(1-gamma) * ||x_k - x_{k-1}||, so stopping at
    // tol*(1-gamma) keeps the result within tol of the fixed point.
    const double stop_tol = options.tol * (1.0 - mdp.gamma);
    const int max_iters =
        options.max_iters > 0 ? options.max_iters
                              : default_max_iters(mdp.gamma, mdp.max_abs_reward(), stop_tol);

    SolveResult result;
    SolveTrace& trace = result.trace;

    if (kind == OperatorKind::classic || kind == OperatorKind::mico) {
        StateMetricTable cur(mdp.n_states, init_value);
        for (int it = 0; it < max_iters; ++it) {
            StateMetricTable next = kind == OperatorKind::classic
                                        ? apply_classic_operator(mdp, policy, cur)
                                        : apply_mico_operator(mdp, policy, cur);
            double res = sup_distance(next, cur);
            trace.residuals.push_back(res);
            cur = std::move(next);
            if (res <= stop_tol) break;
        }
        result.u = std::move(cur);
    } else {
        StateMetricTable u(mdp.n_states, init_value);
        PairMetricTable g(mdp.n_pairs(), init_value);
        auto g_step = [&](const StateMetricTable& from_u) {
            return kind == OperatorKind::weighted
                       ? apply_weighted_g(mdp, policy, from_u, options.weight_c)
                       : apply_revised_g(mdp, policy, from_u);
        };
        for (int it = 0; it < max_iters; ++it) {
            StateMetricTable u_next = apply_revised_u(mdp, policy, g);
            PairMetricTable g_next = g_step(options.synchronous ? u : u_next);
            double res = options.synchronous
                             ? std::max(sup_distance(u_next, u), sup_distance(g_next, g))
                             : sup_distance(g_next, g);
            trace.residuals.push_back(res);
            u = std::move(u_next);
            g = std::move(g_next);
            if (res <= stop_tol) break;
        }
        // leave the pair Eq.(2)-consistent: U exactly F_u of the returned G
        result.u = apply_revised_u(mdp, policy, g);
        result.g = std::move(g);
    }

    trace.iterations = static_cast<int>(trace.residuals.size());
    trace.final_residual = trace.residuals.empty() ? 0.0 : trace.residuals.back();
    trace.converged = trace.final_residual <= stop_tol;
    return result;
}

double contraction_ratio(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                         const StateMetricTable& a, const StateMetricTable& b, double weight_c) {
    double denom = sup_distance(a, b);
    if (denom == 0.0) throw std::invalid_argument("contraction_ratio: tables coincide in sup norm");
    StateMetricTable fa, fb;
    switch (kind) {
        case OperatorKind::classic:
            fa = apply_classic_operator(mdp, policy, a);
            fb = apply_classic_operator(mdp, policy, b);
            break;
        case OperatorKind::mico:
            fa = apply_mico_operator(mdp, policy, a);
            fb = apply_mico_operator(mdp, policy, b);
            break;
        case OperatorKind::revised:
            fa = apply_revised_u(mdp, policy, apply_revised_g(mdp, policy, a));
            fb = apply_revised_u(mdp, policy, apply_revised_g(mdp, policy, b));
            break;
        case OperatorKind::weighted:
            fa = apply_revised_u(mdp, policy, apply_weighted_g(mdp, policy, a, weight_c));
            fb = apply_revised_u(mdp, policy, apply_weighted_g(mdp, policy, b, weight_c));
            break;
    }
    return sup_distance(fa, fb) / denom;
}

double contraction_ratio(OperatorKind kind, const TabularMdp& mdp, const PolicyTable& policy,
                         const PairMetricTable& a, const PairMetricTable& b, double weight_c) {
    double denom = sup_distance(a, b);
    if (denom == 0.0) throw std::invalid_argument("contraction_ratio: tables coincide in sup norm");
    PairMetricTable fa, fb;
    switch (kind) {
        case OperatorKind::revised:
            fa = apply_revised_g(mdp, policy, apply_revised_u(mdp, policy, a));
            fb = apply_revised_g(mdp, policy, apply_revised_u(mdp, policy, b));
            break;
        case OperatorKind::weighted:
            fa = apply_weighted_g(mdp, policy, apply_revised_u(mdp, policy, a), weight_c);
            fb = apply_weighted_g(mdp, policy, apply_revised_u(mdp, policy, b), weight_c);
            break;
        default:
            throw std::invalid_argument("contraction_ratio: pair tables require revised or weighted");
    }
    return sup_distance(fa, fb) / denom;
}

}  // namespace bisim

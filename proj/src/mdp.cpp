#include "bisimlab/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace bisim {

double TabularMdp::max_abs_reward() const {
    double m = 0.0;
    for (double x : reward) m = std::max(m, std::abs(x));
    return m;
}

TabularMdp TabularMdp::zeros(int n_states, int n_actions, double gamma) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.transition.assign(static_cast<size_t>(n_states) * n_actions * n_states, 0.0);
    mdp.reward.assign(static_cast<size_t>(n_states) * n_actions, 0.0);
    mdp.state_names.resize(n_states);
    mdp.action_names.resize(n_actions);
    for (int s = 0; s < n_states; ++s) mdp.state_names[s] = "s" + std::to_string(s);
    for (int a = 0; a < n_actions; ++a) mdp.action_names[a] = "a" + std::to_string(a);
    return mdp;
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
    PolicyTable pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.probs.assign(static_cast<size_t>(n_states) * n_actions, 1.0 / n_actions);
    return pi;
}

namespace {

void check_distribution_row(std::vector<Violation>& out, const double* row, int n,
                            const std::string& what, int row_index) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        double x = row[k];
        if (!std::isfinite(x)) {
            out.push_back({"nonfinite", row_index, 0.0, what + " row has a non-finite entry"});
            return;
        }
        if (x < 0.0) {
            out.push_back({"negative-entry", row_index, -x, what + " row has a negative entry"});
        }
        sum += x;
    }
    double err = std::abs(sum - 1.0);
    if (err > kRowSumTol) {
        out.push_back({"row-sum", row_index, err, what + " row sums to " + std::to_string(sum)});
    }
}

}  // namespace

ValidationReport validate_mdp(const TabularMdp& mdp, const PolicyTable& policy) {
    ValidationReport report;
    auto& out = report.violations;

    if (mdp.n_states <= 0 || mdp.n_actions <= 0) {
        out.push_back({"shape", -1, 0.0, "MDP must have at least one state and one action"});
        return report;
    }
    size_t nt = static_cast<size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states;
    size_t nr = static_cast<size_t>(mdp.n_states) * mdp.n_actions;
    if (mdp.transition.size() != nt || mdp.reward.size() != nr) {
        out.push_back({"shape", -1, 0.0, "transition/reward tables do not match |S|,|A|"});
        return report;
    }

    if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
        out.push_back({"gamma-range", -1, mdp.gamma, "gamma must lie in the open interval (0,1)"});
    }
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            check_distribution_row(out, &mdp.transition[(static_cast<size_t>(s) * mdp.n_actions + a) * mdp.n_states],
                                   mdp.n_states, "transition", pair_index(s, a, mdp.n_actions));
            if (!std::isfinite(mdp.r(s, a))) {
                out.push_back({"nonfinite", pair_index(s, a, mdp.n_actions), 0.0, "reward entry is not finite"});
            }
        }
    }

    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions ||
        policy.probs.size() != nr) {
        out.push_back({"shape", -1, 0.0, "policy table does not match |S|,|A|"});
        return report;
    }
    for (int s = 0; s < mdp.n_states; ++s) {
        check_distribution_row(out, &policy.probs[static_cast<size_t>(s) * mdp.n_actions],
                               mdp.n_actions, "policy", s);
    }
    return report;
}

double marginal_reward(const TabularMdp& mdp, const PolicyTable& policy, int s) {
    if (s < 0 || s >= mdp.n_states) throw std::out_of_range("marginal_reward: state index out of range");
    double r = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) r += policy.pi(s, a) * mdp.r(s, a);
    return r;
}

std::vector<double> marginal_transition(const TabularMdp& mdp, const PolicyTable& policy, int s) {
    if (s < 0 || s >= mdp.n_states) throw std::out_of_range("marginal_transition: state index out of range");
    std::vector<double> dist(mdp.n_states, 0.0);
    for (int a = 0; a < mdp.n_actions; ++a) {
        double w = policy.pi(s, a);
        if (w == 0.0) continue;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) dist[s2] += w * mdp.p(s, a, s2);
    }
    return dist;
}

ValueTable policy_values(const TabularMdp& mdp, const PolicyTable& policy, double tol, int max_iters) {
    if (tol <= 0.0) throw std::invalid_argument("policy_values: tol must be positive");
    const int n = mdp.n_states;

    auto bellman = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (int s = 0; s < n; ++s) {
            double acc = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double w = policy.pi(s, a);
                if (w == 0.0) continue;
                double ev = 0.0;
                for (int s2 = 0; s2 < n; ++s2) ev += mdp.p(s, a, s2) * v[s2];
                acc += w * (mdp.r(s, a) + mdp.gamma * ev);
            }
            out[s] = acc;
        }
    };

    ValueTable result;
    result.tol = tol;
    std::vector<double> v(n, 0.0), tv(n, 0.0);
    double res = 0.0;
    int it = 0;
    // Reported v is always the iterate whose Bellman residual was measured.
    for (it = 0; it < max_iters; ++it) {
        bellman(v, tv);
        res = 0.0;
        for (int s = 0; s < n; ++s) res = std::max(res, std::abs(tv[s] - v[s]));
        if (res <= tol) break;
        v.swap(tv);
    }
    result.iterations = (it < max_iters) ? it + 1 : max_iters;
    result.converged = res <= tol;
    result.residual = res;
    result.v = v;
    result.q.assign(static_cast<size_t>(n) * mdp.n_actions, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            double ev = 0.0;
            for (int s2 = 0; s2 < n; ++s2) ev += mdp.p(s, a, s2) * v[s2];
            result.q[pair_index(s, a, mdp.n_actions)] = mdp.r(s, a) + mdp.gamma * ev;
        }
    }
    return result;
}

int Rng::sample(const double* w, int n) {
    double u = unit();
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        acc += w[k];
        if (u < acc) return k;
    }
    // fp dust: fall back to the last index with positive weight
    for (int k = n - 1; k >= 0; --k)
        if (w[k] > 0.0) return k;
    return n - 1;
}

Step sample_transition(const TabularMdp& mdp, const PolicyTable& policy, Rng& rng, int s) {
    if (s < 0 || s >= mdp.n_states) throw std::out_of_range("sample_transition: state index out of range");
    Step step;
    step.action = rng.sample(&policy.probs[static_cast<size_t>(s) * mdp.n_actions], mdp.n_actions);
    step.reward = mdp.r(s, step.action);
    step.next_state =
        rng.sample(&mdp.transition[(static_cast<size_t>(s) * mdp.n_actions + step.action) * mdp.n_states],
                   mdp.n_states);
    return step;
}

}  // namespace bisim

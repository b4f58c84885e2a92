#include "bisimlab/verify.hpp"

#include "bisimlab/random_mdp.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace bisim {

namespace {

// Leaf-peeling solve of one candidate basis. Returns false when the cell set
// is not a feasible spanning tree.
bool solve_basis(const std::vector<int>& cells, int m, int n, const std::vector<double>& mu,
                 const std::vector<double>& nu, const std::vector<double>& cost, double& value) {
    std::vector<double> rem_a(mu), rem_b(nu);
    std::vector<int> row_deg(m, 0), col_deg(n, 0);
    std::vector<char> active(cells.size(), 1);
    for (int c : cells) {
        ++row_deg[c / n];
        ++col_deg[c % n];
    }
    value = 0.0;
    size_t remaining = cells.size();
    while (remaining > 0) {
        int pick = -1;
        bool row_leaf = false;
        for (size_t k = 0; k < cells.size(); ++k) {
            if (!active[k]) continue;
            int i = cells[k] / n, j = cells[k] % n;
            if (row_deg[i] == 1) {
                pick = static_cast<int>(k);
                row_leaf = true;
                break;
            }
            if (col_deg[j] == 1) {
                pick = static_cast<int>(k);
                row_leaf = false;
                break;
            }
        }
        if (pick < 0) return false;  // cycle
        int i = cells[pick] / n, j = cells[pick] % n;
        double flow = row_leaf ? rem_a[i] : rem_b[j];
        if (flow < -1e-12) return false;
        rem_a[i] -= flow;
        rem_b[j] -= flow;
        value += std::max(flow, 0.0) * cost[static_cast<size_t>(i) * n + j];
        active[pick] = 0;
        --row_deg[i];
        --col_deg[j];
        --remaining;
    }
    for (double r : rem_a)
        if (std::abs(r) > 1e-9) return false;
    for (double r : rem_b)
        if (std::abs(r) > 1e-9) return false;
    return true;
}

std::pair<TabularMdp, PolicyTable> two_state_selfloop_mdp(double gamma) {
    TabularMdp mdp = TabularMdp::zeros(2, 1, gamma);
    mdp.p(0, 0, 0) = 1.0;
    mdp.p(1, 0, 1) = 1.0;
    mdp.r(0, 0) = 0.0;
    mdp.r(1, 0) = 1.0;
    return {mdp, PolicyTable::uniform(2, 1)};
}

StateMetricTable random_state_table(Rng& rng, int n, double hi) {
    StateMetricTable t(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) t.at(i, j) = t.at(j, i) = rng.uniform(0.0, hi);
    return t;
}

PairMetricTable random_pair_table(Rng& rng, int n, double hi) {
    PairMetricTable t(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) t.at(i, j) = t.at(j, i) = rng.uniform(0.0, hi);
    return t;
}

struct CaseResult {
    double margin_revised_state = -1.0;  // ratio - gamma
    double margin_revised_pair = -1.0;
    double margin_weighted = -1.0;  // ratio - c
    double margin_mico = -1.0;
    double margin_classic = -1.0;
    double uniqueness_dev = 0.0;
    double decay_margin = -1.0;  // res_k - gamma*res_{k-1}, slack expected
    double value_violation = -1e300;
    double q_violation = -1e300;
    double delta_margin = -1e300;  // delta2 - delta1
    double scaling_dev = 0.0;      // weighted vs scaled revised (first 5 cases)
    double transport_dev = 0.0;    // simplex vs vertex oracle (|S| <= 4)
};

}  // namespace

double wasserstein1_vertex_oracle(const std::vector<double>& mu, const std::vector<double>& nu,
                                  const std::vector<double>& cost) {
    std::vector<int> rows, cols;
    for (size_t i = 0; i < mu.size(); ++i)
        if (mu[i] > 0.0) rows.push_back(static_cast<int>(i));
    for (size_t j = 0; j < nu.size(); ++j)
        if (nu[j] > 0.0) cols.push_back(static_cast<int>(j));
    const int m = static_cast<int>(rows.size());
    const int n = static_cast<int>(cols.size());
    if (m == 0 || n == 0) throw std::invalid_argument("vertex oracle: empty support");
    if (m * n > 20) throw std::invalid_argument("vertex oracle: support too large");

    std::vector<double> a(m), b(n), c(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) a[i] = mu[rows[i]];
    for (int j = 0; j < n; ++j) b[j] = nu[cols[j]];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            c[static_cast<size_t>(i) * n + j] = cost[static_cast<size_t>(rows[i]) * nu.size() + cols[j]];

    const int cells = m * n;
    const int k = m + n - 1;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << cells); ++mask) {
        if (std::popcount(mask) != k) continue;
        std::vector<int> chosen;
        chosen.reserve(k);
        for (int t = 0; t < cells; ++t)
            if (mask & (1u << t)) chosen.push_back(t);
        double value;
        if (solve_basis(chosen, m, n, a, b, c, value)) best = std::min(best, value);
    }
    if (!std::isfinite(best)) throw std::runtime_error("vertex oracle: no feasible vertex found");
    return best;
}

SuiteReport run_verification_suite(const SuiteOptions& options) {
    SuiteReport report;
    auto add = [&](const std::string& quantity, double expected, double actual, double tolerance) {
        SuiteCheck check;
        check.quantity = quantity;
        check.expected = expected;
        check.actual = actual;
        check.abs_error = std::abs(actual - expected);
        check.pass = actual <= expected + tolerance;
        report.checks.push_back(check);
        report.all_pass = report.all_pass && check.pass;
    };

    const int n_cases = options.n_cases;
    std::vector<CaseResult> results(n_cases);

    auto run_case = [&](int index) {
        CaseResult& res = results[index];
        Rng rng(options.seed * 1000003ULL + static_cast<uint64_t>(index));
        auto [mdp, policy] = random_mdp(rng);
        const double gamma = mdp.gamma;
        const double hi = std::max(1.0, 2.0 * mdp.max_abs_reward() / (1.0 - gamma));

        StateMetricTable sa = random_state_table(rng, mdp.n_states, hi);
        StateMetricTable sb = random_state_table(rng, mdp.n_states, hi);
        PairMetricTable pa = random_pair_table(rng, mdp.n_pairs(), hi);
        PairMetricTable pb = random_pair_table(rng, mdp.n_pairs(), hi);
        double c = rng.uniform(0.05, 0.95);

        if (options.pair_op_override) {
            auto composed = [&](const StateMetricTable& t) {
                return apply_revised_u(mdp, policy, options.pair_op_override(mdp, policy, t));
            };
            StateMetricTable fa = composed(sa), fb = composed(sb);
            res.margin_revised_state = sup_distance(fa, fb) / sup_distance(sa, sb) - gamma;
        } else {
            res.margin_revised_state =
                contraction_ratio(OperatorKind::revised, mdp, policy, sa, sb) - gamma;
        }
        res.margin_revised_pair = contraction_ratio(OperatorKind::revised, mdp, policy, pa, pb) - gamma;
        res.margin_weighted = contraction_ratio(OperatorKind::weighted, mdp, policy, pa, pb, c) - c;
        res.margin_mico = contraction_ratio(OperatorKind::mico, mdp, policy, sa, sb) - gamma;
        res.margin_classic = contraction_ratio(OperatorKind::classic, mdp, policy, sa, sb) - gamma;

        SolveOptions solve_opts;
        solve_opts.tol = options.tol;
        SolveResult from_zero = solve_fixed_point(OperatorKind::revised, mdp, policy, solve_opts);
        SolveOptions upper_opts = solve_opts;
        upper_opts.init = InitKind::upper_bound;
        SolveResult from_upper = solve_fixed_point(OperatorKind::revised, mdp, policy, upper_opts);
        res.uniqueness_dev = std::max(sup_distance(from_zero.u, from_upper.u),
                                      sup_distance(*from_zero.g, *from_upper.g));

        const auto& residuals = from_upper.trace.residuals;
        for (size_t k = 1; k < residuals.size(); ++k)
            res.decay_margin = std::max(res.decay_margin, residuals[k] - gamma * residuals[k - 1]);

        res.value_violation = check_value_bound(mdp, policy, from_zero.u, options.tol).max_violation;
        res.q_violation = check_q_bound(mdp, policy, *from_zero.g, options.tol).max_violation;

        GapComparison gaps = reward_gap_comparison(mdp, policy);
        for (size_t k = 0; k < gaps.delta1.d.size(); ++k)
            res.delta_margin = std::max(res.delta_margin, gaps.delta2.d[k] - gaps.delta1.d[k]);

        if (index < 5) {
            // weighted joint system with coefficient c* is, exactly, the revised
            // system run at discount c* and scaled by (1-c*); with
            // c* = gamma/(1+gamma) the scale is 1/(1+gamma)
            double c_star = gamma / (1.0 + gamma);
            SolveOptions weighted_opts = solve_opts;
            weighted_opts.weight_c = c_star;
            SolveResult weighted = solve_fixed_point(OperatorKind::weighted, mdp, policy, weighted_opts);
            TabularMdp rescaled = mdp;
            rescaled.gamma = c_star;
            SolveResult revised_at_c = solve_fixed_point(OperatorKind::revised, rescaled, policy, solve_opts);
            double scale = 1.0 / (1.0 + gamma);
            double dev = 0.0;
            for (size_t k = 0; k < weighted.g->g.size(); ++k)
                dev = std::max(dev, std::abs(weighted.g->g[k] - scale * revised_at_c.g->g[k]));
            for (size_t k = 0; k < weighted.u.d.size(); ++k)
                dev = std::max(dev, std::abs(weighted.u.d[k] - scale * revised_at_c.u.d[k]));
            res.scaling_dev = dev;
        }

        if (mdp.n_states <= 4) {
            SolveResult classic = solve_fixed_point(OperatorKind::classic, mdp, policy, solve_opts);
            for (int i = 0; i < mdp.n_states; ++i) {
                std::vector<double> pi_i = marginal_transition(mdp, policy, i);
                for (int j = i + 1; j < mdp.n_states; ++j) {
                    std::vector<double> pi_j = marginal_transition(mdp, policy, j);
                    double simplex = wasserstein1(pi_i, pi_j, classic.u.d).value;
                    double oracle = wasserstein1_vertex_oracle(pi_i, pi_j, classic.u.d);
                    res.transport_dev = std::max(res.transport_dev, std::abs(simplex - oracle));
                }
            }
        }
    };

    int threads = std::max(1, options.threads);
    threads = std::min(threads, n_cases > 0 ? n_cases : 1);
    if (threads <= 1) {
        for (int i = 0; i < n_cases; ++i) run_case(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n_cases; i = next.fetch_add(1)) run_case(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    CaseResult agg;
    for (const CaseResult& r : results) {
        agg.margin_revised_state = std::max(agg.margin_revised_state, r.margin_revised_state);
        agg.margin_revised_pair = std::max(agg.margin_revised_pair, r.margin_revised_pair);
        agg.margin_weighted = std::max(agg.margin_weighted, r.margin_weighted);
        agg.margin_mico = std::max(agg.margin_mico, r.margin_mico);
        agg.margin_classic = std::max(agg.margin_classic, r.margin_classic);
        agg.uniqueness_dev = std::max(agg.uniqueness_dev, r.uniqueness_dev);
        agg.decay_margin = std::max(agg.decay_margin, r.decay_margin);
        agg.value_violation = std::max(agg.value_violation, r.value_violation);
        agg.q_violation = std::max(agg.q_violation, r.q_violation);
        agg.delta_margin = std::max(agg.delta_margin, r.delta_margin);
        agg.scaling_dev = std::max(agg.scaling_dev, r.scaling_dev);
        agg.transport_dev = std::max(agg.transport_dev, r.transport_dev);
    }

    const double tol10 = 10.0 * options.tol;
    add("contraction margin, revised F_u.F_g (ratio - gamma)", 0.0, agg.margin_revised_state, 1e-12);
    add("contraction margin, revised F_g.F_u (ratio - gamma)", 0.0, agg.margin_revised_pair, 1e-12);
    add("contraction margin, weighted (ratio - c)", 0.0, agg.margin_weighted, 1e-12);
    add("contraction margin, independent coupling (ratio - gamma)", 0.0, agg.margin_mico, 1e-12);
    add("contraction margin, classic (ratio - gamma)", 0.0, agg.margin_classic, 1e-12);
    add("fixed point deviation across inits", 0.0, agg.uniqueness_dev, tol10);
    add("residual decay margin beyond sweep 1", 0.0, agg.decay_margin, 1e-12);
    add("value bound max violation", 0.0, agg.value_violation, tol10);
    add("Q bound max violation", 0.0, agg.q_violation, tol10);
    add("reward gap margin (delta2 - delta1)", 0.0, agg.delta_margin, 1e-12);
    add("weighted scaling identity deviation", 0.0, agg.scaling_dev, tol10);
    add("transport simplex vs vertex oracle", 0.0, agg.transport_dev, 1e-9);

    // tightness witness: both sides of the value/Q bounds coincide here
    {
        auto [mdp, policy] = two_state_selfloop_mdp(0.9);
        SolveOptions solve_opts;
        solve_opts.tol = options.tol;
        SolveResult fixed = solve_fixed_point(OperatorKind::revised, mdp, policy, solve_opts);
        BoundReport vb = check_value_bound(mdp, policy, fixed.u, options.tol);
        BoundReport qb = check_q_bound(mdp, policy, *fixed.g, options.tol);
        add("tightness witness |value violation|", 0.0, std::abs(vb.max_violation), tol10);
        add("tightness witness |Q violation|", 0.0, std::abs(qb.max_violation), tol10);
    }

    for (double gamma : {0.1, 0.5, options.toy_gamma, 0.99}) {
        ToyVerification toy = verify_toy_closed_forms(gamma);
        double max_err = 0.0;
        for (const QuantityCheck& c : toy.checks) max_err = std::max(max_err, c.abs_error);
        add("toy closed forms max |error| (gamma=" + std::to_string(gamma) + ")", 0.0, max_err, 1e-8);
    }

    // separation: the revised metric distinguishes s1 and s2, the classic one cannot
    {
        double min_revised = std::numeric_limits<double>::infinity();
        double max_classic = 0.0;
        for (double gamma : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
            auto [mdp, policy] = toy_example_mdp(gamma);
            min_revised = std::min(min_revised,
                                   solve_fixed_point(OperatorKind::revised, mdp, policy).u.at(0, 1));
            max_classic = std::max(max_classic,
                                   solve_fixed_point(OperatorKind::classic, mdp, policy).u.at(0, 1));
        }
        add("toy separation: -min revised U(s1,s2)", 0.0, -min_revised, -1e-6);
        add("toy separation: classic d(s1,s2)", 0.0, max_classic, 1e-8);

        auto [mdp, policy] = toy_example_mdp(options.toy_gamma);
        GapComparison gaps = reward_gap_comparison(mdp, policy);
        add("toy |delta1(s1,s2) - 0.25|", 0.0, std::abs(gaps.delta1.at(0, 1) - 0.25), 1e-12);
        add("toy delta2(s1,s2)", 0.0, gaps.delta2.at(0, 1), 1e-12);
    }

    return report;
}

}  // namespace bisim

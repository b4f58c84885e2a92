#include "bisimlab/analysis.hpp"
#include "bisimlab/io.hpp"
#include "bisimlab/metrics.hpp"
#include "bisimlab/random_mdp.hpp"
#include "bisimlab/representation.hpp"
#include "bisimlab/transport.hpp"
#include "bisimlab/verify.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bisim;

namespace {

std::vector<std::vector<double>> to_rows(const std::vector<double>& flat, int rows, int cols) {
    std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out[i][j] = flat[static_cast<size_t>(i) * cols + j];
    return out;
}

std::vector<double> from_rows(const std::vector<std::vector<double>>& rows, const char* what) {
    std::vector<double> flat;
    if (rows.empty()) throw std::invalid_argument(std::string(what) + ": empty matrix");
    size_t cols = rows[0].size();
    for (const auto& row : rows) {
        if (row.size() != cols) throw std::invalid_argument(std::string(what) + ": ragged matrix");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
}

StateMetricTable state_table_from_rows(const std::vector<std::vector<double>>& rows) {
    StateMetricTable t;
    t.n = static_cast<int>(rows.size());
    t.d = from_rows(rows, "state metric table");
    if (t.d.size() != static_cast<size_t>(t.n) * t.n)
        throw std::invalid_argument("state metric table must be square");
    return t;
}

TrainConfig config_from_kwargs(const std::string& distance, double beta, int batch_size, double lr,
                               double c_lr, int steps, uint64_t seed, const std::string& loss,
                               int record_interval, int buffer_capacity) {
    TrainConfig config;
    config.distance_kind = distance_kind_from_string(distance);
    config.beta = beta;
    config.batch_size = batch_size;
    config.learning_rate = lr;
    config.c_learning_rate = c_lr;
    config.steps = steps;
    config.seed = seed;
    config.loss_kind = loss_kind_from_string(loss);
    config.c_record_interval = record_interval;
    config.buffer_capacity = buffer_capacity;
    return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "bisimulation metric laboratory for tabular MDPs";

    py::class_<TabularMdp>(m, "TabularMdp")
        .def_readonly("n_states", &TabularMdp::n_states)
        .def_readonly("n_actions", &TabularMdp::n_actions)
        .def_readonly("gamma", &TabularMdp::gamma)
        .def_readonly("state_names", &TabularMdp::state_names)
        .def_readonly("action_names", &TabularMdp::action_names)
        .def("reward", static_cast<double (TabularMdp::*)(int, int) const>(&TabularMdp::r),
             py::arg("s"), py::arg("a"))
        .def("transition_prob",
             static_cast<double (TabularMdp::*)(int, int, int) const>(&TabularMdp::p), py::arg("s"),
             py::arg("a"), py::arg("s_next"))
        .def("with_gamma", [](const TabularMdp& mdp, double gamma) {
            TabularMdp out = mdp;
            out.gamma = gamma;
            return out;
        });

    py::class_<PolicyTable>(m, "PolicyTable")
        .def_readonly("n_states", &PolicyTable::n_states)
        .def_readonly("n_actions", &PolicyTable::n_actions)
        .def("prob", static_cast<double (PolicyTable::*)(int, int) const>(&PolicyTable::pi),
             py::arg("s"), py::arg("a"));

    m.def("make_mdp",
          [](std::vector<std::vector<std::vector<double>>> transition,
             std::vector<std::vector<double>> reward, std::vector<std::vector<double>> policy,
             double gamma) {
              TabularMdp mdp;
              mdp.n_states = static_cast<int>(transition.size());
              mdp.n_actions = mdp.n_states > 0 ? static_cast<int>(transition[0].size()) : 0;
              for (auto& per_state : transition) {
                  auto rows = from_rows(per_state, "transition");
                  mdp.transition.insert(mdp.transition.end(), rows.begin(), rows.end());
              }
              mdp.reward = from_rows(reward, "reward");
              mdp.gamma = gamma;
              mdp.state_names.resize(mdp.n_states);
              mdp.action_names.resize(mdp.n_actions);
              for (int s = 0; s < mdp.n_states; ++s) mdp.state_names[s] = "s" + std::to_string(s);
              for (int a = 0; a < mdp.n_actions; ++a) mdp.action_names[a] = "a" + std::to_string(a);
              PolicyTable pi;
              pi.n_states = mdp.n_states;
              pi.n_actions = mdp.n_actions;
              pi.probs = from_rows(policy, "policy");
              ValidationReport report = validate_mdp(mdp, pi);
              if (!report.ok()) {
                  std::string msg = "invalid MDP:";
                  for (const Violation& v : report.violations) msg += " [" + v.kind + "] " + v.message;
                  throw std::invalid_argument(msg);
              }
              return std::make_pair(mdp, pi);
          },
          py::arg("transition"), py::arg("reward"), py::arg("policy"), py::arg("gamma"),
          "Build and validate a tabular MDP from nested lists");

    m.def("load_mdp", &load_mdp, py::arg("path"));
    m.def("toy_example_mdp", &toy_example_mdp, py::arg("gamma") = 0.9);

    m.def("validate_mdp", [](const TabularMdp& mdp, const PolicyTable& policy) {
        ValidationReport report = validate_mdp(mdp, policy);
        std::vector<std::tuple<std::string, int, double, std::string>> out;
        for (const Violation& v : report.violations)
            out.emplace_back(v.kind, v.row, v.magnitude, v.message);
        return out;
    });

    m.def("marginal_reward", &marginal_reward);
    m.def("marginal_transition", &marginal_transition);

    m.def("policy_values",
          [](const TabularMdp& mdp, const PolicyTable& policy, double tol, int max_iters) {
              ValueTable values = policy_values(mdp, policy, tol, max_iters);
              py::dict out;
              out["v"] = values.v;
              out["q"] = to_rows(values.q, mdp.n_states, mdp.n_actions);
              out["residual"] = values.residual;
              out["iterations"] = values.iterations;
              out["converged"] = values.converged;
              return out;
          },
          py::arg("mdp"), py::arg("policy"), py::arg("tol") = 1e-9, py::arg("max_iters") = 100000);

    m.def("wasserstein1",
          [](std::vector<double> mu, std::vector<double> nu, std::vector<std::vector<double>> cost) {
              TransportPlan plan = wasserstein1(mu, nu, from_rows(cost, "cost"));
              return std::make_pair(plan.value, to_rows(plan.coupling, plan.n_rows, plan.n_cols));
          },
          py::arg("mu"), py::arg("nu"), py::arg("cost"));

    m.def("solve_fixed_point",
          [](const std::string& op, const TabularMdp& mdp, const PolicyTable& policy, double tol,
             int max_iters, double c, bool synchronous) {
              SolveOptions opts;
              opts.tol = tol;
              opts.max_iters = max_iters;
              opts.weight_c = c;
              opts.synchronous = synchronous;
              SolveResult result = solve_fixed_point(operator_kind_from_string(op), mdp, policy, opts);
              py::dict out;
              out["u"] = to_rows(result.u.d, result.u.n, result.u.n);
              if (result.g) out["g"] = to_rows(result.g->g, result.g->n, result.g->n);
              out["iterations"] = result.trace.iterations;
              out["residuals"] = result.trace.residuals;
              out["converged"] = result.trace.converged;
              out["final_residual"] = result.trace.final_residual;
              return out;
          },
          py::arg("operator"), py::arg("mdp"), py::arg("policy"), py::arg("tol") = 1e-9,
          py::arg("max_iters") = 0, py::arg("c") = 0.5, py::arg("synchronous") = false);

    m.def("reward_gap_comparison", [](const TabularMdp& mdp, const PolicyTable& policy) {
        GapComparison gaps = reward_gap_comparison(mdp, policy);
        return std::make_pair(to_rows(gaps.delta1.d, gaps.delta1.n, gaps.delta1.n),
                              to_rows(gaps.delta2.d, gaps.delta2.n, gaps.delta2.n));
    });

    m.def("verify_toy_closed_forms", [](double gamma) {
        ToyVerification report = verify_toy_closed_forms(gamma);
        py::list checks;
        for (const QuantityCheck& c : report.checks) {
            py::dict d;
            d["quantity"] = c.quantity;
            d["expected"] = c.expected;
            d["actual"] = c.actual;
            d["abs_error"] = c.abs_error;
            d["pass"] = c.pass;
            checks.append(d);
        }
        return std::make_pair(report.all_pass, checks);
    });

    m.def("aggregate_states",
          [](std::vector<std::vector<double>> u, double epsilon) {
              return aggregate_states(state_table_from_rows(u), epsilon);
          },
          py::arg("u"), py::arg("epsilon"));

    m.def("distance_mico", &distance_mico, py::arg("x"), py::arg("y"), py::arg("beta"));
    m.def("distance_simsr", &distance_simsr, py::arg("x"), py::arg("y"));

    m.def("train",
          [](const TabularMdp& mdp, const PolicyTable& policy, int embed_dim,
             const std::string& distance, double beta, int batch_size, double lr, double c_lr,
             int steps, uint64_t seed, const std::string& loss, int record_interval,
             int buffer_capacity) {
              TrainConfig config = config_from_kwargs(distance, beta, batch_size, lr, c_lr, steps,
                                                      seed, loss, record_interval, buffer_capacity);
              Rng init_rng(seed);
              EmbeddingModel model =
                  EmbeddingModel::init(mdp.n_states, mdp.n_actions, embed_dim,
                                       config.distance_kind == DistanceKind::simsr, init_rng);
              TrainTrace trace = train(model, mdp, policy, config);
              py::dict out;
              out["encoder_losses"] = trace.encoder_losses;
              out["c_values"] = trace.c_values;
              out["c_deltas"] = trace.c_deltas;
              out["distance_table"] = to_rows(trace.final_distance_table.d,
                                              trace.final_distance_table.n, trace.final_distance_table.n);
              return out;
          },
          py::arg("mdp"), py::arg("policy"), py::arg("embed_dim") = 8,
          py::arg("distance") = "simsr", py::arg("beta") = 0.1, py::arg("batch_size") = 64,
          py::arg("lr") = 1e-3, py::arg("c_lr") = 1e-4, py::arg("steps") = 20000,
          py::arg("seed") = 0, py::arg("loss") = "squared", py::arg("record_interval") = 250,
          py::arg("buffer_capacity") = 100000);

    m.def("run_verification_suite",
          [](uint64_t seed, int n_cases, double tol) {
              SuiteOptions opts;
              opts.seed = seed;
              opts.n_cases = n_cases;
              opts.tol = tol;
              SuiteReport report = run_verification_suite(opts);
              py::list checks;
              for (const SuiteCheck& c : report.checks) {
                  py::dict d;
                  d["quantity"] = c.quantity;
                  d["expected"] = c.expected;
                  d["actual"] = c.actual;
                  d["abs_error"] = c.abs_error;
                  d["pass"] = c.pass;
                  checks.append(d);
              }
              return std::make_pair(report.all_pass, checks);
          },
          py::arg("seed") = 2024, py::arg("n_cases") = 100, py::arg("tol") = 1e-9);

    m.attr("__version__") = "0.1.0";
}

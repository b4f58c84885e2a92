#include "bisimlab/io.hpp"

#include "bisimlab/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bisim {

using nlohmann::json;

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return j;
}

void require_keys(const json& j, const std::vector<std::string>& keys, const std::string& path) {
    for (const auto& key : keys) {
        if (!j.contains(key)) throw std::runtime_error(path + ": missing field \"" + key + "\"");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
            throw std::runtime_error(path + ": unknown field \"" + it.key() + "\"");
    }
}

std::vector<std::string> string_array(const json& j, const std::string& field, const std::string& path) {
    if (!j.is_array() || j.empty()) throw std::runtime_error(path + ": \"" + field + "\" must be a nonempty array");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) throw std::runtime_error(path + ": \"" + field + "\" entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

// Rectangular numeric matrix [rows][cols] flattened row-major.
std::vector<double> matrix(const json& j, size_t rows, size_t cols, const std::string& field,
                           const std::string& path) {
    if (!j.is_array() || j.size() != rows)
        throw std::runtime_error(path + ": \"" + field + "\" must have " + std::to_string(rows) + " rows");
    std::vector<double> out;
    out.reserve(rows * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols)
            throw std::runtime_error(path + ": \"" + field + "\" rows must have " + std::to_string(cols) +
                                     " entries");
        for (const auto& x : row) {
            if (!x.is_number()) throw std::runtime_error(path + ": \"" + field + "\" entries must be numbers");
            out.push_back(x.get<double>());
        }
    }
    return out;
}

std::string violation_text(const Violation& v) {
    std::string msg = v.kind + " (row " + std::to_string(v.row) + "): " + v.message;
    if (v.magnitude != 0.0) msg += " [magnitude " + format_double(v.magnitude) + "]";
    return msg;
}

}  // namespace

std::pair<TabularMdp, PolicyTable> load_mdp(const std::string& path) {
    json j = read_json_file(path);
    if (!j.is_object()) throw std::runtime_error(path + ": top level must be an object");
    require_keys(j, {"gamma", "states", "actions", "transition", "reward", "policy"}, path);
    if (!j["gamma"].is_number()) throw std::runtime_error(path + ": \"gamma\" must be a number");

    TabularMdp mdp;
    mdp.state_names = string_array(j["states"], "states", path);
    mdp.action_names = string_array(j["actions"], "actions", path);
    mdp.n_states = static_cast<int>(mdp.state_names.size());
    mdp.n_actions = static_cast<int>(mdp.action_names.size());
    mdp.gamma = j["gamma"].get<double>();

    const size_t S = mdp.n_states, A = mdp.n_actions;
    const json& jt = j["transition"];
    if (!jt.is_array() || jt.size() != S)
        throw std::runtime_error(path + ": \"transition\" must have one entry per state");
    mdp.transition.reserve(S * A * S);
    for (const auto& per_state : jt) {
        auto rows = matrix(per_state, A, S, "transition", path);
        mdp.transition.insert(mdp.transition.end(), rows.begin(), rows.end());
    }
    mdp.reward = matrix(j["reward"], S, A, "reward", path);

    PolicyTable policy;
    policy.n_states = mdp.n_states;
    policy.n_actions = mdp.n_actions;
    policy.probs = matrix(j["policy"], S, A, "policy", path);

    ValidationReport report = validate_mdp(mdp, policy);
    if (!report.ok()) {
        std::string msg = path + ": validation failed:";
        for (const Violation& v : report.violations) msg += "\n  " + violation_text(v);
        throw std::runtime_error(msg);
    }
    return {mdp, policy};
}

void save_mdp(const std::string& path, const TabularMdp& mdp, const PolicyTable& policy) {
    json j;
    j["gamma"] = mdp.gamma;
    j["states"] = mdp.state_names;
    j["actions"] = mdp.action_names;
    json jt = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        json per_state = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            json row = json::array();
            for (int s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.p(s, a, s2));
            per_state.push_back(row);
        }
        jt.push_back(per_state);
    }
    j["transition"] = jt;
    json jr = json::array(), jp = json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        json rrow = json::array(), prow = json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            rrow.push_back(mdp.r(s, a));
            prow.push_back(policy.pi(s, a));
        }
        jr.push_back(rrow);
        jp.push_back(prow);
    }
    j["reward"] = jr;
    j["policy"] = jp;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& labels,
                      const std::vector<double>& values) {
    const size_t n = labels.size();
    if (values.size() != n * n) throw std::invalid_argument("write_matrix_csv: shape mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& name : labels) out << "," << name;
    out << "\n";
    for (size_t i = 0; i < n; ++i) {
        out << labels[i];
        for (size_t j = 0; j < n; ++j) out << "," << format_double(values[i * n + j]);
        out << "\n";
    }
}

std::pair<std::vector<double>, std::vector<std::string>> read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<std::string> labels;
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // corner cell
        while (std::getline(ss, cell, ',')) labels.push_back(cell);
    }
    const size_t n = labels.size();
    std::vector<double> values;
    values.reserve(n * n);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // row label
        while (std::getline(ss, cell, ',')) {
            double x;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            if (res.ec != std::errc()) throw std::runtime_error(path + ": bad number \"" + cell + "\"");
            values.push_back(x);
        }
    }
    if (values.size() != n * n) throw std::runtime_error(path + ": matrix is not square");
    return {values, labels};
}

std::vector<std::string> pair_labels(const TabularMdp& mdp) {
    std::vector<std::string> labels;
    labels.reserve(mdp.n_pairs());
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            labels.push_back(mdp.state_names[s] + ":" + mdp.action_names[a]);
    return labels;
}

void write_solve_trace_csv(const std::string& path, const SolveTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sweep,residual\n";
    for (size_t k = 0; k < trace.residuals.size(); ++k)
        out << (k + 1) << "," << format_double(trace.residuals[k]) << "\n";
}

void write_train_trace_csv(const std::string& path, const TrainTrace& trace, int record_interval) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,encoder_loss,c_value,c_delta\n";
    for (size_t k = 0; k < trace.c_values.size(); ++k) {
        size_t step = (k + 1) * static_cast<size_t>(record_interval);
        out << step << "," << format_double(trace.encoder_losses[step - 1]) << ","
            << format_double(trace.c_values[k]) << "," << format_double(trace.c_deltas[k]) << "\n";
    }
}

void write_loss_curve_csv(const std::string& path, const TrainTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,encoder_loss\n";
    for (size_t k = 0; k < trace.encoder_losses.size(); ++k)
        out << (k + 1) << "," << format_double(trace.encoder_losses[k]) << "\n";
}

void write_solve_summary_json(const std::string& path, const std::string& op_name, double gamma,
                              double tol, const SolveTrace& trace) {
    json j;
    j["operator"] = op_name;
    j["gamma"] = gamma;
    j["tol"] = tol;
    j["iterations"] = trace.iterations;
    j["residual"] = trace.final_residual;
    j["converged"] = trace.converged;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_suite_report_json(const std::string& path, const SuiteReport& report) {
    json arr = json::array();
    for (const SuiteCheck& c : report.checks) {
        json j;
        j["quantity"] = c.quantity;
        j["expected"] = c.expected;
        j["actual"] = c.actual;
        j["abs_error"] = c.abs_error;
        j["pass"] = c.pass;
        arr.push_back(j);
    }
    json top;
    top["checks"] = arr;
    top["all_pass"] = report.all_pass;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << top.dump(2) << "\n";
}

void write_toy_report_json(const std::string& path, const ToyVerification& report) {
    json arr = json::array();
    for (const QuantityCheck& c : report.checks) {
        json j;
        j["quantity"] = c.quantity;
        j["expected"] = c.expected;
        j["actual"] = c.actual;
        j["abs_error"] = c.abs_error;
        j["pass"] = c.pass;
        arr.push_back(j);
    }
    json top;
    top["checks"] = arr;
    top["all_pass"] = report.all_pass;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << top.dump(2) << "\n";
}

}  // namespace bisim

#pragma once

#include "bisimlab/mdp.hpp"
#include "bisimlab/metrics.hpp"
#include "bisimlab/representation.hpp"
#include "bisimlab/verify.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bisim {

// Shortest representation that round-trips the exact double.
std::string format_double(double x);

// Canonical MDP file schema:
//   { "gamma": number, "states": [..], "actions": [..],
//     "transition": [[[..]..]..], "reward": [[..]..], "policy": [[..]..] }
// Unknown keys are rejected, arrays must be rectangular, and validate_mdp must
// come back clean. Throws std::runtime_error with a field diagnostic.
std::pair<TabularMdp, PolicyTable> load_mdp(const std::string& path);
void save_mdp(const std::string& path, const TabularMdp& mdp, const PolicyTable& policy);

// Square matrix CSV with row/column labels. Cells use format_double, so a
// save/load cycle is bit-identical.
void write_matrix_csv(const std::string& path, const std::vector<std::string>& labels,
                      const std::vector<double>& values);
std::pair<std::vector<double>, std::vector<std::string>> read_matrix_csv(const std::string& path);

std::vector<std::string> pair_labels(const TabularMdp& mdp);

void write_solve_trace_csv(const std::string& path, const SolveTrace& trace);

// Columns step, encoder_loss, c_value, c_delta at each recorded step.
void write_train_trace_csv(const std::string& path, const TrainTrace& trace, int record_interval);
// Full per-step loss curve.
void write_loss_curve_csv(const std::string& path, const TrainTrace& trace);

void write_solve_summary_json(const std::string& path, const std::string& op_name, double gamma,
                              double tol, const SolveTrace& trace);
void write_suite_report_json(const std::string& path, const SuiteReport& report);
void write_toy_report_json(const std::string& path, const ToyVerification& report);

}  // namespace bisim

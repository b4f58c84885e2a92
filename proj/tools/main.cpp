#include "bisimlab/analysis.hpp"
#include "bisimlab/io.hpp"
#include "bisimlab/metrics.hpp"
#include "bisimlab/representation.hpp"
#include "bisimlab/verify.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace bisim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitNotConverged = 2;

int env_threads() {
    const char* value = std::getenv("BISIMLAB_THREADS");
    if (!value) return 1;
    int threads = std::atoi(value);
    return threads > 0 ? threads : 1;
}

struct CommonArgs {
    std::string mdp_path;
    double gamma_override = -1.0;
    double tol = 1e-9;
    int max_iters = 0;
    uint64_t seed = 0;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool mdp_required) {
    auto* mdp = cmd->add_option("--mdp", args.mdp_path, "MDP JSON file");
    if (mdp_required) mdp->required()->check(CLI::ExistingFile);
    cmd->add_option("--gamma", args.gamma_override, "override the discount factor from the file");
    cmd->add_option("--tol", args.tol, "solver tolerance");
    cmd->add_option("--max-iters", args.max_iters, "sweep cap (0 = automatic)");
    cmd->add_option("--seed", args.seed, "random seed");
    cmd->add_option("--out", args.out_dir, "output directory");
}

std::pair<TabularMdp, PolicyTable> load_with_override(const CommonArgs& args) {
    auto [mdp, policy] = load_mdp(args.mdp_path);
    if (args.gamma_override > 0.0) {
        mdp.gamma = args.gamma_override;
        ValidationReport report = validate_mdp(mdp, policy);
        if (!report.ok()) throw std::runtime_error("gamma override rejected by validation");
    }
    return {mdp, policy};
}

fs::path ensure_out_dir(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    fs::create_directories(dir);
    return dir;
}

int cmd_solve(const CommonArgs& args, const std::string& op_name, double weight_c) {
    auto [mdp, policy] = load_with_override(args);
    OperatorKind kind = operator_kind_from_string(op_name);
    SolveOptions opts;
    opts.tol = args.tol;
    opts.max_iters = args.max_iters;
    opts.weight_c = weight_c;
    SolveResult result = solve_fixed_point(kind, mdp, policy, opts);

    fs::path dir = ensure_out_dir(args);
    write_matrix_csv((dir / "u_table.csv").string(), mdp.state_names, result.u.d);
    if (result.g) write_matrix_csv((dir / "g_table.csv").string(), pair_labels(mdp), result.g->g);
    write_solve_trace_csv((dir / "trace.csv").string(), result.trace);
    write_solve_summary_json((dir / "summary.json").string(), op_name, mdp.gamma, args.tol, result.trace);

    std::cout << op_name << ": " << (result.trace.converged ? "converged" : "NOT converged") << " after "
              << result.trace.iterations << " sweeps, residual " << format_double(result.trace.final_residual)
              << "\n";
    return result.trace.converged ? kExitOk : kExitNotConverged;
}

int cmd_verify(const CommonArgs& args, bool toy_only, int n_cases) {
    fs::path dir = ensure_out_dir(args);
    if (toy_only) {
        double gamma = args.gamma_override > 0.0 ? args.gamma_override : 0.9;
        ToyVerification report = verify_toy_closed_forms(gamma);
        write_toy_report_json((dir / "toy_report.json").string(), report);
        for (const QuantityCheck& c : report.checks)
            std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.quantity << "  expected "
                      << format_double(c.expected) << "  actual " << format_double(c.actual)
                      << "  |err| " << format_double(c.abs_error) << "\n";
        std::cout << (report.all_pass ? "all checks passed" : "some checks FAILED") << "\n";
        return report.all_pass ? kExitOk : kExitCheckFailed;
    }

    SuiteOptions opts;
    opts.seed = args.seed == 0 ? 2024 : args.seed;
    opts.tol = args.tol;
    opts.threads = env_threads();
    if (n_cases > 0) opts.n_cases = n_cases;
    if (args.gamma_override > 0.0) opts.toy_gamma = args.gamma_override;
    SuiteReport report = run_verification_suite(opts);
    write_suite_report_json((dir / "verify_report.json").string(), report);
    for (const SuiteCheck& c : report.checks)
        std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.quantity << "  actual "
                  << format_double(c.actual) << "\n";
    std::cout << (report.all_pass ? "all checks passed" : "some checks FAILED") << "\n";
    return report.all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_train(const CommonArgs& args, TrainConfig config, int embed_dim) {
    auto [mdp, policy] = load_with_override(args);
    config.seed = args.seed;
    Rng init_rng(config.seed);
    EmbeddingModel model = EmbeddingModel::init(mdp.n_states, mdp.n_actions, embed_dim,
                                                config.distance_kind == DistanceKind::simsr, init_rng);
    TrainTrace trace = train(model, mdp, policy, config);

    fs::path dir = ensure_out_dir(args);
    write_train_trace_csv((dir / "trace.csv").string(), trace, config.c_record_interval);
    write_loss_curve_csv((dir / "losses.csv").string(), trace);
    write_matrix_csv((dir / "distance_table.csv").string(), mdp.state_names,
                     trace.final_distance_table.d);

    if (!trace.c_values.empty()) {
        int window = std::min<int>(20, static_cast<int>(trace.c_values.size()));
        if (window >= 2) {
            AssumptionReport monitor = monitor_c(trace, 1e-3, window);
            std::cout << "c convergence monitor: " << (monitor.satisfied ? "satisfied" : "NOT satisfied")
                      << ", max tail delta " << format_double(monitor.max_tail_delta) << ", final c "
                      << format_double(monitor.final_c) << "\n";
        }
    }
    std::cout << "trained " << config.steps << " steps; outputs in " << dir.string() << "\n";
    return kExitOk;
}

int cmd_compare(const CommonArgs& args, double weight_c) {
    auto [mdp, policy] = load_with_override(args);
    SolveOptions opts;
    opts.tol = args.tol;
    opts.max_iters = args.max_iters;
    StateMetricTable classic = solve_fixed_point(OperatorKind::classic, mdp, policy, opts).u;
    StateMetricTable mico = solve_fixed_point(OperatorKind::mico, mdp, policy, opts).u;
    StateMetricTable revised = solve_fixed_point(OperatorKind::revised, mdp, policy, opts).u;
    opts.weight_c = weight_c;
    StateMetricTable weighted = solve_fixed_point(OperatorKind::weighted, mdp, policy, opts).u;
    GapComparison gaps = reward_gap_comparison(mdp, policy);

    fs::path dir = ensure_out_dir(args);
    std::ofstream out(dir / "compare.csv");
    if (!out) throw std::runtime_error("cannot write compare.csv");
    out << "state_i,state_j,classic,mico,revised,weighted,delta1,delta2\n";
    for (int i = 0; i < mdp.n_states; ++i) {
        for (int j = i; j < mdp.n_states; ++j) {
            out << mdp.state_names[i] << "," << mdp.state_names[j] << ","
                << format_double(classic.at(i, j)) << "," << format_double(mico.at(i, j)) << ","
                << format_double(revised.at(i, j)) << "," << format_double(weighted.at(i, j)) << ","
                << format_double(gaps.delta1.at(i, j)) << "," << format_double(gaps.delta2.at(i, j))
                << "\n";
        }
    }
    write_matrix_csv((dir / "delta1.csv").string(), mdp.state_names, gaps.delta1.d);
    write_matrix_csv((dir / "delta2.csv").string(), mdp.state_names, gaps.delta2.d);
    std::cout << "comparison written to " << (dir / "compare.csv").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bisimlab: exact bisimulation metrics and desk-scale representation learning on tabular MDPs"};
    app.require_subcommand(1);

    CommonArgs solve_args, verify_args, train_args, compare_args;
    std::string op_name = "revised";
    double solve_c = 0.5, compare_c = 0.5;
    bool toy_only = false;
    int n_cases = 0;
    int embed_dim = 8;
    TrainConfig train_config;
    std::string distance_name = "simsr", loss_name = "squared";

    CLI::App* solve = app.add_subcommand("solve", "solve a metric fixed point and write CSV/JSON outputs");
    add_common(solve, solve_args, true);
    solve->add_option("--operator", op_name, "classic|mico|revised|weighted")
        ->check(CLI::IsMember({"classic", "mico", "revised", "weighted"}));
    solve->add_option("--c", solve_c, "weight coefficient for the weighted operator");

    CLI::App* verify = app.add_subcommand("verify", "run the seeded property suite (or --toy closed forms)");
    add_common(verify, verify_args, false);
    verify->add_flag("--toy", toy_only, "only check the toy example closed forms");
    verify->add_option("--cases", n_cases, "number of random MDP cases (default 100)");

    CLI::App* train = app.add_subcommand("train", "run the representation learning loop");
    add_common(train, train_args, true);
    train->add_option("--distance", distance_name, "mico|simsr")
        ->check(CLI::IsMember({"mico", "simsr"}));
    train->add_option("--beta", train_config.beta, "angular weight for the mico distance");
    train->add_option("--steps", train_config.steps, "training steps");
    train->add_option("--batch", train_config.batch_size, "batch size");
    train->add_option("--lr", train_config.learning_rate, "encoder learning rate");
    train->add_option("--c-lr", train_config.c_learning_rate, "coefficient learning rate");
    train->add_option("--loss", loss_name, "squared|huber")->check(CLI::IsMember({"squared", "huber"}));
    train->add_option("--record-interval", train_config.c_record_interval, "steps between c records");
    train->add_option("--embed-dim", embed_dim, "embedding dimension");

    CLI::App* compare = app.add_subcommand("compare", "solve all operators side by side");
    add_common(compare, compare_args, true);
    compare->add_option("--c", compare_c, "weight coefficient for the weighted column");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(solve_args, op_name, solve_c);
        if (verify->parsed()) return cmd_verify(verify_args, toy_only, n_cases);
        if (train->parsed()) {
            train_config.distance_kind = distance_kind_from_string(distance_name);
            train_config.loss_kind = loss_kind_from_string(loss_name);
            return cmd_train(train_args, train_config, embed_dim);
        }
        if (compare->parsed()) return cmd_compare(compare_args, compare_c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

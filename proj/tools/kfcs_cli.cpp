#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kfcs/bounds.hpp"
#include "kfcs/config.hpp"
#include "kfcs/harness.hpp"
#include "kfcs/metrics.hpp"
#include "kfcs/report.hpp"

namespace fs = std::filesystem;
using namespace kfcs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitBudget = 3;
constexpr int kExitCheckFailed = 4;

struct CommonArgs {
    std::string config;
    std::string out = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

Config load_config(const CommonArgs& args) {
    Config cfg;
    if (!args.config.empty()) {
        if (args.config == "experiment1" || args.config == "experiment2") {
            cfg = builtin_config(args.config);
        } else {
            cfg = Config::from_file(args.config);
        }
    }
    for (const std::string& ov : args.overrides) cfg.apply_override(ov);
    if (args.seed) cfg.set("master_seed", std::to_string(*args.seed));
    return cfg;
}

fs::path ensure_out_dir(const CommonArgs& args) {
    fs::path dir(args.out);
    fs::create_directories(dir);
    return dir;
}

Mat load_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("matrix file not found: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ContractViolation("matrix file is empty: " + path);
    const std::size_t cols = rows.front().size();
    Mat A(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw ContractViolation("matrix file has ragged rows: " + path);
        }
        for (std::size_t j = 0; j < cols; ++j) {
            A(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
        }
    }
    return A;
}

int schedule_s_max(const ExperimentConfig& ec) {
    switch (ec.schedule) {
        case ScheduleKind::Experiment1: return 20;
        case ScheduleKind::Experiment2: return 26;
        case ScheduleKind::Custom: {
            int total = 0;
            for (auto [t, c] : ec.custom_schedule) total += c;
            return total;
        }
    }
    return 0;
}

int cmd_run(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const ExperimentConfig ec = experiment_from_config(cfg);
    const fs::path out = ensure_out_dir(args);

    const MseTrace trace = run_experiment(ec);
    const auto rows = summarize(trace);

    write_text_file((out / "resolved.cfg").string(), config_from_experiment(ec).serialize());
    write_text_file((out / "mse.csv").string(), mse_csv(trace));
    write_text_file((out / "summary.csv").string(), summary_csv(rows));
    write_text_file((out / "plot_mse.py").string(), plot_script());

    std::cout << "trials: " << trace.completed_trials() << "/" << trace.n_trials << " completed";
    if (!trace.aborts.empty()) std::cout << " (" << trace.aborts.size() << " aborted)";
    std::cout << "\n";
    for (const auto& r : rows) {
        std::cout << r.algorithm << ": peak_mse=" << format_double(r.peak_mse)
                  << " at t=" << r.peak_time
                  << " final_window=" << format_double(r.final_window_mean_mse) << "\n";
    }
    std::cout << "wrote " << (out / "mse.csv").string() << "\n";
    return kExitOk;
}

int cmd_audit(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const fs::path out = ensure_out_dir(args);

    Mat A;
    if (cfg.has("audit.matrix_file")) {
        A = load_matrix_file(cfg.require_str("audit.matrix_file"));
    } else {
        const ExperimentConfig ec = experiment_from_config(cfg);
        A = ec.build_measurement(derive_seed(ec.master_seed, 0, SeedRole::Matrix)).A;
    }
    int s_max_default = 3;
    if (!cfg.has("audit.matrix_file")) {
        s_max_default = schedule_s_max(experiment_from_config(cfg));
    }
    const int s_max = static_cast<int>(cfg.get_int("audit.s_max", s_max_default));
    const int s_fa_default = static_cast<int>(cfg.get_int("thresholds.max_add", 0));
    const int s_fa = static_cast<int>(cfg.get_int("audit.s_fa", s_fa_default));
    const double budget = cfg.get_double("audit.budget", kDefaultEnumerationBudget);

    const IncoherenceReport rep = compute_incoherence(A, s_max, s_fa, budget);

    std::string csv = "kind,S,Sp,value\n";
    for (const auto& [S, v] : rep.delta) {
        csv += "delta," + std::to_string(S) + ",," + format_double(v) + "\n";
    }
    for (const auto& [key, v] : rep.theta) {
        csv += "theta," + std::to_string(key.first) + "," + std::to_string(key.second) + "," +
               format_double(v) + "\n";
    }
    write_text_file((out / "audit.csv").string(), csv);

    std::cout << "budget_S_max=" << rep.budget_S_max << "\n";
    for (const auto& [S, v] : rep.delta) {
        std::cout << "delta_" << S << " = " << format_double(v) << "\n";
    }
    for (const auto& [key, v] : rep.theta) {
        std::cout << "theta_" << key.first << "_" << key.second << " = " << format_double(v) << "\n";
    }
    std::cout << "check delta_{S_max+S_fa} < 1: " << (rep.check_delta_smax_sfa ? "pass" : "FAIL")
              << "\n";
    std::cout << "check delta_{2S_max}+delta_{3S_max} < 1: "
              << (rep.check_delta_2smax_3smax ? "pass" : "FAIL") << "\n";
    return (rep.check_delta_smax_sfa && rep.check_delta_2smax_3smax) ? kExitOk : kExitCheckFailed;
}

int cmd_bounds(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const ExperimentConfig ec = experiment_from_config(cfg);
    const fs::path out = ensure_out_dir(args);

    BoundInputs in;
    in.c1 = cfg.get_double("bounds.c1", 1.0);
    in.lambda_m = ec.lambda_m();
    in.s_max = static_cast<int>(cfg.get_int("bounds.s_max", schedule_s_max(ec)));
    in.sigma_obs_sq = ec.sigma_obs_sq;
    in.delta_T = cfg.get_double("bounds.delta_T", 0.0);
    in.theta_T_Delta = cfg.get_double("bounds.theta", 0.0);
    in.size_T = static_cast<int>(cfg.get_int("bounds.size_T", in.s_max));
    in.size_Delta = static_cast<int>(cfg.get_int("bounds.size_Delta", 0));
    in.e_xdelta_sq = cfg.get_double("bounds.e_xdelta_sq", 0.0);
    const double c2_const =
        cfg.get_double("bounds.c2_const", in.lambda_m * in.lambda_m * in.c1 * in.c1);
    const double c3_const = cfg.get_double("bounds.c3_const", c2_const);
    in.c2 = [c2_const](int) { return c2_const; };
    in.c3 = [c3_const](int) { return c3_const; };

    const double eps = cfg.get_double("bounds.eps", 0.1);
    const int s_lo = static_cast<int>(cfg.get_int("bounds.s_lo", 1));
    const int s_hi = static_cast<int>(
        cfg.get_int("bounds.s_hi", std::max(1, in.size_T + in.size_Delta)));

    const double B1 = b1(in);
    const long tau = tau_epsilon(eps, in, ec.sigma_sys_sq);
    const auto [s_star, min_bound] = min_over_S_bound(in, s_lo, s_hi);

    std::string csv = "S,B_CSLSE\n";
    for (int S = s_lo; S <= s_hi; ++S) {
        csv += std::to_string(S) + "," + format_double(b_cslse(S, in)) + "\n";
    }
    write_text_file((out / "bounds.csv").string(), csv);

    std::string txt;
    txt += "B1 = " + format_double(B1) + "\n";
    txt += "tau_eps(" + format_double(eps) + ") = " + std::to_string(tau) + "\n";
    txt += "min_S B_CSLSE = " + format_double(min_bound) + " at S = " + std::to_string(s_star) +
           "\n";
    write_text_file((out / "bounds.txt").string(), txt);
    std::cout << txt;
    return kExitOk;
}

int cmd_trace(const CommonArgs& args) {
    const Config cfg = load_config(args);
    ExperimentConfig ec = experiment_from_config(cfg);
    const fs::path out = ensure_out_dir(args);

    const MeasurementModel meas =
        ec.build_measurement(derive_seed(ec.master_seed, 0, SeedRole::Matrix));
    const DantzigSolver solver(meas.A);
    // The forensic view is trial 0 of the configured experiment.
    const SystemModel sys = ec.build_schedule(derive_seed(ec.master_seed, 0, SeedRole::Schedule));
    Rng signal_rng(derive_seed(ec.master_seed, 0, SeedRole::Signal));
    Rng noise_rng(derive_seed(ec.master_seed, 0, SeedRole::Noise));

    const bool want_kfcs = std::count(ec.algorithms.begin(), ec.algorithms.end(), Algorithm::KfCs);
    std::vector<Algorithm> algos = ec.algorithms;
    if (!want_kfcs) algos.insert(algos.begin(), Algorithm::KfCs);

    std::vector<FilterState> states(algos.size());
    for (auto& s : states) s = make_filter_state(ec.m);

    std::string csv = "t,true_support,fen,fen_fired,added,deleted,addition_rejected,support";
    for (Algorithm a : algos) csv += std::string(",err_") + algorithm_name(a);
    csv += "\n";

    TrueState truth = initial_state(ec.m);
    for (int t = 1; t <= ec.horizon; ++t) {
        truth = step_signal(truth, sys, signal_rng);
        const Vec y = measure(truth.x, meas, noise_rng);
        StepDiag diag;
        std::string err_cols;
        IndexSet kfcs_support;
        for (std::size_t a = 0; a < algos.size(); ++a) {
            Vec estimate;
            switch (algos[a]) {
                case Algorithm::KfCs:
                    states[a] = kfcs_step(states[a], y, meas, sys, ec.thresholds, solver, &diag);
                    estimate = states[a].x_hat;
                    kfcs_support = states[a].support;
                    break;
                case Algorithm::LsCs:
                    states[a] = lscs_step(states[a], y, meas, ec.thresholds, solver);
                    estimate = states[a].x_hat;
                    break;
                case Algorithm::SimpleCs:
                    estimate = simple_cs_step(y, meas, ec.thresholds.alpha_a, solver).second;
                    break;
                case Algorithm::GaKf:
                    states[a] = ga_kf_step(states[a], y, meas, sys, truth.N);
                    estimate = states[a].x_hat;
                    break;
                case Algorithm::GaLs:
                    states[a] = ga_ls_step(states[a], y, meas, truth.N);
                    estimate = states[a].x_hat;
                    break;
            }
            err_cols += "," + format_double((truth.x - estimate).squaredNorm());
        }
        auto joined = [](const IndexSet& s) {
            std::string r;
            for (int i : s) {
                if (!r.empty()) r += ";";
                r += std::to_string(i);
            }
            return r;
        };
        csv += std::to_string(t) + "," + joined(truth.N) + "," + format_double(diag.fen) + "," +
               (diag.fen_fired ? "1" : "0") + "," + joined(diag.added) + "," +
               joined(diag.deleted) + "," + (diag.addition_rejected ? "1" : "0") + "," +
               joined(kfcs_support) + err_cols + "\n";
    }

    write_text_file((out / "trace.csv").string(), csv);
    write_text_file((out / "resolved.cfg").string(), config_from_experiment(ec).serialize());
    std::cout << "wrote " << (out / "trace.csv").string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal recovery of time sequences of sparse signals:"
                 " support-tracking Kalman/least-squares filters, a Dantzig-selector"
                 " solver, incoherence audits, error-bound tables, and a Monte Carlo"
                 " experiment harness."};
    app.require_subcommand(1);

    CommonArgs run_args, audit_args, bounds_args, trace_args;
    auto add_common = [](CLI::App* sub, CommonArgs& a, bool config_required) {
        auto* opt = sub->add_option("--config", a.config,
                                    "built-in name (experiment1, experiment2) or path to a config file");
        if (config_required) opt->required();
        sub->add_option("--out", a.out, "output directory (all files land here)");
        sub->add_option("--set", a.overrides, "override a config key, e.g. --set n_trials=5");
        sub->add_option("--seed", a.seed, "override master_seed");
    };

    CLI::App* run = app.add_subcommand("run", "run a Monte Carlo experiment and write MSE traces");
    add_common(run, run_args, true);
    CLI::App* audit = app.add_subcommand("audit", "enumerate incoherence constants and check them");
    add_common(audit, audit_args, false);
    CLI::App* bounds =
        app.add_subcommand("bounds", "evaluate the closed-form error bounds and delay horizon");
    add_common(bounds, bounds_args, false);
    CLI::App* trace = app.add_subcommand("trace", "single seeded trajectory with per-step diagnostics");
    add_common(trace, trace_args, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (audit->parsed()) return cmd_audit(audit_args);
        if (bounds->parsed()) return cmd_bounds(bounds_args);
        if (trace->parsed()) return cmd_trace(trace_args);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const BudgetExceeded& e) {
        std::cerr << "budget exceeded: " << e.what() << " (cost " << e.cost_estimate << " > budget "
                  << e.budget << ")\n";
        return kExitBudget;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

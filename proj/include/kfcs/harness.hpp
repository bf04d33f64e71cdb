#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "kfcs/dantzig.hpp"
#include "kfcs/filters.hpp"
#include "kfcs/model.hpp"
#include "kfcs/rng.hpp"

namespace kfcs {

enum class Algorithm { KfCs, LsCs, SimpleCs, GaKf, GaLs };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::KfCs: return "kfcs";
        case Algorithm::LsCs: return "lscs";
        case Algorithm::SimpleCs: return "simple_cs";
        case Algorithm::GaKf: return "ga_kf";
        case Algorithm::GaLs: return "ga_ls";
    }
    return "?";
}

inline Algorithm algorithm_from_name(const std::string& name) {
    for (Algorithm a : {Algorithm::KfCs, Algorithm::LsCs, Algorithm::SimpleCs, Algorithm::GaKf,
                        Algorithm::GaLs}) {
        if (name == algorithm_name(a)) return a;
    }
    throw ContractViolation("unknown algorithm: " + name);
}

enum class ScheduleKind { Experiment1, Experiment2, Custom };

/// Full description of one Monte Carlo experiment.
struct ExperimentConfig {
    int m = 256;
    int n = 72;
    ScheduleKind schedule = ScheduleKind::Experiment1;
    /// For ScheduleKind::Custom: (time, how many indices join then).
    std::vector<std::pair<int, int>> custom_schedule;
    double sigma_sys_sq = 1.0;
    double sigma_init_sq = 3.0;
    double sigma_obs_sq = 16.0 / 648.0;
    Thresholds thresholds;
    char lambda_log_base = '2'; // '2' or 'e'
    std::vector<Algorithm> algorithms = {Algorithm::KfCs, Algorithm::LsCs, Algorithm::SimpleCs,
                                         Algorithm::GaKf, Algorithm::GaLs};
    int n_trials = 100;
    int horizon = 100;
    std::uint64_t master_seed = 1;
    NoiseKind noise_kind = NoiseKind::Gaussian;
    bool share_matrix = true;    // one measurement matrix for all trials
    bool share_schedule = false; // fresh support draws per trial

    double lambda_m() const {
        return lambda_log_base == '2' ? std::sqrt(2.0 * std::log2(static_cast<double>(m)))
                                      : std::sqrt(2.0 * std::log(static_cast<double>(m)));
    }

    void validate() const {
        if (m <= 0 || n <= 0 || n >= m) throw ContractViolation("ExperimentConfig: requires 0 < n < m");
        if (n_trials < 1) throw ContractViolation("ExperimentConfig: n_trials must be >= 1");
        if (horizon < 1) throw ContractViolation("ExperimentConfig: horizon must be >= 1");
        if (lambda_log_base != '2' && lambda_log_base != 'e') {
            throw ContractViolation("ExperimentConfig: lambda_log_base must be 2 or e");
        }
        if (algorithms.empty()) throw ContractViolation("ExperimentConfig: no algorithms selected");
        thresholds.validate();
        int last_time = 0;
        if (schedule == ScheduleKind::Custom) {
            int total = 0, prev = 0;
            for (auto [t, c] : custom_schedule) {
                if (t < 1 || t <= prev || c < 0) {
                    throw ContractViolation("ExperimentConfig: bad custom schedule");
                }
                prev = t;
                total += c;
                last_time = t;
            }
            if (total > m) throw ContractViolation("ExperimentConfig: custom schedule exceeds m");
        } else {
            last_time = (schedule == ScheduleKind::Experiment1) ? 30 : 50;
            if (m < 26) throw ContractViolation("ExperimentConfig: paper schedules require m >= 26");
        }
        if (horizon < last_time) {
            throw ContractViolation("ExperimentConfig: horizon must cover the schedule");
        }
    }

    SystemModel build_schedule(std::uint64_t seed) const {
        if (schedule != ScheduleKind::Custom) {
            SystemModel sys = paper_schedule(schedule == ScheduleKind::Experiment1
                                                 ? PaperSchedule::Experiment1
                                                 : PaperSchedule::Experiment2,
                                             m, seed);
            sys.sigma_sys_sq = sigma_sys_sq;
            sys.sigma_init_sq = sigma_init_sq;
            return sys;
        }
        Rng rng(seed);
        std::vector<int> remaining(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) remaining[static_cast<std::size_t>(i)] = i;
        SystemModel sys;
        sys.m = m;
        sys.sigma_sys_sq = sigma_sys_sq;
        sys.sigma_init_sq = sigma_init_sq;
        for (auto [t, count] : custom_schedule) {
            std::vector<int> picked;
            for (int c = 0; c < count; ++c) {
                const int pos = rng.uniform_int(static_cast<int>(remaining.size()));
                picked.push_back(remaining[static_cast<std::size_t>(pos)]);
                remaining.erase(remaining.begin() + pos);
            }
            sys.support_schedule.emplace_back(t, IndexSet(std::move(picked)));
        }
        sys.validate();
        return sys;
    }

    MeasurementModel build_measurement(std::uint64_t seed) const {
        MeasurementModel meas = gen_matrix(n, m, seed);
        meas.sigma_obs_sq = sigma_obs_sq;
        meas.lambda_m = lambda_m();
        meas.noise_kind = noise_kind;
        meas.validate();
        return meas;
    }
};

struct TrialAbort {
    int trial = 0;
    std::string algorithm;
    int time = 0;
    std::string cause;
};

/// Per-time, per-algorithm error statistics across trials, with the raw
/// per-trial values retained.
struct MseTrace {
    std::vector<Algorithm> algorithms;
    int horizon = 0;
    int n_trials = 0;
    /// raw[algo][t-1][trial]: squared estimation error |x_t - x_hat_t|^2.
    std::vector<std::vector<std::vector<double>>> raw_sq_err;
    /// raw[algo][t-1][trial]: support error |T_t symdiff N_t|.
    std::vector<std::vector<std::vector<double>>> raw_supp_err;
    std::vector<char> trial_ok;
    std::vector<TrialAbort> aborts;

    int algo_index(Algorithm a) const {
        for (std::size_t i = 0; i < algorithms.size(); ++i) {
            if (algorithms[i] == a) return static_cast<int>(i);
        }
        throw ContractViolation("MseTrace: algorithm not recorded");
    }

    int completed_trials() const {
        int c = 0;
        for (char ok : trial_ok) c += ok ? 1 : 0;
        return c;
    }

    double mse_mean(Algorithm a, int t) const {
        const auto& row = raw_sq_err[static_cast<std::size_t>(algo_index(a))]
                                    [static_cast<std::size_t>(t - 1)];
        double sum = 0.0;
        int c = 0;
        for (int trial = 0; trial < n_trials; ++trial) {
            if (!trial_ok[static_cast<std::size_t>(trial)]) continue;
            sum += row[static_cast<std::size_t>(trial)];
            ++c;
        }
        return c ? sum / c : 0.0;
    }

    double mse_stderr(Algorithm a, int t) const {
        const auto& row = raw_sq_err[static_cast<std::size_t>(algo_index(a))]
                                    [static_cast<std::size_t>(t - 1)];
        const double mean = mse_mean(a, t);
        double ss = 0.0;
        int c = 0;
        for (int trial = 0; trial < n_trials; ++trial) {
            if (!trial_ok[static_cast<std::size_t>(trial)]) continue;
            const double d = row[static_cast<std::size_t>(trial)] - mean;
            ss += d * d;
            ++c;
        }
        if (c < 2) return 0.0;
        return std::sqrt(ss / (c - 1)) / std::sqrt(static_cast<double>(c));
    }

    double support_err_mean(Algorithm a, int t) const {
        const auto& row = raw_supp_err[static_cast<std::size_t>(algo_index(a))]
                                      [static_cast<std::size_t>(t - 1)];
        double sum = 0.0;
        int c = 0;
        for (int trial = 0; trial < n_trials; ++trial) {
            if (!trial_ok[static_cast<std::size_t>(trial)]) continue;
            sum += row[static_cast<std::size_t>(trial)];
            ++c;
        }
        return c ? sum / c : 0.0;
    }

    /// Mean over trials of the squared signal energy |x_t|^2 is not stored;
    /// peak and window statistics below are on the MSE series.
    double final_window_mean(Algorithm a, int window = 10) const {
        double sum = 0.0;
        int c = 0;
        for (int t = std::max(1, horizon - window + 1); t <= horizon; ++t) {
            sum += mse_mean(a, t);
            ++c;
        }
        return c ? sum / c : 0.0;
    }

    std::pair<int, double> peak(Algorithm a) const {
        int best_t = 1;
        double best = -1.0;
        for (int t = 1; t <= horizon; ++t) {
            const double v = mse_mean(a, t);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        return {best_t, best};
    }
};

struct SummaryRow {
    std::string algorithm;
    double peak_mse = 0.0;
    int peak_time = 0;
    double final_window_mean_mse = 0.0;
    double mean_support_err = 0.0;
};

namespace detail {

struct TrialResult {
    bool ok = true;
    TrialAbort abort;
    // [algo][t-1]
    std::vector<std::vector<double>> sq_err;
    std::vector<std::vector<double>> supp_err;
};

inline TrialResult run_trial(const ExperimentConfig& cfg, int trial, const MeasurementModel& meas,
                             const DantzigSolver& solver, const SystemModel& sys) {
    const std::size_t n_algos = cfg.algorithms.size();
    TrialResult res;
    res.sq_err.assign(n_algos, std::vector<double>(static_cast<std::size_t>(cfg.horizon), 0.0));
    res.supp_err.assign(n_algos, std::vector<double>(static_cast<std::size_t>(cfg.horizon), 0.0));

    Rng signal_rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial), SeedRole::Signal));
    Rng noise_rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial), SeedRole::Noise));

    std::vector<FilterState> states(n_algos);
    for (auto& s : states) s = make_filter_state(cfg.m);

    TrueState truth = initial_state(cfg.m);
    for (int t = 1; t <= cfg.horizon; ++t) {
        truth = step_signal(truth, sys, signal_rng);
        const Vec y = measure(truth.x, meas, noise_rng);
        for (std::size_t a = 0; a < n_algos; ++a) {
            const Algorithm algo = cfg.algorithms[a];
            try {
                Vec estimate;
                IndexSet est_support;
                switch (algo) {
                    case Algorithm::KfCs:
                        states[a] = kfcs_step(states[a], y, meas, sys, cfg.thresholds, solver);
                        estimate = states[a].x_hat;
                        est_support = states[a].support;
                        break;
                    case Algorithm::LsCs:
                        states[a] = lscs_step(states[a], y, meas, cfg.thresholds, solver);
                        estimate = states[a].x_hat;
                        est_support = states[a].support;
                        break;
                    case Algorithm::SimpleCs: {
                        auto [sup, xh] = simple_cs_step(y, meas, cfg.thresholds.alpha_a, solver);
                        estimate = std::move(xh);
                        est_support = std::move(sup);
                        break;
                    }
                    case Algorithm::GaKf:
                        states[a] = ga_kf_step(states[a], y, meas, sys, truth.N);
                        estimate = states[a].x_hat;
                        est_support = states[a].support;
                        break;
                    case Algorithm::GaLs:
                        states[a] = ga_ls_step(states[a], y, meas, truth.N);
                        estimate = states[a].x_hat;
                        est_support = states[a].support;
                        break;
                }
                res.sq_err[a][static_cast<std::size_t>(t - 1)] = (truth.x - estimate).squaredNorm();
                res.supp_err[a][static_cast<std::size_t>(t - 1)] =
                    static_cast<double>(est_support.symmetric_difference_size(truth.N));
            } catch (const std::exception& e) {
                res.ok = false;
                res.abort = {trial, algorithm_name(algo), t, e.what()};
                return res;
            }
        }
    }
    return res;
}

/// Run fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots by the callable; the schedule never affects
/// the outcome.
template <typename F>
void parallel_for(int count, unsigned workers, F&& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = static_cast<int>(w); i < count; i += static_cast<int>(workers)) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

} // namespace detail

/// Run the configured experiment: one ground-truth trajectory per trial,
/// every selected estimator applied causally, squared errors aggregated
/// across trials. Throws when more than 5% of trials abort.
inline MseTrace run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    MseTrace trace;
    trace.algorithms = cfg.algorithms;
    trace.horizon = cfg.horizon;
    trace.n_trials = cfg.n_trials;
    const std::size_t n_algos = cfg.algorithms.size();
    trace.raw_sq_err.assign(n_algos, std::vector<std::vector<double>>(
                                         static_cast<std::size_t>(cfg.horizon),
                                         std::vector<double>(static_cast<std::size_t>(cfg.n_trials), 0.0)));
    trace.raw_supp_err = trace.raw_sq_err;
    trace.trial_ok.assign(static_cast<std::size_t>(cfg.n_trials), 1);

    std::shared_ptr<MeasurementModel> shared_meas;
    std::shared_ptr<DantzigSolver> shared_solver;
    std::shared_ptr<SystemModel> shared_sys;
    if (cfg.share_matrix) {
        shared_meas = std::make_shared<MeasurementModel>(
            cfg.build_measurement(derive_seed(cfg.master_seed, 0, SeedRole::Matrix)));
        shared_solver = std::make_shared<DantzigSolver>(shared_meas->A);
    }
    if (cfg.share_schedule) {
        shared_sys = std::make_shared<SystemModel>(
            cfg.build_schedule(derive_seed(cfg.master_seed, 0, SeedRole::Schedule)));
    }

    std::vector<detail::TrialResult> results(static_cast<std::size_t>(cfg.n_trials));
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    detail::parallel_for(cfg.n_trials, workers, [&](int trial) {
        MeasurementModel local_meas;
        std::unique_ptr<DantzigSolver> local_solver;
        const MeasurementModel* meas = shared_meas.get();
        const DantzigSolver* solver = shared_solver.get();
        if (!cfg.share_matrix) {
            local_meas = cfg.build_measurement(
                derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial), SeedRole::Matrix));
            local_solver = std::make_unique<DantzigSolver>(local_meas.A);
            meas = &local_meas;
            solver = local_solver.get();
        }
        SystemModel local_sys;
        const SystemModel* sys = shared_sys.get();
        if (!cfg.share_schedule) {
            local_sys = cfg.build_schedule(
                derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial), SeedRole::Schedule));
            sys = &local_sys;
        }
        results[static_cast<std::size_t>(trial)] = detail::run_trial(cfg, trial, *meas, *solver, *sys);
    });

    for (int trial = 0; trial < cfg.n_trials; ++trial) {
        auto& res = results[static_cast<std::size_t>(trial)];
        if (!res.ok) {
            trace.trial_ok[static_cast<std::size_t>(trial)] = 0;
            trace.aborts.push_back(res.abort);
            continue;
        }
        for (std::size_t a = 0; a < n_algos; ++a) {
            for (int t = 1; t <= cfg.horizon; ++t) {
                trace.raw_sq_err[a][static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(trial)] =
                    res.sq_err[a][static_cast<std::size_t>(t - 1)];
                trace.raw_supp_err[a][static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(trial)] =
                    res.supp_err[a][static_cast<std::size_t>(t - 1)];
            }
        }
    }

    if (static_cast<double>(trace.aborts.size()) > 0.05 * static_cast<double>(cfg.n_trials)) {
        std::string msg = "run_experiment: more than 5% of trials aborted;"
                          " first cause: " +
                          trace.aborts.front().algorithm + " at t=" +
                          std::to_string(trace.aborts.front().time) + ": " + trace.aborts.front().cause;
        throw std::runtime_error(msg);
    }
    return trace;
}

/// Per-algorithm digest: peak, time of peak, trailing-window mean, and mean
/// support error.
inline std::vector<SummaryRow> summarize(const MseTrace& trace) {
    std::vector<SummaryRow> rows;
    for (Algorithm a : trace.algorithms) {
        SummaryRow row;
        row.algorithm = algorithm_name(a);
        auto [pt, pv] = trace.peak(a);
        row.peak_time = pt;
        row.peak_mse = pv;
        row.final_window_mean_mse = trace.final_window_mean(a);
        double s = 0.0;
        for (int t = 1; t <= trace.horizon; ++t) s += trace.support_err_mean(a, t);
        row.mean_support_err = trace.horizon ? s / trace.horizon : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace kfcs

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kfcs/index_set.hpp"
#include "kfcs/numerics.hpp"
#include "kfcs/rng.hpp"

namespace kfcs {

enum class NoiseKind { Gaussian, TruncatedGaussian };

/// Random-walk signal model: sparse coefficients drift with variance
/// sigma_sys_sq per step; a coefficient's first value after joining the
/// support is drawn with variance sigma_init_sq.
struct SystemModel {
    int m = 0;
    double sigma_sys_sq = 0.0;
    double sigma_init_sq = 0.0;
    /// (time, indices added at that time); times strictly increasing,
    /// index sets pairwise disjoint.
    std::vector<std::pair<int, IndexSet>> support_schedule;

    void validate() const {
        if (m <= 0) throw ContractViolation("SystemModel: m must be positive");
        if (sigma_sys_sq < 0.0 || sigma_init_sq < 0.0) {
            throw ContractViolation("SystemModel: variances must be nonnegative");
        }
        int prev_t = 0;
        IndexSet seen;
        int total = 0;
        for (const auto& [t, add] : support_schedule) {
            if (t < 1) throw ContractViolation("SystemModel: schedule times start at 1");
            if (t <= prev_t) {
                throw ContractViolation("SystemModel: schedule times must be strictly increasing");
            }
            prev_t = t;
            add.require_within(m, "SystemModel schedule");
            if (!add.set_intersection(seen).empty()) {
                throw ContractViolation("SystemModel: schedule additions must be disjoint");
            }
            seen = seen.set_union(add);
            total += add.size();
        }
        if (total > m) throw ContractViolation("SystemModel: schedule adds more than m indices");
    }

    /// Indices added exactly at time t.
    IndexSet additions_at(int t) const {
        for (const auto& [ts, add] : support_schedule) {
            if (ts == t) return add;
        }
        return {};
    }

    /// Union of all additions with time <= t.
    IndexSet support_at(int t) const {
        IndexSet N;
        for (const auto& [ts, add] : support_schedule) {
            if (ts <= t) N = N.set_union(add);
        }
        return N;
    }

    int s_max() const {
        int total = 0;
        for (const auto& [ts, add] : support_schedule) total += add.size();
        return total;
    }

    int last_addition_time() const {
        int t = 0;
        for (const auto& [ts, add] : support_schedule) {
            if (!add.empty()) t = std::max(t, ts);
        }
        return t;
    }
};

/// Measurement process y = A x + w with unit-norm columns of A.
struct MeasurementModel {
    Mat A;                 // n x m, unit-norm columns
    double sigma_obs_sq = 0.0;
    double lambda_m = 0.0; // constraint multiplier for the selector
    NoiseKind noise_kind = NoiseKind::Gaussian;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(A.cols()); }
    double sigma_obs() const { return std::sqrt(sigma_obs_sq); }

    /// Constraint level lambda_m * sigma_obs used by the selector.
    double eps() const { return lambda_m * sigma_obs(); }

    /// Bounded-noise cutoff lambda_m sigma_obs / max_i |A_i|_1, which keeps
    /// |A_i' w| <= lambda_m sigma_obs for every column.
    double noise_cutoff() const {
        double max_l1 = 0.0;
        for (int j = 0; j < A.cols(); ++j) max_l1 = std::max(max_l1, A.col(j).lpNorm<1>());
        if (max_l1 == 0.0) return 0.0;
        return lambda_m * sigma_obs() / max_l1;
    }

    void validate() const {
        if (A.rows() <= 0 || A.cols() <= 0) throw ContractViolation("MeasurementModel: empty matrix");
        if (A.rows() >= A.cols()) throw ContractViolation("MeasurementModel: requires n < m");
        require_finite(A, "MeasurementModel matrix");
        for (int j = 0; j < A.cols(); ++j) {
            if (std::abs(A.col(j).norm() - 1.0) > 1e-10) {
                throw ContractViolation("MeasurementModel: column " + std::to_string(j) +
                                        " is not unit norm");
            }
        }
        if (sigma_obs_sq < 0.0) throw ContractViolation("MeasurementModel: negative noise variance");
    }
};

/// Ground-truth signal at one time step.
struct TrueState {
    int t = 0;
    Vec x;      // length m, zero off N
    IndexSet N; // true support
};

/// n x m matrix of i.i.d. standard normal entries with each column
/// normalized to unit length. Deterministic in the seed.
inline MeasurementModel gen_matrix(int n, int m, std::uint64_t seed) {
    if (n <= 0 || m <= 0 || n >= m) {
        throw ContractViolation("gen_matrix: requires 0 < n < m");
    }
    Rng rng(seed);
    Mat A(n, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < n; ++i) A(i, j) = rng.normal();
        const double nrm = A.col(j).norm();
        if (nrm == 0.0) {
            // Probability-zero draw; regenerate the column.
            --j;
            continue;
        }
        A.col(j) /= nrm;
    }
    MeasurementModel meas;
    meas.A = std::move(A);
    return meas;
}

inline TrueState initial_state(int m) {
    TrueState s;
    s.t = 0;
    s.x = Vec::Zero(m);
    return s;
}

/// Advance the true signal one step: ongoing coefficients random-walk with
/// variance sigma_sys_sq, coefficients scheduled at t+1 are drawn fresh with
/// variance sigma_init_sq, everything else stays exactly zero.
inline TrueState step_signal(const TrueState& prev, const SystemModel& sys, Rng& rng) {
    if (prev.t < 0) throw ContractViolation("step_signal: negative time");
    TrueState next;
    next.t = prev.t + 1;
    next.x = prev.x;
    const IndexSet added = sys.additions_at(next.t);
    next.N = prev.N.set_union(added);
    const double s_sys = std::sqrt(sys.sigma_sys_sq);
    const double s_init = std::sqrt(sys.sigma_init_sq);
    for (int i : prev.N) next.x[i] += rng.normal(0.0, s_sys);
    for (int i : added) next.x[i] = rng.normal(0.0, s_init);
    require_finite(next.x, "step_signal");
    return next;
}

/// Observe y = A x + w. Gaussian noise, or rejection-truncated Gaussian with
/// the bounded-support cutoff.
inline Vec measure(const Vec& x, const MeasurementModel& meas, Rng& rng) {
    if (x.size() != meas.A.cols()) throw ContractViolation("measure: length of x must be m");
    Vec y = meas.A * x;
    const double sigma = meas.sigma_obs();
    if (sigma > 0.0) {
        if (meas.noise_kind == NoiseKind::Gaussian) {
            for (int i = 0; i < y.size(); ++i) y[i] += rng.normal(0.0, sigma);
        } else {
            const double cutoff = meas.noise_cutoff();
            for (int i = 0; i < y.size(); ++i) y[i] += rng.truncated_normal(sigma, cutoff);
        }
    }
    require_finite(y, "measure");
    return y;
}

enum class PaperSchedule { Experiment1, Experiment2 };

/// Support schedules of the two simulated experiments: 8 indices at t=1,
/// then either 4 more at t=10,20,30 (S_max=20) or 2 more every 5 steps for
/// 10 <= t <= 50 (S_max=26). Indices are drawn uniformly at random without
/// replacement from the remaining coordinates.
inline SystemModel paper_schedule(PaperSchedule which, int m, std::uint64_t seed) {
    if (m < 26) throw ContractViolation("paper_schedule: requires m >= 26");
    Rng rng(seed);
    std::vector<int> remaining(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) remaining[static_cast<std::size_t>(i)] = i;
    auto draw = [&](int count) {
        std::vector<int> picked;
        picked.reserve(static_cast<std::size_t>(count));
        for (int c = 0; c < count; ++c) {
            const int pos = rng.uniform_int(static_cast<int>(remaining.size()));
            picked.push_back(remaining[static_cast<std::size_t>(pos)]);
            remaining.erase(remaining.begin() + pos);
        }
        return IndexSet(std::move(picked));
    };

    SystemModel sys;
    sys.m = m;
    sys.sigma_sys_sq = 1.0;
    sys.sigma_init_sq = 3.0;
    sys.support_schedule.emplace_back(1, draw(8));
    if (which == PaperSchedule::Experiment1) {
        for (int t : {10, 20, 30}) sys.support_schedule.emplace_back(t, draw(4));
    } else {
        for (int t = 10; t <= 50; t += 5) sys.support_schedule.emplace_back(t, draw(2));
    }
    sys.validate();
    return sys;
}

} // namespace kfcs

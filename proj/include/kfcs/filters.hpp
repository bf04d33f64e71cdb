#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <utility>

#include "kfcs/dantzig.hpp"
#include "kfcs/errors.hpp"
#include "kfcs/index_set.hpp"
#include "kfcs/model.hpp"
#include "kfcs/numerics.hpp"

namespace kfcs {

/// Tuning knobs of the support-tracking filters.
struct Thresholds {
    double alpha_a = 0.0;  // addition threshold on squared selector estimates
    double alpha_fe = 0.0; // filtering-error-norm gate
    double alpha_z = 0.0;  // deletion threshold on mean squared estimates
    int k = 5;             // support must be unchanged this long before deleting
    int k_prime = 3;       // deletion averages the last k' estimates
    int max_add = 0;       // cap on additions per step
    bool final_ls = false; // replace the KF update by LS whenever T changed
    bool deletion_enabled = true;

    void validate() const {
        if (alpha_a < 0.0 || alpha_fe < 0.0 || alpha_z < 0.0) {
            throw ContractViolation("Thresholds: thresholds must be >= 0");
        }
        if (k_prime >= k || k_prime < 1) {
            throw ContractViolation("Thresholds: requires 1 <= k' < k");
        }
        if (max_add < 0) throw ContractViolation("Thresholds: max_add must be >= 0");
    }
};

/// Reduced-order filter state: estimates live on the tracked support only.
struct FilterState {
    int t = 0;
    IndexSet support;           // T_t
    Vec x_hat;                  // length m, zero off support
    Mat P;                      // |T| x |T| updated error covariance on T
    int support_changed_at = 0; // time of the last change to T
    std::deque<Vec> recent;     // last k' full-length estimates
};

inline FilterState make_filter_state(int m, IndexSet initial_support = {}) {
    initial_support.require_within(m, "initial support");
    FilterState s;
    s.x_hat = Vec::Zero(m);
    const int k = initial_support.size();
    s.P = Mat::Zero(k, k);
    s.support = std::move(initial_support);
    return s;
}

/// What happened inside one filter step; filled when a sink is supplied.
struct StepDiag {
    double fen = 0.0;
    bool fen_fired = false;
    IndexSet added;
    IndexSet deleted;
    bool addition_rejected = false;
    long ds_iterations = 0;
};

struct KfTemporaryResult {
    Vec x_tmp;          // length m, zero off the previous support
    Mat P_tmp;          // reduced covariance after the temporary update
    Mat innovation_cov; // A_T (P + Q) A_T' + sigma_obs^2 I
};

namespace detail {

struct ReducedKf {
    Vec mean; // |T|
    Mat cov;  // |T| x |T|
    Mat innovation_cov;
};

/// One Kalman update of the reduced state (prior mean/cov on T) against
/// y = A_T x_T + w. Joseph-form covariance update keeps P symmetric PSD.
inline ReducedKf reduced_kf_update(const Vec& mean, const Mat& P_pred, const Mat& A_T, const Vec& y,
                                   double sigma_obs_sq) {
    const int n = static_cast<int>(A_T.rows());
    const int k = static_cast<int>(A_T.cols());
    ReducedKf out;
    if (k == 0) {
        out.mean = Vec(0);
        out.cov = Mat(0, 0);
        out.innovation_cov = sigma_obs_sq * Mat::Identity(n, n);
        return out;
    }
    Mat S = A_T * P_pred * A_T.transpose();
    S.diagonal().array() += sigma_obs_sq;
    S = 0.5 * (S + S.transpose());
    out.innovation_cov = S;
    Eigen::LLT<Mat> llt(S);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("reduced KF: innovation covariance not positive definite", 0.0);
    }
    const Mat K = llt.solve(A_T * P_pred).transpose(); // k x n
    out.mean = mean + K * (y - A_T * mean);
    const Mat IKH = Mat::Identity(k, k) - K * A_T;
    Mat P = IKH * P_pred * IKH.transpose() + sigma_obs_sq * K * K.transpose();
    out.cov = 0.5 * (P + P.transpose());
    return out;
}

/// Grow (or shrink) a covariance to a new support: shared entries carry
/// over, fresh coordinates start at sigma_init_sq on the diagonal.
inline Mat remap_covariance(const Mat& P_old, const IndexSet& T_old, const IndexSet& T_new,
                            double sigma_init_sq) {
    Mat P(T_new.size(), T_new.size());
    for (int a = 0; a < T_new.size(); ++a) {
        const int pa = T_old.position_of(T_new[a]);
        for (int b = 0; b < T_new.size(); ++b) {
            const int pb = T_old.position_of(T_new[b]);
            if (pa >= 0 && pb >= 0) {
                P(a, b) = P_old(pa, pb);
            } else if (a == b) {
                P(a, b) = sigma_init_sq;
            } else {
                P(a, b) = 0.0;
            }
        }
    }
    return P;
}

/// Least squares of y on A_T together with the scaled inverse Gram matrix,
/// the LS analogue of an updated covariance.
inline std::pair<Vec, Mat> ls_estimate(const Mat& A_T, const Vec& y, double sigma_obs_sq) {
    const int k = static_cast<int>(A_T.cols());
    if (k == 0) return {Vec(0), Mat(0, 0)};
    Vec coeffs = least_squares(A_T, y);
    Mat gram = A_T.transpose() * A_T;
    gram = 0.5 * (gram + gram.transpose());
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("ls_estimate: Gram matrix not positive definite", 0.0);
    }
    const Mat cov = sigma_obs_sq * llt.solve(Mat::Identity(k, k));
    return {std::move(coeffs), 0.5 * (cov + cov.transpose())};
}

inline void push_recent(FilterState& s, int k_prime) {
    s.recent.push_back(s.x_hat);
    while (static_cast<int>(s.recent.size()) > k_prime) s.recent.pop_front();
}

/// Deletion sweep: indices whose mean squared estimate over the last k'
/// steps fell below alpha_z leave the support in one batch.
inline void apply_deletions(FilterState& s, const Thresholds& th, double sigma_init_sq,
                            StepDiag* diag) {
    if (!th.deletion_enabled) return;
    if (s.t - s.support_changed_at < th.k) return;
    if (static_cast<int>(s.recent.size()) < th.k_prime) return;
    std::vector<int> doomed;
    for (int i : s.support) {
        double mean_sq = 0.0;
        for (const Vec& est : s.recent) mean_sq += est[i] * est[i];
        mean_sq /= static_cast<double>(th.k_prime);
        if (mean_sq < th.alpha_z) doomed.push_back(i);
    }
    if (doomed.empty()) return;
    IndexSet removed(std::move(doomed));
    const IndexSet kept = s.support.set_difference(removed);
    s.P = remap_covariance(s.P, s.support, kept, sigma_init_sq);
    for (int i : removed) s.x_hat[i] = 0.0;
    s.support = kept;
    s.support_changed_at = s.t;
    if (diag) diag->deleted = removed;
}

/// Shared addition machinery: gate on the filtering-error norm, run the
/// selector on the residual, threshold, and reject batches that would make
/// the support's Gram matrix numerically singular.
inline IndexSet detect_additions(const Vec& residual, const Mat& innovation_cov,
                                 const IndexSet& T_prev, const MeasurementModel& meas,
                                 const Thresholds& th, const DantzigSolver& solver,
                                 StepDiag* diag) {
    if (residual.lpNorm<Eigen::Infinity>() == 0.0) return {};
    const Vec white = spd_solve(innovation_cov, residual);
    const double fen = residual.dot(white);
    if (diag) diag->fen = fen;
    if (!(fen > th.alpha_fe)) return {};
    if (diag) diag->fen_fired = true;
    const DsSolution sol = solver.solve(residual, meas.eps());
    if (diag) diag->ds_iterations = sol.iterations;
    IndexSet added = threshold_additions(sol.beta_hat, T_prev, th.alpha_a, th.max_add);
    if (added.empty()) return added;
    const IndexSet T_new = T_prev.set_union(added);
    const Mat A_new = columns(meas.A, T_new);
    Mat gram = A_new.transpose() * A_new;
    gram = 0.5 * (gram + gram.transpose());
    const auto [lo, hi] = eig_extremes(gram);
    (void)hi;
    if (lo < 1e-10) {
        if (diag) diag->addition_rejected = true;
        return {};
    }
    if (diag) diag->added = added;
    return added;
}

} // namespace detail

/// Temporary Kalman prediction/update on the previous support, with
/// Q = sigma_sys^2 I restricted to that support.
inline KfTemporaryResult kf_temporary(const FilterState& state, const Vec& y,
                                      const MeasurementModel& meas, const SystemModel& sys) {
    const IndexSet& T = state.support;
    const Mat A_T = columns(meas.A, T);
    Mat P_pred = state.P;
    P_pred.diagonal().array() += sys.sigma_sys_sq;
    const auto kf = detail::reduced_kf_update(subvector(state.x_hat, T), P_pred, A_T, y,
                                              meas.sigma_obs_sq);
    KfTemporaryResult out;
    out.x_tmp = scatter(kf.mean, T, meas.m());
    out.P_tmp = kf.cov;
    out.innovation_cov = kf.innovation_cov;
    return out;
}

/// Quadratic form of the residual under the innovation covariance. A zero
/// residual is 0 without touching the covariance.
inline double filtering_error_norm(const Vec& residual, const Mat& innovation_cov) {
    if (residual.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
    return residual.dot(spd_solve(innovation_cov, residual));
}

inline bool fen_test(const Vec& residual, const Mat& innovation_cov, double alpha_fe) {
    return filtering_error_norm(residual, innovation_cov) > alpha_fe;
}

/// One full filter step: temporary KF, residual-driven support additions,
/// full KF (or LS when T changed and final_ls is set), then the deletion
/// sweep once the support has been stable for k steps.
inline FilterState kfcs_step(const FilterState& state, const Vec& y, const MeasurementModel& meas,
                             const SystemModel& sys, const Thresholds& th,
                             const DantzigSolver& solver, StepDiag* diag = nullptr) {
    th.validate();
    const IndexSet& T_prev = state.support;

    const KfTemporaryResult tmp = kf_temporary(state, y, meas, sys);
    const Vec residual = y - meas.A * tmp.x_tmp;
    const IndexSet added = detail::detect_additions(residual, tmp.innovation_cov, T_prev, meas, th,
                                                    solver, diag);

    FilterState next;
    next.t = state.t + 1;
    next.support = T_prev.set_union(added);
    next.support_changed_at =
        (next.support != T_prev) ? next.t : state.support_changed_at;
    next.recent = state.recent;

    const Mat A_T = columns(meas.A, next.support);
    if (th.final_ls && next.support != T_prev) {
        auto [coeffs, cov] = detail::ls_estimate(A_T, y, meas.sigma_obs_sq);
        next.x_hat = scatter(coeffs, next.support, meas.m());
        next.P = std::move(cov);
    } else {
        Mat P_pred = detail::remap_covariance(state.P, T_prev, next.support, sys.sigma_init_sq);
        P_pred.diagonal().array() += sys.sigma_sys_sq;
        const auto kf = detail::reduced_kf_update(subvector(state.x_hat, next.support), P_pred,
                                                  A_T, y, meas.sigma_obs_sq);
        next.x_hat = scatter(kf.mean, next.support, meas.m());
        next.P = kf.cov;
    }
    require_finite(next.x_hat, "kfcs_step estimate");

    detail::push_recent(next, th.k_prime);
    detail::apply_deletions(next, th, sys.sigma_init_sq, diag);
    return next;
}

/// Non-Bayesian variant: both Kalman updates replaced by least squares on
/// the current support. Addition and deletion rules are unchanged.
inline FilterState lscs_step(const FilterState& state, const Vec& y, const MeasurementModel& meas,
                             const Thresholds& th, const DantzigSolver& solver,
                             StepDiag* diag = nullptr) {
    th.validate();
    const IndexSet& T_prev = state.support;

    const Mat A_prev = columns(meas.A, T_prev);
    auto [tmp_coeffs, tmp_cov] = detail::ls_estimate(A_prev, y, meas.sigma_obs_sq);
    const Vec x_tmp = scatter(tmp_coeffs, T_prev, meas.m());
    Mat innovation_cov = A_prev * tmp_cov * A_prev.transpose();
    innovation_cov.diagonal().array() += meas.sigma_obs_sq;
    innovation_cov = 0.5 * (innovation_cov + innovation_cov.transpose());

    const Vec residual = y - meas.A * x_tmp;
    const IndexSet added = detail::detect_additions(residual, innovation_cov, T_prev, meas, th,
                                                    solver, diag);

    FilterState next;
    next.t = state.t + 1;
    next.support = T_prev.set_union(added);
    next.support_changed_at =
        (next.support != T_prev) ? next.t : state.support_changed_at;
    next.recent = state.recent;

    auto [coeffs, cov] = detail::ls_estimate(columns(meas.A, next.support), y, meas.sigma_obs_sq);
    next.x_hat = scatter(coeffs, next.support, meas.m());
    next.P = std::move(cov);
    require_finite(next.x_hat, "lscs_step estimate");

    detail::push_recent(next, th.k_prime);
    // LS has no process-noise bookkeeping; a re-added coordinate restarts
    // from the plain LS fit, so the init variance is irrelevant here.
    detail::apply_deletions(next, th, 0.0, diag);
    return next;
}

/// Genie-aided KF: full Kalman update on the true support each step, no
/// addition or deletion logic.
inline FilterState ga_kf_step(const FilterState& state, const Vec& y, const MeasurementModel& meas,
                              const SystemModel& sys, const IndexSet& true_support) {
    true_support.require_within(meas.m(), "ga_kf_step support");
    FilterState next;
    next.t = state.t + 1;
    next.support = true_support;
    next.support_changed_at =
        (true_support != state.support) ? next.t : state.support_changed_at;
    next.recent = state.recent;

    const Mat A_T = columns(meas.A, true_support);
    Mat P_pred = detail::remap_covariance(state.P, state.support, true_support, sys.sigma_init_sq);
    P_pred.diagonal().array() += sys.sigma_sys_sq;
    const auto kf = detail::reduced_kf_update(subvector(state.x_hat, true_support), P_pred, A_T, y,
                                              meas.sigma_obs_sq);
    next.x_hat = scatter(kf.mean, true_support, meas.m());
    next.P = kf.cov;
    require_finite(next.x_hat, "ga_kf_step estimate");
    detail::push_recent(next, 3);
    return next;
}

/// Genie-aided LS: least squares on the true support each step.
inline FilterState ga_ls_step(const FilterState& state, const Vec& y, const MeasurementModel& meas,
                              const IndexSet& true_support) {
    true_support.require_within(meas.m(), "ga_ls_step support");
    FilterState next;
    next.t = state.t + 1;
    next.support = true_support;
    next.support_changed_at =
        (true_support != state.support) ? next.t : state.support_changed_at;
    next.recent = state.recent;

    auto [coeffs, cov] = detail::ls_estimate(columns(meas.A, true_support), y, meas.sigma_obs_sq);
    next.x_hat = scatter(coeffs, true_support, meas.m());
    next.P = std::move(cov);
    require_finite(next.x_hat, "ga_ls_step estimate");
    detail::push_recent(next, 3);
    return next;
}

/// Memoryless per-step baseline: the selector on the raw observation with
/// a Gauss-Dantzig refit.
inline std::pair<IndexSet, Vec> simple_cs_step(const Vec& y, const MeasurementModel& meas,
                                               double alpha, const DantzigSolver& solver) {
    return gauss_dantzig(solver, y, meas.eps(), alpha);
}

} // namespace kfcs

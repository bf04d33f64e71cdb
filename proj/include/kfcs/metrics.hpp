#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "kfcs/errors.hpp"
#include "kfcs/model.hpp"
#include "kfcs/numerics.hpp"

namespace kfcs {

namespace detail {

inline double binomial_approx(int m, int k) {
    if (k < 0 || k > m) return 0.0;
    double r = 1.0;
    for (int i = 0; i < k; ++i) {
        r *= static_cast<double>(m - i) / static_cast<double>(i + 1);
        if (r > 1e300) return 1e300;
    }
    return r;
}

/// Visit every size-S subset of {0..m-1} in lexicographic order.
template <typename F>
void for_each_subset(int m, int S, F&& visit) {
    if (S == 0) return;
    std::vector<int> c(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) c[static_cast<std::size_t>(i)] = i;
    for (;;) {
        visit(c);
        int i = S - 1;
        while (i >= 0 && c[static_cast<std::size_t>(i)] == m - S + i) --i;
        if (i < 0) break;
        ++c[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < S; ++j) {
            c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
}

inline Mat gram_subset(const Mat& G, const std::vector<int>& idx) {
    const int k = static_cast<int>(idx.size());
    Mat out(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            out(a, b) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return out;
}

} // namespace detail

inline constexpr double kDefaultEnumerationBudget = 1e9;

/// Restricted isometry constant delta_S by exhaustive enumeration of all
/// size-S column subsets: the worst deviation of a subset Gram spectrum
/// from 1, clipped below at 0. Refuses (rather than samples) when
/// C(m,S)*S^3 exceeds the budget.
inline double delta_S(const Mat& A, int S, double budget = kDefaultEnumerationBudget) {
    const int m = static_cast<int>(A.cols());
    if (S < 0 || S > m) throw ContractViolation("delta_S: requires 0 <= S <= m");
    if (S == 0) return 0.0;
    const double cost = detail::binomial_approx(m, S) * std::pow(static_cast<double>(S), 3.0);
    if (cost > budget) {
        throw BudgetExceeded("delta_S: enumeration over C(m,S) subsets exceeds budget", cost,
                             budget);
    }
    const Mat G = A.transpose() * A;
    double worst = 0.0;
    detail::for_each_subset(m, S, [&](const std::vector<int>& idx) {
        Mat GT = detail::gram_subset(G, idx);
        GT = 0.5 * (GT + GT.transpose());
        const auto [lo, hi] = eig_extremes(GT);
        worst = std::max(worst, std::max(hi - 1.0, 1.0 - lo));
    });
    return std::max(0.0, worst);
}

/// Restricted orthogonality constant theta_{S,S'}: the largest spectral
/// norm of A_T' A_T' over disjoint subsets |T|=S, |T'|=S', by exhaustive
/// enumeration of all pairs.
inline double theta_S_Sp(const Mat& A, int S, int Sp, double budget = kDefaultEnumerationBudget) {
    const int m = static_cast<int>(A.cols());
    if (S < 0 || Sp < 0 || S + Sp > m) {
        throw ContractViolation("theta_S_Sp: requires S, S' >= 0 and S + S' <= m");
    }
    if (S == 0 || Sp == 0) return 0.0;
    const double pairs = detail::binomial_approx(m, S) * detail::binomial_approx(m - S, Sp);
    const double cost = pairs * static_cast<double>(S) * static_cast<double>(Sp) *
                        static_cast<double>(std::max(S, Sp));
    if (cost > budget) {
        throw BudgetExceeded("theta_S_Sp: enumeration over disjoint subset pairs exceeds budget",
                             cost, budget);
    }
    const Mat G = A.transpose() * A;
    double worst = 0.0;
    detail::for_each_subset(m, S, [&](const std::vector<int>& tidx) {
        std::vector<char> taken(static_cast<std::size_t>(m), 0);
        for (int i : tidx) taken[static_cast<std::size_t>(i)] = 1;
        std::vector<int> rest;
        rest.reserve(static_cast<std::size_t>(m - S));
        for (int i = 0; i < m; ++i) {
            if (!taken[static_cast<std::size_t>(i)]) rest.push_back(i);
        }
        detail::for_each_subset(m - S, Sp, [&](const std::vector<int>& pos) {
            Mat M(S, Sp);
            for (int a = 0; a < S; ++a) {
                for (int b = 0; b < Sp; ++b) {
                    M(a, b) = G(tidx[static_cast<std::size_t>(a)],
                                rest[static_cast<std::size_t>(pos[static_cast<std::size_t>(b)])]);
                }
            }
            worst = std::max(worst, spectral_norm(M));
        });
    });
    return worst;
}

/// Enumerated incoherence constants of a matrix plus the standard checks
/// on them.
struct IncoherenceReport {
    std::map<int, double> delta;                       // S -> delta_S
    std::map<std::pair<int, int>, double> theta;       // (S,S') -> theta
    int budget_S_max = 0;                              // largest enumerable S
    int s_max = 0;
    int s_fa = 0;
    bool check_delta_smax_sfa = false;                 // delta_{S_max+S_fa} < 1
    bool check_delta_2smax_3smax = false;              // delta_{2S_max}+delta_{3S_max} < 1
};

inline IncoherenceReport compute_incoherence(const Mat& A, int s_max, int s_fa,
                                             double budget = kDefaultEnumerationBudget) {
    if (s_max < 1 || s_fa < 0) throw ContractViolation("compute_incoherence: bad S_max/S_fa");
    const int m = static_cast<int>(A.cols());
    IncoherenceReport rep;
    rep.s_max = s_max;
    rep.s_fa = s_fa;
    for (int S = 1; S <= m; ++S) {
        if (detail::binomial_approx(m, S) * std::pow(static_cast<double>(S), 3.0) > budget) break;
        rep.budget_S_max = S;
    }
    const int need[] = {s_max + s_fa, 2 * s_max, 3 * s_max};
    for (int S : need) {
        if (S > m) {
            throw ContractViolation("compute_incoherence: required subset size exceeds m");
        }
        if (rep.delta.count(S) == 0) rep.delta[S] = delta_S(A, S, budget);
    }
    for (int S = 1; S <= std::min(m, 3 * s_max); ++S) {
        if (rep.delta.count(S)) continue;
        if (detail::binomial_approx(m, S) * std::pow(static_cast<double>(S), 3.0) > budget) continue;
        rep.delta[S] = delta_S(A, S, budget);
    }
    rep.theta[{s_max, 2 * s_max}] = theta_S_Sp(A, s_max, 2 * s_max, budget);
    rep.check_delta_smax_sfa = rep.delta.at(s_max + s_fa) < 1.0;
    rep.check_delta_2smax_3smax = rep.delta.at(2 * s_max) + rep.delta.at(3 * s_max) < 1.0;
    return rep;
}

/// Compressibility test: the worst conditional second moment of the
/// residual signal on T must be strictly below the smallest mean energy of
/// a truly active coordinate.
inline bool compressibility_check(const Vec& beta_cov_diag_T, double x_min_energy) {
    double worst = 0.0;
    for (int i = 0; i < beta_cov_diag_T.size(); ++i) worst = std::max(worst, beta_cov_diag_T[i]);
    return worst < x_min_energy;
}

/// Precondition of the conditional compressibility guarantee:
/// (t - t_a + 1) sigma_sys^2 >= theta^2/(1-delta)^2 lambda_max + sigma_obs^2/(1-delta).
/// IEEE semantics: delta -> 1 sends the right side to infinity (false).
inline bool theorem1_condition(int t, int t_a, const SystemModel& sys, double delta_T, double theta,
                               double lambda_max_cond, double sigma_obs_sq) {
    if (delta_T < 0.0 || theta < 0.0) throw ContractViolation("theorem1_condition: negative constant");
    const double lhs = static_cast<double>(t - t_a + 1) * sys.sigma_sys_sq;
    const double om = 1.0 - delta_T;
    const double rhs = (theta * theta) / (om * om) * lambda_max_cond + sigma_obs_sq / om;
    return lhs >= rhs;
}

} // namespace kfcs

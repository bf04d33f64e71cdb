#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "kfcs/errors.hpp"

namespace kfcs {

/// Gaussian upper-tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Inverse of the Q function by monotone bisection; accurate to ~1e-12.
inline double q_inverse(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("q_inverse: p must lie in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (q_function(mid) > p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Everything the closed-form error bounds depend on. The constants c1 and
/// c2/c3 come from the classical selector recovery guarantees and are
/// caller-supplied; see default_c1 / make_default_c2_c3 for the documented
/// defaults.
struct BoundInputs {
    double c1 = 1.0;
    std::function<double(int)> c2;
    std::function<double(int)> c3;
    double lambda_m = 0.0;
    int s_max = 0;
    double sigma_obs_sq = 0.0;
    double delta_T = 0.0;        // delta_{|T|}
    double theta_T_Delta = 0.0;  // theta_{|T|,|Delta|}
    int size_T = 0;
    int size_Delta = 0;
    double e_xdelta_sq = 0.0;    // E[ |x_Delta|^2 | past observations ]

    void validate() const {
        if (!(delta_T >= 0.0)) throw ContractViolation("BoundInputs: delta_T must be >= 0");
        if (sigma_obs_sq < 0.0 || e_xdelta_sq < 0.0) {
            throw ContractViolation("BoundInputs: variances must be >= 0");
        }
        if (s_max < 0 || size_T < 0 || size_Delta < 0) {
            throw ContractViolation("BoundInputs: sizes must be >= 0");
        }
    }
};

/// Safe addition threshold: B1 = c1^2 lambda_m^2 S_max sigma_obs^2.
inline double b1(const BoundInputs& in) {
    in.validate();
    return in.c1 * in.c1 * in.lambda_m * in.lambda_m * static_cast<double>(in.s_max) *
           in.sigma_obs_sq;
}

/// Bound on the error of the selector applied to the least-squares error:
///   B(S) = C2(S) S sigma^2 + C3(S) ((|T|+|D|-S)/S) L0
/// with L0 branching on S >= |Delta|. Undefined at delta_T >= 1.
inline double b_cslse(int S, const BoundInputs& in) {
    in.validate();
    if (S < 1) throw ContractViolation("b_cslse: requires S >= 1");
    if (in.delta_T >= 1.0) throw DomainError("b_cslse: undefined for delta_T >= 1");
    if (!in.c2 || !in.c3) throw ContractViolation("b_cslse: c2/c3 functions not supplied");
    const double om = 1.0 - in.delta_T;
    const double theta_term = (in.theta_T_Delta * in.theta_T_Delta) / (om * om);
    const double excess = static_cast<double>(in.size_T + in.size_Delta - S);
    double L0;
    if (S >= in.size_Delta) {
        L0 = theta_term * in.e_xdelta_sq + excess * in.sigma_obs_sq / om;
    } else {
        L0 = (theta_term + 1.0) * in.e_xdelta_sq +
             static_cast<double>(in.size_T) * in.sigma_obs_sq / om;
    }
    return in.c2(S) * static_cast<double>(S) * in.sigma_obs_sq +
           in.c3(S) * (excess / static_cast<double>(S)) * L0;
}

/// Detection-delay horizon: after tau_eps steps past the last addition the
/// support is fully detected with probability >= 1 - eps.
///   tau = ceil( 4 B1 / (sigma_sys^2 [Q^{-1}((1-eps)^{1/S_max}/2)]^2) )
inline long tau_epsilon(double eps, const BoundInputs& in, double sigma_sys_sq) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("tau_epsilon: eps must lie in (0,1)");
    if (in.s_max < 1) throw ContractViolation("tau_epsilon: requires S_max >= 1");
    const double B1 = b1(in);
    if (B1 == 0.0) return 0;
    if (!(sigma_sys_sq > 0.0)) throw DomainError("tau_epsilon: requires sigma_sys_sq > 0");
    const double p = std::pow(1.0 - eps, 1.0 / static_cast<double>(in.s_max)) / 2.0;
    const double q = q_inverse(p);
    return static_cast<long>(std::ceil(4.0 * B1 / (sigma_sys_sq * q * q)));
}

/// Argmin and min of b_cslse over S in [s_lo, s_hi]; ties go to smaller S.
inline std::pair<int, double> min_over_S_bound(const BoundInputs& in, int s_lo, int s_hi) {
    if (s_lo < 1 || s_hi < s_lo) throw ContractViolation("min_over_S_bound: bad range");
    int best_s = s_lo;
    double best = b_cslse(s_lo, in);
    for (int S = s_lo + 1; S <= s_hi; ++S) {
        const double v = b_cslse(S, in);
        if (v < best) {
            best = v;
            best_s = S;
        }
    }
    return {best_s, best};
}

/// Classical selector recovery constant 4 / (1 - delta_{2S} - theta_{S,2S}),
/// defined only when the incoherence condition delta_{2S} + theta_{S,2S} < 1
/// holds.
inline double default_c1(double delta_2s, double theta_s_2s) {
    const double slack = 1.0 - delta_2s - theta_s_2s;
    if (!(slack > 0.0)) {
        throw DomainError("default_c1: requires delta_{2S} + theta_{S,2S} < 1");
    }
    return 4.0 / slack;
}

/// Conservative default C2(S) = C3(S) = lambda_m^2 * default_c1(...)^2, the
/// squared recovery constant scaled by the selector's log factor, evaluated
/// per S from caller-supplied incoherence functions.
inline std::pair<std::function<double(int)>, std::function<double(int)>> make_default_c2_c3(
    double lambda_m, std::function<double(int)> delta_of, std::function<double(int, int)> theta_of) {
    auto c = [lambda_m, delta_of = std::move(delta_of),
              theta_of = std::move(theta_of)](int S) -> double {
        const double c1 = default_c1(delta_of(2 * S), theta_of(S, 2 * S));
        return lambda_m * lambda_m * c1 * c1;
    };
    return {c, c};
}

} // namespace kfcs

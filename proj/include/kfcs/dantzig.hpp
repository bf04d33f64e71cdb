#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "kfcs/errors.hpp"
#include "kfcs/index_set.hpp"
#include "kfcs/numerics.hpp"

namespace kfcs {

/// One selector instance: min |beta|_1 subject to |A'(y - A beta)|_inf <= eps.
struct DsProblem {
    Mat A;
    Vec y;
    double eps = 0.0;

    void validate() const {
        if (A.rows() != y.size()) throw ContractViolation("DsProblem: A rows must match y length");
        if (A.rows() == 0 || A.cols() == 0) throw ContractViolation("DsProblem: empty matrix");
        if (!(eps >= 0.0) || !std::isfinite(eps)) {
            throw ContractViolation("DsProblem: eps must be a nonnegative finite number");
        }
        require_finite(A, "DsProblem A");
        require_finite(y, "DsProblem y");
    }
};

struct DsSolution {
    Vec beta_hat;
    double objective = 0.0;       // |beta_hat|_1
    double feasibility_gap = 0.0; // max(0, |A'(y - A beta)|_inf - eps)
    long iterations = 0;
};

struct DsOptions {
    long max_iterations = 0;        // 0: 50*m + 5000
    double feas_tol = 1e-9;         // absolute constraint tolerance
    double rel_gap_tol = 1e-7;      // duality-gap certificate, relative
    double reduced_cost_tol = 1e-9; // dual feasibility tolerance
    int refactor_period = 100;
};

/// Dantzig selector solved as the split LP
///
///   min 1'u + 1'v   s.t.  G(u - v) + t = g + eps,  u,v >= 0,  0 <= t <= 2 eps
///
/// with G = A'A and g = A'y, by a two-phase bounded-variable revised primal
/// simplex. Pricing is by most-negative reduced cost with a switch to
/// Bland's rule after 50*m degenerate pivots. The Gram matrix is
/// precomputed once, so reuse one solver per measurement matrix.
class DantzigSolver {
public:
    explicit DantzigSolver(Mat A, DsOptions opts = {})
        : A_(std::move(A)), opts_(opts) {
        if (A_.rows() == 0 || A_.cols() == 0) {
            throw ContractViolation("DantzigSolver: empty matrix");
        }
        require_finite(A_, "DantzigSolver A");
        G_ = A_.transpose() * A_;
        G_ = 0.5 * (G_ + G_.transpose());
    }

    const Mat& matrix() const { return A_; }

    DsSolution solve(const Vec& y, double eps) const {
        if (y.size() != A_.rows()) throw ContractViolation("DantzigSolver: y length must be n");
        if (!(eps >= 0.0) || !std::isfinite(eps)) {
            throw ContractViolation("DantzigSolver: eps must be nonnegative and finite");
        }
        require_finite(y, "DantzigSolver y");
        Workspace ws(*this, A_.transpose() * y, eps);
        return ws.run();
    }

private:
    enum class Status : unsigned char { Basic, AtLower, AtUpper };

    struct Workspace {
        const DantzigSolver& s;
        const int m;
        const double eps;
        Vec g;       // A'y
        Vec b;       // g + eps
        Mat Binv;
        Vec xB;
        std::vector<int> basis;        // var index basic in each row
        std::vector<Status> status;    // per variable, size 4m
        std::vector<signed char> art_sign; // per row: 0 none, +1/-1 column sign
        int phase = 1;
        long pivots = 0;
        long degenerate = 0;
        bool bland = false;
        long max_iter;
        long bland_after;

        Workspace(const DantzigSolver& solver, Vec gin, double e)
            : s(solver),
              m(static_cast<int>(solver.G_.rows())),
              eps(e),
              g(std::move(gin)),
              b(m),
              Binv(Mat::Identity(m, m)),
              xB(m),
              basis(m),
              status(static_cast<std::size_t>(4 * m), Status::AtLower),
              art_sign(static_cast<std::size_t>(m), 0) {
            max_iter = s.opts_.max_iterations > 0 ? s.opts_.max_iterations : 50L * m + 5000;
            bland_after = 50L * m;
            b = g.array() + eps;
            bool any_artificial = false;
            for (int i = 0; i < m; ++i) {
                const double val = b[i];
                if (val >= 0.0 && val <= 2.0 * eps) {
                    basis[i] = slack(i);
                    status[static_cast<std::size_t>(slack(i))] = Status::Basic;
                    xB[i] = val;
                } else if (val > 2.0 * eps) {
                    status[static_cast<std::size_t>(slack(i))] = Status::AtUpper;
                    basis[i] = art(i);
                    art_sign[static_cast<std::size_t>(i)] = +1;
                    status[static_cast<std::size_t>(art(i))] = Status::Basic;
                    xB[i] = val - 2.0 * eps;
                    Binv(i, i) = 1.0;
                    any_artificial = true;
                } else {
                    basis[i] = art(i);
                    art_sign[static_cast<std::size_t>(i)] = -1;
                    status[static_cast<std::size_t>(art(i))] = Status::Basic;
                    xB[i] = -val;
                    Binv(i, i) = -1.0;
                    any_artificial = true;
                }
            }
            phase = any_artificial ? 1 : 2;
        }

        int uvar(int j) const { return j; }
        int vvar(int j) const { return m + j; }
        int slack(int i) const { return 2 * m + i; }
        int art(int i) const { return 3 * m + i; }
        bool is_art(int var) const { return var >= 3 * m; }

        double cost(int var) const {
            if (phase == 1) return is_art(var) ? 1.0 : 0.0;
            return var < 2 * m ? 1.0 : 0.0;
        }

        double upper(int var) const {
            if (var < 2 * m) return std::numeric_limits<double>::infinity();
            if (var < 3 * m) return 2.0 * eps;
            return phase == 1 ? std::numeric_limits<double>::infinity() : 0.0;
        }

        Vec column(int var) const {
            if (var < m) return s.G_.col(var);
            if (var < 2 * m) return -s.G_.col(var - m);
            Vec e = Vec::Zero(m);
            if (var < 3 * m) {
                e[var - 2 * m] = 1.0;
            } else {
                e[var - 3 * m] = static_cast<double>(art_sign[static_cast<std::size_t>(var - 3 * m)]);
            }
            return e;
        }

        Vec direction(int var) const {
            if (var < m) return Binv * s.G_.col(var);
            if (var < 2 * m) return -(Binv * s.G_.col(var - m));
            if (var < 3 * m) return Binv.col(var - 2 * m);
            return static_cast<double>(art_sign[static_cast<std::size_t>(var - 3 * m)]) *
                   Binv.col(var - 3 * m);
        }

        Vec duals() const {
            Vec cB(m);
            for (int r = 0; r < m; ++r) cB[r] = cost(basis[r]);
            return Binv.transpose() * cB;
        }

        void refactor() {
            Mat B(m, m);
            for (int r = 0; r < m; ++r) B.col(r) = column(basis[r]);
            Eigen::PartialPivLU<Mat> lu(B);
            Binv = lu.inverse();
            if (!Binv.allFinite()) {
                throw ConvergenceFailure("selector LP: basis became singular",
                                         std::vector<double>(), std::numeric_limits<double>::infinity(),
                                         pivots);
            }
            recompute_basics();
        }

        void recompute_basics() {
            Vec rhs = b;
            for (int var = 0; var < 3 * m; ++var) {
                if (status[static_cast<std::size_t>(var)] == Status::AtUpper) {
                    // Only slacks have finite upper bounds.
                    rhs[var - 2 * m] -= 2.0 * eps;
                }
            }
            xB = Binv * rhs;
        }

        /// Most attractive entering variable, or -1 at optimality.
        int price() const {
            const Vec y = duals();
            const Vec h = s.G_ * y;
            const double tol = s.opts_.reduced_cost_tol;
            int best = -1;
            double best_viol = tol;
            auto consider = [&](int var, double d) {
                const Status st = status[static_cast<std::size_t>(var)];
                double viol = 0.0;
                if (st == Status::AtLower && d < -tol) viol = -d;
                else if (st == Status::AtUpper && d > tol) viol = d;
                else return;
                if (bland) {
                    if (best == -1 || var < best) { best = var; best_viol = viol; }
                } else if (viol > best_viol) {
                    best = var;
                    best_viol = viol;
                }
            };
            const double cuv = phase == 1 ? 0.0 : 1.0;
            for (int j = 0; j < m; ++j) {
                consider(uvar(j), cuv - h[j]);
                consider(vvar(j), cuv + h[j]);
            }
            for (int i = 0; i < m; ++i) {
                const int var = slack(i);
                if (status[static_cast<std::size_t>(var)] != Status::Basic) consider(var, -y[i]);
            }
            // Artificials never re-enter.
            return best;
        }

        void pivot_step(int enter) {
            const Status est = status[static_cast<std::size_t>(enter)];
            const double dir = est == Status::AtLower ? 1.0 : -1.0;
            const Vec w = direction(enter);
            const double ratio_tol = 1e-10;
            const double tie_tol = 1e-12;
            const double inf = std::numeric_limits<double>::infinity();

            double best_limit = inf;
            int leave_row = -1;
            bool leave_at_upper = false;
            for (int r = 0; r < m; ++r) {
                const double wr = dir * w[r];
                double limit;
                bool hits_upper;
                if (wr > ratio_tol) {
                    limit = xB[r] / wr; // basic variable drops to its lower bound 0
                    hits_upper = false;
                } else if (wr < -ratio_tol) {
                    const double ub = upper(basis[r]);
                    if (ub == inf) continue;
                    limit = (ub - xB[r]) / (-wr);
                    hits_upper = true;
                } else {
                    continue;
                }
                if (limit < 0.0) limit = 0.0;
                bool take = false;
                if (limit < best_limit - tie_tol) {
                    take = true;
                } else if (leave_row >= 0 && limit <= best_limit + tie_tol) {
                    take = bland ? basis[r] < basis[leave_row]
                                 : std::abs(w[r]) > std::abs(w[leave_row]);
                }
                if (take) {
                    best_limit = std::min(best_limit, limit);
                    leave_row = r;
                    leave_at_upper = hits_upper;
                }
            }

            const double flip_dist = upper(enter); // inf for u/v
            if (leave_row == -1 || flip_dist <= best_limit) {
                if (flip_dist == inf) {
                    throw ConvergenceFailure("selector LP: unbounded direction (numerical breakdown)",
                                             std::vector<double>(), inf, pivots);
                }
                // Bound flip: the entering variable crosses to its other bound.
                xB -= (dir * flip_dist) * w;
                status[static_cast<std::size_t>(enter)] =
                    est == Status::AtLower ? Status::AtUpper : Status::AtLower;
                ++pivots;
                return;
            }

            const double delta = best_limit;
            if (delta <= 1e-11) {
                ++degenerate;
                if (!bland && degenerate > bland_after) bland = true;
            }

            xB -= (dir * delta) * w;
            const int leaving = basis[leave_row];
            status[static_cast<std::size_t>(leaving)] =
                leave_at_upper ? Status::AtUpper : Status::AtLower;

            const double enter_start = est == Status::AtLower ? 0.0 : upper(enter);
            xB[leave_row] = enter_start + dir * delta;
            basis[leave_row] = enter;
            status[static_cast<std::size_t>(enter)] = Status::Basic;

            // Product-form update of the explicit inverse.
            const double piv = w[leave_row];
            Binv.row(leave_row) /= piv;
            for (int r = 0; r < m; ++r) {
                if (r == leave_row) continue;
                const double f = w[r];
                if (f != 0.0) Binv.row(r) -= f * Binv.row(leave_row);
            }
            ++pivots;
            if (s.opts_.refactor_period > 0 && pivots % s.opts_.refactor_period == 0) refactor();
        }

        void run_phase() {
            for (;;) {
                if (pivots > max_iter) {
                    DsSolution best = extract();
                    throw ConvergenceFailure("selector LP: iteration limit exceeded",
                                             std::vector<double>(best.beta_hat.data(),
                                                                 best.beta_hat.data() + best.beta_hat.size()),
                                             best.feasibility_gap, pivots);
                }
                const int enter = price();
                if (enter == -1) return;
                pivot_step(enter);
            }
        }

        void drop_artificials() {
            const double feas_tol = s.opts_.feas_tol * (1.0 + b.cwiseAbs().maxCoeff());
            double infeas = 0.0;
            for (int r = 0; r < m; ++r) {
                if (is_art(basis[r])) infeas += std::abs(xB[r]);
            }
            if (infeas > feas_tol * m) {
                throw ConvergenceFailure("selector LP: phase 1 ended infeasible", std::vector<double>(),
                                         infeas, pivots);
            }
            // Swap any basic zero-valued artificial with its row's slack; the
            // exchange is degenerate and always has a unit pivot.
            for (int r = 0; r < m; ++r) {
                const int bvar = basis[r];
                if (!is_art(bvar)) continue;
                const int i = bvar - 3 * m;
                const int sl = slack(i);
                Vec w = direction(sl);
                if (std::abs(w[r]) < 1e-8) {
                    refactor();
                    w = direction(sl);
                }
                if (std::abs(w[r]) < 1e-8) {
                    throw ConvergenceFailure("selector LP: cannot remove artificial from basis",
                                             std::vector<double>(), std::abs(w[r]), pivots);
                }
                const double enter_val = status[static_cast<std::size_t>(sl)] == Status::AtUpper
                                             ? 2.0 * eps
                                             : 0.0;
                status[static_cast<std::size_t>(bvar)] = Status::AtLower;
                basis[r] = sl;
                status[static_cast<std::size_t>(sl)] = Status::Basic;
                const double piv = w[r];
                Binv.row(r) /= piv;
                for (int q = 0; q < m; ++q) {
                    if (q == r) continue;
                    const double f = w[q];
                    if (f != 0.0) Binv.row(q) -= f * Binv.row(r);
                }
                xB[r] = enter_val;
            }
        }

        DsSolution extract() const {
            // var -> row map for O(1) lookups.
            std::vector<int> row_of(static_cast<std::size_t>(4 * m), -1);
            for (int r = 0; r < m; ++r) row_of[static_cast<std::size_t>(basis[r])] = r;
            DsSolution out;
            out.beta_hat = Vec::Zero(m);
            for (int j = 0; j < m; ++j) {
                auto val = [&](int var) -> double {
                    const int r = row_of[static_cast<std::size_t>(var)];
                    if (r >= 0) return xB[r];
                    return status[static_cast<std::size_t>(var)] == Status::AtUpper ? upper(var) : 0.0;
                };
                out.beta_hat[j] = val(uvar(j)) - val(vvar(j));
            }
            out.objective = out.beta_hat.lpNorm<1>();
            const Vec resid = g - s.G_ * out.beta_hat;
            out.feasibility_gap = std::max(0.0, resid.lpNorm<Eigen::Infinity>() - eps);
            out.iterations = pivots;
            return out;
        }

        /// Duality-gap certificate for the final basis.
        double certificate_gap(const DsSolution& sol) const {
            const Vec y = duals();
            const Vec h = s.G_ * y;
            double dual_obj = b.dot(y);
            double worst_dual_infeas = 0.0;
            auto account = [&](int var, double d) {
                const Status st = status[static_cast<std::size_t>(var)];
                if (st == Status::AtUpper) {
                    dual_obj += d * upper(var);
                    worst_dual_infeas = std::max(worst_dual_infeas, d);
                } else if (st == Status::AtLower) {
                    worst_dual_infeas = std::max(worst_dual_infeas, -d);
                }
            };
            for (int j = 0; j < m; ++j) {
                account(uvar(j), 1.0 - h[j]);
                account(vvar(j), 1.0 + h[j]);
            }
            for (int i = 0; i < m; ++i) account(slack(i), -y[i]);
            double primal_obj = 0.0;
            std::vector<int> row_of(static_cast<std::size_t>(4 * m), -1);
            for (int r = 0; r < m; ++r) row_of[static_cast<std::size_t>(basis[r])] = r;
            for (int var = 0; var < 3 * m; ++var) {
                const int r = row_of[static_cast<std::size_t>(var)];
                const double v = r >= 0 ? xB[r]
                                        : (status[static_cast<std::size_t>(var)] == Status::AtUpper
                                               ? upper(var)
                                               : 0.0);
                primal_obj += cost(var) * v;
            }
            return std::abs(primal_obj - dual_obj) + worst_dual_infeas;
        }

        DsSolution run() {
            if (phase == 1) {
                run_phase();
                drop_artificials();
                phase = 2;
                degenerate = 0;
                bland = false;
            }
            run_phase();
            DsSolution sol = extract();
            const double feas_limit = s.opts_.feas_tol;
            if (sol.feasibility_gap > feas_limit) {
                // One clean refactorization pass, then re-optimize.
                refactor();
                run_phase();
                sol = extract();
            }
            const double gap = certificate_gap(sol);
            if (sol.feasibility_gap > feas_limit ||
                gap > s.opts_.rel_gap_tol * (1.0 + std::abs(sol.objective))) {
                throw ConvergenceFailure(
                    "selector LP: could not certify optimality",
                    std::vector<double>(sol.beta_hat.data(), sol.beta_hat.data() + sol.beta_hat.size()),
                    std::max(gap, sol.feasibility_gap), pivots);
            }
            return sol;
        }
    };

    Mat A_;
    Mat G_;
    DsOptions opts_;
};

inline DsSolution solve_ds(const DsProblem& p, DsOptions opts = {}) {
    p.validate();
    return DantzigSolver(p.A, opts).solve(p.y, p.eps);
}

/// Support additions: indices outside T_prev whose squared estimate exceeds
/// alpha_a, keeping only the max_add of largest magnitude (ties toward the
/// lower index).
inline IndexSet threshold_additions(const Vec& beta_hat, const IndexSet& T_prev, double alpha_a,
                                    int max_add) {
    if (alpha_a < 0.0) throw ContractViolation("threshold_additions: alpha_a must be >= 0");
    if (max_add < 0) throw ContractViolation("threshold_additions: max_add must be >= 0");
    std::vector<int> cand;
    for (int i = 0; i < beta_hat.size(); ++i) {
        if (T_prev.contains(i)) continue;
        if (beta_hat[i] * beta_hat[i] > alpha_a) cand.push_back(i);
    }
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        const double ma = std::abs(beta_hat[a]);
        const double mb = std::abs(beta_hat[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    if (static_cast<int>(cand.size()) > max_add) cand.resize(static_cast<std::size_t>(max_add));
    return IndexSet(std::move(cand));
}

/// Selector followed by thresholding at alpha and a least-squares refit on
/// the detected support. A rank-deficient refit keeps only the
/// largest-magnitude independent columns.
inline std::pair<IndexSet, Vec> gauss_dantzig(const DantzigSolver& solver, const Vec& y, double eps,
                                              double alpha) {
    if (alpha < 0.0) throw ContractViolation("gauss_dantzig: alpha must be >= 0");
    const Mat& A = solver.matrix();
    const int m = static_cast<int>(A.cols());
    const int n = static_cast<int>(A.rows());
    if (y.lpNorm<Eigen::Infinity>() == 0.0) return {IndexSet{}, Vec::Zero(m)};

    const DsSolution sol = solver.solve(y, eps);
    std::vector<int> cand;
    for (int i = 0; i < m; ++i) {
        if (sol.beta_hat[i] * sol.beta_hat[i] > alpha) cand.push_back(i);
    }
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        const double ma = std::abs(sol.beta_hat[a]);
        const double mb = std::abs(sol.beta_hat[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });

    // Greedy Gram-Schmidt keep-list: drop columns that are numerically
    // dependent on the larger-magnitude ones already kept.
    std::vector<int> kept;
    Mat Q(n, std::min<int>(n, static_cast<int>(cand.size())));
    int k = 0;
    for (int i : cand) {
        if (k >= n) break;
        Vec c = A.col(i);
        for (int q = 0; q < k; ++q) c -= Q.col(q).dot(c) * Q.col(q);
        const double nrm = c.norm();
        if (nrm * nrm <= 1e-8) continue;
        Q.col(k) = c / nrm;
        ++k;
        kept.push_back(i);
    }
    IndexSet support(std::move(kept));
    if (support.empty()) return {support, Vec::Zero(m)};
    const Vec coeffs = least_squares(columns(A, support), y);
    return {support, scatter(coeffs, support, m)};
}

inline std::pair<IndexSet, Vec> gauss_dantzig(const DsProblem& p, double alpha) {
    p.validate();
    return gauss_dantzig(DantzigSolver(p.A), p.y, p.eps, alpha);
}

} // namespace kfcs

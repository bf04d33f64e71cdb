#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "kfcs/errors.hpp"
#include "kfcs/index_set.hpp"

namespace kfcs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) throw ContractViolation(std::string(what) + ": non-finite entries");
}

inline void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw ContractViolation(std::string(what) + ": non-finite entries");
}

/// Sub-matrix of the columns of A selected by T, in T's order.
/// Empty T yields an n x 0 matrix.
inline Mat columns(const Mat& A, const IndexSet& T) {
    T.require_within(static_cast<int>(A.cols()), "columns");
    Mat out(A.rows(), T.size());
    for (int j = 0; j < T.size(); ++j) out.col(j) = A.col(T[j]);
    return out;
}

/// Sub-vector of x at the indices in T.
inline Vec subvector(const Vec& x, const IndexSet& T) {
    T.require_within(static_cast<int>(x.size()), "subvector");
    Vec out(T.size());
    for (int j = 0; j < T.size(); ++j) out[j] = x[T[j]];
    return out;
}

/// Scatter a |T|-length vector into an m-length vector, zero elsewhere.
inline Vec scatter(const Vec& xT, const IndexSet& T, int m) {
    T.require_within(m, "scatter");
    Vec out = Vec::Zero(m);
    for (int j = 0; j < T.size(); ++j) out[T[j]] = xT[j];
    return out;
}

/// Sub-matrix Q(T1, T2) of rows T1 and columns T2.
inline Mat submatrix(const Mat& Q, const IndexSet& T1, const IndexSet& T2) {
    T1.require_within(static_cast<int>(Q.rows()), "submatrix rows");
    T2.require_within(static_cast<int>(Q.cols()), "submatrix cols");
    Mat out(T1.size(), T2.size());
    for (int i = 0; i < T1.size(); ++i)
        for (int j = 0; j < T2.size(); ++j) out(i, j) = Q(T1[i], T2[j]);
    return out;
}

namespace detail {
// Rank-deficiency cutoff for least-squares factors: smallest R diagonal
// below this fraction of the largest declares the system singular.
inline constexpr double kRankTol = 1e-10;
} // namespace detail

/// Minimum-residual solution of A_T b ~= y via column-pivoted Householder QR.
///
/// Throws SingularityError (with a lambda_min(A'A) estimate) when the factor
/// diagonal collapses below 1e-10 relative. An n x 0 matrix yields an empty
/// solution.
inline Vec least_squares(const Mat& A_T, const Vec& y) {
    if (A_T.rows() != y.size()) {
        throw ContractViolation("least_squares: row count of A_T must match length of y");
    }
    if (A_T.cols() == 0) return Vec(0);
    if (A_T.cols() > A_T.rows()) {
        throw SingularityError("least_squares: more columns than rows", 0.0);
    }
    Eigen::ColPivHouseholderQR<Mat> qr(A_T);
    const auto& R = qr.matrixR();
    const int k = static_cast<int>(A_T.cols());
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
        const double d = std::abs(R(i, i));
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
    }
    if (dmax == 0.0 || dmin < detail::kRankTol * dmax) {
        throw SingularityError("least_squares: rank-deficient matrix", dmin * dmin);
    }
    Vec b = qr.solve(y);
    require_finite(b, "least_squares solution");
    return b;
}

/// Solve M x = b for symmetric positive definite M (Cholesky plus one
/// refinement sweep). Residual satisfies |Mx-b|_inf <= 1e-9 (1 + |b|_inf).
inline Vec spd_solve(const Mat& M, const Vec& b) {
    if (M.rows() != M.cols() || M.rows() != b.size()) {
        throw ContractViolation("spd_solve: dimension mismatch");
    }
    const double scale = M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + scale)) {
        throw ContractViolation("spd_solve: matrix not symmetric");
    }
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("spd_solve: matrix not positive definite", 0.0);
    }
    Vec x = llt.solve(b);
    x += llt.solve(b - M * x);
    if (!x.allFinite()) {
        throw SingularityError("spd_solve: solve produced non-finite values", 0.0);
    }
    return x;
}

/// Extreme eigenvalues (min, max) of a symmetric matrix.
inline std::pair<double, double> eig_extremes(const Mat& M) {
    if (M.rows() != M.cols()) throw ContractViolation("eig_extremes: matrix not square");
    if (M.rows() == 0) return {0.0, 0.0};
    const double scale = M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + scale)) {
        throw ContractViolation("eig_extremes: matrix not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw SingularityError("eig_extremes: eigen iteration failed", 0.0);
    }
    const auto& ev = es.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

/// Largest singular value of a (possibly rectangular) matrix.
inline double spectral_norm(const Mat& M) {
    if (M.rows() == 0 || M.cols() == 0) return 0.0;
    // Work with the smaller Gram matrix.
    Mat G = (M.rows() <= M.cols()) ? Mat(M * M.transpose()) : Mat(M.transpose() * M);
    G = 0.5 * (G + G.transpose());
    auto [lo, hi] = eig_extremes(G);
    (void)lo;
    return std::sqrt(std::max(0.0, hi));
}

} // namespace kfcs

#pragma once

// Dense numerical kernels: tolerance-based rank and null space, row
// compression, basis alignment, damped Newton and central differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dae/errors.hpp"

namespace dae::num {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

using VectorFunction = std::function<Vec(const Vec&)>;
using MatrixFunction = std::function<Mat(const Vec&)>;

inline constexpr double kDefaultRankTol = 1e-9;

struct RankDecision {
    Index rank = 0;
    Vec singular_values;  // non-increasing
    double tolerance_used = 0.0;
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entries");
}

/// Rank with absolute threshold `rel_tol * scale`. Used when the natural scale
/// is not the matrix's own largest singular value (e.g. E*K against |E|).
template <typename Derived>
RankDecision numeric_rank_scaled(const Eigen::MatrixBase<Derived>& m, double rel_tol,
                                 double scale) {
    require_finite(m, "numeric_rank");
    RankDecision out;
    if (m.rows() == 0 || m.cols() == 0) return out;
    Eigen::JacobiSVD<Mat> svd(m.eval());
    out.singular_values = svd.singularValues();
    out.tolerance_used = rel_tol * scale;
    for (Index i = 0; i < out.singular_values.size(); ++i)
        if (out.singular_values[i] > out.tolerance_used) ++out.rank;
    return out;
}

/// Count of singular values strictly above rel_tol * sigma_1 (0 for the zero matrix).
template <typename Derived>
RankDecision numeric_rank(const Eigen::MatrixBase<Derived>& m, double rel_tol = kDefaultRankTol) {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidInput("numeric_rank: rel_tol must be in (0,1)");
    require_finite(m, "numeric_rank");
    if (m.rows() == 0 || m.cols() == 0) return {};
    Eigen::JacobiSVD<Mat> svd(m.eval());
    const double sigma1 = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    if (sigma1 == 0.0) return {0, svd.singularValues(), 0.0};
    return numeric_rank_scaled(m, rel_tol, sigma1);
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
template <typename Derived>
Mat kernel_basis(const Eigen::MatrixBase<Derived>& m, double rel_tol = kDefaultRankTol) {
    require_finite(m, "kernel_basis");
    const Index cols = m.cols();
    if (m.rows() == 0) return Mat::Identity(cols, cols);
    Eigen::JacobiSVD<Mat> svd(m.eval(), Eigen::ComputeFullV);
    const Index rank = numeric_rank(m, rel_tol).rank;
    return svd.matrixV().rightCols(cols - rank);
}

/// Rotates the columns of `basis` by the orthogonal factor that best matches
/// `reference` (orthogonal Procrustes). Both span k-dimensional subspaces.
template <typename D1, typename D2>
Mat align_basis(const Eigen::MatrixBase<D1>& basis, const Eigen::MatrixBase<D2>& reference) {
    if (basis.cols() == 0 || basis.cols() != reference.cols() || basis.rows() != reference.rows())
        return basis.eval();
    const Mat cross = basis.transpose() * reference;
    Eigen::JacobiSVD<Mat> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return basis * (svd.matrixU() * svd.matrixV().transpose());
}

/// Deterministic orthonormal basis of span(basis): greedily projects the
/// standard unit vectors with the largest remaining projection and
/// Gram-Schmidt orthonormalizes them. Coordinate-aligned subspaces come back
/// as unit vectors with positive sign.
template <typename Derived>
Mat canonical_basis(const Eigen::MatrixBase<Derived>& basis) {
    const Index n = basis.rows();
    const Index k = basis.cols();
    Mat out(n, k);
    Mat residual_projector = basis * basis.transpose();
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k; ++c) {
        double best = -1.0;
        Index pick = 0;
        for (Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const double norm = residual_projector.col(j).norm();
            if (norm > best + 1e-12) {
                best = norm;
                pick = j;
            }
        }
        used[static_cast<std::size_t>(pick)] = true;
        Vec v = residual_projector.col(pick) / best;
        out.col(c) = v;
        residual_projector -= v * v.transpose();
    }
    return out;
}

/// Q with Q*M = [M1; 0]: Q is the transposed left singular basis; the first
/// `rank` rows of Q*M have full row rank.
struct RowCompression {
    Mat Q;
    Index rank = 0;
    Mat compressed;  // Q * M
    double condition = 1.0;

    auto range_rows() const { return Q.topRows(rank); }
    auto constraint_rows() const { return Q.bottomRows(Q.rows() - rank); }
    auto leading_block() const { return compressed.topRows(rank); }
};

namespace detail {
inline double condition_number(const Mat& q) {
    Eigen::JacobiSVD<Mat> svd(q);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}
}  // namespace detail

template <typename Derived>
RowCompression row_compress(const Eigen::MatrixBase<Derived>& m, double rel_tol = kDefaultRankTol) {
    require_finite(m, "row_compress");
    if (m.rows() != m.cols()) throw InvalidInput("row_compress: square matrix required");
    Eigen::JacobiSVD<Mat> svd(m.eval(), Eigen::ComputeFullU);
    RowCompression out;
    out.rank = numeric_rank(m, rel_tol).rank;
    out.Q = svd.matrixU().transpose();
    out.compressed = out.Q * m;
    out.condition = detail::condition_number(out.Q);
    return out;
}

/// Row compression whose two row blocks are Procrustes-aligned with those of
/// `reference` (same rank required, otherwise falls back to the plain SVD
/// choice). Makes Q vary continuously along a path.
template <typename Derived>
RowCompression row_compress(const Eigen::MatrixBase<Derived>& m, double rel_tol,
                            const RowCompression& reference) {
    RowCompression out = row_compress(m, rel_tol);
    if (out.rank != reference.rank || out.Q.rows() != reference.Q.rows()) return out;
    const Index n = out.Q.rows();
    const Index r = out.rank;
    Mat u = out.Q.transpose();
    Mat ref = reference.Q.transpose();
    Mat aligned(n, n);
    aligned.leftCols(r) = align_basis(u.leftCols(r), ref.leftCols(r));
    aligned.rightCols(n - r) = align_basis(u.rightCols(n - r), ref.rightCols(n - r));
    out.Q = aligned.transpose();
    out.compressed = out.Q * m;
    out.condition = detail::condition_number(out.Q);
    return out;
}

/// Row compression with canonical (coordinate-aligned where possible) blocks.
template <typename Derived>
RowCompression canonical_row_compress(const Eigen::MatrixBase<Derived>& m,
                                      double rel_tol = kDefaultRankTol) {
    RowCompression out = row_compress(m, rel_tol);
    const Index n = out.Q.rows();
    const Index r = out.rank;
    Mat u = out.Q.transpose();
    Mat canon(n, n);
    canon.leftCols(r) = canonical_basis(u.leftCols(r));
    canon.rightCols(n - r) = canonical_basis(u.rightCols(n - r));
    out.Q = canon.transpose();
    out.compressed = out.Q * m;
    out.condition = detail::condition_number(out.Q);
    return out;
}

// ---------------------------------------------------------------------------
// Newton

struct NewtonOptions {
    double tol = 1e-12;
    int max_iter = 50;
    int max_halvings = 30;
};

struct NewtonResult {
    Vec x;
    int iterations = 0;
    double residual_norm = 0.0;
};

/// Damped Newton with step halving. Square systems use a full-pivot LU;
/// rectangular (underdetermined) systems take minimum-norm Gauss-Newton steps.
/// Converges to the root in the basin of `x0`.
NewtonResult newton_solve(const VectorFunction& residual, const MatrixFunction& jacobian,
                          const Vec& x0, const NewtonOptions& options = {});

/// Scalar convenience overload.
NewtonResult newton_solve(const std::function<double(double)>& residual,
                          const std::function<double(double)>& derivative, double x0,
                          const NewtonOptions& options = {});

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference Jacobian with uniform step `step`.
Mat fd_jacobian(const VectorFunction& f, const Vec& x, double step);

/// base * (1 + |x|_inf), rounded to a power of two.
double fd_step(const Vec& x, double base = 6e-6);

}  // namespace dae::num

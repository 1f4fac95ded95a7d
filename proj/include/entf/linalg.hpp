// Factorizations over the contracted product: QR of a tensor's trailing-mode
// slices by modified Gram-Schmidt, SVD through the group unfolding, truncated
// SVD, and the least-squares solve used by sequence extrapolation.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "entf/tensor.hpp"

namespace entf {

class RankDeficiencyError : public Error {
public:
    using Error::Error;
};

/// Group unfolding: the leading `split.lead` modes become rows, the trailing
/// `split.trail` modes become columns. Row-major storage makes this a pure
/// reshape.
inline DenseTensor unfold(const DenseTensor& a, const ContractionSplit& split) {
    if (split.lead + split.trail != a.order() || split.trail < 1)
        throw ShapeError("unfold: split (" + std::to_string(split.lead) + "," +
                         std::to_string(split.trail) + ") invalid for order " +
                         std::to_string(a.order()));
    const std::size_t rows = detail::shape_product(a.shape(), 0, split.lead);
    const std::size_t cols = detail::shape_product(a.shape(), split.lead, a.order());
    return DenseTensor({rows, cols}, std::vector<double>(a.data().begin(), a.data().end()));
}

inline DenseTensor fold(const DenseTensor& m, const Shape& shape, const ContractionSplit& split) {
    if (m.order() != 2)
        throw ShapeError("fold: input must be order 2");
    if (split.lead + split.trail != shape.size())
        throw ShapeError("fold: split does not cover the target shape");
    const std::size_t rows = detail::shape_product(shape, 0, split.lead);
    const std::size_t cols = detail::shape_product(shape, split.lead, shape.size());
    if (m.extent(0) != rows || m.extent(1) != cols)
        throw ShapeError("fold: matrix " + detail::shape_str(m.shape()) +
                         " does not match target shape " + detail::shape_str(shape));
    return DenseTensor(shape, std::vector<double>(m.data().begin(), m.data().end()));
}

namespace detail {

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EigenRowMatrix> as_matrix(const DenseTensor& a, std::size_t lead) {
    const std::size_t rows = shape_product(a.shape(), 0, lead);
    const std::size_t cols = shape_product(a.shape(), lead, a.order());
    return {a.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

inline DenseTensor from_matrix(const EigenRowMatrix& m, Shape shape) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return DenseTensor(std::move(shape), std::move(data));
}

}  // namespace detail

/// Result of the tensor QR: q holds orthonormal trailing-mode slices, r is
/// the k x k upper-triangular coefficient tensor, and the input is
/// recovered as q x_{N+1} r^T.
struct EqrResult {
    DenseTensor q;
    DenseTensor r;

    DenseTensor reconstruct() const {
        return nmode_product_matrix(q, group_transpose(r, 1), q.order());
    }
};

/// QR of the trailing-mode slices of `a` by modified Gram-Schmidt. Throws
/// RankDeficiencyError when a diagonal entry of R falls to eps_rank
/// (default 1e-12 * ||a||_F), signalling linearly dependent slices.
inline EqrResult eqr(const DenseTensor& a, double eps_rank = -1.0) {
    if (a.order() < 2)
        throw ShapeError("eqr: input must have a slice mode, order >= 2");
    const std::size_t k = a.extent(a.order() - 1);
    const std::size_t p = a.size() / k;
    if (eps_rank < 0.0)
        eps_rank = 1e-12 * frobenius_norm(a);

    DenseTensor q(a.shape());
    DenseTensor r({k, k});
    const auto ad = a.data();
    auto qd = q.data();

    std::vector<double> w(p);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < p; ++i)
            w[i] = ad[i * k + j];
        for (std::size_t l = 0; l < j; ++l) {
            double proj = 0.0;
            for (std::size_t i = 0; i < p; ++i)
                proj += qd[i * k + l] * w[i];
            r(l, j) = proj;
            for (std::size_t i = 0; i < p; ++i)
                w[i] -= proj * qd[i * k + l];
        }
        double norm = 0.0;
        for (double v : w)
            norm += v * v;
        norm = std::sqrt(norm);
        if (norm <= eps_rank)
            throw RankDeficiencyError("eqr: slice " + std::to_string(j + 1) +
                                      " is linearly dependent (r_jj = " + std::to_string(norm) +
                                      ")");
        r(j, j) = norm;
        for (std::size_t i = 0; i < p; ++i)
            qd[i * k + j] = w[i] / norm;
    }
    return {std::move(q), std::move(r)};
}

/// Tensor SVD through the group unfolding. Thin factors: u has shape
/// (lead extents..., p), v has shape (trail extents..., p), s holds the p
/// singular values in nonincreasing order, p = min(rows, cols) of the
/// unfolding.
struct TsvdResult {
    DenseTensor u;
    std::vector<double> s;
    DenseTensor v;
    ContractionSplit split;

    DenseTensor reconstruct() const {
        const std::size_t p = s.size();
        DenseTensor sd({p, p});
        for (std::size_t i = 0; i < p; ++i)
            sd(i, i) = s[i];
        DenseTensor us = einstein_product(u, sd, 1);
        DenseTensor vt = group_transpose(v, v.order() - 1);
        return einstein_product(us, vt, 1);
    }

    /// Count of singular values above threshold * s.front(); the numerical
    /// rank used in diagnostics.
    std::size_t numerical_rank(double threshold = 1e-10) const {
        if (s.empty() || s.front() == 0.0)
            return 0;
        std::size_t n = 0;
        for (double v : s)
            if (v > threshold * s.front())
                ++n;
        return n;
    }
};

inline TsvdResult tsvd(const DenseTensor& a, const ContractionSplit& split) {
    DenseTensor m = unfold(a, split);
    auto map = detail::as_matrix(m, 1);
    Eigen::JacobiSVD<detail::EigenRowMatrix> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw Error("tsvd: matrix SVD failed to converge");

    const std::size_t p = static_cast<std::size_t>(svd.singularValues().size());
    Shape ushape(a.shape().begin(), a.shape().begin() + split.lead);
    ushape.push_back(p);
    Shape vshape(a.shape().begin() + split.lead, a.shape().end());
    vshape.push_back(p);

    detail::EigenRowMatrix u = svd.matrixU();
    detail::EigenRowMatrix v = svd.matrixV();
    std::vector<double> s(svd.singularValues().data(), svd.singularValues().data() + p);
    return {detail::from_matrix(u, std::move(ushape)), std::move(s),
            detail::from_matrix(v, std::move(vshape)), split};
}

/// Best rank-`rank` approximation of an order-2 tensor in Frobenius norm,
/// returned multiplied out.
inline DenseTensor truncated_svd(const DenseTensor& a, std::size_t rank) {
    if (a.order() != 2)
        throw ShapeError("truncated_svd: input must be order 2");
    const std::size_t full = std::min(a.extent(0), a.extent(1));
    if (rank < 1 || rank > full)
        throw ShapeError("truncated_svd: rank " + std::to_string(rank) +
                         " out of range [1, " + std::to_string(full) + "]");
    auto map = detail::as_matrix(a, 1);
    Eigen::JacobiSVD<detail::EigenRowMatrix> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw Error("truncated_svd: matrix SVD failed to converge");
    const auto r = static_cast<Eigen::Index>(rank);
    detail::EigenRowMatrix approx = svd.matrixU().leftCols(r) *
                                    svd.singularValues().head(r).asDiagonal() *
                                    svd.matrixV().leftCols(r).transpose();
    return detail::from_matrix(approx, a.shape());
}

struct LstsqResult {
    std::vector<double> gamma;
    double residual;
};

/// Minimize ||a x_{N+1} gamma - b||_F over gamma, where the trailing mode
/// of `a` indexes the columns. Solved through eqr: gamma = R^{-1} (q^T b).
/// Rank deficiency of the columns propagates as RankDeficiencyError.
inline LstsqResult lstsq_tensor_columns(const DenseTensor& a, const DenseTensor& b) {
    const std::size_t k = a.extent(a.order() - 1);
    Shape col_shape(a.shape().begin(), a.shape().end() - 1);
    if (col_shape.empty())
        col_shape = {1};
    if (b.shape() != col_shape)
        throw ShapeError("lstsq_tensor_columns: rhs shape " + detail::shape_str(b.shape()) +
                         " does not match column shape " + detail::shape_str(col_shape));

    EqrResult qr = eqr(a);
    const std::size_t p = b.size();
    const auto qd = qr.q.data();
    const auto bd = b.data();

    std::vector<double> y(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            sum += qd[i * k + j] * bd[i];
        y[j] = sum;
    }

    std::vector<double> gamma(k, 0.0);
    for (std::size_t jj = k; jj-- > 0;) {
        double sum = y[jj];
        for (std::size_t l = jj + 1; l < k; ++l)
            sum -= qr.r(jj, l) * gamma[l];
        gamma[jj] = sum / qr.r(jj, jj);
    }

    double resid = 0.0;
    const auto ad = a.data();
    for (std::size_t i = 0; i < p; ++i) {
        double fit = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            fit += ad[i * k + j] * gamma[j];
        const double d = fit - bd[i];
        resid += d * d;
    }
    return {std::move(gamma), std::sqrt(resid)};
}

}  // namespace entf

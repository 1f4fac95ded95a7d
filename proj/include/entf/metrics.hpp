// Unmixing quality metrics: cube MSE, per-endmember spectral angles with
// exact assignment matching, and abundance MSE under the matched
// permutation.

#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "entf/tensor.hpp"

namespace entf {

/// MSE as reported here: the (unsquared) Frobenius norm of the difference
/// divided by the entry count I*J*K.
inline double mse(const DenseTensor& a, const DenseTensor& a_hat) {
    require_same_shape(a, a_hat, "mse");
    return frobenius_norm(sub(a, a_hat)) / static_cast<double>(a.size());
}

/// Spectral angle between two spectra, in radians; the cosine is clamped
/// to [-1, 1] against rounding.
inline double sam(const DenseTensor& u, const DenseTensor& v) {
    require_same_shape(u, v, "sam");
    const double nu = frobenius_norm(u);
    const double nv = frobenius_norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw Error("sam: undefined angle for a zero spectrum");
    const double c = std::clamp(inner_product(u, v) / (nu * nv), -1.0, 1.0);
    return std::acos(c);
}

/// Column i of an I x r endmember tensor as a spectrum vector.
inline DenseTensor endmember_column(const DenseTensor& x, std::size_t i) {
    if (x.order() != 2)
        throw ShapeError("endmember_column: expected an I x r tensor");
    const std::size_t r = x.extent(1);
    if (i >= r)
        throw ShapeError("endmember_column: index out of range");
    DenseTensor col({x.extent(0)});
    for (std::size_t b = 0; b < x.extent(0); ++b)
        col[b] = x[b * r + i];
    return col;
}

/// Assignment of estimated to true endmembers minimizing total spectral
/// angle, by exhaustive search (factorizations recover columns only up to
/// permutation). perm[i] is the estimated column matched to true column i.
inline std::vector<std::size_t> match_endmembers(const DenseTensor& x_true,
                                                 const DenseTensor& x_hat) {
    if (x_true.order() != 2 || x_hat.order() != 2 || !x_true.same_shape(x_hat))
        throw ShapeError("match_endmembers: expected two I x r tensors of equal shape");
    const std::size_t r = x_true.extent(1);
    if (r > 10)
        throw Error("match_endmembers: exact search supports at most 10 endmembers");

    std::vector<std::vector<double>> cost(r, std::vector<double>(r));
    for (std::size_t i = 0; i < r; ++i) {
        const DenseTensor ti = endmember_column(x_true, i);
        for (std::size_t j = 0; j < r; ++j)
            cost[i][j] = sam(ti, endmember_column(x_hat, j));
    }

    std::vector<std::size_t> perm(r);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            total += cost[i][perm[i]];
        if (total < best_cost) {
            best_cost = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Abundance MSE after aligning the estimated endmember mode with `perm`.
/// The denominator uses the band count of the associated cube, matching the
/// convention of the cube MSE.
inline double mse_y(const DenseTensor& y_true, const DenseTensor& y_hat,
                    const std::vector<std::size_t>& perm, std::size_t bands) {
    if (y_true.order() != 3 || !y_true.same_shape(y_hat))
        throw ShapeError("mse_y: expected two r x J x K tensors of equal shape");
    const std::size_t r = y_true.extent(0);
    if (perm.size() != r)
        throw ShapeError("mse_y: permutation length does not match endmember count");
    const std::size_t pixels = y_true.extent(1) * y_true.extent(2);

    double sq = 0.0;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t px = 0; px < pixels; ++px) {
            const double d = y_true[i * pixels + px] - y_hat[perm[i] * pixels + px];
            sq += d * d;
        }
    const double denom = static_cast<double>(bands) * static_cast<double>(pixels);
    return std::sqrt(sq) / denom;
}

struct UnmixReport {
    double mse = 0.0;
    std::vector<double> sam_per_endmember;
    double sam_mean = 0.0;
    double mse_y = 0.0;
    std::vector<std::size_t> permutation;

    nlohmann::json to_json() const {
        return {{"mse", mse},
                {"sam_per_endmember", sam_per_endmember},
                {"sam_mean", sam_mean},
                {"mse_y", mse_y},
                {"permutation", permutation}};
    }

    /// Header plus one flat data row.
    std::string to_csv() const {
        std::ostringstream head;
        std::ostringstream row;
        row.precision(17);
        head << "mse,sam_mean,mse_y";
        row << mse << ',' << sam_mean << ',' << mse_y;
        for (std::size_t i = 0; i < sam_per_endmember.size(); ++i) {
            head << ",sam_" << i;
            row << ',' << sam_per_endmember[i];
        }
        for (std::size_t i = 0; i < permutation.size(); ++i) {
            head << ",perm_" << i;
            row << ',' << permutation[i];
        }
        return head.str() + "\n" + row.str() + "\n";
    }
};

/// Full report: matches endmembers, then evaluates every metric under the
/// matched permutation.
inline UnmixReport evaluate_unmixing(const DenseTensor& cube_true, const DenseTensor& cube_hat,
                                     const DenseTensor& x_true, const DenseTensor& x_hat,
                                     const DenseTensor& y_true, const DenseTensor& y_hat) {
    UnmixReport report;
    report.permutation = match_endmembers(x_true, x_hat);
    report.mse = mse(cube_true, cube_hat);

    const std::size_t r = x_true.extent(1);
    report.sam_per_endmember.resize(r);
    for (std::size_t i = 0; i < r; ++i)
        report.sam_per_endmember[i] =
            sam(endmember_column(x_true, i), endmember_column(x_hat, report.permutation[i]));
    report.sam_mean = std::accumulate(report.sam_per_endmember.begin(),
                                      report.sam_per_endmember.end(), 0.0) /
                      static_cast<double>(r);
    report.mse_y = mse_y(y_true, y_hat, report.permutation, x_true.extent(0));
    return report;
}

}  // namespace entf

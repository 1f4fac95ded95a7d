// Dense N-way tensor value type and the contracted-product algebra built
// on group unfoldings: Einstein products, n-mode products, group transpose,
// elementwise operations and norms.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace entf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Split of a tensor's modes into `lead` leading free modes and `trail`
/// trailing modes, used for group unfoldings and transposes.
struct ContractionSplit {
    std::size_t lead;
    std::size_t trail;
};

using Shape = std::vector<std::size_t>;

namespace detail {

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << (i ? "x" : "") << s[i];
    os << ")";
    return os.str();
}

inline std::size_t shape_product(const Shape& s, std::size_t begin, std::size_t end) {
    std::size_t p = 1;
    for (std::size_t i = begin; i < end; ++i)
        p *= s[i];
    return p;
}

// Deterministic uniform draw in [0, 1) built from the raw 64-bit stream,
// independent of the standard library's distribution implementation.
inline double canonical(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draw in (lo, hi]: strictly above lo, so multiplicative updates never
// start from a locked zero.
inline double uniform_open_closed(std::mt19937_64& rng, double lo, double hi) {
    return hi - canonical(rng) * (hi - lo);
}

inline double gaussian(std::mt19937_64& rng) {
    // Box-Muller, kept local so draws are bit-reproducible across toolchains.
    double u1 = canonical(rng);
    double u2 = canonical(rng);
    while (u1 <= 0.0)
        u1 = canonical(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// C = A * B with A p-by-k, B k-by-q, all row-major. The k loop is the
// middle loop, so every output element accumulates its sum in ascending-k
// order: results are bitwise deterministic for a given input.
inline void matmul_rowmajor(const double* a, const double* b, double* c,
                            std::size_t p, std::size_t k, std::size_t q) {
    std::fill(c, c + p * q, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * q;
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = arow[l];
            const double* brow = b + l * q;
            for (std::size_t j = 0; j < q; ++j)
                crow[j] += ail * brow[j];
        }
    }
}

}  // namespace detail

/// Dense real tensor with an explicit shape, stored row-major (last index
/// fastest). Constructors reject empty shapes, zero extents and non-finite
/// values, so every live tensor is finite by construction.
class DenseTensor {
public:
    explicit DenseTensor(Shape shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

    DenseTensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + detail::shape_str(shape_));
        validate_finite();
    }

    static DenseTensor zeros(Shape shape) { return DenseTensor(std::move(shape)); }

    static DenseTensor full(Shape shape, double value) {
        DenseTensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        t.validate_finite();
        return t;
    }

    static DenseTensor ones(Shape shape) { return full(std::move(shape), 1.0); }

    /// I.i.d. entries uniform in (lo, hi], deterministic in the seed.
    static DenseTensor random_uniform(Shape shape, std::uint64_t seed,
                                      double lo = 0.0, double hi = 1.0) {
        DenseTensor t(std::move(shape));
        std::mt19937_64 rng(seed);
        for (double& v : t.data_)
            v = detail::uniform_open_closed(rng, lo, hi);
        return t;
    }

    std::size_t order() const { return shape_.size(); }
    const Shape& shape() const { return shape_; }
    std::size_t extent(std::size_t mode) const { return shape_[mode]; }
    std::size_t size() const { return data_.size(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    double at(std::span<const std::size_t> index) const { return data_[flat_index(index)]; }
    double& at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }
    double at(std::initializer_list<std::size_t> index) const {
        return at(std::span<const std::size_t>(index.begin(), index.size()));
    }

    template <typename... I>
    double operator()(I... index) const {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return at(std::span<const std::size_t>(idx, sizeof...(I)));
    }
    template <typename... I>
    double& operator()(I... index) {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return data_[flat_index(std::span<const std::size_t>(idx, sizeof...(I)))];
    }

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

    std::size_t flat_index(std::span<const std::size_t> index) const {
        if (index.size() != shape_.size())
            throw ShapeError("index order " + std::to_string(index.size()) +
                             " does not match tensor order " + std::to_string(shape_.size()));
        std::size_t flat = 0;
        for (std::size_t d = 0; d < shape_.size(); ++d) {
            if (index[d] >= shape_[d])
                throw ShapeError("index out of range in mode " + std::to_string(d + 1));
            flat = flat * shape_[d] + index[d];
        }
        return flat;
    }

    void validate_finite() const {
        for (double v : data_)
            if (!std::isfinite(v))
                throw Error("non-finite value in tensor of shape " + detail::shape_str(shape_));
    }

private:
    static std::size_t checked_size(const Shape& shape) {
        if (shape.empty())
            throw ShapeError("tensor order must be at least 1");
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0)
                throw ShapeError("tensor extents must be positive, got shape " +
                                 detail::shape_str(shape));
            if (e > std::numeric_limits<std::size_t>::max() / n)
                throw ShapeError("tensor size overflows for shape " + detail::shape_str(shape));
            n *= e;
        }
        return n;
    }

    Shape shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + detail::shape_str(a.shape()) +
                         " vs " + detail::shape_str(b.shape()));
}

/// Einstein product a *_m b: contracts the last m modes of `a` with the
/// first m modes of `b`. The result carries the leading free modes of `a`
/// followed by the trailing free modes of `b`; a fully contracted product
/// is returned as a 1x1 tensor.
inline DenseTensor einstein_product(const DenseTensor& a, const DenseTensor& b, std::size_t m) {
    if (m < 1 || m > a.order() || m > b.order())
        throw ShapeError("einstein_product: contraction arity " + std::to_string(m) +
                         " invalid for orders " + std::to_string(a.order()) + " and " +
                         std::to_string(b.order()));
    const std::size_t lead = a.order() - m;
    for (std::size_t i = 0; i < m; ++i)
        if (a.extent(lead + i) != b.extent(i))
            throw ShapeError("einstein_product: contracted mode " + std::to_string(i + 1) +
                             " mismatch (" + std::to_string(a.extent(lead + i)) + " vs " +
                             std::to_string(b.extent(i)) + ")");

    Shape out_shape(a.shape().begin(), a.shape().begin() + lead);
    out_shape.insert(out_shape.end(), b.shape().begin() + m, b.shape().end());
    if (out_shape.empty())
        out_shape = {1, 1};

    const std::size_t p = detail::shape_product(a.shape(), 0, lead);
    const std::size_t k = detail::shape_product(a.shape(), lead, a.order());
    const std::size_t q = detail::shape_product(b.shape(), m, b.order());

    DenseTensor c(out_shape);
    detail::matmul_rowmajor(a.data().data(), b.data().data(), c.data().data(), p, k, q);
    c.validate_finite();
    return c;
}

/// n-mode product with a matrix u (J x I_n): mode `n` (1-based) of `a` is
/// replaced by extent J.
inline DenseTensor nmode_product_matrix(const DenseTensor& a, const DenseTensor& u,
                                        std::size_t n) {
    if (u.order() != 2)
        throw ShapeError("nmode_product_matrix: u must be order 2");
    if (n < 1 || n > a.order())
        throw ShapeError("nmode_product_matrix: mode " + std::to_string(n) +
                         " out of range for order " + std::to_string(a.order()));
    const std::size_t in = a.extent(n - 1);
    if (u.extent(1) != in)
        throw ShapeError("nmode_product_matrix: mode " + std::to_string(n) + " extent " +
                         std::to_string(in) + " does not match matrix columns " +
                         std::to_string(u.extent(1)));
    const std::size_t jn = u.extent(0);

    Shape out_shape = a.shape();
    out_shape[n - 1] = jn;
    DenseTensor c(out_shape);

    const std::size_t outer = detail::shape_product(a.shape(), 0, n - 1);
    const std::size_t inner = detail::shape_product(a.shape(), n, a.order());
    const auto ad = a.data();
    const auto ud = u.data();
    auto cd = c.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < jn; ++j)
            for (std::size_t t = 0; t < inner; ++t) {
                double sum = 0.0;
                for (std::size_t i = 0; i < in; ++i)
                    sum += ad[(o * in + i) * inner + t] * ud[j * in + i];
                cd[(o * jn + j) * inner + t] = sum;
            }
    c.validate_finite();
    return c;
}

/// n-mode product with a vector: mode `n` (1-based) is contracted away and
/// the order drops by one (a 1-vector result is returned as shape {1}).
inline DenseTensor nmode_product_vector(const DenseTensor& a, const DenseTensor& v,
                                        std::size_t n) {
    if (v.order() != 1)
        throw ShapeError("nmode_product_vector: v must be order 1");
    if (n < 1 || n > a.order())
        throw ShapeError("nmode_product_vector: mode " + std::to_string(n) +
                         " out of range for order " + std::to_string(a.order()));
    const std::size_t in = a.extent(n - 1);
    if (v.extent(0) != in)
        throw ShapeError("nmode_product_vector: mode " + std::to_string(n) + " extent " +
                         std::to_string(in) + " does not match vector length " +
                         std::to_string(v.extent(0)));

    Shape out_shape;
    for (std::size_t d = 0; d < a.order(); ++d)
        if (d != n - 1)
            out_shape.push_back(a.extent(d));
    if (out_shape.empty())
        out_shape = {1};
    DenseTensor c(out_shape);

    const std::size_t outer = detail::shape_product(a.shape(), 0, n - 1);
    const std::size_t inner = detail::shape_product(a.shape(), n, a.order());
    const auto ad = a.data();
    const auto vd = v.data();
    auto cd = c.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t t = 0; t < inner; ++t) {
            double sum = 0.0;
            for (std::size_t i = 0; i < in; ++i)
                sum += ad[(o * in + i) * inner + t] * vd[i];
            cd[o * inner + t] = sum;
        }
    c.validate_finite();
    return c;
}

/// Group transpose: the first `lead` modes move behind the remaining ones,
/// so entry (j..., i...) of the result equals a(i..., j...).
inline DenseTensor group_transpose(const DenseTensor& a, std::size_t lead) {
    if (lead < 1 || lead >= a.order())
        throw ShapeError("group_transpose: lead " + std::to_string(lead) +
                         " out of range for order " + std::to_string(a.order()));
    Shape out_shape(a.shape().begin() + lead, a.shape().end());
    out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().begin() + lead);

    const std::size_t rows = detail::shape_product(a.shape(), 0, lead);
    const std::size_t cols = detail::shape_product(a.shape(), lead, a.order());
    DenseTensor c(out_shape);
    const auto ad = a.data();
    auto cd = c.data();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            cd[j * rows + i] = ad[i * cols + j];
    return c;
}

/// Diagonal identity tensor I_N of shape g x g for the group extents `g`.
inline DenseTensor identity_tensor(const Shape& group) {
    Shape shape = group;
    shape.insert(shape.end(), group.begin(), group.end());
    DenseTensor t(shape);
    const std::size_t n = detail::shape_product(group, 0, group.size());
    for (std::size_t i = 0; i < n; ++i)
        t[i * n + i] = 1.0;
    return t;
}

inline double inner_product(const DenseTensor& a, const DenseTensor& b) {
    require_same_shape(a, b, "inner_product");
    const auto ad = a.data();
    const auto bd = b.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i)
        sum += ad[i] * bd[i];
    return sum;
}

inline double frobenius_norm(const DenseTensor& a) {
    double sum = 0.0;
    for (double v : a.data())
        sum += v * v;
    return std::sqrt(sum);
}

inline double l1_norm(const DenseTensor& a) {
    double sum = 0.0;
    for (double v : a.data())
        sum += std::abs(v);
    return sum;
}

inline double max_value(const DenseTensor& a) {
    return *std::max_element(a.data().begin(), a.data().end());
}

inline double min_value(const DenseTensor& a) {
    return *std::min_element(a.data().begin(), a.data().end());
}

inline DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b) {
    require_same_shape(a, b, "hadamard");
    DenseTensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a[i] * b[i];
    return c;
}

/// Elementwise a / max(b, guard). The guard keeps multiplicative updates
/// finite when a denominator entry is zero or driven negative by a
/// regularization term.
inline DenseTensor hadamard_div(const DenseTensor& a, const DenseTensor& b, double guard) {
    require_same_shape(a, b, "hadamard_div");
    if (!(guard > 0.0))
        throw Error("hadamard_div: guard must be positive");
    DenseTensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a[i] / std::max(b[i], guard);
    c.validate_finite();
    return c;
}

inline DenseTensor add(const DenseTensor& a, const DenseTensor& b) {
    require_same_shape(a, b, "add");
    DenseTensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a[i] + b[i];
    c.validate_finite();
    return c;
}

inline DenseTensor sub(const DenseTensor& a, const DenseTensor& b) {
    require_same_shape(a, b, "sub");
    DenseTensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a[i] - b[i];
    c.validate_finite();
    return c;
}

inline DenseTensor scale(const DenseTensor& a, double s) {
    DenseTensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = a[i] * s;
    c.validate_finite();
    return c;
}

inline DenseTensor operator+(const DenseTensor& a, const DenseTensor& b) { return add(a, b); }
inline DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) { return sub(a, b); }
inline DenseTensor operator*(const DenseTensor& a, double s) { return scale(a, s); }
inline DenseTensor operator*(double s, const DenseTensor& a) { return scale(a, s); }

inline DenseTensor outer_product(const DenseTensor& a, const DenseTensor& b) {
    Shape shape = a.shape();
    shape.insert(shape.end(), b.shape().begin(), b.shape().end());
    DenseTensor c(shape);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            c[i * b.size() + j] = a[i] * b[j];
    c.validate_finite();
    return c;
}

/// Slice along the final mode: a(..., j) as a tensor one order lower
/// (slices of an order-1 tensor come back as shape {1}).
inline DenseTensor slice_last(const DenseTensor& a, std::size_t j) {
    const std::size_t k = a.extent(a.order() - 1);
    if (j >= k)
        throw ShapeError("slice_last: index " + std::to_string(j) + " out of range " +
                         std::to_string(k));
    Shape shape(a.shape().begin(), a.shape().end() - 1);
    if (shape.empty())
        shape = {1};
    DenseTensor c(shape);
    for (std::size_t p = 0; p < c.size(); ++p)
        c[p] = a[p * k + j];
    return c;
}

/// Stack same-shape tensors along a new trailing mode.
inline DenseTensor stack_last(const std::vector<DenseTensor>& parts) {
    if (parts.empty())
        throw ShapeError("stack_last: need at least one tensor");
    const std::size_t n = parts.size();
    for (const auto& t : parts)
        require_same_shape(parts.front(), t, "stack_last");
    Shape shape = parts.front().shape();
    shape.push_back(n);
    DenseTensor c(shape);
    const std::size_t p = parts.front().size();
    for (std::size_t j = 0; j < n; ++j) {
        const auto d = parts[j].data();
        for (std::size_t i = 0; i < p; ++i)
            c[i * n + j] = d[i];
    }
    return c;
}

}  // namespace entf

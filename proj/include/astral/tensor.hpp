#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "astral/error.hpp"
#include "astral/rng.hpp"

namespace astral {

/// Dense row-major array of doubles.
///
/// Activations are stored feature-major: a sentence representation of width
/// d over n tokens is a d x n tensor whose column i belongs to token i.
/// A default-constructed tensor is empty (no shape, no data) and is used as
/// the "nothing cached" sentinel by layers.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_shape(shape_);
        data_.assign(count(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (count(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged matrix literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(data));
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return shape_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    /// Rows of a matrix; length of a vector.
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    /// Columns of a matrix; 1 for a vector.
    std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : data_.size() / shape_[0]; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Tensor& operator+=(const Tensor& other) {
        require_same_shape(*this, other, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) noexcept {
        for (auto& v : data_) v *= s;
        return *this;
    }

    /// Exact element equality (bitwise for all non-NaN values).
    friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

    std::string shape_string() const { return shape_string(shape_); }

    static std::string shape_string(const Shape& shape) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << ']';
        return os.str();
    }

    static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
        if (!a.same_shape(b)) {
            throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                                 b.shape_string());
        }
    }

private:
    static std::size_t count(const Shape& shape) noexcept {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    static void check_shape(const Shape& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
        for (auto d : shape) {
            if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

namespace detail {
inline void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DimensionError(std::string(what) + " expects a matrix, got " + t.shape_string());
}
}  // namespace detail

/// Matrix product. Each output entry sums over k in ascending order.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions differ, " + a.shape_string() + " x " + b.shape_string());
    }
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = &c(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            const double* brow = b.data().data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// a^T * b without materializing the transpose.
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul_tn");
    detail::require_matrix(b, "matmul_tn");
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul_tn: inner dimensions differ, " + a.shape_string() + "^T x " +
                             b.shape_string());
    }
    Tensor c({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a(p, i);
            double* crow = &c(i, 0);
            const double* brow = b.data().data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

/// Accumulates a * b^T into out (out must be m x n).
inline void add_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k || out.rows() != m || out.cols() != n) {
        throw DimensionError("matmul_nt: shapes " + a.shape_string() + ", " + b.shape_string() + "^T into " +
                             out.shape_string());
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(j, p);
            out(i, j) += s;
        }
    }
}

inline Tensor transpose(const Tensor& a) {
    detail::require_matrix(a, "transpose");
    Tensor t({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

enum class Elementwise { add, mul, sigmoid, tanh };

inline Tensor elementwise(Elementwise op, const Tensor& a) {
    Tensor out = a;
    switch (op) {
        case Elementwise::sigmoid:
            for (auto& v : out.data()) v = sigmoid(v);
            return out;
        case Elementwise::tanh:
            for (auto& v : out.data()) v = std::tanh(v);
            return out;
        default:
            throw ArgumentError("elementwise: binary op called with one argument");
    }
}

inline Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
    Tensor::require_same_shape(a, b, "elementwise");
    Tensor out = a;
    switch (op) {
        case Elementwise::add:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
            return out;
        case Elementwise::mul:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
            return out;
        default:
            throw ArgumentError("elementwise: unary op called with two arguments");
    }
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::add, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::mul, a, b); }

/// Stacks two matrices with equal column count: [top; bottom].
inline Tensor vconcat(const Tensor& top, const Tensor& bottom) {
    detail::require_matrix(top, "vconcat");
    detail::require_matrix(bottom, "vconcat");
    if (top.cols() != bottom.cols()) {
        throw DimensionError("vconcat: column counts differ, " + top.shape_string() + " vs " +
                             bottom.shape_string());
    }
    std::vector<double> data(top.values());
    data.insert(data.end(), bottom.values().begin(), bottom.values().end());
    return Tensor({top.rows() + bottom.rows(), top.cols()}, std::move(data));
}

/// Rows [begin, end) of a matrix.
inline Tensor row_slice(const Tensor& t, std::size_t begin, std::size_t end) {
    detail::require_matrix(t, "row_slice");
    if (begin >= end || end > t.rows()) throw DimensionError("row_slice: bad range on " + t.shape_string());
    const auto first = t.values().begin() + static_cast<std::ptrdiff_t>(begin * t.cols());
    const auto last = t.values().begin() + static_cast<std::ptrdiff_t>(end * t.cols());
    return Tensor({end - begin, t.cols()}, std::vector<double>(first, last));
}

/// Adds the row sums of g into the vector `into` (one addition per entry).
inline void add_row_sums(Tensor& into, const Tensor& g) {
    if (into.rows() != g.rows()) throw DimensionError("add_row_sums: " + into.shape_string() + " vs " + g.shape_string());
    for (std::size_t r = 0; r < g.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) s += g(r, c);
        into[r] += s;
    }
}

inline double l2_norm(const Tensor& t) noexcept {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return std::sqrt(s);
}

inline double sum(const Tensor& t) noexcept {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

enum class InitScheme { uniform, scaled_uniform };

/// Random tensor. `uniform` draws from [lo, hi); `scaled_uniform` draws from
/// +-sqrt(6 / (fan_in + fan_out)) with fan_out = shape[0] and fan_in the
/// product of the remaining axes (1 for vectors).
inline Tensor init(const Tensor::Shape& shape, InitScheme scheme, Rng& rng, double lo = 0.0, double hi = 0.0) {
    Tensor t(shape);
    if (scheme == InitScheme::scaled_uniform) {
        const double fan_out = static_cast<double>(shape[0]);
        const double fan_in = static_cast<double>(t.size() / shape[0]);
        hi = std::sqrt(6.0 / (fan_in + fan_out));
        lo = -hi;
    }
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace astral

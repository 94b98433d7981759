#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "astral/layer.hpp"

namespace astral {

struct GatedCnnShape {
    std::size_t d_in = 0;
    std::size_t window = 3;                 // odd
    std::optional<std::size_t> channels;  // conv output rows; default d_in
    std::optional<std::size_t> d_gate;    // GLU output rows; default d_in

    std::size_t channel_count() const noexcept { return channels.value_or(d_in); }
    std::size_t gate_width() const noexcept { return d_gate.value_or(d_in); }

    void validate() const {
        if (window % 2 == 0) throw ConfigError("convolution window must be odd, got " + std::to_string(window));
        if (d_in == 0 || channel_count() == 0) throw ConfigError("convolution dimensions must be positive");
        if (gate_width() == 0) throw ConfigError("gated output width must be at least 1");
    }
};

namespace kernels {

/// Same-length convolution along the token axis with zero padding. Kernel
/// layout is channels x window x d_in; tap o reads column i + o - window/2.
inline Tensor conv1d_forward(const Tensor& kernel, const Tensor& v) {
    const std::size_t channels = kernel.dim(0), window = kernel.dim(1), d_in = kernel.dim(2);
    if (v.rank() != 2 || v.rows() != d_in)
        throw DimensionError("conv1d: expected " + std::to_string(d_in) + " x n input, got " + v.shape_string());
    const std::size_t n = v.cols();
    const auto half = static_cast<std::ptrdiff_t>(window / 2);
    Tensor out({channels, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < window; ++o) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + o) - half;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            for (std::size_t c = 0; c < channels; ++c) {
                const double* w = kernel.data().data() + (c * window + o) * d_in;
                double s = 0.0;
                for (std::size_t r = 0; r < d_in; ++r) s += w[r] * v(r, static_cast<std::size_t>(j));
                out(c, i) += s;
            }
        }
    }
    return out;
}

/// Transposed convolution: accumulates into grad_kernel, returns dL/dinput.
inline Tensor conv1d_backward(const Tensor& kernel, Tensor& grad_kernel, const Tensor& input,
                              const Tensor& grad_out) {
    const std::size_t channels = kernel.dim(0), window = kernel.dim(1), d_in = kernel.dim(2);
    const std::size_t n = input.cols();
    if (grad_out.rows() != channels || grad_out.cols() != n)
        throw DimensionError("conv1d backward: gradient shape " + grad_out.shape_string());
    const auto half = static_cast<std::ptrdiff_t>(window / 2);
    Tensor grad_in({d_in, n});
    Tensor local(kernel.shape());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < window; ++o) {
            const std::ptrdiff_t js = static_cast<std::ptrdiff_t>(i + o) - half;
            if (js < 0 || js >= static_cast<std::ptrdiff_t>(n)) continue;
            const auto j = static_cast<std::size_t>(js);
            for (std::size_t c = 0; c < channels; ++c) {
                const double g = grad_out(c, i);
                const std::size_t base = (c * window + o) * d_in;
                for (std::size_t r = 0; r < d_in; ++r) {
                    local[base + r] += g * input(r, j);
                    grad_in(r, j) += g * kernel[base + r];
                }
            }
        }
    }
    grad_kernel += local;
    return grad_in;
}

struct GluCache {
    Tensor input, content, gate;
};

inline Tensor affine(const Tensor& w, const Tensor& b, const Tensor& x) {
    Tensor y = matmul(w, x);
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[r];
    return y;
}

inline Tensor affine_backward(const Tensor& w, Tensor& gw, Tensor& gb, const Tensor& x, const Tensor& g) {
    add_matmul_nt(gw, g, x);
    add_row_sums(gb, g);
    return matmul_tn(w, g);
}

/// (W1 x + b1) * sigmoid(W2 x + b2), per column. Params in order W1 b1 W2 b2.
inline Tensor glu_forward(const LayerParams& p, const Tensor& x, GluCache& cache) {
    cache.content = affine(p.value("W1"), p.value("b1"), x);
    cache.gate = affine(p.value("W2"), p.value("b2"), x);
    for (auto& v : cache.gate.data()) v = sigmoid(v);
    cache.input = x;
    return mul(cache.content, cache.gate);
}

inline Tensor glu_backward(LayerParams& p, const GluCache& cache, const Tensor& grad_out) {
    Tensor::require_same_shape(grad_out, cache.content, "GLU backward");
    Tensor d_content(grad_out.shape()), d_gate(grad_out.shape());
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const double s = cache.gate[i];
        d_content[i] = grad_out[i] * s;
        d_gate[i] = grad_out[i] * cache.content[i] * s * (1.0 - s);
    }
    Tensor grad_in = affine_backward(p.value("W1"), p.grad("W1"), p.grad("b1"), cache.input, d_content);
    grad_in += affine_backward(p.value("W2"), p.grad("W2"), p.grad("b2"), cache.input, d_gate);
    return grad_in;
}

inline void add_glu_params(LayerParams& p, std::size_t d_in, std::size_t d_out, Rng& rng) {
    p.add("W1", init({d_out, d_in}, InitScheme::scaled_uniform, rng));
    p.add("b1", Tensor({d_out}));
    p.add("W2", init({d_out, d_in}, InitScheme::scaled_uniform, rng));
    p.add("b2", Tensor({d_out}));
}

}  // namespace kernels

class Conv1d final : public Layer {
public:
    Conv1d(std::size_t d_in, std::size_t window, std::size_t channels, Rng& rng) {
        GatedCnnShape{d_in, window, channels, 1}.validate();
        params_.add("kernel", init({channels, window, d_in}, InitScheme::scaled_uniform, rng));
    }

    explicit Conv1d(Tensor kernel) {
        if (kernel.rank() != 3) throw DimensionError("conv1d kernel must be channels x window x d_in");
        GatedCnnShape{kernel.dim(2), kernel.dim(1), kernel.dim(0), 1}.validate();
        params_.add("kernel", std::move(kernel));
    }

    Tensor forward(const Tensor& v) override {
        Tensor out = kernels::conv1d_forward(params_.value("kernel"), v);
        input_ = v;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (input_.empty()) throw StateError("Conv1d::backward called before forward");
        return kernels::conv1d_backward(params_.value("kernel"), params_.grad("kernel"), input_, grad_out);
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "conv1d"; }

private:
    LayerParams params_;
    Tensor input_;
};

class Glu final : public Layer {
public:
    Glu(std::size_t d_in, std::size_t d_out, Rng& rng) {
        if (d_out == 0) throw ConfigError("gated output width must be at least 1");
        kernels::add_glu_params(params_, d_in, d_out, rng);
    }

    Glu(Tensor w1, Tensor b1, Tensor w2, Tensor b2) {
        if (!w1.same_shape(w2) || !b1.same_shape(b2) || b1.rows() != w1.rows())
            throw DimensionError("GLU: inconsistent parameter shapes");
        params_.add("W1", std::move(w1));
        params_.add("b1", std::move(b1));
        params_.add("W2", std::move(w2));
        params_.add("b2", std::move(b2));
    }

    Tensor forward(const Tensor& x) override { return kernels::glu_forward(params_, x, cache_); }

    Tensor backward(const Tensor& grad_out) override {
        if (cache_.input.empty()) throw StateError("Glu::backward called before forward");
        return kernels::glu_backward(params_, cache_, grad_out);
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "glu"; }

private:
    LayerParams params_;
    kernels::GluCache cache_;
};

/// Convolution + GLU concatenated under the input: V' = [V; GLU(conv(V))].
/// Output width is d_in + d_gate and column i stays aligned with token i.
class GatedCnn final : public Layer {
public:
    GatedCnn(const GatedCnnShape& shape, Rng& rng) : shape_(shape) {
        shape_.validate();
        params_.add("kernel",
                    init({shape_.channel_count(), shape_.window, shape_.d_in}, InitScheme::scaled_uniform, rng));
        kernels::add_glu_params(params_, shape_.channel_count(), shape_.gate_width(), rng);
    }

    Tensor forward(const Tensor& v) override {
        input_ = v;
        Tensor gated = kernels::glu_forward(params_, kernels::conv1d_forward(params_.value("kernel"), v), glu_);
        return vconcat(v, gated);
    }

    Tensor backward(const Tensor& grad_out) override {
        if (input_.empty()) throw StateError("GatedCnn::backward called before forward");
        if (grad_out.rows() != output_dim() || grad_out.cols() != input_.cols())
            throw DimensionError("gated cnn backward: gradient shape " + grad_out.shape_string());
        Tensor grad_in = row_slice(grad_out, 0, shape_.d_in);
        const Tensor d_conv = kernels::glu_backward(params_, glu_, row_slice(grad_out, shape_.d_in, grad_out.rows()));
        grad_in += kernels::conv1d_backward(params_.value("kernel"), params_.grad("kernel"), input_, d_conv);
        return grad_in;
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "gated_cnn"; }

    const GatedCnnShape& shape() const noexcept { return shape_; }
    std::size_t output_dim() const noexcept { return shape_.d_in + shape_.gate_width(); }

private:
    GatedCnnShape shape_;
    LayerParams params_;
    Tensor input_;
    kernels::GluCache glu_;
};

}  // namespace astral

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "astral/tensor.hpp"

namespace astral {

/// One trainable tensor with its gradient buffer.
///
/// `pinned`, when present, has the value's shape; nonzero entries are held
/// fixed by the optimizer. `trainable == false` freezes the whole tensor.
struct ParamEntry {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
    std::optional<Tensor> pinned;
};

/// Named, ordered parameters of one layer.
class LayerParams {
public:
    ParamEntry& add(std::string name, Tensor value) {
        for (const auto& e : entries_) {
            if (e.name == name) throw ArgumentError("duplicate parameter name '" + name + "'");
        }
        Tensor grad(value.shape());
        entries_.push_back(ParamEntry{std::move(name), std::move(value), std::move(grad), true, std::nullopt});
        return entries_.back();
    }

    ParamEntry& get(std::string_view name) {
        for (auto& e : entries_)
            if (e.name == name) return e;
        throw ArgumentError("no parameter named '" + std::string(name) + "'");
    }
    const ParamEntry& get(std::string_view name) const {
        return const_cast<LayerParams*>(this)->get(name);
    }

    Tensor& value(std::string_view name) { return get(name).value; }
    const Tensor& value(std::string_view name) const { return get(name).value; }
    Tensor& grad(std::string_view name) { return get(name).grad; }

    void zero_grads() noexcept {
        for (auto& e : entries_) e.grad.fill(0.0);
    }

    std::vector<ParamEntry>& entries() noexcept { return entries_; }
    const std::vector<ParamEntry>& entries() const noexcept { return entries_; }

private:
    std::vector<ParamEntry> entries_;
};

/// Differentiable layer over tensors.
///
/// forward() caches what backward() needs. backward() returns dL/dinput and
/// adds parameter gradients into params(), touching each gradient entry with
/// a single addition; it leaves the cache intact so it can be called
/// repeatedly, and two calls accumulate exactly twice the gradient of one.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual LayerParams& params() = 0;
    virtual std::string_view name() const = 0;
};

/// y = W x + b applied to each column of the input.
class Linear final : public Layer {
public:
    Linear(std::size_t in, std::size_t out, Rng& rng) {
        params_.add("W", init({out, in}, InitScheme::scaled_uniform, rng));
        params_.add("b", Tensor({out}));
    }
    Linear(Tensor weight, Tensor bias) {
        if (bias.rank() != 1 || bias.rows() != weight.rows())
            throw DimensionError("Linear: bias " + bias.shape_string() + " vs weight " + weight.shape_string());
        params_.add("W", std::move(weight));
        params_.add("b", std::move(bias));
    }

    Tensor forward(const Tensor& input) override {
        Tensor y = matmul(params_.value("W"), input);
        const Tensor& b = params_.value("b");
        for (std::size_t r = 0; r < y.rows(); ++r)
            for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[r];
        input_ = input;
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (input_.empty()) throw StateError("Linear::backward called before forward");
        add_matmul_nt(params_.grad("W"), grad_out, input_);
        add_row_sums(params_.grad("b"), grad_out);
        return matmul_tn(params_.value("W"), grad_out);
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "linear"; }

private:
    LayerParams params_;
    Tensor input_;
};

}  // namespace astral

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "astral/layer.hpp"

namespace astral {

/// Standard four-gate LSTM cell (no peepholes).
///
/// Parameters are stacked by gate in the order input, forget, candidate,
/// output: W_x is 4*d_h x d_in, W_h is 4*d_h x d_h, b has 4*d_h entries.
///   i, f, o = sigmoid(.)   g = tanh(.)
///   c_t = f*c_prev + i*g   h_t = o*tanh(c_t)
struct LstmCellCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> i, f, g, o, c, tanh_c;
};

struct LstmCellGrads {
    std::vector<double> dx, dh_prev, dc_prev;
};

inline void add_lstm_params(LayerParams& p, const std::string& prefix, std::size_t d_in, std::size_t d_h,
                            Rng& rng) {
    p.add(prefix + "W_x", init({4 * d_h, d_in}, InitScheme::scaled_uniform, rng));
    p.add(prefix + "W_h", init({4 * d_h, d_h}, InitScheme::scaled_uniform, rng));
    Tensor b({4 * d_h});
    for (std::size_t r = d_h; r < 2 * d_h; ++r) b[r] = 1.0;  // forget gate
    p.add(prefix + "b", std::move(b));
}

namespace kernels {

/// One step given the precomputed input projection W_x x (length 4*d_h).
inline void lstm_step(const Tensor& wh, const Tensor& b, const double* x_proj, LstmCellCache& st) {
    const std::size_t d_h = wh.cols();
    std::vector<double> z(4 * d_h);
    for (std::size_t r = 0; r < 4 * d_h; ++r) {
        double s = x_proj[r];
        for (std::size_t k = 0; k < d_h; ++k) s += wh(r, k) * st.h_prev[k];
        z[r] = s + b[r];
    }
    st.i.resize(d_h);
    st.f.resize(d_h);
    st.g.resize(d_h);
    st.o.resize(d_h);
    st.c.resize(d_h);
    st.tanh_c.resize(d_h);
    for (std::size_t k = 0; k < d_h; ++k) {
        st.i[k] = sigmoid(z[k]);
        st.f[k] = sigmoid(z[d_h + k]);
        st.g[k] = std::tanh(z[2 * d_h + k]);
        st.o[k] = sigmoid(z[3 * d_h + k]);
        st.c[k] = st.f[k] * st.c_prev[k] + st.i[k] * st.g[k];
        st.tanh_c[k] = std::tanh(st.c[k]);
    }
}

/// Pre-activation gradient (length 4*d_h) and dc_prev for one step, given
/// the total dL/dh_t and dL/dc_t.
inline std::vector<double> lstm_step_backward(const LstmCellCache& st, const std::vector<double>& dh,
                                              const std::vector<double>& dc_in, std::vector<double>& dc_prev) {
    const std::size_t d_h = st.c.size();
    std::vector<double> dz(4 * d_h);
    dc_prev.assign(d_h, 0.0);
    for (std::size_t k = 0; k < d_h; ++k) {
        const double d_o = dh[k] * st.tanh_c[k];
        const double dc = dc_in[k] + dh[k] * st.o[k] * (1.0 - st.tanh_c[k] * st.tanh_c[k]);
        const double d_i = dc * st.g[k];
        const double d_g = dc * st.i[k];
        const double d_f = dc * st.c_prev[k];
        dc_prev[k] = dc * st.f[k];
        dz[k] = d_i * st.i[k] * (1.0 - st.i[k]);
        dz[d_h + k] = d_f * st.f[k] * (1.0 - st.f[k]);
        dz[2 * d_h + k] = d_g * (1.0 - st.g[k] * st.g[k]);
        dz[3 * d_h + k] = d_o * st.o[k] * (1.0 - st.o[k]);
    }
    return dz;
}

}  // namespace kernels

/// Single cell application; fills `cache` for lstm_cell_backward.
inline void lstm_cell(const LayerParams& p, const std::string& prefix, const std::vector<double>& x,
                      const std::vector<double>& h_prev, const std::vector<double>& c_prev, LstmCellCache& cache) {
    const Tensor& wx = p.value(prefix + "W_x");
    const Tensor& wh = p.value(prefix + "W_h");
    if (x.size() != wx.cols() || h_prev.size() != wh.cols() || c_prev.size() != wh.cols())
        throw DimensionError("lstm_cell: input sizes do not match parameters " + wx.shape_string());
    std::vector<double> proj(wx.rows(), 0.0);
    for (std::size_t r = 0; r < wx.rows(); ++r)
        for (std::size_t k = 0; k < wx.cols(); ++k) proj[r] += wx(r, k) * x[k];
    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    kernels::lstm_step(wh, p.value(prefix + "b"), proj.data(), cache);
}

inline LstmCellGrads lstm_cell_backward(LayerParams& p, const std::string& prefix, const LstmCellCache& st,
                                        const std::vector<double>& dh, const std::vector<double>& dc) {
    const Tensor& wx = p.value(prefix + "W_x");
    const Tensor& wh = p.value(prefix + "W_h");
    Tensor& gwx = p.grad(prefix + "W_x");
    Tensor& gwh = p.grad(prefix + "W_h");
    Tensor& gb = p.grad(prefix + "b");
    LstmCellGrads out;
    const auto dz = kernels::lstm_step_backward(st, dh, dc, out.dc_prev);
    out.dx.assign(wx.cols(), 0.0);
    out.dh_prev.assign(wh.cols(), 0.0);
    for (std::size_t r = 0; r < dz.size(); ++r) {
        gb[r] += dz[r];
        for (std::size_t k = 0; k < wx.cols(); ++k) {
            gwx(r, k) += dz[r] * st.x[k];
            out.dx[k] += wx(r, k) * dz[r];
        }
        for (std::size_t k = 0; k < wh.cols(); ++k) {
            gwh(r, k) += dz[r] * st.h_prev[k];
            out.dh_prev[k] += wh(r, k) * dz[r];
        }
    }
    return out;
}

/// The cell as a tensor layer: input is the column [x; h_prev; c_prev],
/// output the column [h_t; c_t]. Used for gradient checking.
class LstmCellLayer final : public Layer {
public:
    LstmCellLayer(std::size_t d_in, std::size_t d_h, Rng& rng) : d_in_(d_in), d_h_(d_h) {
        add_lstm_params(params_, "", d_in, d_h, rng);
    }

    Tensor forward(const Tensor& input) override {
        if (input.rows() != d_in_ + 2 * d_h_ || input.cols() != 1)
            throw DimensionError("lstm cell layer: expected a column of " + std::to_string(d_in_ + 2 * d_h_));
        const auto& v = input.values();
        lstm_cell(params_, "", {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d_in_)},
                  {v.begin() + static_cast<std::ptrdiff_t>(d_in_), v.begin() + static_cast<std::ptrdiff_t>(d_in_ + d_h_)},
                  {v.begin() + static_cast<std::ptrdiff_t>(d_in_ + d_h_), v.end()}, cache_);
        has_cache_ = true;
        std::vector<double> out(cache_.o.size());
        for (std::size_t k = 0; k < d_h_; ++k) out[k] = cache_.o[k] * cache_.tanh_c[k];
        out.insert(out.end(), cache_.c.begin(), cache_.c.end());
        return Tensor({2 * d_h_, 1}, std::move(out));
    }

    Tensor backward(const Tensor& grad_out) override {
        if (!has_cache_) throw StateError("LstmCellLayer::backward called before forward");
        const auto& g = grad_out.values();
        const auto grads = lstm_cell_backward(params_, "", cache_, {g.begin(), g.begin() + static_cast<std::ptrdiff_t>(d_h_)},
                                              {g.begin() + static_cast<std::ptrdiff_t>(d_h_), g.end()});
        std::vector<double> out = grads.dx;
        out.insert(out.end(), grads.dh_prev.begin(), grads.dh_prev.end());
        out.insert(out.end(), grads.dc_prev.begin(), grads.dc_prev.end());
        return Tensor({d_in_ + 2 * d_h_, 1}, std::move(out));
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "lstm_cell"; }

private:
    std::size_t d_in_, d_h_;
    LayerParams params_;
    LstmCellCache cache_;
    bool has_cache_ = false;
};

/// Bidirectional LSTM over the columns of a d_in x n input. Output is
/// 2*d_h x n: rows [0, d_h) from the left-to-right pass, rows [d_h, 2*d_h)
/// from the right-to-left pass, both stored at their token's column. Both
/// directions start from h = c = 0.
class BiLstm final : public Layer {
public:
    BiLstm(std::size_t d_in, std::size_t d_h, Rng& rng) : d_in_(d_in), d_h_(d_h) {
        if (d_in == 0 || d_h == 0) throw ConfigError("LSTM dimensions must be positive");
        add_lstm_params(params_, "fwd.", d_in, d_h, rng);
        add_lstm_params(params_, "bwd.", d_in, d_h, rng);
    }

    Tensor forward(const Tensor& x) override {
        if (x.rank() != 2 || x.rows() != d_in_)
            throw DimensionError("bilstm: expected " + std::to_string(d_in_) + " x n input, got " + x.shape_string());
        input_ = x;
        Tensor out({2 * d_h_, x.cols()});
        run_direction("fwd.", false, out, 0);
        run_direction("bwd.", true, out, d_h_);
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (input_.empty()) throw StateError("BiLstm::backward called before forward");
        if (grad_out.rows() != 2 * d_h_ || grad_out.cols() != input_.cols())
            throw DimensionError("bilstm backward: gradient shape " + grad_out.shape_string());
        Tensor grad_in({d_in_, input_.cols()});
        backprop_direction("fwd.", false, grad_out, 0, grad_in);
        backprop_direction("bwd.", true, grad_out, d_h_, grad_in);
        return grad_in;
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "bilstm"; }
    std::size_t output_dim() const noexcept { return 2 * d_h_; }

private:
    std::vector<LstmCellCache>& steps(bool reverse) { return reverse ? bwd_steps_ : fwd_steps_; }

    void run_direction(const std::string& prefix, bool reverse, Tensor& out, std::size_t row0) {
        const std::size_t n = input_.cols();
        const Tensor proj = matmul(params_.value(prefix + "W_x"), input_);  // 4*d_h x n
        const Tensor& wh = params_.value(prefix + "W_h");
        const Tensor& b = params_.value(prefix + "b");
        auto& st = steps(reverse);
        st.assign(n, {});
        std::vector<double> h(d_h_, 0.0), c(d_h_, 0.0), col(4 * d_h_);
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t t = reverse ? n - 1 - s : s;
            for (std::size_t r = 0; r < 4 * d_h_; ++r) col[r] = proj(r, t);
            auto& cell = st[t];
            cell.h_prev = h;
            cell.c_prev = c;
            kernels::lstm_step(wh, b, col.data(), cell);
            for (std::size_t k = 0; k < d_h_; ++k) {
                h[k] = cell.o[k] * cell.tanh_c[k];
                out(row0 + k, t) = h[k];
            }
            c = cell.c;
        }
    }

    void backprop_direction(const std::string& prefix, bool reverse, const Tensor& grad_out, std::size_t row0,
                            Tensor& grad_in) {
        const std::size_t n = input_.cols();
        const Tensor& wh = params_.value(prefix + "W_h");
        auto& st = steps(reverse);
        Tensor dz_all({4 * d_h_, n});
        Tensor h_prev_all({d_h_, n});
        std::vector<double> dh_next(d_h_, 0.0), dc_next(d_h_, 0.0), dh(d_h_), dc_prev;
        for (std::size_t s = n; s-- > 0;) {
            const std::size_t t = reverse ? n - 1 - s : s;
            for (std::size_t k = 0; k < d_h_; ++k) dh[k] = grad_out(row0 + k, t) + dh_next[k];
            const auto dz = kernels::lstm_step_backward(st[t], dh, dc_next, dc_prev);
            dc_next = dc_prev;
            for (std::size_t k = 0; k < d_h_; ++k) {
                double acc = 0.0;
                for (std::size_t r = 0; r < 4 * d_h_; ++r) acc += wh(r, k) * dz[r];
                dh_next[k] = acc;
                h_prev_all(k, t) = st[t].h_prev[k];
            }
            for (std::size_t r = 0; r < 4 * d_h_; ++r) dz_all(r, t) = dz[r];
        }
        add_matmul_nt(params_.grad(prefix + "W_x"), dz_all, input_);
        add_matmul_nt(params_.grad(prefix + "W_h"), dz_all, h_prev_all);
        add_row_sums(params_.grad(prefix + "b"), dz_all);
        grad_in += matmul_tn(params_.value(prefix + "W_x"), dz_all);
    }

    std::size_t d_in_, d_h_;
    LayerParams params_;
    Tensor input_;
    std::vector<LstmCellCache> fwd_steps_, bwd_steps_;
};

}  // namespace astral

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "astral/conll.hpp"
#include "astral/layer.hpp"

namespace astral {

/// Score assigned to transitions ruled out by the IOB scheme. Finite so that
/// log-sum-exp stays well defined.
inline constexpr double kForbiddenScore = -1e4;

/// Projects H' (d x n) to per-token tag scores (n x L): row i is
/// W * H'[:, i] + b.
class EmissionLayer final : public Layer {
public:
    EmissionLayer(std::size_t d_in, std::size_t num_tags, Rng& rng) {
        params_.add("W", init({num_tags, d_in}, InitScheme::scaled_uniform, rng));
        params_.add("b", Tensor({num_tags}));
    }

    EmissionLayer(Tensor w, Tensor b) {
        if (b.rank() != 1 || b.rows() != w.rows()) throw DimensionError("emission bias does not match projection");
        params_.add("W", std::move(w));
        params_.add("b", std::move(b));
    }

    Tensor forward(const Tensor& h) override {
        const Tensor& w = params_.value("W");
        const Tensor& b = params_.value("b");
        if (h.rank() != 2 || h.rows() != w.cols())
            throw DimensionError("emissions: projection " + w.shape_string() + " cannot apply to " + h.shape_string());
        Tensor scores = matmul_tn(h, transpose(w));  // n x L
        for (std::size_t i = 0; i < scores.rows(); ++i)
            for (std::size_t y = 0; y < scores.cols(); ++y) scores(i, y) += b[y];
        input_ = h;
        return scores;
    }

    Tensor backward(const Tensor& grad_scores) override {
        if (input_.empty()) throw StateError("EmissionLayer::backward called before forward");
        const Tensor& w = params_.value("W");
        if (grad_scores.rows() != input_.cols() || grad_scores.cols() != w.rows())
            throw DimensionError("emissions backward: gradient shape " + grad_scores.shape_string());
        Tensor& gw = params_.grad("W");
        gw += matmul_tn(grad_scores, transpose(input_));  // dW[y][k] = sum_i g[i][y] h[k][i]
        add_row_sums(params_.grad("b"), transpose(grad_scores));
        return transpose(matmul(grad_scores, w));  // d x n
    }

    LayerParams& params() override { return params_; }
    std::string_view name() const override { return "emissions"; }

private:
    LayerParams params_;
    Tensor input_;
};

struct Decoded {
    std::vector<std::size_t> tags;
    double score = 0.0;
};

namespace detail {
inline double log_sum_exp(std::span<const double> v) noexcept {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}
}  // namespace detail

/// Linear-chain CRF over an n x L emission matrix.
///
/// Path score = start[y_0] + sum_i e[i][y_i] + sum_i trans[y_i][y_{i+1}] + end[y_{n-1}].
class Crf {
public:
    explicit Crf(std::size_t num_tags) : num_tags_(num_tags) {
        if (num_tags == 0) throw ConfigError("CRF needs at least one tag");
        params_.add("transitions", Tensor({num_tags, num_tags}));
        params_.add("start", Tensor({num_tags}));
        params_.add("end", Tensor({num_tags}));
    }

    std::size_t num_tags() const noexcept { return num_tags_; }
    LayerParams& params() noexcept { return params_; }
    const LayerParams& params() const noexcept { return params_; }

    double path_score(const Tensor& e, std::span<const std::size_t> tags) const {
        check(e);
        if (tags.size() != e.rows()) throw ArgumentError("path length does not match sentence length");
        const Tensor& tr = params_.value("transitions");
        double s = params_.value("start")[tags[0]];
        for (std::size_t i = 0; i < tags.size(); ++i) {
            if (tags[i] >= num_tags_) throw ArgumentError("tag id " + std::to_string(tags[i]) + " out of range");
            s += e(i, tags[i]);
            if (i + 1 < tags.size()) s += tr(tags[i], tags[i + 1]);
        }
        return s + params_.value("end")[tags.back()];
    }

    /// log Z by the forward algorithm in log space.
    double log_partition(const Tensor& e) const {
        check(e);
        const auto alpha = forward_table(e);
        return final_log_z(alpha, e.rows());
    }

    /// Per-token tag marginals P(y_i = y | x), n x L.
    Tensor marginals(const Tensor& e) const {
        check(e);
        const auto alpha = forward_table(e);
        const auto beta = backward_table(e);
        const double log_z = final_log_z(alpha, e.rows());
        Tensor m(e.shape());
        for (std::size_t i = 0; i < e.rows(); ++i)
            for (std::size_t y = 0; y < num_tags_; ++y) m(i, y) = std::exp(alpha(i, y) + beta(i, y) - log_z);
        return m;
    }

    double nll(const Tensor& e, std::span<const std::size_t> gold) const {
        return log_partition(e) - path_score(e, gold);
    }

    /// Negative log-likelihood of `gold`. Adds dNLL/dparams into the
    /// parameter gradients and returns dNLL/de (marginals minus gold
    /// indicators), scaled by `scale`.
    double nll_backward(const Tensor& e, std::span<const std::size_t> gold, Tensor& grad_e, double scale = 1.0) {
        check(e);
        const std::size_t n = e.rows(), L = num_tags_;
        const double gold_score = path_score(e, gold);
        const Tensor& tr = params_.value("transitions");
        const auto alpha = forward_table(e);
        const auto beta = backward_table(e);
        const double log_z = final_log_z(alpha, n);

        Tensor g_tr({L, L}), g_start({L}), g_end({L});
        grad_e = Tensor(e.shape());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t y = 0; y < L; ++y) grad_e(i, y) = scale * std::exp(alpha(i, y) + beta(i, y) - log_z);
        for (std::size_t y = 0; y < L; ++y) {
            g_start[y] += grad_e(0, y);
            g_end[y] += grad_e(n - 1, y);
        }
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t a = 0; a < L; ++a)
                for (std::size_t b = 0; b < L; ++b)
                    g_tr(a, b) += scale * std::exp(alpha(i, a) + tr(a, b) + e(i + 1, b) + beta(i + 1, b) - log_z);
        g_start[gold[0]] -= scale;
        g_end[gold[n - 1]] -= scale;
        for (std::size_t i = 0; i < n; ++i) {
            grad_e(i, gold[i]) -= scale;
            if (i + 1 < n) g_tr(gold[i], gold[i + 1]) -= scale;
        }
        params_.grad("transitions") += g_tr;
        params_.grad("start") += g_start;
        params_.grad("end") += g_end;
        return log_z - gold_score;
    }

    /// Exact best path. Ties go to the lower tag index at every decision.
    Decoded viterbi(const Tensor& e) const {
        check(e);
        const std::size_t n = e.rows(), L = num_tags_;
        const Tensor& tr = params_.value("transitions");
        const Tensor& start = params_.value("start");
        const Tensor& end = params_.value("end");
        std::vector<double> score(L), next(L);
        std::vector<std::size_t> back(n * L, 0);
        for (std::size_t y = 0; y < L; ++y) score[y] = start[y] + e(0, y);
        for (std::size_t i = 1; i < n; ++i) {
            for (std::size_t b = 0; b < L; ++b) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t arg = 0;
                for (std::size_t a = 0; a < L; ++a) {
                    const double s = score[a] + tr(a, b);
                    if (s > best) {
                        best = s;
                        arg = a;
                    }
                }
                next[b] = best + e(i, b);
                back[i * L + b] = arg;
            }
            std::swap(score, next);
        }
        Decoded out;
        out.tags.assign(n, 0);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < L; ++y) {
            const double s = score[y] + end[y];
            if (s > best) {
                best = s;
                out.tags[n - 1] = y;
            }
        }
        out.score = best;
        for (std::size_t i = n - 1; i > 0; --i) out.tags[i - 1] = back[i * L + out.tags[i]];
        return out;
    }

    /// Pins every I-X start score and every transition into I-X from O,
    /// B-Y or I-Y (Y != X) to kForbiddenScore; pinned entries are exempt
    /// from optimizer updates.
    void apply_iob_constraints(const TagSet& tagset) {
        if (tagset.size() != num_tags_) throw ArgumentError("tag set size does not match CRF");
        auto& tr = params_.get("transitions");
        auto& start = params_.get("start");
        Tensor tr_pin(tr.value.shape()), start_pin(start.value.shape());
        for (std::size_t b = 0; b < num_tags_; ++b) {
            const ParsedTag to = tagset.parsed(b);
            if (to.kind != TagKind::inside) continue;
            start_pin[b] = 1.0;
            for (std::size_t a = 0; a < num_tags_; ++a) {
                const ParsedTag from = tagset.parsed(a);
                if (from.kind == TagKind::outside || from.type != to.type) tr_pin(a, b) = 1.0;
            }
        }
        for (std::size_t i = 0; i < tr_pin.size(); ++i)
            if (tr_pin[i] != 0.0) tr.value[i] = kForbiddenScore;
        for (std::size_t i = 0; i < start_pin.size(); ++i)
            if (start_pin[i] != 0.0) start.value[i] = kForbiddenScore;
        tr.pinned = std::move(tr_pin);
        start.pinned = std::move(start_pin);
    }

private:
    void check(const Tensor& e) const {
        if (e.rank() != 2 || e.cols() != num_tags_)
            throw DimensionError("CRF expects n x " + std::to_string(num_tags_) + " emissions, got " + e.shape_string());
    }

    Tensor forward_table(const Tensor& e) const {
        const std::size_t n = e.rows(), L = num_tags_;
        const Tensor& tr = params_.value("transitions");
        const Tensor& start = params_.value("start");
        Tensor alpha({n, L});
        std::vector<double> terms(L);
        for (std::size_t y = 0; y < L; ++y) alpha(0, y) = start[y] + e(0, y);
        for (std::size_t i = 1; i < n; ++i) {
            for (std::size_t b = 0; b < L; ++b) {
                for (std::size_t a = 0; a < L; ++a) terms[a] = alpha(i - 1, a) + tr(a, b);
                alpha(i, b) = detail::log_sum_exp(terms) + e(i, b);
            }
        }
        return alpha;
    }

    Tensor backward_table(const Tensor& e) const {
        const std::size_t n = e.rows(), L = num_tags_;
        const Tensor& tr = params_.value("transitions");
        const Tensor& end = params_.value("end");
        Tensor beta({n, L});
        std::vector<double> terms(L);
        for (std::size_t y = 0; y < L; ++y) beta(n - 1, y) = end[y];
        for (std::size_t i = n - 1; i-- > 0;) {
            for (std::size_t a = 0; a < L; ++a) {
                for (std::size_t b = 0; b < L; ++b) terms[b] = tr(a, b) + e(i + 1, b) + beta(i + 1, b);
                beta(i, a) = detail::log_sum_exp(terms);
            }
        }
        return beta;
    }

    double final_log_z(const Tensor& alpha, std::size_t n) const {
        const Tensor& end = params_.value("end");
        std::vector<double> terms(num_tags_);
        for (std::size_t y = 0; y < num_tags_; ++y) terms[y] = alpha(n - 1, y) + end[y];
        return detail::log_sum_exp(terms);
    }

    std::size_t num_tags_;
    LayerParams params_;
};

/// The CRF negative log-likelihood for a fixed gold path as a layer from
/// emissions (n x L) to a 1 x 1 loss. Parameters are the CRF's own.
class CrfNllLayer final : public Layer {
public:
    CrfNllLayer(Crf& crf, std::vector<std::size_t> gold) : crf_(crf), gold_(std::move(gold)) {}

    Tensor forward(const Tensor& e) override {
        emissions_ = e;
        return Tensor({1, 1}, crf_.nll(e, gold_));
    }

    Tensor backward(const Tensor& grad_out) override {
        if (emissions_.empty()) throw StateError("CrfNllLayer::backward called before forward");
        Tensor grad_e;
        crf_.nll_backward(emissions_, gold_, grad_e, grad_out[0]);
        return grad_e;
    }

    LayerParams& params() override { return crf_.params(); }
    std::string_view name() const override { return "crf_nll"; }

private:
    Crf& crf_;
    std::vector<std::size_t> gold_;
    Tensor emissions_;
};

}  // namespace astral

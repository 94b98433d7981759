#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "astral/crf.hpp"
#include "astral/embedding.hpp"
#include "astral/gated_cnn.hpp"
#include "astral/grad_check.hpp"
#include "astral/lstm.hpp"

namespace astral {

struct SuiteResult {
    std::string layer;
    std::uint64_t seed = 0;
    CheckReport report;
};

namespace detail {

inline std::size_t draw_dim(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

inline Tensor random_tensor(const Tensor::Shape& shape, Rng& rng, double scale = 1.0) {
    return init(shape, InitScheme::uniform, rng, -scale, scale);
}

inline CheckReport check_embedding(Rng& rng, double step, double tol) {
    const std::size_t vocab = draw_dim(rng, 2, 8), d_w = draw_dim(rng, 1, 8), d_f = draw_dim(rng, 1, 8);
    const std::size_t n = draw_dim(rng, 1, 5);
    Embedding emb(vocab, d_w, d_f, rng);
    Sentence s;
    for (std::size_t i = 0; i < n; ++i) {
        s.tokens.push_back("t");
        s.token_ids.push_back(rng.below(vocab));
        s.feature_ids.push_back(rng.below(kNumFeatures));
    }
    // Random projection so the scalar loss depends on every output entry differently.
    const Tensor proj = random_tensor({d_w + d_f, n}, rng);
    return grad_check(
        emb.params(), nullptr, [&] { return mul(emb.forward(s), proj); },
        [&](const Tensor& g) {
            emb.backward(mul(g, proj));
            return Tensor();
        },
        step, tol);
}

}  // namespace detail

/// Finite-difference checks of every layer type on random small instances
/// (widths <= 8, sentence length <= 5), `seeds` instances per layer.
inline std::vector<SuiteResult> run_gradcheck_suite(std::size_t seeds = 5, std::uint64_t base_seed = 1,
                                                    double step = 1e-5, double tol = 1e-4) {
    using detail::draw_dim;
    using detail::random_tensor;
    std::vector<SuiteResult> out;
    for (std::size_t k = 0; k < seeds; ++k) {
        const std::uint64_t seed = base_seed + k;
        auto run = [&](const std::string& name, const std::function<CheckReport(Rng&)>& fn) {
            Rng rng(seed * 1000003ULL + out.size());
            out.push_back({name, seed, fn(rng)});
        };
        run("embedding", [&](Rng& rng) { return detail::check_embedding(rng, step, tol); });
        run("conv1d", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5), c = draw_dim(rng, 1, 8);
            const std::size_t w = 2 * draw_dim(rng, 0, 2) + 1;
            Conv1d layer(d, w, c, rng);
            return grad_check(layer, random_tensor({d, n}, rng), step, tol);
        });
        run("glu", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5), g = draw_dim(rng, 1, 8);
            Glu layer(d, g, rng);
            return grad_check(layer, random_tensor({d, n}, rng), step, tol);
        });
        run("gated_cnn", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5);
            GatedCnnShape shape{d, 2 * draw_dim(rng, 0, 2) + 1, draw_dim(rng, 1, 8), draw_dim(rng, 1, 8)};
            GatedCnn layer(shape, rng);
            return grad_check(layer, random_tensor({d, n}, rng), step, tol);
        });
        run("lstm_cell", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), h = draw_dim(rng, 1, 8);
            LstmCellLayer layer(d, h, rng);
            return grad_check(layer, random_tensor({d + 2 * h, 1}, rng), step, tol);
        });
        run("bilstm", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), h = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5);
            BiLstm layer(d, h, rng);
            return grad_check(layer, random_tensor({d, n}, rng), step, tol);
        });
        run("emission", [&](Rng& rng) {
            const std::size_t d = draw_dim(rng, 1, 8), l = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5);
            EmissionLayer layer(d, l, rng);
            return grad_check(layer, random_tensor({d, n}, rng), step, tol);
        });
        run("crf_nll", [&](Rng& rng) {
            const std::size_t l = draw_dim(rng, 1, 8), n = draw_dim(rng, 1, 5);
            Crf crf(l);
            for (auto& e : crf.params().entries()) e.value = random_tensor(e.value.shape(), rng);
            std::vector<std::size_t> gold(n);
            for (auto& g : gold) g = rng.below(l);
            CrfNllLayer layer(crf, gold);
            return grad_check(layer, random_tensor({n, l}, rng, 2.0), step, tol);
        });
    }
    return out;
}

}  // namespace astral

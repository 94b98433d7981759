#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astral/conll.hpp"
#include "astral/crf.hpp"
#include "astral/embedding.hpp"
#include "astral/gated_cnn.hpp"
#include "astral/lstm.hpp"

namespace astral {

struct ModelConfig {
    std::size_t d_w = 50;
    std::size_t d_f = 20;
    std::size_t d_h = 50;
    std::size_t window = 3;
    std::optional<std::size_t> n_o;  // conv channels; unset = block input width
    std::optional<std::size_t> d_g;  // gated width; unset = block input width
    bool use_gc = true;
    bool iob_constraints = true;
    bool finetune_embeddings = false;

    void validate() const {
        if (d_w == 0 || d_f == 0 || d_h == 0) throw ConfigError("d_w, d_f and d_h must be positive");
        if (window % 2 == 0) throw ConfigError("window must be odd, got " + std::to_string(window));
        if (n_o && *n_o == 0) throw ConfigError("n_o must be positive when set");
        if (d_g && *d_g == 0) throw ConfigError("d_g must be at least 1 when set");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"d_w", c.d_w},
         {"d_f", c.d_f},
         {"d_h", c.d_h},
         {"window", c.window},
         {"n_o", c.n_o ? nlohmann::json(*c.n_o) : nlohmann::json(nullptr)},
         {"d_g", c.d_g ? nlohmann::json(*c.d_g) : nlohmann::json(nullptr)},
         {"use_gc", c.use_gc},
         {"iob_constraints", c.iob_constraints},
         {"finetune_embeddings", c.finetune_embeddings}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_w = j.at("d_w").get<std::size_t>();
    c.d_f = j.at("d_f").get<std::size_t>();
    c.d_h = j.at("d_h").get<std::size_t>();
    c.window = j.at("window").get<std::size_t>();
    c.n_o = j.at("n_o").is_null() ? std::nullopt : std::optional(j.at("n_o").get<std::size_t>());
    c.d_g = j.at("d_g").is_null() ? std::nullopt : std::optional(j.at("d_g").get<std::size_t>());
    c.use_gc = j.at("use_gc").get<bool>();
    c.iob_constraints = j.at("iob_constraints").get<bool>();
    c.finetune_embeddings = j.at("finetune_embeddings").get<bool>();
}

struct NamedParams {
    std::string prefix;
    LayerParams* params;
};

/// Embedding -> [Gated-CNN I] -> Bi-LSTM -> [Gated-CNN II] -> emissions -> CRF.
///
/// The pipeline is exposed stage by stage so the adversarial step can
/// re-enter it at an intermediate variable:
///   E  = embed(sentence)     E' = lower(E)     (E' == E without gated CNNs)
///   H  = context(E')         H' = upper(H)     (H' == H without gated CNNs)
///   scores = emit(H')        n x L, consumed by crf()
/// Each *_backward consumes the matching stage's cache.
class Model {
public:
    Model(ModelConfig config, Vocab vocab, TagSet tagset, std::uint64_t seed)
        : config_(std::move(config)), vocab_(std::move(vocab)), tagset_(std::move(tagset)), crf_(tagset_.size()) {
        config_.validate();
        Rng rng(seed);
        embedding_ = std::make_unique<Embedding>(vocab_.size(), config_.d_w, config_.d_f, rng);
        std::size_t width = embedding_->output_dim();
        if (config_.use_gc) {
            gc_lower_ = std::make_unique<GatedCnn>(GatedCnnShape{width, config_.window, config_.n_o, config_.d_g}, rng);
            width = gc_lower_->output_dim();
        }
        bilstm_ = std::make_unique<BiLstm>(width, config_.d_h, rng);
        width = bilstm_->output_dim();
        if (config_.use_gc) {
            gc_upper_ = std::make_unique<GatedCnn>(GatedCnnShape{width, config_.window, config_.n_o, config_.d_g}, rng);
            width = gc_upper_->output_dim();
        }
        emissions_ = std::make_unique<EmissionLayer>(width, tagset_.size(), rng);
        if (config_.iob_constraints) crf_.apply_iob_constraints(tagset_);
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const noexcept { return config_; }
    const Vocab& vocab() const noexcept { return vocab_; }
    const TagSet& tagset() const noexcept { return tagset_; }
    Crf& crf() noexcept { return crf_; }
    const Crf& crf() const noexcept { return crf_; }

    /// Copies pretrained word vectors in; the word table then trains only
    /// if finetune_embeddings is set.
    void use_pretrained(const PretrainedEmbeddings& pretrained) {
        embedding_->load_words(vocab_, pretrained);
        embedding_->set_word_trainable(config_.finetune_embeddings);
    }

    Tensor embed(const Sentence& s) { return embedding_->forward(s); }
    Tensor lower(const Tensor& e) { return gc_lower_ ? gc_lower_->forward(e) : e; }
    Tensor context(const Tensor& e_prime) { return bilstm_->forward(e_prime); }
    Tensor upper(const Tensor& h) { return gc_upper_ ? gc_upper_->forward(h) : h; }
    Tensor emit(const Tensor& h_prime) { return emissions_->forward(h_prime); }

    Tensor emit_backward(const Tensor& g) { return emissions_->backward(g); }
    Tensor upper_backward(const Tensor& g) { return gc_upper_ ? gc_upper_->backward(g) : g; }
    Tensor context_backward(const Tensor& g) { return bilstm_->backward(g); }
    Tensor lower_backward(const Tensor& g) { return gc_lower_ ? gc_lower_->backward(g) : g; }
    void embed_backward(const Tensor& g) { embedding_->backward(g); }

    /// Backpropagates dL/dH' through every stage below it. Returns dL/dE'.
    Tensor backward_from_h_prime(const Tensor& d_h_prime) {
        Tensor d_e_prime = context_backward(upper_backward(d_h_prime));
        embed_backward(lower_backward(d_e_prime));
        return d_e_prime;
    }

    Tensor scores(const Sentence& s) { return emit(upper(context(lower(embed(s))))); }

    Decoded decode(const Sentence& s) { return crf_.viterbi(scores(s)); }

    /// Forward-only loss of the gold path.
    double loss(const Sentence& s) { return crf_.nll(scores(s), gold_of(s)); }

    static const std::vector<std::size_t>& gold_of(const Sentence& s) {
        if (!s.gold_tags) throw ArgumentError("sentence has no gold tags");
        return *s.gold_tags;
    }

    /// All parameter groups in a fixed order; full names are prefix + "." + entry.
    std::vector<NamedParams> param_groups() {
        std::vector<NamedParams> out{{"embedding", &embedding_->params()}};
        if (gc_lower_) out.push_back({"gc_lower", &gc_lower_->params()});
        out.push_back({"bilstm", &bilstm_->params()});
        if (gc_upper_) out.push_back({"gc_upper", &gc_upper_->params()});
        out.push_back({"emissions", &emissions_->params()});
        out.push_back({"crf", &crf_.params()});
        return out;
    }

    void zero_grads() {
        for (auto& g : param_groups()) g.params->zero_grads();
    }

private:
    ModelConfig config_;
    Vocab vocab_;
    TagSet tagset_;
    std::unique_ptr<Embedding> embedding_;
    std::unique_ptr<GatedCnn> gc_lower_;
    std::unique_ptr<BiLstm> bilstm_;
    std::unique_ptr<GatedCnn> gc_upper_;
    std::unique_ptr<EmissionLayer> emissions_;
    Crf crf_;
};

}  // namespace astral

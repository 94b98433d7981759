#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "astral/conll.hpp"
#include "astral/layer.hpp"

namespace astral {

/// Word vectors read from a text file: vocabulary (with unk at id 0) and a
/// d_w x size table whose column j is the vector of token j.
struct PretrainedEmbeddings {
    Vocab vocab;
    Tensor table;
};

/// Reads "token v1 v2 ... vd" lines. An optional leading "count dim" header
/// is skipped. The unk column is the mean of all loaded vectors.
inline PretrainedEmbeddings load_pretrained(std::istream& in) {
    std::vector<std::vector<double>> rows;
    Vocab vocab;
    std::string line;
    std::size_t lineno = 0, dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = detail::split_ws(line);
        if (fields.empty()) continue;
        if (lineno == 1 && fields.size() == 2 && fields[0].find_first_not_of("0123456789") == std::string::npos &&
            fields[1].find_first_not_of("0123456789") == std::string::npos) {
            continue;
        }
        if (fields.size() < 2) throw FormatError(lineno, "expected a token followed by its vector");
        const std::size_t d = fields.size() - 1;
        if (dim == 0) dim = d;
        if (d != dim) {
            throw FormatError(lineno, "vector has " + std::to_string(d) + " components, expected " +
                                          std::to_string(dim));
        }
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) {
            try {
                std::size_t used = 0;
                v[i] = std::stod(fields[i + 1], &used);
                if (used != fields[i + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw FormatError(lineno, "bad number '" + fields[i + 1] + "'");
            }
        }
        if (vocab.contains(fields[0])) throw FormatError(lineno, "duplicate token '" + fields[0] + "'");
        vocab.add(fields[0]);
        rows.push_back(std::move(v));
    }
    if (rows.empty()) throw FormatError("embedding file contains no vectors");

    Tensor table({dim, rows.size() + 1});
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t r = 0; r < dim; ++r) {
            table(r, j + 1) = rows[j][r];
            table(r, 0) += rows[j][r];
        }
    }
    for (std::size_t r = 0; r < dim; ++r) table(r, 0) /= static_cast<double>(rows.size());
    return {std::move(vocab), std::move(table)};
}

inline PretrainedEmbeddings load_pretrained(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read embedding file: " + path);
    return load_pretrained(in);
}

/// Token + feature lookup: E = [M_w[:, token_id]; M_f[:, feature_id]] per
/// token, a (d_w + d_f) x n tensor.
class Embedding {
public:
    Embedding(std::size_t vocab_size, std::size_t d_w, std::size_t d_f, Rng& rng)
        : d_w_(d_w), d_f_(d_f) {
        params_.add("M_w", init({d_w, vocab_size}, InitScheme::scaled_uniform, rng));
        params_.add("M_f", init({d_f, kNumFeatures}, InitScheme::scaled_uniform, rng));
    }

    /// Copies pretrained columns into the word table by token string; tokens
    /// not in `pretrained` keep their random initialization.
    void load_words(const Vocab& vocab, const PretrainedEmbeddings& pretrained) {
        Tensor& mw = params_.value("M_w");
        if (pretrained.table.rows() != d_w_) {
            throw ConfigError("embedding file dimension " + std::to_string(pretrained.table.rows()) +
                              " does not match d_w = " + std::to_string(d_w_));
        }
        for (std::size_t id = 0; id < vocab.size(); ++id) {
            std::optional<std::size_t> src;
            if (id == vocab.unk_id())
                src = 0;
            else if (pretrained.vocab.contains(vocab.token(id)))
                src = pretrained.vocab.lookup(vocab.token(id));
            if (!src) continue;
            for (std::size_t r = 0; r < d_w_; ++r) mw(r, id) = pretrained.table(r, *src);
        }
    }

    void set_word_trainable(bool on) { params_.get("M_w").trainable = on; }

    Tensor forward(const Sentence& s) {
        const Tensor& mw = params_.value("M_w");
        const Tensor& mf = params_.value("M_f");
        const std::size_t n = s.size();
        if (n == 0) throw ArgumentError("embedding: empty sentence");
        if (s.token_ids.size() != n || s.feature_ids.size() != n)
            throw ArgumentError("embedding: sentence id lists have inconsistent lengths");
        Tensor e({d_w_ + d_f_, n});
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t w = s.token_ids[i], f = s.feature_ids[i];
            if (w >= mw.cols()) throw ArgumentError("embedding: token id " + std::to_string(w) + " out of range");
            if (f >= kNumFeatures) throw ArgumentError("embedding: feature id " + std::to_string(f) + " out of range");
            for (std::size_t r = 0; r < d_w_; ++r) e(r, i) = mw(r, w);
            for (std::size_t r = 0; r < d_f_; ++r) e(d_w_ + r, i) = mf(r, f);
        }
        token_ids_ = s.token_ids;
        feature_ids_ = s.feature_ids;
        return e;
    }

    /// Scatter-adds grad columns into the addressed table columns.
    void backward(const Tensor& grad_e) {
        if (token_ids_.empty()) throw StateError("Embedding::backward called before forward");
        if (grad_e.rows() != d_w_ + d_f_ || grad_e.cols() != token_ids_.size())
            throw DimensionError("embedding backward: gradient shape " + grad_e.shape_string());
        Tensor& gw = params_.grad("M_w");
        Tensor& gf = params_.grad("M_f");
        // Columns addressed more than once are summed before being added.
        std::vector<std::size_t> word_cols(token_ids_), feat_cols(feature_ids_);
        std::sort(word_cols.begin(), word_cols.end());
        word_cols.erase(std::unique(word_cols.begin(), word_cols.end()), word_cols.end());
        std::sort(feat_cols.begin(), feat_cols.end());
        feat_cols.erase(std::unique(feat_cols.begin(), feat_cols.end()), feat_cols.end());
        std::vector<double> acc(std::max(d_w_, d_f_));
        for (auto w : word_cols) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = 0; i < token_ids_.size(); ++i)
                if (token_ids_[i] == w)
                    for (std::size_t r = 0; r < d_w_; ++r) acc[r] += grad_e(r, i);
            for (std::size_t r = 0; r < d_w_; ++r) gw(r, w) += acc[r];
        }
        for (auto f : feat_cols) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = 0; i < feature_ids_.size(); ++i)
                if (feature_ids_[i] == f)
                    for (std::size_t r = 0; r < d_f_; ++r) acc[r] += grad_e(d_w_ + r, i);
            for (std::size_t r = 0; r < d_f_; ++r) gf(r, f) += acc[r];
        }
    }

    LayerParams& params() noexcept { return params_; }
    std::size_t output_dim() const noexcept { return d_w_ + d_f_; }
    std::size_t d_w() const noexcept { return d_w_; }
    std::size_t d_f() const noexcept { return d_f_; }

private:
    std::size_t d_w_, d_f_;
    LayerParams params_;
    std::vector<std::size_t> token_ids_;
    std::vector<std::size_t> feature_ids_;
};

}  // namespace astral

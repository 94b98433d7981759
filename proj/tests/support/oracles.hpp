#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "astral/crf.hpp"
#include "astral/metrics.hpp"

namespace astral::testing {

// ---------------------------------------------------------------------------
// CRF by enumeration
// ---------------------------------------------------------------------------

// Calls f(path) for every one of L^n tag paths in lexicographic order.
template <class F>
void for_each_path(std::size_t n, std::size_t L, F&& f) {
    std::vector<std::size_t> path(n, 0);
    while (true) {
        f(path);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++path[i] < L) break;
            path[i] = 0;
            if (i == 0) return;
        }
    }
}

inline double brute_log_z(const Crf& crf, const Tensor& e) {
    std::vector<double> scores;
    for_each_path(e.rows(), crf.num_tags(), [&](const auto& p) { scores.push_back(crf.path_score(e, p)); });
    const double m = *std::max_element(scores.begin(), scores.end());
    double s = 0.0;
    for (double v : scores) s += std::exp(v - m);
    return m + std::log(s);
}

// n x L token marginals.
inline Tensor brute_marginals(const Crf& crf, const Tensor& e) {
    const double log_z = brute_log_z(crf, e);
    Tensor m({e.rows(), crf.num_tags()});
    for_each_path(e.rows(), crf.num_tags(), [&](const auto& p) {
        const double prob = std::exp(crf.path_score(e, p) - log_z);
        for (std::size_t i = 0; i < p.size(); ++i) m(i, p[i]) += prob;
    });
    return m;
}

// Lexicographically smallest path among the maximal ones.
inline std::vector<std::size_t> brute_argmax(const Crf& crf, const Tensor& e) {
    std::vector<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for_each_path(e.rows(), crf.num_tags(), [&](const auto& p) {
        const double s = crf.path_score(e, p);
        if (s > best_score) {
            best_score = s;
            best = p;
        }
    });
    return best;
}

// ---------------------------------------------------------------------------
// Metrics by naive counting
// ---------------------------------------------------------------------------

using Tags = std::vector<std::string>;

inline Tags random_tags(Rng& rng, std::size_t n) {
    static const Tags pool{"O", "O", "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG"};
    Tags t(n);
    for (auto& s : t) s = pool[rng.below(pool.size())];
    return t;
}

// Token counts by pairwise comparison of the two position sets.
inline PrfCounts naive_token_counts(const Tags& pred, const Tags& gold) {
    std::vector<std::size_t> tp, tg;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != "O") tp.push_back(i);
        if (gold[i] != "O") tg.push_back(i);
    }
    PrfCounts c{tp.size(), tg.size(), 0};
    for (auto i : tp)
        for (auto j : tg)
            if (i == j && pred[i] == gold[j]) ++c.hits;
    return c;
}

// Spans as (type, start, end) with an I- tag opening a span when it does not
// continue one of the same type.
inline std::vector<std::tuple<std::string, std::size_t, std::size_t>> naive_spans(const Tags& t) {
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    std::size_t i = 0;
    while (i < t.size()) {
        if (t[i] == "O") {
            ++i;
            continue;
        }
        const std::string type = t[i].substr(2);
        std::size_t j = i + 1;
        while (j < t.size() && t[j] == "I-" + type) ++j;
        out.emplace_back(type, i, j);
        i = j;
    }
    return out;
}

inline PrfCounts naive_entity_counts(const Tags& pred, const Tags& gold) {
    const auto ps = naive_spans(pred), gs = naive_spans(gold);
    PrfCounts c{ps.size(), gs.size(), 0};
    for (const auto& p : ps)
        for (const auto& g : gs)
            if (p == g) ++c.hits;
    return c;
}

}  // namespace astral::testing

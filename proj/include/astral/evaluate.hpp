#pragma once

#include <string>
#include <vector>

#include "astral/metrics.hpp"
#include "astral/model.hpp"

namespace astral {

struct Evaluation {
    Metrics token;
    Metrics entity;
    std::vector<std::vector<std::string>> predictions;
};

/// Decodes every sentence and scores it against its gold tags.
inline Evaluation evaluate(Model& model, const Corpus& corpus) {
    if (!(corpus.tagset == model.tagset())) throw DataError("corpus tag set does not match the model's tag set");
    const auto& types = model.tagset().entity_types();
    MetricsCounter token(Level::token, types), entity(Level::entity, types);
    Evaluation out;
    out.predictions.reserve(corpus.sentences.size());
    for (const auto& s : corpus.sentences) {
        auto pred = tag_strings(model.decode(s).tags, model.tagset());
        const auto gold = tag_strings(Model::gold_of(s), model.tagset());
        token.add(pred, gold);
        entity.add(pred, gold);
        out.predictions.push_back(std::move(pred));
    }
    out.token = token.metrics();
    out.entity = entity.metrics();
    return out;
}

inline double token_f1(Model& model, const Corpus& corpus) { return evaluate(model, corpus).token.overall.f1; }

}  // namespace astral

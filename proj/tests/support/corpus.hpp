#pragma once

#include "astral/conll.hpp"
#include "astral/synthetic.hpp"
#include "astral/train.hpp"

namespace astral::testing {

struct Split {
    Corpus train;
    Corpus dev;
};

/// The synthetic corpus split into train and dev; dev is indexed with the
/// training vocabulary and tag set.
inline Split synthetic_split(std::size_t count = synthetic::kDefaultSize, std::size_t train_size = 40,
                             std::uint64_t seed = synthetic::kDefaultSeed) {
    const auto all = synthetic::generate(count, seed);
    const std::vector<synthetic::TaggedSentence> head(all.begin(), all.begin() + static_cast<long>(train_size));
    const std::vector<synthetic::TaggedSentence> tail(all.begin() + static_cast<long>(train_size), all.end());
    Split s{parse_conll(synthetic::to_conll(head)), {}};
    s.dev = parse_conll(synthetic::to_conll(tail), {}, s.train.vocab, s.train.tagset);
    return s;
}

/// Small dimensions that keep unit-level training runs fast.
inline TrainConfig small_config() {
    TrainConfig c;
    c.model.d_w = 8;
    c.model.d_f = 4;
    c.model.d_h = 8;
    c.epochs = 3;
    c.seed = 11;
    return c;
}

}  // namespace astral::testing

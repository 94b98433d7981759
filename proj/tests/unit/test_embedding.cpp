#include <gtest/gtest.h>

#include <sstream>

#include "astral/embedding.hpp"
#include "astral/grad_check.hpp"

using namespace astral;

namespace {

PretrainedEmbeddings load(const std::string& text) {
    std::istringstream in(text);
    return load_pretrained(in);
}

Sentence sentence(std::vector<std::size_t> ids, std::vector<std::size_t> features) {
    Sentence s;
    s.tokens.assign(ids.size(), "t");
    s.token_ids = std::move(ids);
    s.feature_ids = std::move(features);
    return s;
}

}  // namespace

TEST(LoadPretrained, ThreeRowsAndUnkMean) {
    const auto p = load("a 1 2\nb 3 4\nc 5 12\n");
    EXPECT_EQ(p.vocab.size(), 4u);
    EXPECT_EQ(p.table.rows(), 2u);
    EXPECT_EQ(p.table(0, 0), 3.0);
    EXPECT_EQ(p.table(1, 0), 6.0);
}

TEST(LoadPretrained, SingleRowLookup) {
    const auto p = load("a 1.0 2.0\n");
    const std::size_t id = p.vocab.lookup("a");
    EXPECT_EQ(p.table(0, id), 1.0);
    EXPECT_EQ(p.table(1, id), 2.0);
}

TEST(LoadPretrained, EmptyFileIsError) {
    EXPECT_THROW(load(""), FormatError);
}

TEST(LoadPretrained, HeaderSkipped) {
    const auto p = load("2 3\na 1 2 3\nb 4 5 6\n");
    EXPECT_EQ(p.vocab.size(), 3u);
    EXPECT_EQ(p.table.rows(), 3u);
}

TEST(LoadPretrained, InconsistentDimensionReportsLine) {
    try {
        load("a 1 2\nb 1 2\nc 1 2 3\n");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Embedding, ZeroTablesGiveZeros) {
    Rng rng(1);
    Embedding emb(4, 2, 1, rng);
    for (auto& e : emb.params().entries()) e.value.fill(0.0);
    EXPECT_EQ(emb.forward(sentence({1, 2, 3}, {0, 1, 4})), Tensor({3, 3}));
}

TEST(Embedding, ColumnsStackAddressedColumns) {
    Rng rng(2);
    Embedding emb(5, 3, 2, rng);
    const Sentence s = sentence({4, 0, 4, 2}, {1, 3, 1, 0});
    const Tensor e = emb.forward(s);
    const Tensor& mw = emb.params().value("M_w");
    const Tensor& mf = emb.params().value("M_f");
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(e(r, i), mw(r, s.token_ids[i]));
        for (std::size_t r = 0; r < 2; ++r) EXPECT_EQ(e(3 + r, i), mf(r, s.feature_ids[i]));
    }
}

TEST(Embedding, EuSentenceShape) {
    Rng rng(3);
    Embedding emb(20, 50, 20, rng);
    const Tensor e = emb.forward(sentence({1, 2, 3, 4, 5, 6, 7, 8}, {2, 4, 3, 4, 4, 4, 3, 4}));
    EXPECT_EQ(e.shape(), (Tensor::Shape{70, 8}));
}

TEST(Embedding, OutOfRangeIsArgumentError) {
    Rng rng(4);
    Embedding emb(3, 2, 2, rng);
    EXPECT_THROW(emb.forward(sentence({3}, {0})), ArgumentError);
    EXPECT_THROW(emb.forward(sentence({0}, {5})), ArgumentError);
}

TEST(Embedding, BackwardBeforeForwardIsStateError) {
    Rng rng(5);
    Embedding emb(3, 2, 2, rng);
    EXPECT_THROW(emb.backward(Tensor({4, 1})), StateError);
}

TEST(Embedding, RepeatedTokenAccumulates) {
    Rng rng(6);
    Embedding emb(4, 2, 1, rng);
    emb.forward(sentence({2, 1, 2}, {0, 0, 0}));
    const Tensor g = Tensor::matrix({{1, 10, 100}, {2, 20, 200}, {3, 30, 300}});
    emb.backward(g);
    const Tensor& gw = emb.params().grad("M_w");
    EXPECT_EQ(gw(0, 2), 101.0);
    EXPECT_EQ(gw(1, 2), 202.0);
    EXPECT_EQ(gw(0, 1), 10.0);
    EXPECT_EQ(emb.params().grad("M_f")(0, 0), 333.0);
    // Columns not used by the sentence get exactly zero.
    for (std::size_t r = 0; r < 2; ++r) {
        EXPECT_EQ(gw(r, 0), 0.0);
        EXPECT_EQ(gw(r, 3), 0.0);
    }
}

TEST(Embedding, ZeroGradientChangesNothing) {
    Rng rng(7);
    Embedding emb(4, 2, 2, rng);
    emb.forward(sentence({1, 2}, {0, 1}));
    emb.backward(Tensor({4, 2}));
    EXPECT_EQ(emb.params().grad("M_w"), Tensor({2, 4}));
    EXPECT_EQ(emb.params().grad("M_f"), Tensor({2, 5}));
}

TEST(Embedding, PermutingTokensPermutesColumns) {
    Rng rng(8);
    Embedding emb(6, 3, 2, rng);
    const Tensor a = emb.forward(sentence({1, 2, 3}, {0, 1, 2}));
    const Tensor b = emb.forward(sentence({3, 1, 2}, {2, 0, 1}));
    for (std::size_t r = 0; r < 5; ++r) {
        EXPECT_EQ(b(r, 0), a(r, 2));
        EXPECT_EQ(b(r, 1), a(r, 0));
        EXPECT_EQ(b(r, 2), a(r, 1));
    }
}

TEST(Embedding, GradCheckThreeTokens) {
    Rng rng(9);
    Embedding emb(5, 3, 2, rng);
    const Sentence s = sentence({1, 3, 1}, {4, 0, 4});
    const Tensor proj = init({5, 3}, InitScheme::uniform, rng, -1, 1);
    const auto report = grad_check(
        emb.params(), nullptr, [&] { return mul(emb.forward(s), proj); },
        [&](const Tensor& g) {
            emb.backward(mul(g, proj));
            return Tensor();
        },
        1e-5, 1e-4);
    EXPECT_TRUE(report.passed());
    EXPECT_EQ(report.checked, 15u + 10u);
}

TEST(Embedding, LoadWordsAndFreeze) {
    Rng rng(10);
    Vocab vocab;
    vocab.add("a");
    vocab.add("zz");
    Embedding emb(vocab.size(), 2, 1, rng);
    const Tensor before = emb.params().value("M_w");
    emb.load_words(vocab, load("a 1 2\nb 3 4\n"));
    const Tensor& mw = emb.params().value("M_w");
    EXPECT_EQ(mw(0, 1), 1.0);
    EXPECT_EQ(mw(1, 1), 2.0);
    EXPECT_EQ(mw(0, 0), 2.0);  // unk = mean
    EXPECT_EQ(mw(0, 2), before(0, 2));  // absent token keeps its random init
    emb.set_word_trainable(false);
    EXPECT_FALSE(emb.params().get("M_w").trainable);
    EXPECT_THROW(emb.load_words(vocab, load("a 1 2 3\n")), ConfigError);
}

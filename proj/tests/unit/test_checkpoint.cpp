#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <fstream>

#include "astral/checkpoint.hpp"
#include "astral/evaluate.hpp"
#include "astral/train.hpp"
#include "corpus.hpp"

using namespace astral;
using astral::testing::small_config;
using astral::testing::synthetic_split;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::path(::testing::TempDir()) / ("astral_" + name)).string();
}

std::string read_bytes(const std::string& path) { return read_text_file(path); }

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct Trained {
    astral::testing::Split data = synthetic_split();
    TrainResult result;
    Trained() {
        TrainConfig c = small_config();
        c.epochs = 2;
        result = train(c, data.train, data.dev);
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
    const Checkpoint& cp = trained().result.best;
    const std::string path = temp_path("roundtrip.ckpt");
    save_checkpoint(path, cp);
    const Checkpoint back = load_checkpoint(path);
    EXPECT_EQ(back, cp);
    ASSERT_EQ(back.tensors.size(), cp.tensors.size());
    for (std::size_t i = 0; i < cp.tensors.size(); ++i)
        for (std::size_t k = 0; k < cp.tensors[i].value.size(); ++k)
            EXPECT_EQ(std::bit_cast<std::uint64_t>(back.tensors[i].value[k]),
                      std::bit_cast<std::uint64_t>(cp.tensors[i].value[k]));
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const std::string a = temp_path("a.ckpt"), b = temp_path("b.ckpt");
    save_checkpoint(a, trained().result.best);
    save_checkpoint(b, load_checkpoint(a));
    EXPECT_EQ(read_bytes(a), read_bytes(b));
}

TEST(Checkpoint, StartsWithMagicAndVersion) {
    const std::string bytes = encode_checkpoint(trained().result.best);
    EXPECT_EQ(bytes.substr(0, 4), "ASTR");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kCheckpointVersion);
}

TEST(Checkpoint, CorruptByteIsChecksumError) {
    std::string bytes = encode_checkpoint(trained().result.best);
    bytes[bytes.size() / 2] ^= 0x20;
    EXPECT_THROW(decode_checkpoint(bytes), ChecksumError);
    const std::string path = temp_path("corrupt.ckpt");
    write_bytes(path, bytes);
    EXPECT_THROW(load_checkpoint(path), ChecksumError);
}

TEST(Checkpoint, TruncatedFileIsTruncatedError) {
    const std::string bytes = encode_checkpoint(trained().result.best);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 100)), TruncatedError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), TruncatedError);
}

TEST(Checkpoint, FutureVersionNamesBothVersions) {
    std::string bytes = encode_checkpoint(trained().result.best);
    bytes[4] = static_cast<char>(kCheckpointVersion + 1);
    const std::size_t body = bytes.size() - 4;
    bytes.resize(body);
    detail::put_u32(bytes, detail::crc32_of(bytes, body));
    try {
        decode_checkpoint(bytes);
        FAIL() << "expected VersionError";
    } catch (const VersionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find(std::to_string(kCheckpointVersion + 1)), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(kCheckpointVersion)), std::string::npos) << msg;
    }
}

TEST(Checkpoint, BadMagicIsFormatError) {
    std::string bytes = encode_checkpoint(trained().result.best);
    bytes[0] = 'X';
    const std::size_t body = bytes.size() - 4;
    bytes.resize(body);
    detail::put_u32(bytes, detail::crc32_of(bytes, body));
    EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, MissingFileIsDataError) {
    EXPECT_THROW(load_checkpoint(temp_path("does-not-exist.ckpt")), DataError);
}

TEST(Checkpoint, ReloadedModelKeepsDevF1) {
    const auto& t = trained();
    const std::string path = temp_path("f1.ckpt");
    save_checkpoint(path, t.result.best);
    auto original = build_model(t.result.best);
    auto reloaded = build_model(load_checkpoint(path));
    const double f1 = token_f1(*original, t.data.dev);
    EXPECT_EQ(token_f1(*reloaded, t.data.dev), f1);
    EXPECT_EQ(f1, t.result.best.best_dev_f1);
}

TEST(Checkpoint, RestoreRejectsMismatchedLayout) {
    const auto& t = trained();
    ModelConfig other = t.result.best.model;
    other.d_h += 1;
    Model m(other, t.data.train.vocab, t.data.train.tagset, 1);
    EXPECT_THROW(restore_into(m, t.result.best), FormatError);
}

TEST(Evaluate, TagsetMismatchIsDataError) {
    const auto& t = trained();
    auto m = build_model(t.result.best);
    const Corpus other = parse_conll("Paris B-GPE\n");
    EXPECT_THROW(evaluate(*m, other), DataError);
}

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "astral/model.hpp"

namespace astral {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'A', 'S', 'T', 'R'};

struct NamedTensor {
    std::string name;
    Tensor value;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Everything needed to rebuild a trained model, plus training bookkeeping.
struct Checkpoint {
    std::uint32_t format_version = kCheckpointVersion;
    ModelConfig model;
    nlohmann::json train_config = nlohmann::json::object();
    std::vector<std::string> vocab;  // by id, unk first
    std::vector<std::string> tags;   // by id
    std::vector<NamedTensor> tensors;
    std::uint64_t rng_state = 0;
    double best_dev_f1 = 0.0;
    std::size_t epoch = 0;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Snapshot of the model's parameter values (gradients are not kept).
inline Checkpoint capture(Model& model) {
    Checkpoint cp;
    cp.model = model.config();
    cp.vocab = model.vocab().tokens();
    cp.tags = model.tagset().tags();
    for (const auto& g : model.param_groups())
        for (const auto& e : g.params->entries()) cp.tensors.push_back({g.prefix + "." + e.name, e.value});
    return cp;
}

/// Copies checkpoint tensors into an existing model with the same layout.
inline void restore_into(Model& model, const Checkpoint& cp) {
    std::size_t k = 0;
    for (const auto& g : model.param_groups()) {
        for (auto& e : g.params->entries()) {
            const std::string name = g.prefix + "." + e.name;
            if (k >= cp.tensors.size() || cp.tensors[k].name != name)
                throw FormatError("checkpoint has no tensor '" + name + "' at position " + std::to_string(k));
            if (!cp.tensors[k].value.same_shape(e.value))
                throw FormatError("checkpoint tensor '" + name + "' has shape " + cp.tensors[k].value.shape_string() +
                                  ", model expects " + e.value.shape_string());
            e.value = cp.tensors[k].value;
            ++k;
        }
    }
    if (k != cp.tensors.size()) throw FormatError("checkpoint has unexpected extra tensors");
}

inline std::unique_ptr<Model> build_model(const Checkpoint& cp) {
    auto model = std::make_unique<Model>(cp.model, Vocab::from_tokens(cp.vocab), TagSet::from_ordered(cp.tags), 0);
    restore_into(*model, cp);
    return model;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}
inline std::uint32_t crc32_of(const std::string& bytes, std::size_t len) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(len)));
}

// magic + version + header length
inline constexpr std::size_t kPrefixSize = 4 + 4 + 8;
inline constexpr std::size_t kMinSize = kPrefixSize + 4;

/// Payload bytes the header's manifest promises, or 0 if unreadable.
inline std::size_t manifest_payload(const nlohmann::json& header) {
    std::size_t total = 0;
    for (const auto& t : header.at("tensors")) {
        std::size_t count = 1;
        for (const auto& d : t.at("shape")) count *= d.get<std::size_t>();
        total += 8 * count;
    }
    return total;
}

}  // namespace detail

/// Layout (little-endian): "ASTR", u32 version, u64 header length, UTF-8
/// JSON header, float64 payload in manifest order, u32 CRC-32 of all
/// preceding bytes.
inline std::string encode_checkpoint(const Checkpoint& cp) {
    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : cp.tensors) {
        manifest.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}});
        offset += 8 * t.value.size();
    }
    const nlohmann::json header = {{"model", cp.model},
                                   {"train", cp.train_config},
                                   {"vocab", cp.vocab},
                                   {"tags", cp.tags},
                                   {"tensors", manifest},
                                   {"rng_state", cp.rng_state},
                                   {"best_dev_f1", cp.best_dev_f1},
                                   {"epoch", cp.epoch}};
    const std::string text = header.dump();

    std::string out(kCheckpointMagic, 4);
    detail::put_u32(out, cp.format_version);
    detail::put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + offset + 4);
    for (const auto& t : cp.tensors)
        for (double v : t.value.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    detail::put_u32(out, detail::crc32_of(out, out.size()));
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < detail::kMinSize)
        throw TruncatedError("checkpoint is " + std::to_string(bytes.size()) + " bytes, too short to be valid");

    const std::size_t body = bytes.size() - 4;
    const auto stored_crc = static_cast<std::uint32_t>(detail::get_le(bytes, body, 4));
    if (detail::crc32_of(bytes, body) != stored_crc) {
        // A cut-off file fails the checksum too; tell the two apart when the
        // header is still readable.
        const std::uint64_t hlen = detail::get_le(bytes, 8, 8);
        if (detail::kPrefixSize + hlen > bytes.size()) throw TruncatedError("checkpoint header extends past end of file");
        try {
            const auto header = nlohmann::json::parse(bytes.substr(detail::kPrefixSize, hlen));
            if (detail::kPrefixSize + hlen + detail::manifest_payload(header) + 4 > bytes.size())
                throw TruncatedError("checkpoint payload is shorter than its manifest");
        } catch (const nlohmann::json::exception&) {
        }
        throw ChecksumError("checkpoint CRC-32 mismatch");
    }
    if (bytes.compare(0, 4, kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint file (bad magic)");
    const auto version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint format version " + std::to_string(version) +
                           " is not supported; this build reads version " + std::to_string(kCheckpointVersion));
    }
    const std::uint64_t hlen = detail::get_le(bytes, 8, 8);
    if (detail::kPrefixSize + hlen > body) throw FormatError("checkpoint header length exceeds file size");

    Checkpoint cp;
    try {
        const auto header = nlohmann::json::parse(bytes.substr(detail::kPrefixSize, hlen));
        cp.format_version = version;
        cp.model = header.at("model").get<ModelConfig>();
        cp.train_config = header.at("train");
        cp.vocab = header.at("vocab").get<std::vector<std::string>>();
        cp.tags = header.at("tags").get<std::vector<std::string>>();
        cp.rng_state = header.at("rng_state").get<std::uint64_t>();
        cp.best_dev_f1 = header.at("best_dev_f1").get<double>();
        cp.epoch = header.at("epoch").get<std::size_t>();
        const std::size_t payload_start = detail::kPrefixSize + hlen;
        if (payload_start + detail::manifest_payload(header) != body)
            throw FormatError("checkpoint payload size does not match its manifest");
        for (const auto& t : header.at("tensors")) {
            Tensor value(t.at("shape").get<Tensor::Shape>());
            std::size_t pos = payload_start + t.at("offset").get<std::size_t>();
            if (pos + 8 * value.size() > body) throw FormatError("tensor '" + t.at("name").get<std::string>() + "' out of bounds");
            for (std::size_t i = 0; i < value.size(); ++i, pos += 8)
                value[i] = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
            cp.tensors.push_back({t.at("name").get<std::string>(), std::move(value)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }
    return cp;
}

/// Writes through a temporary file and renames, so a failed save never
/// leaves a half-written checkpoint at `path`.
inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    const std::string bytes = encode_checkpoint(cp);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint: " + path);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("failed writing checkpoint: " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot move checkpoint into place: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace astral

#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astral/conll.hpp"
#include "astral/train.hpp"

namespace astral {

/// On-disk run configuration: one flat JSON object.
struct RunConfig {
    std::string train_file;
    std::string dev_file;
    std::string test_file;
    std::string embeddings_file;
    std::string checkpoint;  // empty = <output_dir>/model.ckpt
    std::string output_dir = "astral-out";
    ConllOptions conll;
    TrainConfig train;

    std::string checkpoint_path() const { return checkpoint.empty() ? output_dir + "/model.ckpt" : checkpoint; }
};

struct ConfigKey {
    std::string name;
    std::string help;
};

/// Every accepted key, in documentation order.
inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        {"train_file", "training corpus (CoNLL columns)"},
        {"dev_file", "development corpus used for early stopping"},
        {"test_file", "held-out corpus for eval"},
        {"embeddings_file", "pretrained word vectors, text format (optional)"},
        {"checkpoint", "checkpoint path (empty: <output_dir>/model.ckpt)"},
        {"output_dir", "directory for logs, curves and metrics"},
        {"token_col", "0-based token column"},
        {"tag_col", "tag column; negative counts from the end"},
        {"min_count", "minimum frequency for a training token to enter the vocabulary"},
        {"d_w", "word embedding width"},
        {"d_f", "feature embedding width"},
        {"d_h", "LSTM hidden width per direction"},
        {"window", "convolution window (odd)"},
        {"n_o", "convolution channels (null: input width)"},
        {"d_g", "GLU output width (null: input width)"},
        {"use_gc", "insert the two gated CNN blocks"},
        {"use_at", "adversarial training"},
        {"iob_constraints", "forbid invalid IOB transitions in the CRF"},
        {"finetune_embeddings", "keep training pretrained word vectors"},
        {"epochs", "maximum number of epochs"},
        {"learning_rate", "initial SGD step size"},
        {"lr_decay", "inverse-time decay: lr / (1 + decay * epoch)"},
        {"momentum", "SGD momentum"},
        {"clip_norm", "global gradient-norm clip (0: off)"},
        {"seed", "random seed (ASTRAL_SEED overrides)"},
        {"early_stop_patience", "evaluations without dev improvement before stopping (0: off)"},
        {"eval_every", "evaluate every this many epochs"},
        {"epsilon", "adversarial perturbation scale"},
        {"adv_targets", "perturbed variables: E_prime, H_prime"},
        {"norm_floor", "gradient norm at or below which no perturbation is applied"},
    };
    return keys;
}

inline nlohmann::json to_json(const RunConfig& c) {
    const auto& m = c.train.model;
    nlohmann::json j;
    j["train_file"] = c.train_file;
    j["dev_file"] = c.dev_file;
    j["test_file"] = c.test_file;
    j["embeddings_file"] = c.embeddings_file;
    j["checkpoint"] = c.checkpoint;
    j["output_dir"] = c.output_dir;
    j["token_col"] = c.conll.token_col;
    j["tag_col"] = c.conll.tag_col;
    j["min_count"] = c.conll.min_count;
    j["d_w"] = m.d_w;
    j["d_f"] = m.d_f;
    j["d_h"] = m.d_h;
    j["window"] = m.window;
    j["n_o"] = m.n_o ? nlohmann::json(*m.n_o) : nlohmann::json(nullptr);
    j["d_g"] = m.d_g ? nlohmann::json(*m.d_g) : nlohmann::json(nullptr);
    j["use_gc"] = m.use_gc;
    j["use_at"] = c.train.use_at;
    j["iob_constraints"] = m.iob_constraints;
    j["finetune_embeddings"] = m.finetune_embeddings;
    j["epochs"] = c.train.epochs;
    j["learning_rate"] = c.train.learning_rate;
    j["lr_decay"] = c.train.lr_decay;
    j["momentum"] = c.train.momentum;
    j["clip_norm"] = c.train.clip_norm;
    j["seed"] = c.train.seed;
    j["early_stop_patience"] = c.train.early_stop_patience;
    j["eval_every"] = c.train.eval_every;
    j["epsilon"] = c.train.adv.epsilon;
    j["adv_targets"] = c.train.adv.targets;
    j["norm_floor"] = c.train.adv.norm_floor;
    return j;
}

namespace detail {

template <class T>
T config_value(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type: " + j.dump());
    }
}

inline std::optional<std::size_t> optional_size(const nlohmann::json& j, const std::string& key) {
    if (j.is_null()) return std::nullopt;
    return config_value<std::size_t>(j, key);
}

inline std::size_t non_negative(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ConfigError("config key '" + key + "' must be a non-negative integer, got " + j.dump());
    return j.get<std::size_t>();
}

}  // namespace detail

/// Strict parse: every key must be known; missing keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const auto& keys = config_keys();
    for (const auto& [k, v] : j.items()) {
        const bool known = std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& c) { return c.name == k; });
        if (!known) throw ConfigError("unknown config key '" + k + "'");
    }
    nlohmann::json merged = to_json(RunConfig{});
    for (const auto& [k, v] : j.items()) merged[k] = v;

    using detail::config_value;
    using detail::non_negative;
    RunConfig c;
    auto& m = c.train.model;
    c.train_file = config_value<std::string>(merged["train_file"], "train_file");
    c.dev_file = config_value<std::string>(merged["dev_file"], "dev_file");
    c.test_file = config_value<std::string>(merged["test_file"], "test_file");
    c.embeddings_file = config_value<std::string>(merged["embeddings_file"], "embeddings_file");
    c.checkpoint = config_value<std::string>(merged["checkpoint"], "checkpoint");
    c.output_dir = config_value<std::string>(merged["output_dir"], "output_dir");
    c.conll.token_col = non_negative(merged["token_col"], "token_col");
    c.conll.tag_col = config_value<int>(merged["tag_col"], "tag_col");
    c.conll.min_count = non_negative(merged["min_count"], "min_count");
    m.d_w = non_negative(merged["d_w"], "d_w");
    m.d_f = non_negative(merged["d_f"], "d_f");
    m.d_h = non_negative(merged["d_h"], "d_h");
    m.window = non_negative(merged["window"], "window");
    m.n_o = merged["n_o"].is_null() ? std::nullopt : std::optional(non_negative(merged["n_o"], "n_o"));
    m.d_g = merged["d_g"].is_null() ? std::nullopt : std::optional(non_negative(merged["d_g"], "d_g"));
    m.use_gc = config_value<bool>(merged["use_gc"], "use_gc");
    c.train.use_at = config_value<bool>(merged["use_at"], "use_at");
    m.iob_constraints = config_value<bool>(merged["iob_constraints"], "iob_constraints");
    m.finetune_embeddings = config_value<bool>(merged["finetune_embeddings"], "finetune_embeddings");
    c.train.epochs = non_negative(merged["epochs"], "epochs");
    c.train.learning_rate = config_value<double>(merged["learning_rate"], "learning_rate");
    c.train.lr_decay = config_value<double>(merged["lr_decay"], "lr_decay");
    c.train.momentum = config_value<double>(merged["momentum"], "momentum");
    c.train.clip_norm = config_value<double>(merged["clip_norm"], "clip_norm");
    c.train.seed = config_value<std::uint64_t>(merged["seed"], "seed");
    c.train.early_stop_patience = non_negative(merged["early_stop_patience"], "early_stop_patience");
    c.train.eval_every = non_negative(merged["eval_every"], "eval_every");
    c.train.adv.epsilon = config_value<double>(merged["epsilon"], "epsilon");
    if (merged["adv_targets"].is_string()) {
        c.train.adv.targets.clear();
        std::stringstream ss(merged["adv_targets"].get<std::string>());
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) c.train.adv.targets.push_back(item);
    } else {
        c.train.adv.targets = config_value<std::vector<std::string>>(merged["adv_targets"], "adv_targets");
    }
    c.train.adv.norm_floor = config_value<double>(merged["norm_floor"], "norm_floor");
    if (c.conll.min_count == 0) throw ConfigError("min_count must be at least 1");
    c.train.validate();
    return c;
}

inline nlohmann::json read_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

/// Applies "key=value" overrides. The value is read as JSON when it parses
/// (numbers, true/false, null, arrays) and as a plain string otherwise.
inline void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not of the form key=value");
        const std::string key = o.substr(0, eq), text = o.substr(eq + 1);
        auto v = nlohmann::json::parse(text, nullptr, false);
        j[key] = v.is_discarded() ? nlohmann::json(text) : v;
    }
}

/// ASTRAL_SEED, when set, replaces the seed.
inline void apply_seed_env(nlohmann::json& j) {
    const char* env = std::getenv("ASTRAL_SEED");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || env[0] == '-') throw ConfigError(std::string("ASTRAL_SEED is not a non-negative integer: ") + env);
    j["seed"] = v;
}

/// Defaults as pretty JSON, in documentation order.
inline std::string defaults_text() {
    const auto j = to_json(RunConfig{});
    std::ostringstream os;
    os << "{\n";
    const auto& keys = config_keys();
    for (std::size_t i = 0; i < keys.size(); ++i)
        os << "  \"" << keys[i].name << "\": " << j.at(keys[i].name).dump() << (i + 1 < keys.size() ? "," : "") << '\n';
    os << "}\n";
    return os.str();
}

/// Key / default / description table for --help.
inline std::string config_help_text() {
    const auto j = to_json(RunConfig{});
    std::ostringstream os;
    os << "Config keys (JSON file and --set key=value):\n";
    for (const auto& k : config_keys()) {
        os << "  " << std::left << std::setw(22) << k.name << std::setw(24) << j.at(k.name).dump() << k.help << '\n';
    }
    return os.str();
}

}  // namespace astral

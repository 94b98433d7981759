#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astral/adversarial.hpp"
#include "astral/checkpoint.hpp"
#include "astral/evaluate.hpp"
#include "astral/optimizer.hpp"

namespace astral {

struct TrainConfig {
    ModelConfig model;
    std::size_t epochs = 50;
    double learning_rate = 0.1;
    double lr_decay = 0.05;
    double momentum = 0.9;
    double clip_norm = 5.0;
    std::uint64_t seed = 42;
    std::size_t early_stop_patience = 10;  // evaluations; 0 disables
    std::size_t eval_every = 1;
    bool use_at = true;
    AdvConfig adv;

    void validate() const {
        model.validate();
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
        if (!(lr_decay >= 0.0)) throw ConfigError("lr_decay must be >= 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
        if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
        if (eval_every == 0) throw ConfigError("eval_every must be positive");
        if (use_at) {
            if (adv.targets.empty()) throw ConfigError("adversarial training enabled with no target variables");
            for (const auto& t : adv.targets)
                if (t != "E_prime" && t != "H_prime")
                    throw ConfigError("unknown adversarial target '" + t + "'; valid targets: E_prime, H_prime");
            if (!(adv.epsilon >= 0.0) || !std::isfinite(adv.epsilon)) throw ConfigError("epsilon must be >= 0");
        }
    }

    /// Ablation label of the (use_gc, use_at) combination.
    std::string condition() const {
        if (model.use_gc) return use_at ? "ATGC" : "GC";
        return use_at ? "AT" : "Basic";
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"model", c.model},
         {"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"lr_decay", c.lr_decay},
         {"momentum", c.momentum},
         {"clip_norm", c.clip_norm},
         {"seed", c.seed},
         {"early_stop_patience", c.early_stop_patience},
         {"eval_every", c.eval_every},
         {"use_at", c.use_at},
         {"adv", {{"epsilon", c.adv.epsilon}, {"targets", c.adv.targets}, {"norm_floor", c.adv.norm_floor}}}};
}

/// Learning rate for a 0-based epoch: lr0 / (1 + decay * epoch).
inline double epoch_learning_rate(const TrainConfig& c, std::size_t epoch) {
    return c.learning_rate / (1.0 + c.lr_decay * static_cast<double>(epoch));
}

struct AdvEpochStats {
    double loss_adv = 0.0;  // mean per token
    std::map<std::string, double> r_adv_norm;  // mean per step
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;  // primal loss, mean per token
    std::optional<double> train_f1;
    std::optional<double> dev_f1;
    double learning_rate = 0.0;
    std::optional<AdvEpochStats> adv;
    double wall_time = 0.0;  // seconds; not written to logs or curves
};

enum class TrainStatus { completed, early_stopped, stopped, aborted };

inline std::string to_string(TrainStatus s) {
    switch (s) {
        case TrainStatus::completed: return "completed";
        case TrainStatus::early_stopped: return "early_stopped";
        case TrainStatus::stopped: return "stopped";
        case TrainStatus::aborted: return "aborted";
    }
    return "unknown";
}

struct TrainResult {
    Checkpoint best;  // best dev F1 so far, or the last good state
    std::vector<EpochRecord> epochs;
    TrainStatus status = TrainStatus::completed;
    std::string message;
    std::size_t plain_steps = 0;
    std::size_t adversarial_steps = 0;
    std::unique_ptr<Model> model;  // parameters at the end of training
};

struct TrainOptions {
    const PretrainedEmbeddings* pretrained = nullptr;
    std::ostream* log = nullptr;  // JSON lines
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<bool(const EpochRecord&)> stop_when;  // checked after each epoch
};

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json epoch_log_json(const EpochRecord& r) {
    return {{"type", "epoch"},
            {"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"train_f1", optional_json(r.train_f1)},
            {"dev_f1", optional_json(r.dev_f1)},
            {"learning_rate", r.learning_rate}};
}

inline nlohmann::json adv_log_json(const EpochRecord& r) {
    return {{"type", "adversarial"}, {"epoch", r.epoch}, {"loss_adv", r.adv->loss_adv}, {"r_adv_norm", r.adv->r_adv_norm}};
}

/// CSV with one row per epoch: epoch,train_loss,train_f1,dev_f1. Epochs
/// without an evaluation leave the F1 cells empty.
inline void write_curves(std::ostream& out, const std::vector<EpochRecord>& records) {
    out << "epoch,train_loss,train_f1,dev_f1\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) out << std::setprecision(17) << *v;
    };
    for (const auto& r : records) {
        out << r.epoch << ',' << std::setprecision(17) << r.train_loss << ',';
        cell(r.train_f1);
        out << ',';
        cell(r.dev_f1);
        out << '\n';
    }
}

/// Per-sentence SGD training with optional adversarial steps, dev
/// evaluation every eval_every epochs and early stopping on dev token F1.
inline TrainResult train(const TrainConfig& config, const Corpus& train_corpus, const Corpus& dev_corpus,
                         const TrainOptions& options = {}) {
    config.validate();
    if (train_corpus.sentences.empty()) throw DataError("training corpus is empty");
    if (dev_corpus.sentences.empty()) throw DataError("dev corpus is empty");
    if (!(dev_corpus.tagset == train_corpus.tagset)) throw DataError("train and dev corpora have different tag sets");

    TrainResult result;
    result.model = std::make_unique<Model>(config.model, train_corpus.vocab, train_corpus.tagset, config.seed);
    Model& model = *result.model;
    if (options.pretrained) model.use_pretrained(*options.pretrained);
    Rng order_rng(config.seed ^ 0x5851F42D4C957F2DULL);
    SgdMomentum sgd(config.momentum, config.clip_norm);

    auto snapshot = [&](double best_f1, std::size_t epoch) {
        Checkpoint cp = capture(model);
        cp.train_config = config;
        cp.rng_state = order_rng.state();
        cp.best_dev_f1 = best_f1;
        cp.epoch = epoch;
        return cp;
    };

    result.best = snapshot(0.0, 0);
    bool have_best = false;
    double best_f1 = -1.0;
    std::size_t stale = 0;
    std::vector<std::size_t> order(train_corpus.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const double tokens = static_cast<double>(train_corpus.token_count());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.learning_rate = epoch_learning_rate(config, epoch);
        order_rng.shuffle(order);

        double loss_sum = 0.0, adv_sum = 0.0;
        std::map<std::string, double> r_sums;
        try {
            for (auto idx : order) {
                const Sentence& s = train_corpus.sentences[idx];
                model.zero_grads();
                if (config.use_at) {
                    const auto step = adversarial_step(model, s, config.adv);
                    ++result.adversarial_steps;
                    loss_sum += step.loss_primal;
                    adv_sum += step.loss_adv;
                    for (const auto& [k, v] : step.r_adv_norm) r_sums[k] += v;
                } else {
                    loss_sum += plain_step(model, s);
                    ++result.plain_steps;
                }
                const double gn = gradient_norm(model.param_groups());
                if (!std::isfinite(gn)) throw NumericError("gradient norm is not finite in epoch " + std::to_string(rec.epoch));
                sgd.step(model, rec.learning_rate);
            }
        } catch (const NumericError& e) {
            result.status = TrainStatus::aborted;
            result.message = e.what();
            return result;
        }
        rec.train_loss = loss_sum / tokens;
        if (config.use_at) {
            AdvEpochStats stats;
            stats.loss_adv = adv_sum / tokens;
            for (const auto& [k, v] : r_sums) stats.r_adv_norm[k] = v / static_cast<double>(order.size());
            rec.adv = stats;
        }

        bool stop = false;
        if ((epoch + 1) % config.eval_every == 0) {
            rec.train_f1 = token_f1(model, train_corpus);
            rec.dev_f1 = token_f1(model, dev_corpus);
            if (*rec.dev_f1 > best_f1) {
                best_f1 = *rec.dev_f1;
                result.best = snapshot(best_f1, rec.epoch);
                have_best = true;
                stale = 0;
            } else if (config.early_stop_patience > 0 && ++stale >= config.early_stop_patience) {
                stop = true;
            }
        }
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (options.log) {
            *options.log << epoch_log_json(rec).dump() << '\n';
            if (rec.adv) *options.log << adv_log_json(rec).dump() << '\n';
        }
        if (options.on_epoch) options.on_epoch(rec);
        result.epochs.push_back(std::move(rec));
        if (!stop && options.stop_when && options.stop_when(result.epochs.back())) {
            result.status = TrainStatus::stopped;
            break;
        }
        if (stop) {
            result.status = TrainStatus::early_stopped;
            break;
        }
    }
    if (!have_best) result.best = snapshot(0.0, result.epochs.size());
    return result;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

/// FNV-1a over the canonical JSON form of a config.
inline std::string config_hash(const TrainConfig& c) {
    const std::string text = nlohmann::json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

struct AblationRow {
    std::string label;
    bool use_gc = false;
    bool use_at = false;
    double best_dev_f1 = 0.0;
    double final_train_f1 = 0.0;
    std::size_t epochs_run = 0;
    TrainStatus status = TrainStatus::completed;
    std::string config_hash;
    nlohmann::json config;
};

struct AblationReport {
    std::vector<AblationRow> rows;

    std::string to_text() const {
        std::ostringstream os;
        os << std::left << std::setw(8) << "model" << std::right << std::setw(12) << "dev_f1" << std::setw(12)
           << "train_f1" << std::setw(8) << "epochs" << "  config\n";
        for (const auto& r : rows) {
            os << std::left << std::setw(8) << r.label << std::right << std::fixed << std::setprecision(4)
               << std::setw(12) << r.best_dev_f1 << std::setw(12) << r.final_train_f1 << std::setw(8) << r.epochs_run
               << "  " << r.config_hash << (r.status == TrainStatus::aborted ? "  (aborted)" : "") << '\n';
        }
        return os.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json rows_json = nlohmann::json::array();
        for (const auto& r : rows) {
            rows_json.push_back({{"model", r.label},
                                 {"use_gc", r.use_gc},
                                 {"use_at", r.use_at},
                                 {"best_dev_f1", r.best_dev_f1},
                                 {"final_train_f1", r.final_train_f1},
                                 {"epochs", r.epochs_run},
                                 {"status", to_string(r.status)},
                                 {"config_hash", r.config_hash}});
        }
        return {{"rows", rows_json}};
    }
};

/// Trains the four (use_gc, use_at) combinations from the same base config
/// and seed: Basic, GC, AT, ATGC.
inline AblationReport ablation_run(const TrainConfig& base, const Corpus& train_corpus, const Corpus& dev_corpus,
                                   const TrainOptions& options = {}) {
    AblationReport report;
    for (const auto& [gc, at] : {std::pair{false, false}, std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
        TrainConfig c = base;
        c.model.use_gc = gc;
        c.use_at = at;
        TrainOptions opt = options;
        opt.log = nullptr;
        const auto result = train(c, train_corpus, dev_corpus, opt);
        AblationRow row;
        row.label = c.condition();
        row.use_gc = gc;
        row.use_at = at;
        row.best_dev_f1 = result.best.best_dev_f1;
        for (auto it = result.epochs.rbegin(); it != result.epochs.rend(); ++it) {
            if (it->train_f1) {
                row.final_train_f1 = *it->train_f1;
                break;
            }
        }
        row.epochs_run = result.epochs.size();
        row.status = result.status;
        row.config_hash = config_hash(c);
        row.config = c;
        if (options.log) {
            *options.log << nlohmann::json{{"type", "ablation"}, {"model", row.label}, {"best_dev_f1", row.best_dev_f1},
                                           {"status", to_string(row.status)}}
                                .dump()
                         << '\n';
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace astral

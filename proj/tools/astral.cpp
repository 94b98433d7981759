// Command-line front end: train, tag, eval, ablate, stats, gradcheck, config, synth.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "astral/astral.hpp"

namespace fs = std::filesystem;
using namespace astral;

namespace {

enum Exit : int { kOk = 0, kConfigError = 1, kDataError = 2, kNumericError = 3 };

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", path, "JSON config file");
        cmd->add_option("-s,--set", overrides, "override a config key, key=value (repeatable)");
    }

    RunConfig load() const {
        nlohmann::json j = path.empty() ? nlohmann::json::object() : read_config_json(path);
        apply_seed_env(j);
        apply_overrides(j, overrides);
        return run_config_from_json(j);
    }
};

struct Corpora {
    Corpus train;
    Corpus dev;
};

Corpora read_corpora(const RunConfig& cfg) {
    if (cfg.train_file.empty()) throw ConfigError("train_file is not set");
    if (cfg.dev_file.empty()) throw ConfigError("dev_file is not set");
    Corpora c;
    try {
        c.train = parse_conll(read_text_file(cfg.train_file), cfg.conll);
    } catch (const ParseError& e) {
        throw DataError(cfg.train_file + ": " + e.what());
    }
    try {
        c.dev = parse_conll(read_text_file(cfg.dev_file), cfg.conll, c.train.vocab, c.train.tagset);
    } catch (const DataError& e) {
        throw DataError(cfg.dev_file + ": " + e.what());
    }
    return c;
}

std::optional<PretrainedEmbeddings> read_embeddings(const RunConfig& cfg) {
    if (cfg.embeddings_file.empty()) return std::nullopt;
    try {
        return load_pretrained(cfg.embeddings_file);
    } catch (const FormatError& e) {
        throw DataError(cfg.embeddings_file + ": " + e.what());
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

int cmd_train(const ConfigArgs& args) {
    const RunConfig cfg = args.load();
    const Corpora data = read_corpora(cfg);
    const auto pretrained = read_embeddings(cfg);
    ensure_dir(cfg.output_dir);

    auto log = open_output(cfg.output_dir + "/train_log.jsonl");
    TrainOptions opt;
    opt.log = &log;
    opt.pretrained = pretrained ? &*pretrained : nullptr;
    opt.on_epoch = [](const EpochRecord& r) {
        std::cerr << "epoch " << r.epoch << "  loss " << r.train_loss;
        if (r.dev_f1) std::cerr << "  train_f1 " << *r.train_f1 << "  dev_f1 " << *r.dev_f1;
        std::cerr << '\n';
    };
    const TrainResult result = train(cfg.train, data.train, data.dev, opt);

    auto curves = open_output(cfg.output_dir + "/curves.csv");
    write_curves(curves, result.epochs);
    save_checkpoint(cfg.checkpoint_path(), result.best);

    if (result.status == TrainStatus::aborted) {
        std::cerr << "training aborted: " << result.message << "\nlast good checkpoint written to "
                  << cfg.checkpoint_path() << '\n';
        return kNumericError;
    }
    std::cout << "condition " << cfg.train.condition() << ", " << result.epochs.size() << " epochs ("
              << to_string(result.status) << "), best dev token F1 " << result.best.best_dev_f1 << " at epoch "
              << result.best.epoch << "\ncheckpoint: " << cfg.checkpoint_path() << '\n';
    return kOk;
}

int cmd_tag(const std::string& checkpoint, const std::string& input, const std::string& output) {
    auto model = build_model(load_checkpoint(checkpoint));
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!input.empty() && input != "-") {
        file.open(input);
        if (!file) throw DataError("cannot read input: " + input);
        in = &file;
    }
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!output.empty() && output != "-") {
        out_file = open_output(output);
        out = &out_file;
    }
    std::string line;
    std::size_t lineno = 0, written = 0;
    while (std::getline(*in, line)) {
        ++lineno;
        auto tokens = detail::split_ws(line);
        if (tokens.empty()) {
            std::cerr << "warning: line " << lineno << " is empty, skipped\n";
            continue;
        }
        const Sentence s = make_sentence(tokens, model->vocab());
        const auto tags = tag_strings(model->decode(s).tags, model->tagset());
        if (written++) *out << '\n';
        for (std::size_t i = 0; i < tokens.size(); ++i) *out << tokens[i] << '\t' << tags[i] << '\n';
    }
    return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& gold_path, const std::string& metrics_path,
             const ConllOptions& conll) {
    auto model = build_model(load_checkpoint(checkpoint));
    Corpus gold;
    try {
        gold = parse_conll(read_text_file(gold_path), conll, model->vocab(), model->tagset());
    } catch (const DataError& e) {
        throw DataError(gold_path + ": " + e.what());
    }
    const Evaluation ev = evaluate(*model, gold);
    std::cout << "token level\n" << per_type_report(ev.token) << "\nentity level\n" << per_type_report(ev.entity);
    if (!metrics_path.empty()) {
        auto out = open_output(metrics_path);
        out << nlohmann::json{{"token", to_json(ev.token)}, {"entity", to_json(ev.entity)}}.dump(2) << '\n';
    }
    return kOk;
}

int cmd_ablate(const ConfigArgs& args) {
    const RunConfig cfg = args.load();
    const Corpora data = read_corpora(cfg);
    const auto pretrained = read_embeddings(cfg);
    ensure_dir(cfg.output_dir);
    TrainOptions opt;
    opt.pretrained = pretrained ? &*pretrained : nullptr;
    const AblationReport report = ablation_run(cfg.train, data.train, data.dev, opt);
    std::cout << report.to_text();
    auto out = open_output(cfg.output_dir + "/ablation.json");
    out << report.to_json().dump(2) << '\n';
    for (const auto& r : report.rows)
        if (r.status == TrainStatus::aborted) return kNumericError;
    return kOk;
}

int cmd_stats(const std::string& path, const ConllOptions& conll, bool as_json) {
    Corpus corpus;
    try {
        corpus = parse_conll(read_text_file(path), conll);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
    const StatsReport report = corpus_stats(corpus);
    std::cout << (as_json ? report.to_json().dump(2) + "\n" : report.to_text());
    return kOk;
}

int cmd_gradcheck(std::size_t seeds) {
    const auto results = run_gradcheck_suite(seeds);
    std::map<std::string, std::pair<double, bool>> per_layer;
    std::vector<std::string> order;
    for (const auto& r : results) {
        auto [it, inserted] = per_layer.try_emplace(r.layer, 0.0, true);
        if (inserted) order.push_back(r.layer);
        it->second.first = std::max(it->second.first, r.report.max_rel_error);
        it->second.second = it->second.second && r.report.passed();
    }
    bool ok = true;
    for (const auto& name : order) {
        const auto& [err, passed] = per_layer[name];
        ok = ok && passed;
        std::cout << (passed ? "pass  " : "FAIL  ") << std::left << std::setw(12) << name << " max rel error "
                  << std::scientific << std::setprecision(3) << err << '\n';
    }
    return ok ? kOk : kNumericError;
}

int cmd_synth(std::size_t count, std::uint64_t seed, std::size_t split, const std::string& train_path,
              const std::string& dev_path) {
    const auto sentences = synthetic::generate(count, seed);
    if (dev_path.empty()) {
        auto out = open_output(train_path);
        out << synthetic::to_conll(sentences);
        return kOk;
    }
    if (split == 0 || split >= count) throw ConfigError("--split must be between 1 and count - 1");
    auto train_out = open_output(train_path);
    train_out << synthetic::to_conll({sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(split)});
    auto dev_out = open_output(dev_path);
    dev_out << synthetic::to_conll({sentences.begin() + static_cast<std::ptrdiff_t>(split), sentences.end()});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Named entity tagger: gated CNN + Bi-LSTM + CRF with adversarial training.", "astral"};
    app.require_subcommand(1);
    app.footer("\n" + config_help_text() +
               "\nExit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.");

    ConfigArgs train_args, ablate_args;
    auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, log and curves");
    train_args.attach(train_cmd);

    std::string tag_ckpt, tag_in, tag_out;
    auto* tag_cmd = app.add_subcommand("tag", "tag one whitespace-tokenized sentence per line");
    tag_cmd->add_option("-m,--checkpoint", tag_ckpt, "model checkpoint")->required();
    tag_cmd->add_option("-i,--input", tag_in, "input text (default: stdin)");
    tag_cmd->add_option("-o,--output", tag_out, "output file (default: stdout)");

    std::string eval_ckpt, eval_gold, eval_out;
    ConllOptions eval_conll;
    auto* eval_cmd = app.add_subcommand("eval", "token- and entity-level precision, recall and F1");
    eval_cmd->add_option("-m,--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("-g,--gold", eval_gold, "gold corpus")->required();
    eval_cmd->add_option("-o,--metrics", eval_out, "metrics JSON output file");
    eval_cmd->add_option("--token-col", eval_conll.token_col, "token column");
    eval_cmd->add_option("--tag-col", eval_conll.tag_col, "tag column (negative: from the end)");

    auto* ablate_cmd = app.add_subcommand("ablate", "train Basic, GC, AT and ATGC and report dev F1");
    ablate_args.attach(ablate_cmd);

    std::string stats_path;
    bool stats_json = false;
    ConllOptions stats_conll;
    auto* stats_cmd = app.add_subcommand("stats", "corpus statistics");
    stats_cmd->add_option("corpus", stats_path, "CoNLL corpus")->required();
    stats_cmd->add_flag("--json", stats_json, "print JSON");
    stats_cmd->add_option("--token-col", stats_conll.token_col, "token column");
    stats_cmd->add_option("--tag-col", stats_conll.tag_col, "tag column (negative: from the end)");

    std::size_t gc_seeds = 5;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every layer type");
    gc_cmd->add_option("--seeds", gc_seeds, "random instances per layer");

    bool show_defaults = false;
    ConfigArgs check_args;
    auto* config_cmd = app.add_subcommand("config", "print default or effective configuration");
    config_cmd->add_flag("--defaults", show_defaults, "print every key with its default");
    check_args.attach(config_cmd);

    std::size_t synth_count = synthetic::kDefaultSize, synth_split = 40;
    std::uint64_t synth_seed = synthetic::kDefaultSeed;
    std::string synth_train, synth_dev;
    auto* synth_cmd = app.add_subcommand("synth", "write the synthetic template corpus");
    synth_cmd->add_option("--count", synth_count, "number of sentences");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_option("--split", synth_split, "sentences written to the train file when --dev is given");
    synth_cmd->add_option("--train", synth_train, "output file")->required();
    synth_cmd->add_option("--dev", synth_dev, "second output file for the remaining sentences");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*train_cmd) return cmd_train(train_args);
        if (*tag_cmd) return cmd_tag(tag_ckpt, tag_in, tag_out);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_gold, eval_out, eval_conll);
        if (*ablate_cmd) return cmd_ablate(ablate_args);
        if (*stats_cmd) return cmd_stats(stats_path, stats_conll, stats_json);
        if (*gc_cmd) return cmd_gradcheck(gc_seeds);
        if (*synth_cmd) return cmd_synth(synth_count, synth_seed, synth_split, synth_train, synth_dev);
        if (*config_cmd) {
            if (show_defaults) {
                std::cout << defaults_text();
            } else {
                std::cout << to_json(check_args.load()).dump(2) << '\n';
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

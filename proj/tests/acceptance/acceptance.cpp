// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "astral/astral.hpp"
#include "corpus.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace astral;
using namespace astral::testing;

namespace {

std::string data_path(const std::string& name) { return std::string(ASTRAL_TEST_DATA) + "/" + name; }

// Collects failed sub-checks; the first few are printed under the criterion.
struct Check {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void note(const std::string& s) { notes.push_back(s); }
};

template <class... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    os.precision(6);
    (os << ... << args);
    return os.str();
}

int failed_criteria = 0;

void criterion(int id, const std::string& title, double budget_seconds, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0 && secs > budget_seconds)
        c.failures.push_back(str("runtime ", secs, " s exceeds ", budget_seconds, " s"));
    const bool ok = c.failures.empty();
    if (!ok) ++failed_criteria;
    std::printf("criterion %d: %s  %s (%.1f s)\n", id, ok ? "PASS" : "FAIL", title.c_str(), secs);
    for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
    for (std::size_t i = 0; i < c.failures.size() && i < 10; ++i) std::printf("    fail: %s\n", c.failures[i].c_str());
    if (c.failures.size() > 10) std::printf("    ... %zu more failures\n", c.failures.size() - 10);
    std::fflush(stdout);
}

Tensor random(const Tensor::Shape& shape, Rng& rng, double scale = 1.0) {
    return init(shape, InitScheme::uniform, rng, -scale, scale);
}

std::vector<Tensor> values(Model& m) {
    std::vector<Tensor> out;
    for (auto& g : m.param_groups())
        for (const auto& e : g.params->entries()) out.push_back(e.value);
    return out;
}

std::vector<Tensor> grads(Model& m) {
    std::vector<Tensor> out;
    for (auto& g : m.param_groups())
        for (const auto& e : g.params->entries()) out.push_back(e.grad);
    return out;
}

struct Tiny {
    Vocab vocab;
    TagSet tags{std::vector<std::string>{"B-PER", "I-PER"}};
    Sentence sentence;

    Tiny() {
        for (const char* t : {"Anna", "Smith", "sings", "loudly"}) vocab.add(t);
        sentence = make_sentence({"Anna", "Smith", "sings"}, vocab);
        sentence.gold_tags = std::vector<std::size_t>{tags.id("B-PER"), tags.id("I-PER"), tags.id("O")};
    }

    std::unique_ptr<Model> model(std::uint64_t seed) const {
        ModelConfig c;
        c.d_w = 4;
        c.d_f = 2;
        c.d_h = 3;
        return std::make_unique<Model>(c, vocab, tags, seed);
    }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------

void gradients(Check& c) {
    const auto results = run_gradcheck_suite(5, 1, 1e-5, 1e-4);
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& r : results) {
        worst = std::max(worst, r.report.max_rel_error);
        checked += r.report.checked;
        c.expect(r.report.passed(), str(r.layer, " seed ", r.seed, " max rel error ", r.report.max_rel_error));
    }
    c.note(str(results.size(), " layer instances, ", checked, " coordinates, worst relative error ", worst));
}

void crf_exactness(Check& c) {
    Rng rng(2024);
    std::size_t instances = 0;
    double worst = 0.0;
    for (std::size_t rep = 0; rep < 5; ++rep) {
        for (std::size_t n = 1; n <= 5; ++n) {
            for (std::size_t L = 1; L <= 4; ++L) {
                Crf crf(L);
                for (auto& p : crf.params().entries()) p.value = random(p.value.shape(), rng, 2.0);
                const Tensor e = random({n, L}, rng, 3.0);
                std::vector<std::size_t> gold(n);
                for (auto& g : gold) g = rng.below(L);
                const std::string tag = str("n=", n, " L=", L, " rep=", rep);

                const double log_z = brute_log_z(crf, e);
                const double dz = std::abs(crf.log_partition(e) - log_z);
                const double brute_nll = log_z - crf.path_score(e, gold);
                const double dn = std::abs(crf.nll(e, gold) - brute_nll);
                worst = std::max({worst, dz, dn});
                c.expect(dz <= 1e-8, tag + str(" log Z off by ", dz));
                c.expect(dn <= 1e-8, tag + str(" nll off by ", dn));

                const Tensor m = crf.marginals(e), bm = brute_marginals(crf, e);
                for (std::size_t i = 0; i < m.size(); ++i) {
                    const double dl = std::abs(std::log(m[i]) - std::log(bm[i]));
                    worst = std::max(worst, dl);
                    c.expect(dl <= 1e-8, tag + str(" log marginal ", i, " off by ", dl));
                }

                const auto d = crf.viterbi(e);
                c.expect(d.tags == brute_argmax(crf, e), tag + " viterbi path differs from brute force");
                c.expect(std::abs(d.score - crf.path_score(e, d.tags)) <= 1e-12, tag + " viterbi score");
                ++instances;
            }
        }
    }
    // Every score equal: the lowest-index path wins.
    for (std::size_t n = 1; n <= 5; ++n)
        for (std::size_t L = 1; L <= 4; ++L) {
            Crf crf(L);
            c.expect(crf.viterbi(Tensor({n, L})).tags == std::vector<std::size_t>(n, 0),
                     str("tie rule n=", n, " L=", L));
        }
    c.note(str(instances, " instances over all n <= 5, L <= 4; worst log-space error ", worst));
}

void adversarial(Check& c) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Tensor x = random({5, 4}, rng, 2.0), d = random({5, 4}, rng, 2.0);
        const double eps = rng.uniform(1e-3, 1.0);
        for (double k : {0.25, 2.0, 8.0}) {
            Tensor scaled = compute_r_adv(x, d, eps, 1e-12);
            scaled *= k;
            c.expect(compute_r_adv(x, d, k * eps, 1e-12) == scaled, str("homogeneity trial ", trial, " k ", k));
        }
        c.expect(compute_r_adv(Tensor(x.shape()), d, eps, 1e-12) == Tensor(x.shape()), "X = 0 gives r != 0");
        Tensor small = d;
        small *= 1e-14 / l2_norm(d);
        c.expect(compute_r_adv(x, small, eps, 1e-12) == Tensor(x.shape()), "||d|| <= delta gives r != 0");
        Tensor unit = d;
        unit *= 1.0 / l2_norm(d);
        c.expect(std::abs(l2_norm(unit) - 1.0) <= 1e-12, str("unit direction norm ", l2_norm(unit)));
        const Tensor ones(x.shape(), 1.0);
        const Tensor r1 = compute_r_adv(ones, d, 1.0, 1e-12);
        c.expect(std::abs(l2_norm(r1) - 1.0) <= 1e-12, str("||r|| with X = 1, eps = 1 is ", l2_norm(r1)));
    }

    const Tiny tiny;
    AdvConfig zero;
    zero.epsilon = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m = tiny.model(seed);
        const auto rec = adversarial_step(*m, tiny.sentence, zero);
        c.expect(rec.loss_adv == rec.loss_primal, str("eps = 0 seed ", seed, ": ", rec.loss_adv, " vs ", rec.loss_primal));
    }

    // AT off: the trainer must follow exactly the ordinary step + optimizer path.
    const auto data = synthetic_split();
    TrainConfig cfg = small_config();
    cfg.use_at = false;
    cfg.epochs = 2;
    cfg.early_stop_patience = 0;
    const auto trained = train(cfg, data.train, data.dev);
    Model manual(cfg.model, data.train.vocab, data.train.tagset, cfg.seed);
    Rng order_rng(cfg.seed ^ 0x5851F42D4C957F2DULL);
    SgdMomentum sgd(cfg.momentum, cfg.clip_norm);
    std::vector<std::size_t> order(data.train.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Model probe(cfg.model, data.train.vocab, data.train.tagset, cfg.seed);
    bool first_step = true;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (auto idx : order) {
            manual.zero_grads();
            plain_step(manual, data.train.sentences[idx]);
            if (first_step) {
                // The same gradient through a fresh model built by the trainer's recipe.
                probe.zero_grads();
                plain_step(probe, data.train.sentences[idx]);
                c.expect(grads(probe) == grads(manual), "first-step gradients differ");
                first_step = false;
            }
            sgd.step(manual, epoch_learning_rate(cfg, epoch));
        }
    }
    c.expect(values(*trained.model) == values(manual), "AT-off training differs from the ordinary-step loop");
    c.expect(trained.adversarial_steps == 0, "AT-off run called the adversarial step");

    AdvConfig small_eps;
    small_eps.epsilon = 0.01;
    int ascents = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto m = tiny.model(seed);
        const auto rec = adversarial_step(*m, tiny.sentence, small_eps);
        if (rec.loss_adv >= rec.loss_primal - 1e-6) ++ascents;
    }
    c.note(str("ascent at eps = 0.01: ", ascents, "/100 steps with L_adv >= L_pri - 1e-6"));
    c.expect(ascents >= 90, str("first-order ascent in ", ascents, "/100 steps, need >= 90"));
}

void overfit(Check& c) {
    const auto all = synthetic::generate(synthetic::kDefaultSize, synthetic::kDefaultSeed);
    const Corpus corpus = parse_conll(synthetic::to_conll(all));
    c.expect(corpus.vocab.size() <= 201, str("vocabulary ", corpus.vocab.size(), " exceeds 200"));
    for (const auto& [gc, at] : {std::pair{false, false}, std::pair{true, false}, std::pair{false, true}, std::pair{true, true}}) {
        TrainConfig cfg;
        cfg.model.use_gc = gc;
        cfg.use_at = at;
        cfg.epochs = 200;
        cfg.early_stop_patience = 0;
        const double target = (gc && at) ? 0.99 : 0.95;
        TrainOptions opt;
        opt.stop_when = [&](const EpochRecord& r) { return r.train_f1 && *r.train_f1 >= target; };
        const auto r = train(cfg, corpus, corpus, opt);
        const double f1 = r.epochs.back().train_f1.value_or(0.0);
        c.note(str(cfg.condition(), ": train F1 ", f1, " after ", r.epochs.size(), " epochs (target ", target, ")"));
        c.expect(f1 >= target, str(cfg.condition(), " train F1 ", f1, " below ", target));
    }
}

void ablation(Check& c) {
    const auto data = synthetic_split();
    std::vector<double> basic, atgc;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig base;
        base.seed = seed;
        const auto report = ablation_run(base, data.train, data.dev);
        c.expect(report.rows.size() == 4, "report does not have four rows");
        std::ostringstream row;
        for (const auto& r : report.rows) row << ' ' << r.label << ' ' << r.best_dev_f1;
        c.note(str("seed ", seed, ":", row.str()));
        basic.push_back(report.rows.front().best_dev_f1);
        atgc.push_back(report.rows.back().best_dev_f1);
    }
    c.note(str("median dev F1: Basic ", median(basic), ", ATGC ", median(atgc)));
    c.expect(median(atgc) >= median(basic), "median ATGC dev F1 below median Basic");
}

void curves(Check& c) {
    const auto data = synthetic_split();
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.early_stop_patience = 0;
    std::vector<std::string> csv, logs;
    for (int run = 0; run < 2; ++run) {
        std::ostringstream log, out;
        TrainOptions opt;
        opt.log = &log;
        const auto r = train(cfg, data.train, data.dev, opt);
        write_curves(out, r.epochs);
        csv.push_back(out.str());
        logs.push_back(log.str());
        const auto rows = static_cast<std::size_t>(std::count(csv.back().begin(), csv.back().end(), '\n')) - 1;
        c.expect(rows == r.epochs.size(), str("curve rows ", rows, " for ", r.epochs.size(), " epochs"));
        std::size_t epoch_lines = 0;
        std::istringstream in(logs.back());
        std::string line;
        while (std::getline(in, line))
            if (nlohmann::json::parse(line).at("type") == "epoch") ++epoch_lines;
        c.expect(epoch_lines == r.epochs.size(), str("log epoch records ", epoch_lines));
    }
    c.expect(csv[0] == csv[1], "curves differ between reruns");
    c.expect(logs[0] == logs[1], "training logs differ between reruns");
}

void metrics_oracle(Check& c) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(15);
        const Tags pred = random_tags(rng, n), gold = random_tags(rng, n);
        c.expect(token_prf(pred, gold).overall.counts == naive_token_counts(pred, gold), str("token trial ", trial));
        c.expect(entity_prf(pred, gold).overall.counts == naive_entity_counts(pred, gold), str("entity trial ", trial));
    }
    const auto m = token_prf({"B-PER", "O", "B-LOC", "O", "O", "O"}, {"B-PER", "I-PER", "I-LOC", "B-ORG", "O", "O"}).overall;
    c.expect(m.counts == PrfCounts{2, 4, 1}, "worked example counts");
    c.expect(std::abs(m.f1 - 1.0 / 3.0) <= 1e-15, str("worked example F1 ", m.f1));
}

void data_round_trip(Check& c) {
    const std::string text = read_text_file(data_path("fixture20.conll"));
    const Corpus first = parse_conll(text);
    const std::string once = serialize_conll(first);
    const Corpus second = parse_conll(once);
    c.expect(first.sentences.size() == 20, "fixture does not have 20 sentences");
    c.expect(serialize_conll(second) == once, "serialize(parse(.)) is not a fixed point");
    c.expect(second.tagset == first.tagset && second.vocab.tokens() == first.vocab.tokens(), "vocab or tag set changed");
    for (std::size_t i = 0; i < first.sentences.size() && i < second.sentences.size(); ++i)
        c.expect(first.sentences[i].tokens == second.sentences[i].tokens &&
                     first.sentences[i].gold_tags == second.sentences[i].gold_tags,
                 str("sentence ", i, " changed"));

    c.expect(!validate_iob({"I-PER", "O"}).empty(), "I at sentence start not flagged");
    c.expect(!validate_iob({"O", "I-PER"}).empty(), "O followed by I not flagged");
    c.expect(validate_iob({"B-PER", "I-PER", "O", "B-LOC"}).empty(), "valid sequence flagged");

    std::ifstream in(data_path("features50.tsv"));
    std::string line;
    std::size_t checked = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        const std::string token = line.substr(0, tab), expected = line.substr(tab + 1);
        c.expect(feature_name(classify_feature(token)) == expected, "feature of '" + token + "'");
        ++checked;
    }
    c.expect(checked == 50, str(checked, " feature fixture rows"));
}

void checkpoint_integrity(Check& c) {
    const auto data = synthetic_split();
    TrainConfig cfg = small_config();
    const auto r = train(cfg, data.train, data.dev);
    Checkpoint cp = capture(*r.model);
    cp.train_config = cfg;
    const double before = token_f1(*r.model, data.dev);

    const fs::path dir = fs::temp_directory_path() / "astral_acceptance";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();
    save_checkpoint(path, cp);
    const Checkpoint loaded = load_checkpoint(path);
    c.expect(loaded == cp, "loaded checkpoint differs");
    c.expect(encode_checkpoint(loaded) == read_text_file(path), "re-encoded bytes differ");
    auto rebuilt = build_model(loaded);
    c.expect(values(*rebuilt) == values(*r.model), "rebuilt parameters differ");
    const double after = token_f1(*rebuilt, data.dev);
    c.expect(after == before, str("dev F1 ", before, " before save, ", after, " after load"));

    std::string bytes = encode_checkpoint(cp);
    std::size_t detected = 0, trials = 0;
    for (std::size_t pos = 16; pos + 4 < bytes.size(); pos += std::max<std::size_t>(1, bytes.size() / 64)) {
        std::string bad = bytes;
        bad[pos] = static_cast<char>(bad[pos] ^ 0x5A);
        ++trials;
        try {
            decode_checkpoint(bad);
        } catch (const ChecksumError&) {
            ++detected;
        } catch (const DataError&) {
        }
    }
    c.expect(detected == trials, str("CRC caught ", detected, " of ", trials, " corrupted bytes"));
    fs::remove_all(dir);
}

}  // namespace

int main() {
    criterion(1, "gradient correctness", 120, gradients);
    criterion(2, "CRF exactness", 60, crf_exactness);
    criterion(3, "adversarial properties", 0, adversarial);
    criterion(4, "end-to-end overfit", 300, overfit);
    criterion(5, "ablation harness", 1200, ablation);
    criterion(6, "training curves", 0, curves);
    criterion(7, "metrics oracle", 0, metrics_oracle);
    criterion(8, "data round trip", 0, data_round_trip);
    criterion(9, "checkpoint integrity", 0, checkpoint_integrity);
    std::printf("%d of 9 criteria failed\n", failed_criteria);
    return failed_criteria == 0 ? 0 : 1;
}

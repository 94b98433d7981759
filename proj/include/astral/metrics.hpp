#pragma once

#include <cstddef>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astral/conll.hpp"

namespace astral {

/// Raw counts behind precision/recall: |T_pre|, |T_gt| and |A|.
struct PrfCounts {
    std::size_t predicted = 0;
    std::size_t gold = 0;
    std::size_t hits = 0;

    PrfCounts& operator+=(const PrfCounts& o) noexcept {
        predicted += o.predicted;
        gold += o.gold;
        hits += o.hits;
        return *this;
    }
    friend bool operator==(const PrfCounts&, const PrfCounts&) = default;
};

/// Which convention applies when a denominator is zero.
enum class Level { token, entity };

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    PrfCounts counts;

    /// P = |A|/|T_pre|, R = |A|/|T_gt|, F1 = 2PR/(P+R). An empty side gives
    /// 0, except at entity level where both sides empty means P = R = F1 = 1.
    static Prf from_counts(const PrfCounts& c, Level level) {
        Prf m;
        m.counts = c;
        if (level == Level::entity && c.predicted == 0 && c.gold == 0) {
            m.precision = m.recall = m.f1 = 1.0;
            return m;
        }
        m.precision = c.predicted ? static_cast<double>(c.hits) / static_cast<double>(c.predicted) : 0.0;
        m.recall = c.gold ? static_cast<double>(c.hits) / static_cast<double>(c.gold) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        return m;
    }
};

struct Metrics {
    Level level = Level::token;
    Prf overall;
    std::map<std::string, Prf> per_type;
};

/// Accumulates counts over many sentences; metrics() can be read at any time.
class MetricsCounter {
public:
    explicit MetricsCounter(Level level, const std::vector<std::string>& types = {}) : level_(level) {
        for (const auto& t : types) per_type_[t];
    }

    void add(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        if (pred.size() != gold.size()) {
            throw ArgumentError("prediction has " + std::to_string(pred.size()) + " tags but gold has " +
                                std::to_string(gold.size()));
        }
        if (level_ == Level::token)
            add_tokens(pred, gold);
        else
            add_spans(pred, gold);
    }

    Metrics metrics() const {
        Metrics m;
        m.level = level_;
        m.overall = Prf::from_counts(overall_, level_);
        for (const auto& [type, c] : per_type_) m.per_type[type] = Prf::from_counts(c, level_);
        return m;
    }

private:
    // A token is an element of T_pre / T_gt when its tag is not O; it is a
    // hit when both tags are identical (prefix included).
    void add_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const ParsedTag p = parse_tag(pred[i]);
            const ParsedTag g = parse_tag(gold[i]);
            if (p.kind != TagKind::outside) {
                ++overall_.predicted;
                ++per_type_[p.type].predicted;
            }
            if (g.kind != TagKind::outside) {
                ++overall_.gold;
                ++per_type_[g.type].gold;
                if (pred[i] == gold[i]) {
                    ++overall_.hits;
                    ++per_type_[g.type].hits;
                }
            }
        }
    }

    void add_spans(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        const auto ps = entity_spans(pred);
        const auto gs = entity_spans(gold);
        const std::set<Span> gold_set(gs.begin(), gs.end());
        for (const auto& s : ps) {
            ++overall_.predicted;
            ++per_type_[s.type].predicted;
            if (gold_set.count(s)) {
                ++overall_.hits;
                ++per_type_[s.type].hits;
            }
        }
        for (const auto& s : gs) {
            ++overall_.gold;
            ++per_type_[s.type].gold;
        }
    }

    Level level_;
    PrfCounts overall_;
    std::map<std::string, PrfCounts> per_type_;
};

inline Metrics token_prf(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    MetricsCounter c(Level::token);
    c.add(pred, gold);
    return c.metrics();
}

inline Metrics entity_prf(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    MetricsCounter c(Level::entity);
    c.add(pred, gold);
    return c.metrics();
}

inline nlohmann::json to_json(const Prf& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"predicted", m.counts.predicted},
            {"gold", m.counts.gold},
            {"hits", m.counts.hits},
            {"support_zero", m.counts.gold == 0}};
}

/// Machine-readable report: overall triple + per-type triples with counts.
inline nlohmann::json to_json(const Metrics& m) {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [type, prf] : m.per_type) types[type] = to_json(prf);
    return {{"level", m.level == Level::token ? "token" : "entity"}, {"overall", to_json(m.overall)}, {"per_type", types}};
}

/// Rows in alphabetical type order followed by OVERALL. Types with no gold
/// support are flagged with '*'.
inline std::string per_type_report(const Metrics& m) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "type" << std::right << std::setw(10) << "precision" << std::setw(10)
       << "recall" << std::setw(10) << "f1" << std::setw(8) << "pred" << std::setw(8) << "gold" << std::setw(8)
       << "hits" << '\n';
    auto row = [&](const std::string& name, const Prf& p) {
        os << std::left << std::setw(12) << (p.counts.gold == 0 ? name + "*" : name) << std::right << std::fixed
           << std::setprecision(4) << std::setw(10) << p.precision << std::setw(10) << p.recall << std::setw(10)
           << p.f1 << std::setw(8) << p.counts.predicted << std::setw(8) << p.counts.gold << std::setw(8)
           << p.counts.hits << '\n';
    };
    for (const auto& [type, p] : m.per_type) row(type, p);
    row("OVERALL", m.overall);
    return os.str();
}

}  // namespace astral

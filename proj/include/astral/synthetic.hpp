#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "astral/conll.hpp"
#include "astral/rng.hpp"

namespace astral {

/// Small templated NER corpus over PER, LOC and ORG, used for smoke tests
/// and the end-to-end runs. Entity names never share tokens across types.
namespace synthetic {

inline const std::vector<std::string_view>& templates() {
    static const std::vector<std::string_view> t{
        "{PER} visited {LOC} last week .",
        "{PER} joined {ORG} in {LOC} .",
        "{ORG} opened a new office in {LOC} .",
        "a spokesman for {ORG} said {PER} would resign .",
        "{PER} met {PER} in {LOC} on Monday .",
        "officials in {LOC} welcomed the {ORG} report .",
        "{ORG} shares fell after {PER} left the board .",
        "{PER} flew from {LOC} to {LOC} .",
        "the {ORG} team beat rivals from {LOC} .",
        "{PER} told reporters that {ORG} had no comment .",
        "heavy rain hit {LOC} again on Sunday .",
        "{ORG} and {ORG} signed a deal .",
    };
    return t;
}

inline const std::vector<std::string_view>& names(std::string_view type) {
    static const std::vector<std::string_view> per{"John Smith", "Maria Lopez", "Ahmed", "Chen Wei",
                                                   "Anna Berg",  "Peter",       "Yuki Tanaka", "Olga"};
    static const std::vector<std::string_view> loc{"Paris", "New York", "Berlin", "Cairo",
                                                   "Tokyo", "South Africa", "Lima", "Oslo"};
    static const std::vector<std::string_view> org{"Reuters", "United Nations", "Siemens", "Bank of Canada",
                                                   "FIFA",    "Red Cross",      "Toyota",  "World Bank"};
    if (type == "PER") return per;
    if (type == "LOC") return loc;
    if (type == "ORG") return org;
    throw ArgumentError("no synthetic names for type '" + std::string(type) + "'");
}

struct TaggedSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
};

inline std::vector<TaggedSentence> generate(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TaggedSentence> out;
    for (std::size_t k = 0; k < count; ++k) {
        const auto& tmpl = templates()[rng.below(templates().size())];
        TaggedSentence s;
        for (const auto& word : detail::split_ws(tmpl)) {
            if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
                const std::string type = word.substr(1, word.size() - 2);
                const auto& pool = names(type);
                const auto parts = detail::split_ws(pool[rng.below(pool.size())]);
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    s.tokens.push_back(parts[i]);
                    s.tags.push_back((i == 0 ? "B-" : "I-") + type);
                }
            } else {
                s.tokens.push_back(word);
                s.tags.push_back("O");
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Two-column CoNLL text (token, tag).
inline std::string to_conll(const std::vector<TaggedSentence>& sentences) {
    std::ostringstream os;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i) os << '\n';
        for (std::size_t j = 0; j < sentences[i].tokens.size(); ++j)
            os << sentences[i].tokens[j] << '\t' << sentences[i].tags[j] << '\n';
    }
    return os.str();
}

inline constexpr std::uint64_t kDefaultSeed = 20190101;
inline constexpr std::size_t kDefaultSize = 50;

}  // namespace synthetic
}  // namespace astral

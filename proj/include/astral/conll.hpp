#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "astral/error.hpp"

namespace astral {

// ---------------------------------------------------------------------------
// Orthographic features
// ---------------------------------------------------------------------------

/// The five token-shape classes. Values are the feature ids.
enum class Feature : std::size_t { no_alpha_num = 0, numeric = 1, upper_not_first = 2, upper_first = 3, all_lower = 4 };

inline constexpr std::size_t kNumFeatures = 5;

inline std::string_view feature_name(Feature f) noexcept {
    switch (f) {
        case Feature::no_alpha_num: return "no-alpha-num";
        case Feature::numeric: return "numeric";
        case Feature::upper_not_first: return "upper-not-first";
        case Feature::upper_first: return "upper-first";
        case Feature::all_lower: return "all-lower";
    }
    return "?";
}

/// Priority classifier: first matching rule wins.
///   no-alpha-num    no ASCII letter/digit and no non-ASCII byte
///   numeric         contains a decimal digit
///   upper-not-first an uppercase letter past position 0
///   upper-first     first character uppercase
///   all-lower       everything else
/// Bytes >= 0x80 (UTF-8 sequences) count as caseless letters.
inline Feature classify_feature(std::string_view token) {
    if (token.empty()) throw ArgumentError("classify_feature: empty token");
    auto is_upper = [](unsigned char c) { return c < 0x80 && std::isupper(c); };
    auto is_alnum = [](unsigned char c) { return c >= 0x80 || std::isalnum(c); };
    bool any_alnum = false, any_digit = false, upper_later = false;
    for (std::size_t i = 0; i < token.size(); ++i) {
        const auto c = static_cast<unsigned char>(token[i]);
        any_alnum = any_alnum || is_alnum(c);
        any_digit = any_digit || (c < 0x80 && std::isdigit(c));
        upper_later = upper_later || (i > 0 && is_upper(c));
    }
    if (!any_alnum) return Feature::no_alpha_num;
    if (any_digit) return Feature::numeric;
    if (upper_later) return Feature::upper_not_first;
    if (is_upper(static_cast<unsigned char>(token[0]))) return Feature::upper_first;
    return Feature::all_lower;
}

// ---------------------------------------------------------------------------
// Vocabulary and tag set
// ---------------------------------------------------------------------------

class Vocab {
public:
    static constexpr std::string_view kUnkToken = "<unk>";

    Vocab() : id_to_token_{std::string(kUnkToken)} {}

    /// Id of `token`, inserting it if new.
    std::size_t add(const std::string& token) {
        auto [it, inserted] = token_to_id_.try_emplace(token, id_to_token_.size());
        if (inserted) id_to_token_.push_back(token);
        return it->second;
    }

    std::size_t lookup(const std::string& token) const {
        auto it = token_to_id_.find(token);
        return it == token_to_id_.end() ? unk_id() : it->second;
    }

    bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
    const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
    std::size_t unk_id() const noexcept { return 0; }
    std::size_t size() const noexcept { return id_to_token_.size(); }
    /// Tokens by id; entry 0 is the unk placeholder.
    const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

    static Vocab from_tokens(const std::vector<std::string>& id_to_token) {
        if (id_to_token.empty() || id_to_token[0] != kUnkToken)
            throw FormatError("vocabulary must start with the unk token");
        Vocab v;
        for (std::size_t i = 1; i < id_to_token.size(); ++i) {
            if (v.add(id_to_token[i]) != i) throw FormatError("duplicate vocabulary entry '" + id_to_token[i] + "'");
        }
        return v;
    }

private:
    std::unordered_map<std::string, std::size_t> token_to_id_;
    std::vector<std::string> id_to_token_;
};

enum class TagKind { outside, begin, inside };

struct ParsedTag {
    TagKind kind;
    std::string type;  // empty for O
};

/// Splits an IOB tag; throws ArgumentError for anything not O / B-X / I-X.
inline ParsedTag parse_tag(std::string_view tag) {
    if (tag == "O") return {TagKind::outside, {}};
    if (tag.size() > 2 && tag[1] == '-' && (tag[0] == 'B' || tag[0] == 'I'))
        return {tag[0] == 'B' ? TagKind::begin : TagKind::inside, std::string(tag.substr(2))};
    throw ArgumentError("not an IOB tag: '" + std::string(tag) + "'");
}

/// Ordered IOB tag inventory: "O" first, then for each entity type in
/// alphabetical order its B- tag followed by its I- tag (if present).
class TagSet {
public:
    TagSet() : TagSet(std::vector<std::string>{"O"}) {}

    /// Builds from observed tags. A B-X is added for every observed I-X.
    explicit TagSet(const std::vector<std::string>& observed) {
        std::map<std::string, bool> types;  // type -> has inside tag
        for (const auto& t : observed) {
            const auto p = parse_tag(t);
            if (p.kind == TagKind::outside) continue;
            auto& inside = types[p.type];
            inside = inside || p.kind == TagKind::inside;
        }
        tags_.push_back("O");
        for (const auto& [type, inside] : types) {
            tags_.push_back("B-" + type);
            if (inside) tags_.push_back("I-" + type);
            types_.push_back(type);
        }
        for (std::size_t i = 0; i < tags_.size(); ++i) index_[tags_[i]] = i;
    }

    /// Restores an exact ordering (e.g. from a checkpoint); must already be canonical.
    static TagSet from_ordered(const std::vector<std::string>& tags) {
        TagSet t(tags);
        if (t.tags_ != tags) throw FormatError("tag list is not in canonical order");
        return t;
    }

    std::size_t size() const noexcept { return tags_.size(); }
    const std::string& tag(std::size_t id) const { return tags_.at(id); }
    const std::vector<std::string>& tags() const noexcept { return tags_; }
    /// Sorted entity type names.
    const std::vector<std::string>& entity_types() const noexcept { return types_; }

    bool contains(const std::string& tag) const { return index_.count(tag) != 0; }
    std::size_t id(const std::string& tag) const {
        auto it = index_.find(tag);
        if (it == index_.end()) throw ArgumentError("tag '" + tag + "' is not in the tag set");
        return it->second;
    }

    ParsedTag parsed(std::size_t id) const { return parse_tag(tag(id)); }

    friend bool operator==(const TagSet& a, const TagSet& b) { return a.tags_ == b.tags_; }

private:
    std::vector<std::string> tags_;
    std::vector<std::string> types_;
    std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Sentences and corpora
// ---------------------------------------------------------------------------

struct Sentence {
    std::vector<std::string> tokens;
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> feature_ids;
    std::optional<std::vector<std::size_t>> gold_tags;

    std::size_t size() const noexcept { return tokens.size(); }
};

struct Corpus {
    std::vector<Sentence> sentences;
    TagSet tagset;
    Vocab vocab;

    std::size_t token_count() const noexcept {
        std::size_t n = 0;
        for (const auto& s : sentences) n += s.size();
        return n;
    }
};

/// Builds a sentence against an existing vocabulary (unknown tokens -> unk).
inline Sentence make_sentence(std::vector<std::string> tokens, const Vocab& vocab) {
    Sentence s;
    for (const auto& t : tokens) {
        s.token_ids.push_back(vocab.lookup(t));
        s.feature_ids.push_back(static_cast<std::size_t>(classify_feature(t)));
    }
    s.tokens = std::move(tokens);
    return s;
}

struct ConllOptions {
    std::size_t token_col = 0;
    int tag_col = -1;  // negative counts from the end (-1 = last column)
    std::size_t min_count = 1;
};

namespace detail {

struct RawSentence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
};

inline std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start));
    }
    return out;
}

inline std::vector<RawSentence> read_blocks(const std::string& text, const ConllOptions& opt) {
    std::vector<RawSentence> blocks;
    RawSentence current;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto flush = [&] {
        if (!current.tokens.empty()) blocks.push_back(std::move(current));
        current = {};
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto cols = split_ws(line);
        if (cols.empty()) {
            flush();
            continue;
        }
        if (cols[0] == "-DOCSTART-") continue;
        const auto from_end = static_cast<std::size_t>(opt.tag_col < 0 ? -opt.tag_col : 0);
        const std::size_t need = opt.tag_col >= 0
                                     ? std::max(opt.token_col, static_cast<std::size_t>(opt.tag_col)) + 1
                                     : std::max(opt.token_col + 2, from_end);
        if (cols.size() < need) {
            throw ParseError(lineno, "expected at least " + std::to_string(need) + " columns, found " +
                                         std::to_string(cols.size()));
        }
        const std::size_t tag_index =
            opt.tag_col >= 0 ? static_cast<std::size_t>(opt.tag_col) : cols.size() - from_end;
        if (tag_index == opt.token_col) throw ParseError(lineno, "token and tag columns coincide");
        try {
            parse_tag(cols[tag_index]);
        } catch (const ArgumentError& e) {
            throw ParseError(lineno, e.what());
        }
        current.tokens.push_back(cols[opt.token_col]);
        current.tags.push_back(cols[tag_index]);
    }
    flush();
    if (blocks.empty()) throw DataError("corpus contains no sentences");
    return blocks;
}

inline Corpus index_blocks(const std::vector<RawSentence>& blocks, Vocab vocab, TagSet tagset) {
    Corpus corpus{{}, std::move(tagset), std::move(vocab)};
    for (const auto& b : blocks) {
        Sentence s = make_sentence(b.tokens, corpus.vocab);
        std::vector<std::size_t> gold;
        for (const auto& t : b.tags) {
            if (!corpus.tagset.contains(t)) throw DataError("tag '" + t + "' is not in the model tag set");
            gold.push_back(corpus.tagset.id(t));
        }
        s.gold_tags = std::move(gold);
        corpus.sentences.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace detail

/// Parses a CoNLL column corpus, building its own vocabulary and tag set.
inline Corpus parse_conll(const std::string& text, const ConllOptions& opt = {}) {
    const auto blocks = detail::read_blocks(text, opt);
    std::vector<std::string> all_tags;
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (const auto& b : blocks) {
        all_tags.insert(all_tags.end(), b.tags.begin(), b.tags.end());
        for (const auto& t : b.tokens)
            if (counts[t]++ == 0) order.push_back(t);
    }
    Vocab vocab;
    for (const auto& t : order)
        if (counts[t] >= opt.min_count) vocab.add(t);
    return detail::index_blocks(blocks, std::move(vocab), TagSet(all_tags));
}

/// Parses against a fixed vocabulary and tag set (dev/test data). Tags
/// outside `tagset` raise DataError.
inline Corpus parse_conll(const std::string& text, const ConllOptions& opt, const Vocab& vocab,
                          const TagSet& tagset) {
    return detail::index_blocks(detail::read_blocks(text, opt), vocab, tagset);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// token<TAB>tag per line, one blank line between sentences.
inline std::string serialize_conll(const Corpus& corpus) {
    std::string out;
    for (std::size_t si = 0; si < corpus.sentences.size(); ++si) {
        const auto& s = corpus.sentences[si];
        if (si) out += '\n';
        for (std::size_t i = 0; i < s.size(); ++i) {
            out += s.tokens[i];
            out += '\t';
            out += s.gold_tags ? corpus.tagset.tag((*s.gold_tags)[i]) : std::string("O");
            out += '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// IOB validation and spans
// ---------------------------------------------------------------------------

struct IobViolation {
    std::size_t index;
    std::string reason;
};

/// Positions where an I-X tag cannot legally appear.
inline std::vector<IobViolation> validate_iob(const std::vector<std::string>& tags) {
    std::vector<IobViolation> out;
    ParsedTag prev{TagKind::outside, {}};
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const ParsedTag cur = parse_tag(tags[i]);
        if (cur.kind == TagKind::inside) {
            if (i == 0)
                out.push_back({i, "sentence starts with " + tags[i]});
            else if (prev.kind == TagKind::outside)
                out.push_back({i, tags[i] + " follows O"});
            else if (prev.type != cur.type)
                out.push_back({i, tags[i] + " follows " + tags[i - 1]});
        }
        prev = cur;
    }
    return out;
}

/// As above, additionally rejecting tags outside `tagset`.
inline std::vector<IobViolation> validate_iob(const std::vector<std::string>& tags, const TagSet& tagset) {
    for (const auto& t : tags)
        if (!tagset.contains(t)) throw ArgumentError("unknown tag '" + t + "'");
    return validate_iob(tags);
}

struct Span {
    std::string type;
    std::size_t begin;
    std::size_t end;  // exclusive

    friend bool operator<(const Span& a, const Span& b) {
        return std::tie(a.begin, a.end, a.type) < std::tie(b.begin, b.end, b.type);
    }
    friend bool operator==(const Span& a, const Span& b) = default;
};

/// Maximal typed segments. An I-X that cannot continue the open span
/// (start of sentence, after O, or after another type) opens a new one.
inline std::vector<Span> entity_spans(const std::vector<std::string>& tags) {
    std::vector<Span> spans;
    std::optional<Span> open;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const ParsedTag t = parse_tag(tags[i]);
        const bool continues = t.kind == TagKind::inside && open && open->type == t.type;
        if (continues) {
            open->end = i + 1;
            continue;
        }
        if (open) spans.push_back(*open);
        open.reset();
        if (t.kind != TagKind::outside) open = Span{t.type, i, i + 1};
    }
    if (open) spans.push_back(*open);
    return spans;
}

inline std::vector<std::string> tag_strings(const std::vector<std::size_t>& ids, const TagSet& tagset) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(tagset.tag(id));
    return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

struct TypeCounts {
    std::size_t tokens = 0;
    std::size_t spans = 0;
};

struct StatsReport {
    std::size_t sentences = 0;
    std::size_t tokens = 0;
    std::size_t entity_tokens = 0;
    std::size_t entity_spans = 0;
    double entity_frequency = 0.0;  // entity_tokens / tokens
    std::map<std::string, TypeCounts> per_type;

    std::string to_text() const {
        std::ostringstream os;
        os << std::left << std::setw(20) << "sentences" << sentences << '\n'
           << std::setw(20) << "tokens" << tokens << '\n'
           << std::setw(20) << "entity tokens" << entity_tokens << '\n'
           << std::setw(20) << "entities" << entity_spans << '\n'
           << std::setw(20) << "entity frequency" << std::fixed << std::setprecision(2)
           << 100.0 * entity_frequency << "%\n";
        if (!per_type.empty()) {
            os << '\n' << std::setw(12) << "type" << std::right << std::setw(10) << "entities" << std::setw(10)
               << "tokens" << '\n';
            for (const auto& [type, c] : per_type)
                os << std::left << std::setw(12) << type << std::right << std::setw(10) << c.spans
                   << std::setw(10) << c.tokens << '\n';
        }
        return os.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json types = nlohmann::json::object();
        for (const auto& [type, c] : per_type) types[type] = {{"tokens", c.tokens}, {"entities", c.spans}};
        return {{"sentences", sentences},
                {"tokens", tokens},
                {"entity_tokens", entity_tokens},
                {"entities", entity_spans},
                {"entity_frequency", entity_frequency},
                {"per_type", types}};
    }
};

inline StatsReport corpus_stats(const Corpus& corpus) {
    StatsReport r;
    for (const auto& type : corpus.tagset.entity_types()) r.per_type[type] = {};
    for (const auto& s : corpus.sentences) {
        ++r.sentences;
        r.tokens += s.size();
        if (!s.gold_tags) continue;
        const auto tags = tag_strings(*s.gold_tags, corpus.tagset);
        for (const auto& t : tags) {
            if (t == "O") continue;
            ++r.entity_tokens;
            ++r.per_type[parse_tag(t).type].tokens;
        }
        for (const auto& span : entity_spans(tags)) {
            ++r.entity_spans;
            ++r.per_type[span.type].spans;
        }
    }
    r.entity_frequency = r.tokens ? static_cast<double>(r.entity_tokens) / static_cast<double>(r.tokens) : 0.0;
    return r;
}

}  // namespace astral

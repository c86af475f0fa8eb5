#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sentiforest/common.hpp"
#include "sentiforest/csv.hpp"
#include "sentiforest/textprep.hpp"
#include "sentiforest/unicode.hpp"

namespace sentiforest {

enum class LexiconKind : std::uint8_t { Bing = 0, Afinn = 1, Nrc = 2, Loughran = 3 };

inline constexpr std::array<LexiconKind, 4> kLexiconKinds{LexiconKind::Bing, LexiconKind::Afinn, LexiconKind::Nrc,
                                                          LexiconKind::Loughran};

inline std::string_view lexicon_name(LexiconKind kind) {
    switch (kind) {
        case LexiconKind::Bing: return "bing";
        case LexiconKind::Afinn: return "afinn";
        case LexiconKind::Nrc: return "nrc";
        case LexiconKind::Loughran: return "loughran";
    }
    return "?";
}

/// Fixed file name of each lexicon inside a lexicon directory.
inline std::string_view lexicon_file_name(LexiconKind kind) {
    switch (kind) {
        case LexiconKind::Bing: return "bing.csv";
        case LexiconKind::Afinn: return "afinn.txt";
        case LexiconKind::Nrc: return "nrc.txt";
        case LexiconKind::Loughran: return "loughran.csv";
    }
    return "?";
}

inline constexpr std::array<std::string_view, 2> kBingTags{"positive", "negative"};
inline constexpr std::array<std::string_view, 10> kNrcTags{"anger",   "fear",    "anticipation", "trust",    "surprise",
                                                           "sadness", "joy",     "disgust",      "negative", "positive"};
inline constexpr std::array<std::string_view, 6> kLoughranTags{"positive",  "negative",    "constraining",
                                                               "litigious", "superfluous", "uncertainty"};

inline std::span<const std::string_view> lexicon_tags(LexiconKind kind) {
    switch (kind) {
        case LexiconKind::Bing: return kBingTags;
        case LexiconKind::Nrc: return kNrcTags;
        case LexiconKind::Loughran: return kLoughranTags;
        case LexiconKind::Afinn: break;
    }
    return {};
}

struct LexiconEntry {
    std::string word;
    LexiconKind lexicon = LexiconKind::Bing;
    std::string tag;             // empty for AFINN
    std::optional<int> valence;  // AFINN only

    friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

/// One loaded lexicon, indexed by word. Immutable after loading.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(LexiconKind kind) : kind_(kind) {}

    LexiconKind kind() const { return kind_; }

    /// Validates and inserts; a repeated (word, tag) pair is ignored.
    void add(LexiconEntry entry) {
        if (entry.lexicon != kind_) throw Error(ErrorKind::InvalidArgument, "entry belongs to a different lexicon");
        validate(entry);
        auto& slot = by_word_[entry.word];
        // AFINN entries have no tag, so a repeated AFINN word keeps its first valence.
        const bool dup =
            std::any_of(slot.begin(), slot.end(), [&](const LexiconEntry& e) { return e.tag == entry.tag; });
        if (dup) return;
        slot.push_back(std::move(entry));
        ++size_;
    }

    const std::vector<LexiconEntry>* find(std::string_view word) const {
        auto it = by_word_.find(std::string(word));
        return it == by_word_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return size_; }
    std::size_t word_count() const { return by_word_.size(); }

    /// SHA-256 of the source file, empty when built in memory.
    const std::string& digest() const { return digest_; }
    void set_digest(std::string d) { digest_ = std::move(d); }

    const std::vector<std::string>& warnings() const { return warnings_; }
    void warn(std::string message) { warnings_.push_back(std::move(message)); }

private:
    void validate(const LexiconEntry& e) const {
        if (e.word.empty()) throw Error(ErrorKind::Parse, "empty lexicon word");
        if (kind_ == LexiconKind::Afinn) {
            if (!e.valence) throw Error(ErrorKind::Parse, "AFINN entry '" + e.word + "' lacks a valence");
            if (*e.valence < -5 || *e.valence > 5)
                throw Error(ErrorKind::Parse, "AFINN valence out of range [-5, 5] for '" + e.word + "': " + std::to_string(*e.valence));
            if (!e.tag.empty()) throw Error(ErrorKind::Parse, "AFINN entries carry no tag");
            return;
        }
        if (e.valence) throw Error(ErrorKind::Parse, "only AFINN entries carry a valence");
        const auto tags = lexicon_tags(kind_);
        if (std::find(tags.begin(), tags.end(), e.tag) == tags.end())
            throw Error(ErrorKind::Parse, "unknown " + std::string(lexicon_name(kind_)) + " tag '" + e.tag + "' for '" + e.word + "'");
    }

    LexiconKind kind_ = LexiconKind::Bing;
    std::unordered_map<std::string, std::vector<LexiconEntry>> by_word_;
    std::size_t size_ = 0;
    std::string digest_;
    std::vector<std::string> warnings_;
};

namespace detail {

inline std::string where(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

inline bool is_header(std::string_view a, std::string_view b) {
    return unicode::to_lower(trim_ascii(a)) == "word" && !b.empty();
}

// AFINN: word<TAB>valence. Multi-word phrases are skipped with a warning.
inline void parse_afinn(std::istream& in, Lexicon& lex, std::string_view source) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t phrases = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_ascii(line).empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw Error(ErrorKind::Parse, where(source, line_no) + "expected word<TAB>valence");
        const auto word = unicode::to_lower(trim_ascii(std::string_view(line).substr(0, tab)));
        const auto value = trim_ascii(std::string_view(line).substr(tab + 1));
        int valence;
        try {
            valence = parse_int<int>(value);
        } catch (const Error&) {
            throw Error(ErrorKind::Parse, where(source, line_no) + "invalid AFINN valence '" + std::string(value) + "'");
        }
        if (valence < -5 || valence > 5)
            throw Error(ErrorKind::Parse, where(source, line_no) + "AFINN valence " + std::to_string(valence) + " outside [-5, 5]");
        if (word.find(' ') != std::string::npos) {
            ++phrases;
            continue;
        }
        lex.add({word, LexiconKind::Afinn, {}, valence});
    }
    if (phrases) lex.warn(std::string(source) + ": skipped " + std::to_string(phrases) + " multi-word AFINN entries");
}

// Bing and Loughran-McDonald: word,tag CSV with an optional header row.
inline void parse_word_tag_csv(std::istream& in, Lexicon& lex, std::string_view source) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    bool first = true;
    while (reader.next(fields)) {
        const auto line = reader.record_line();
        if (fields.size() == 1 && trim_ascii(fields[0]).empty()) continue;
        if (fields.size() != 2) throw Error(ErrorKind::Parse, where(source, line) + "expected word,tag");
        if (first && is_header(fields[0], fields[1])) {
            first = false;
            continue;
        }
        first = false;
        auto word = unicode::to_lower(trim_ascii(fields[0]));
        auto tag = unicode::to_lower(trim_ascii(fields[1]));
        try {
            lex.add({std::move(word), lex.kind(), std::move(tag), std::nullopt});
        } catch (const Error& e) {
            throw Error(e.kind(), where(source, line) + e.what());
        }
    }
}

// NRC word-level: word<TAB>tag<TAB>flag, keeping flag == 1.
inline void parse_nrc(std::istream& in, Lexicon& lex, std::string_view source) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_ascii(line).empty()) continue;
        std::vector<std::string_view> parts;
        std::string_view rest = line;
        for (std::size_t pos; (pos = rest.find('\t')) != std::string_view::npos;) {
            parts.push_back(rest.substr(0, pos));
            rest.remove_prefix(pos + 1);
        }
        parts.push_back(rest);
        if (parts.size() != 3) throw Error(ErrorKind::Parse, where(source, line_no) + "expected word<TAB>tag<TAB>flag");
        const auto flag = trim_ascii(parts[2]);
        if (flag != "0" && flag != "1") throw Error(ErrorKind::Parse, where(source, line_no) + "NRC flag must be 0 or 1");
        auto tag = unicode::to_lower(trim_ascii(parts[1]));
        if (std::find(kNrcTags.begin(), kNrcTags.end(), tag) == kNrcTags.end())
            throw Error(ErrorKind::Parse, where(source, line_no) + "unknown nrc tag '" + tag + "'");
        if (flag == "0") continue;
        lex.add({unicode::to_lower(trim_ascii(parts[0])), LexiconKind::Nrc, std::move(tag), std::nullopt});
    }
}

}  // namespace detail

/// Parses a lexicon in its distribution format. Throws on an empty source,
/// an out-of-range AFINN valence or an unknown tag.
inline Lexicon parse_lexicon(std::istream& in, LexiconKind kind, std::string_view source = "<memory>") {
    Lexicon lex(kind);
    switch (kind) {
        case LexiconKind::Afinn: detail::parse_afinn(in, lex, source); break;
        case LexiconKind::Nrc: detail::parse_nrc(in, lex, source); break;
        case LexiconKind::Bing:
        case LexiconKind::Loughran: detail::parse_word_tag_csv(in, lex, source); break;
    }
    if (lex.size() == 0) throw Error(ErrorKind::Parse, std::string(source) + ": lexicon has no entries");
    return lex;
}

inline Lexicon parse_lexicon(std::string_view text, LexiconKind kind, std::string_view source = "<memory>") {
    std::istringstream in{std::string(text)};
    return parse_lexicon(in, kind, source);
}

inline Lexicon load_lexicon(const std::string& path, LexiconKind kind) {
    const auto bytes = read_file(path);
    auto lex = parse_lexicon(std::string_view(bytes), kind, path);
    lex.set_digest(sha256_hex(bytes));
    return lex;
}

/// The lexicons used for joining. Any subset may be loaded.
class LexiconSet {
public:
    void set(Lexicon lex) { slots_[static_cast<std::size_t>(lex.kind())] = std::move(lex); }
    const Lexicon* get(LexiconKind kind) const {
        const auto& slot = slots_[static_cast<std::size_t>(kind)];
        return slot ? &*slot : nullptr;
    }
    bool empty() const {
        return std::none_of(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); });
    }

    /// Loads afinn.txt, bing.csv, nrc.txt and loughran.csv from `dir`.
    static LexiconSet load_dir(const std::string& dir) {
        LexiconSet set;
        for (auto kind : kLexiconKinds)
            set.set(load_lexicon((std::filesystem::path(dir) / lexicon_file_name(kind)).string(), kind));
        return set;
    }

    std::map<std::string, std::string> digests() const {
        std::map<std::string, std::string> out;
        for (auto kind : kLexiconKinds)
            if (auto* lex = get(kind)) out[std::string(lexicon_name(kind))] = lex->digest();
        return out;
    }

    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        for (const auto& slot : slots_)
            if (slot) out.insert(out.end(), slot->warnings().begin(), slot->warnings().end());
        return out;
    }

private:
    std::array<std::optional<Lexicon>, 4> slots_;
};

struct SentimentHit {
    std::string doc_id;
    std::string token;
    LexiconKind lexicon = LexiconKind::Bing;
    std::string tag;
    std::optional<int> valence;

    friend bool operator==(const SentimentHit&, const SentimentHit&) = default;
};

/// Inner join of document tokens with the loaded lexicons: one hit per token
/// occurrence per matching entry. Tokens matching nothing yield no hits.
/// With `on_stems`, the stems are looked up instead of the surface tokens.
inline std::vector<SentimentHit> join_hits(const TokenizedDoc& doc, const LexiconSet& lexicons, bool on_stems = false) {
    std::vector<SentimentHit> hits;
    const auto& words = on_stems ? doc.stems : doc.tokens;
    for (const auto& word : words) {
        for (auto kind : kLexiconKinds) {
            const auto* lex = lexicons.get(kind);
            if (!lex) continue;
            const auto* entries = lex->find(word);
            if (!entries) continue;
            for (const auto& e : *entries) hits.push_back({doc.doc_id, word, kind, e.tag, e.valence});
        }
    }
    return hits;
}

inline void write_hits_header(std::ostream& out) { out << "doc_id,token,lexicon,tag_or_valence\n"; }

inline void write_hits_csv(std::ostream& out, const std::vector<SentimentHit>& hits) {
    for (const auto& h : hits)
        csv::write_row(out, {h.doc_id, h.token, std::string(lexicon_name(h.lexicon)),
                             h.valence ? std::to_string(*h.valence) : h.tag});
}

}  // namespace sentiforest

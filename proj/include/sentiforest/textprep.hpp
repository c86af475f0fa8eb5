#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/csv.hpp"
#include "sentiforest/stemmer.hpp"
#include "sentiforest/unicode.hpp"

namespace sentiforest {

class StopList {
public:
    StopList() = default;

    template <class Range>
    static StopList from_words(const Range& words) {
        StopList list;
        for (const auto& w : words) {
            auto lowered = unicode::to_lower(trim_ascii(w));
            if (!lowered.empty()) list.words_.insert(std::move(lowered));
        }
        return list;
    }

    static StopList from_words(std::initializer_list<std::string_view> words) {
        return from_words(std::vector<std::string_view>(words));
    }

    /// One word per line, UTF-8. Blank lines and lines starting with '#'
    /// are ignored.
    static StopList load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open stop list '" + path + "'");
        std::vector<std::string> words;
        for (std::string line; std::getline(in, line);) {
            auto word = trim_ascii(line);
            if (word.empty() || word.front() == '#') continue;
            words.emplace_back(word);
        }
        return from_words(words);
    }

    bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

struct TokenizedDoc {
    std::string doc_id;
    std::vector<std::string> tokens;  // lowercase, stop words removed
    std::vector<std::string> stems;   // parallel to tokens
};

namespace detail {

inline bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == U'’' || cp == U'ʼ'; }

inline bool is_word_char(char32_t cp) { return unicode::is_letter(cp) || unicode::is_digit(cp); }

inline bool all_digits(std::u32string_view s) {
    return std::all_of(s.begin(), s.end(), [](char32_t c) { return unicode::is_digit(c); });
}

}  // namespace detail

/// Splits on every character that is not a letter, digit or word-internal
/// apostrophe, and lowercases. Typographic apostrophes are folded to ASCII.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    const auto cps = unicode::to_u32(text);
    std::u32string current;
    auto flush = [&] {
        while (!current.empty() && current.back() == U'\'') current.pop_back();
        std::size_t lead = 0;
        while (lead < current.size() && current[lead] == U'\'') ++lead;
        if (lead < current.size()) words.push_back(unicode::to_utf8(std::u32string_view(current).substr(lead)));
        current.clear();
    };
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const char32_t cp = cps[i];
        if (detail::is_word_char(cp)) {
            current.push_back(unicode::to_lower(cp));
        } else if (detail::is_apostrophe(cp) && !current.empty() && i + 1 < cps.size() &&
                   detail::is_word_char(cps[i + 1])) {
            current.push_back(U'\'');
        } else {
            flush();
        }
    }
    flush();
    return words;
}

/// Tokenizes, drops pure-digit tokens and stop words, and stems the rest.
inline TokenizedDoc tokenize(std::string_view body, const StopList& stop_list, std::string doc_id = {}) {
    TokenizedDoc doc;
    doc.doc_id = std::move(doc_id);
    for (auto& word : split_words(body)) {
        if (detail::all_digits(unicode::to_u32(word))) continue;
        if (stop_list.contains(word)) continue;
        doc.stems.push_back(stem(word));
        doc.tokens.push_back(std::move(word));
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Frequency analysis

struct FrequencyTable {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;

    void add(const std::string& stem, std::size_t n = 1) {
        if (n == 0) return;
        counts[stem] += n;
        total += n;
    }

    void add_document(const TokenizedDoc& doc) {
        for (const auto& s : doc.stems) add(s);
    }

    std::size_t size() const { return counts.size(); }
};

using StemCount = std::pair<std::string, std::size_t>;

/// The k highest counts, count-descending, ties in ascending stem order.
inline std::vector<StemCount> top_stems(const FrequencyTable& table, std::size_t k) {
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "top_stems needs k >= 1");
    std::vector<StemCount> rows(table.counts.begin(), table.counts.end());
    const auto keep = std::min(k, rows.size());
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep), rows.end(),
                      [](const StemCount& a, const StemCount& b) {
                          return a.second != b.second ? a.second > b.second : a.first < b.first;
                      });
    rows.resize(keep);
    return rows;
}

inline void write_frequency_csv(std::ostream& out, const std::vector<StemCount>& rows) {
    out << "stem,count\n";
    for (const auto& [stem, count] : rows) csv::write_row(out, {stem, std::to_string(count)});
}

struct CorrelationResult {
    double r = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::size_t n = 0;
};

/// Pearson correlation of two equally long samples.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "pearson needs two equal samples of size >= 2");
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) throw Error(ErrorKind::UndefinedMetric, "correlation undefined: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 95% Fisher-z interval for a correlation estimated from n pairs (n > 3).
inline std::pair<double, double> fisher_interval(double r, std::size_t n, double z_crit = 1.96) {
    if (n <= 3) throw Error(ErrorKind::InvalidArgument, "confidence interval needs n > 3");
    const double half = z_crit / std::sqrt(static_cast<double>(n) - 3.0);
    if (r >= 1.0) return {1.0, 1.0};
    if (r <= -1.0) return {-1.0, -1.0};
    const double z = std::atanh(r);
    return {std::tanh(z - half), std::tanh(z + half)};
}

inline CorrelationResult correlate(std::span<const double> x, std::span<const double> y) {
    CorrelationResult out;
    out.n = x.size();
    if (out.n <= 3) throw Error(ErrorKind::InvalidArgument, "correlation needs at least 4 observations");
    out.r = pearson(x, y);
    std::tie(out.ci_low, out.ci_high) = fisher_interval(out.r, out.n);
    return out;
}

/// Correlates relative stem frequencies over the union of both tables
/// (a stem absent from one side counts 0 there).
inline CorrelationResult frequency_correlation(const FrequencyTable& a, const FrequencyTable& b) {
    if (a.total == 0 || b.total == 0) throw Error(ErrorKind::UndefinedMetric, "correlation undefined: empty frequency table");
    std::map<std::string, std::pair<std::size_t, std::size_t>> joined;
    for (const auto& [s, c] : a.counts) joined[s].first = c;
    for (const auto& [s, c] : b.counts) joined[s].second = c;
    std::vector<double> x, y;
    x.reserve(joined.size());
    y.reserve(joined.size());
    for (const auto& [s, c] : joined) {
        x.push_back(static_cast<double>(c.first) / static_cast<double>(a.total));
        y.push_back(static_cast<double>(c.second) / static_cast<double>(b.total));
    }
    return correlate(x, y);
}

inline nlohmann::ordered_json to_json(const CorrelationResult& c) {
    nlohmann::ordered_json j;
    j["r"] = c.r;
    j["ci_low"] = c.ci_low;
    j["ci_high"] = c.ci_high;
    j["n"] = c.n;
    return j;
}

}  // namespace sentiforest

#pragma once

// English Snowball (Porter2) stemmer, current revision of the algorithm.
// Works on code points; only ASCII letters take part in the vowel groupings.

#include <array>
#include <string>
#include <string_view>

#include "sentiforest/unicode.hpp"

namespace sentiforest {

namespace porter2 {

class Stemmer {
public:
    explicit Stemmer(std::u32string word) : w_(std::move(word)) {}

    std::u32string run() {
        if (exception1()) return w_;
        if (w_.size() < 3) return w_;
        prelude();
        mark_regions();
        step_1a();
        step_1b();
        step_1c();
        step_2();
        step_3();
        step_4();
        step_5();
        if (y_found_)
            for (auto& c : w_)
                if (c == U'Y') c = U'y';
        return w_;
    }

private:
    static bool vowel(char32_t c) {
        return c == U'a' || c == U'e' || c == U'i' || c == U'o' || c == U'u' || c == U'y';
    }
    static bool vowel_wxy(char32_t c) { return vowel(c) || c == U'w' || c == U'x' || c == U'Y'; }
    static bool valid_li(char32_t c) {
        return std::u32string_view(U"cdeghkmnrt").find(c) != std::u32string_view::npos;
    }

    bool ends_with(std::u32string_view suffix) const {
        return w_.size() >= suffix.size() && std::u32string_view(w_).substr(w_.size() - suffix.size()) == suffix;
    }
    // Start index of `suffix` (assumes ends_with).
    std::size_t at(std::u32string_view suffix) const { return w_.size() - suffix.size(); }

    bool r1(std::size_t pos) const { return p1_ <= pos; }
    bool r2(std::size_t pos) const { return p2_ <= pos; }

    void replace_tail(std::size_t from, std::u32string_view with) {
        w_.resize(from);
        w_ += with;
    }

    // Longest entry of `table` that is a suffix of the word; empty if none.
    template <std::size_t N>
    std::u32string_view longest_suffix(const std::array<std::u32string_view, N>& table) const {
        std::u32string_view best;
        for (auto s : table)
            if (s.size() > best.size() && ends_with(s)) best = s;
        return best;
    }

    bool exception1() {
        static constexpr std::array<std::pair<std::u32string_view, std::u32string_view>, 15> table{{
            {U"andes", U"andes"}, {U"atlas", U"atlas"}, {U"bias", U"bias"}, {U"cosmos", U"cosmos"},
            {U"early", U"earli"}, {U"gently", U"gentl"}, {U"howe", U"howe"},  {U"idly", U"idl"},
            {U"news", U"news"},   {U"only", U"onli"},    {U"singly", U"singl"}, {U"skies", U"sky"},
            {U"skis", U"ski"},    {U"sky", U"sky"},      {U"ugly", U"ugli"},
        }};
        for (auto [word, result] : table) {
            if (w_ == word) {
                w_ = result;
                return true;
            }
        }
        return false;
    }

    void prelude() {
        if (!w_.empty() && w_.front() == U'\'') w_.erase(0, 1);
        if (!w_.empty() && w_.front() == U'y') {
            w_.front() = U'Y';
            y_found_ = true;
        }
        for (std::size_t i = 0; i + 1 < w_.size(); ++i) {
            if (vowel(w_[i]) && w_[i + 1] == U'y') {
                w_[i + 1] = U'Y';
                y_found_ = true;
            }
        }
    }

    // Position just past the first non-vowel that follows a vowel, searching
    // from `from`; npos if there is none.
    std::size_t after_vowel_consonant(std::size_t from) const {
        std::size_t i = from;
        while (i < w_.size() && !vowel(w_[i])) ++i;
        if (i == w_.size()) return std::u32string::npos;
        while (i < w_.size() && vowel(w_[i])) ++i;
        if (i == w_.size()) return std::u32string::npos;
        return i + 1;
    }

    void mark_regions() {
        p1_ = p2_ = w_.size();
        static constexpr std::array<std::u32string_view, 9> prefixes{
            U"arsen", U"commun", U"emerg", U"gener", U"inter", U"later", U"organ", U"past", U"univers"};
        std::size_t start = std::u32string::npos;
        for (auto p : prefixes)
            if (std::u32string_view(w_).starts_with(p)) start = p.size();
        if (start == std::u32string::npos) start = after_vowel_consonant(0);
        if (start == std::u32string::npos) return;
        p1_ = start;
        const auto second = after_vowel_consonant(p1_);
        if (second != std::u32string::npos) p2_ = second;
    }

    // Short syllable ending at `end`: non-vowel, vowel, non-vowel other than
    // w, x or Y; or vowel, non-vowel at the start of the word; or "past".
    bool short_syllable_before(std::size_t end) const {
        if (end >= 3 && !vowel_wxy(w_[end - 1]) && vowel(w_[end - 2]) && !vowel(w_[end - 3])) return true;
        if (end == 2 && !vowel(w_[1]) && vowel(w_[0])) return true;
        return end >= 4 && std::u32string_view(w_).substr(end - 4, 4) == U"past";
    }

    bool vowel_before(std::size_t end) const {
        for (std::size_t i = 0; i < end; ++i)
            if (vowel(w_[i])) return true;
        return false;
    }

    void step_1a() {
        for (auto s : {std::u32string_view(U"'s'"), std::u32string_view(U"'s"), std::u32string_view(U"'")}) {
            if (ends_with(s)) {
                w_.resize(at(s));
                break;
            }
        }
        if (ends_with(U"sses")) {
            replace_tail(at(U"sses"), U"ss");
        } else if (ends_with(U"ied") || ends_with(U"ies")) {
            replace_tail(w_.size() - 3, w_.size() > 4 ? U"i" : U"ie");
        } else if (ends_with(U"ss") || ends_with(U"us")) {
            // unchanged
        } else if (ends_with(U"s")) {
            // Delete if the part before the preceding letter contains a vowel.
            if (w_.size() >= 2 && vowel_before(w_.size() - 2)) w_.pop_back();
        }
    }

    void step_1b() {
        static constexpr std::array<std::u32string_view, 6> suffixes{U"ed", U"eed", U"ing", U"edly", U"eedly", U"ingly"};
        const auto suffix = longest_suffix(suffixes);
        if (suffix.empty()) return;
        const std::size_t start = at(suffix);
        const std::u32string_view stem = std::u32string_view(w_).substr(0, start);

        if (suffix == U"eed" || suffix == U"eedly") {
            if (!r1(start)) return;
            if (stem == U"succ" || stem == U"proc" || stem == U"exc") return;
            replace_tail(start, U"ee");
            return;
        }
        if (suffix == U"ing") {
            if (stem.size() == 2 && stem[1] == U'y' && !vowel(stem[0])) {
                replace_tail(start - 1, U"ie");
                return;
            }
            for (auto exact : {U"even", U"cann", U"inn", U"earr", U"herr", U"out"})
                if (stem == exact) return;
        }
        if (!vowel_before(start)) return;
        w_.resize(start);

        if (ends_with(U"at") || ends_with(U"bl") || ends_with(U"iz")) {
            w_ += U'e';
            return;
        }
        static constexpr std::array<std::u32string_view, 9> doubles{U"bb", U"dd", U"ff", U"gg", U"mm", U"nn", U"pp", U"rr", U"tt"};
        if (!longest_suffix(doubles).empty()) {
            const bool aeo_word = w_.size() == 3 && (w_[0] == U'a' || w_[0] == U'e' || w_[0] == U'o');
            if (!aeo_word) w_.pop_back();
            return;
        }
        if (w_.size() == p1_ && short_syllable_before(w_.size())) w_ += U'e';
    }

    void step_1c() {
        if (w_.size() < 3) return;
        const char32_t last = w_.back();
        if (last != U'y' && last != U'Y') return;
        if (vowel(w_[w_.size() - 2])) return;
        w_.back() = U'i';
    }

    void step_2() {
        static constexpr std::array<std::pair<std::u32string_view, std::u32string_view>, 25> rules{{
            {U"anci", U"ance"},     {U"enci", U"ence"},    {U"ogi", U"og"},       {U"li", U""},
            {U"bli", U"ble"},       {U"abli", U"able"},    {U"alli", U"al"},      {U"fulli", U"ful"},
            {U"lessli", U"less"},   {U"ousli", U"ous"},    {U"entli", U"ent"},    {U"aliti", U"al"},
            {U"biliti", U"ble"},    {U"iviti", U"ive"},    {U"tional", U"tion"},  {U"ational", U"ate"},
            {U"alism", U"al"},      {U"ation", U"ate"},    {U"ization", U"ize"},  {U"izer", U"ize"},
            {U"ator", U"ate"},      {U"iveness", U"ive"},  {U"fulness", U"ful"},  {U"ousness", U"ous"},
            {U"ogist", U"og"},
        }};
        const auto* rule = longest_rule(rules);
        if (!rule) return;
        const std::size_t start = at(rule->first);
        if (!r1(start)) return;
        if (rule->first == U"ogi") {
            if (start == 0 || w_[start - 1] != U'l') return;
        } else if (rule->first == U"li") {
            if (start == 0 || !valid_li(w_[start - 1])) return;
        }
        replace_tail(start, rule->second);
    }

    void step_3() {
        static constexpr std::array<std::pair<std::u32string_view, std::u32string_view>, 9> rules{{
            {U"icate", U"ic"}, {U"ative", U""},    {U"alize", U"al"},    {U"iciti", U"ic"}, {U"ical", U"ic"},
            {U"tional", U"tion"}, {U"ational", U"ate"}, {U"ful", U""}, {U"ness", U""},
        }};
        const auto* rule = longest_rule(rules);
        if (!rule) return;
        const std::size_t start = at(rule->first);
        if (!r1(start)) return;
        if (rule->first == U"ative" && !r2(start)) return;
        replace_tail(start, rule->second);
    }

    void step_4() {
        static constexpr std::array<std::u32string_view, 18> suffixes{
            U"ic",  U"ance", U"ence", U"able", U"ible", U"ate", U"ive", U"ize", U"iti",
            U"al",  U"ism",  U"ion",  U"er",   U"ous",  U"ant", U"ent", U"ment", U"ement"};
        const auto suffix = longest_suffix(suffixes);
        if (suffix.empty()) return;
        const std::size_t start = at(suffix);
        if (!r2(start)) return;
        if (suffix == U"ion" && (start == 0 || (w_[start - 1] != U's' && w_[start - 1] != U't'))) return;
        w_.resize(start);
    }

    void step_5() {
        if (ends_with(U"e")) {
            const std::size_t start = w_.size() - 1;
            if (r2(start) || (r1(start) && !short_syllable_before(start))) w_.pop_back();
        } else if (ends_with(U"l")) {
            const std::size_t start = w_.size() - 1;
            if (r2(start) && start > 0 && w_[start - 1] == U'l') w_.pop_back();
        }
    }

    template <std::size_t N>
    const std::pair<std::u32string_view, std::u32string_view>* longest_rule(
        const std::array<std::pair<std::u32string_view, std::u32string_view>, N>& rules) const {
        const std::pair<std::u32string_view, std::u32string_view>* best = nullptr;
        for (const auto& r : rules)
            if ((!best || r.first.size() > best->first.size()) && ends_with(r.first)) best = &r;
        return best;
    }

    std::u32string w_;
    std::size_t p1_ = 0;
    std::size_t p2_ = 0;
    bool y_found_ = false;
};

}  // namespace porter2

/// Porter2 English stem of a lowercase token.
inline std::string stem(std::string_view token) {
    return unicode::to_utf8(porter2::Stemmer(unicode::to_u32(token)).run());
}

}  // namespace sentiforest

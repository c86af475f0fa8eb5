#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/csv.hpp"
#include "sentiforest/unicode.hpp"

namespace sentiforest {

/// One text together with its provenance.
struct Document {
    std::string id;
    std::string title;
    std::string body;
    Label label = Label::Human;
    std::string source;

    friend bool operator==(const Document&, const Document&) = default;
};

/// Ordered document collection with unique ids.
class Corpus {
public:
    Corpus() = default;

    /// Validates and appends. Throws on a duplicate id or a blank body.
    void add(Document doc) {
        if (doc.id.empty()) throw Error(ErrorKind::Parse, "document with empty id");
        if (unicode::is_blank(doc.body))
            throw Error(ErrorKind::Parse, "document '" + doc.id + "' has an empty body");
        if (!ids_.insert(doc.id).second) throw Error(ErrorKind::DuplicateId, "duplicate document id '" + doc.id + "'");
        ++counts_[static_cast<std::size_t>(doc.label)];
        docs_.push_back(std::move(doc));
    }

    const std::vector<Document>& documents() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    std::size_t count(Label label) const { return counts_[static_cast<std::size_t>(label)]; }
    std::map<Label, std::size_t> class_counts() const {
        std::map<Label, std::size_t> out;
        for (std::size_t i = 0; i < kNumLabels; ++i)
            if (counts_[i]) out[static_cast<Label>(i)] = counts_[i];
        return out;
    }

    /// Training operations require both classes.
    void require_both_classes() const {
        if (count(Label::LLM) == 0 || count(Label::Human) == 0)
            throw Error(ErrorKind::InvalidArgument, "corpus must contain documents of both classes");
    }

    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

private:
    std::vector<Document> docs_;
    std::unordered_set<std::string> ids_;
    std::array<std::size_t, kNumLabels> counts_{};
};

enum class CorpusFormat { Jsonl, Csv };

inline CorpusFormat corpus_format_from_path(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl;
}

namespace detail {

inline std::string required_string(const nlohmann::json& record, const char* key, std::size_t line) {
    auto it = record.find(key);
    if (it == record.end() || !it->is_string())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

inline void add_record(Corpus& corpus, Document doc, std::size_t line) {
    try {
        corpus.add(std::move(doc));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DuplicateId) throw;
        throw Error(e.kind(), "line " + std::to_string(line) + ": " + e.what());
    }
}

}  // namespace detail

inline Corpus parse_corpus_jsonl(std::istream& in, const LabelNames& names = {}) {
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_ascii(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": malformed JSON record");
        }
        if (!record.is_object()) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": record is not an object");
        Document doc;
        doc.id = detail::required_string(record, "id", line_no);
        doc.title = detail::required_string(record, "title", line_no);
        doc.body = detail::required_string(record, "body", line_no);
        const auto label = detail::required_string(record, "label", line_no);
        try {
            doc.label = names.parse(label);
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (auto it = record.find("source"); it != record.end() && it->is_string()) doc.source = it->get<std::string>();
        detail::add_record(corpus, std::move(doc), line_no);
    }
    return corpus;
}

/// CSV ingestion: a header row naming at least id, title, body and label
/// (source optional), in any column order.
inline Corpus parse_corpus_csv(std::istream& in, const LabelNames& names = {}) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw Error(ErrorKind::Parse, "empty CSV corpus");
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < fields.size(); ++i) column[std::string(trim_ascii(fields[i]))] = i;
    for (const char* key : {"id", "title", "body", "label"})
        if (!column.contains(key)) throw Error(ErrorKind::Parse, std::string("CSV header lacks column '") + key + "'");
    const auto source_col = column.contains("source") ? std::optional(column["source"]) : std::nullopt;

    Corpus corpus;
    while (reader.next(fields)) {
        const auto line = reader.record_line();
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != column.size())
            throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": expected " + std::to_string(column.size()) +
                                              " fields, found " + std::to_string(fields.size()));
        Document doc;
        doc.id = fields[column["id"]];
        doc.title = fields[column["title"]];
        doc.body = fields[column["body"]];
        try {
            doc.label = names.parse(fields[column["label"]]);
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + e.what());
        }
        if (source_col) doc.source = fields[*source_col];
        detail::add_record(corpus, std::move(doc), line);
    }
    return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format, const LabelNames& names = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open corpus '" + path + "'");
    return format == CorpusFormat::Jsonl ? parse_corpus_jsonl(in, names) : parse_corpus_csv(in, names);
}

inline Corpus load_corpus(const std::string& path, const LabelNames& names = {}) {
    return load_corpus(path, corpus_format_from_path(path), names);
}

inline std::string to_jsonl_line(const Document& doc, const LabelNames& names = {}) {
    nlohmann::ordered_json record;
    record["id"] = doc.id;
    record["title"] = doc.title;
    record["body"] = doc.body;
    record["label"] = names.name(doc.label);
    record["source"] = doc.source;
    return record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline void write_corpus_jsonl(std::ostream& out, const Corpus& corpus, const LabelNames& names = {}) {
    for (const auto& doc : corpus) out << to_jsonl_line(doc, names) << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus, const LabelNames& names = {}) {
    std::ostringstream out;
    write_corpus_jsonl(out, corpus, names);
    write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Prompt rendering

inline constexpr std::string_view kDefaultPromptTemplate =
    "Write a text on {title}, shorter than {max_chars} characters, white spaces included";

/// Template that reproduces the published example query word for word; it
/// places an article in front of the title.
inline constexpr std::string_view kArticlePromptTemplate =
    "Write a text on the {title}, shorter than {max_chars} characters, white spaces included";

struct GenerationRequest {
    std::string title;
    std::size_t max_chars = 1500;
    std::string prompt_template = std::string(kDefaultPromptTemplate);
};

/// Substitutes {title} and {max_chars} in one left-to-right pass, so text
/// inside the title is never re-expanded.
inline std::string render_prompt(const GenerationRequest& req) {
    constexpr std::string_view title_tag = "{title}";
    constexpr std::string_view chars_tag = "{max_chars}";
    const std::string_view tpl = req.prompt_template;
    if (tpl.find(title_tag) == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument, "prompt template lacks the {title} placeholder");
    if (tpl.find(chars_tag) == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument, "prompt template lacks the {max_chars} placeholder");
    if (req.max_chars == 0) throw Error(ErrorKind::InvalidArgument, "max_chars must be positive");

    std::string out;
    for (std::size_t i = 0; i < tpl.size();) {
        if (tpl.substr(i).starts_with(title_tag)) {
            out += req.title;
            i += title_tag.size();
        } else if (tpl.substr(i).starts_with(chars_tag)) {
            out += std::to_string(req.max_chars);
            i += chars_tag.size();
        } else {
            out.push_back(tpl[i++]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Paired corpus construction

/// Thrown by a text generator. Retryable failures (transport errors, HTTP
/// 5xx/429) are retried with exponential backoff; others fail immediately.
class GenerationError : public Error {
public:
    GenerationError(const std::string& what, bool retryable)
        : Error(ErrorKind::Generation, what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// Maps a rendered prompt to generated text.
using TextGenerator = std::function<std::string(const std::string& prompt)>;

struct TitleEntry {
    std::string id;
    std::string title;
};

struct PairingOptions {
    std::string prompt_template = std::string(kDefaultPromptTemplate);
    std::size_t max_chars = 1500;
    std::size_t max_retries = 3;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{8000};
    std::size_t max_parallel = 1;
    std::string human_source = "NewPhytologist";
    std::string llm_source = "ChatGPT";
    std::string human_suffix = "-human";
    std::string llm_suffix = "-llm";
};

struct GenerationFailure {
    std::string id;
    std::string title;
    std::string error;
    std::size_t attempts = 0;
};

struct PairedCorpus {
    Corpus corpus;
    std::vector<GenerationFailure> failures;
};

/// For every title: one Human document carrying the supplied text and one LLM
/// document carrying the generated text. Pairs whose generation failed are
/// left out of the corpus and listed in `failures`. Output order follows the
/// title order regardless of completion order.
inline PairedCorpus build_paired_corpus(const std::vector<TitleEntry>& titles,
                                        const std::map<std::string, std::string>& human_texts,
                                        const TextGenerator& generate, const PairingOptions& options = {}) {
    if (titles.size() != human_texts.size())
        throw Error(ErrorKind::InvalidArgument, "expected one human text per title (" + std::to_string(titles.size()) +
                                                    " titles, " + std::to_string(human_texts.size()) + " texts)");
    for (const auto& t : titles)
        if (!human_texts.contains(t.id)) throw Error(ErrorKind::InvalidArgument, "no human text for title id '" + t.id + "'");

    struct Outcome {
        std::optional<std::string> text;
        GenerationFailure failure;
    };
    std::vector<Outcome> outcomes(titles.size());

    parallel_for(titles.size(), std::max<std::size_t>(1, options.max_parallel), [&](std::size_t i) {
        const auto& entry = titles[i];
        const auto prompt = render_prompt({entry.title, options.max_chars, options.prompt_template});
        auto& outcome = outcomes[i];
        outcome.failure = {entry.id, entry.title, {}, 0};
        auto delay = options.base_backoff;
        for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
            ++outcome.failure.attempts;
            try {
                auto text = generate(prompt);
                if (unicode::is_blank(text)) throw GenerationError("empty generation response", false);
                outcome.text = std::move(text);
                return;
            } catch (const GenerationError& e) {
                outcome.failure.error = e.what();
                if (!e.retryable()) return;
            }
            if (attempt < options.max_retries) {
                std::this_thread::sleep_for(delay);
                delay = std::min(delay * 2, options.max_backoff);
            }
        }
    });

    PairedCorpus result;
    for (std::size_t i = 0; i < titles.size(); ++i) {
        const auto& entry = titles[i];
        if (!outcomes[i].text) {
            result.failures.push_back(outcomes[i].failure);
            continue;
        }
        result.corpus.add({entry.id + options.human_suffix, entry.title, human_texts.at(entry.id), Label::Human,
                           options.human_source});
        result.corpus.add({entry.id + options.llm_suffix, entry.title, *outcomes[i].text, Label::LLM, options.llm_source});
    }
    return result;
}

inline std::string failure_manifest_path(const std::string& corpus_path) { return corpus_path + ".failures.json"; }

/// Writes the corpus as JSONL and the failure manifest next to it.
inline void persist_paired_corpus(const PairedCorpus& paired, const std::string& path, const LabelNames& names = {}) {
    save_corpus(path, paired.corpus, names);
    nlohmann::ordered_json manifest;
    manifest["corpus"] = std::filesystem::path(path).filename().string();
    manifest["documents"] = paired.corpus.size();
    manifest["failures"] = nlohmann::ordered_json::array();
    for (const auto& f : paired.failures) {
        nlohmann::ordered_json item;
        item["id"] = f.id;
        item["title"] = f.title;
        item["error"] = f.error;
        item["attempts"] = f.attempts;
        manifest["failures"].push_back(std::move(item));
    }
    write_file(failure_manifest_path(path), manifest.dump(2) + "\n");
}

}  // namespace sentiforest

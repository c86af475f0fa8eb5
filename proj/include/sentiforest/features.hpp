#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sentiforest/common.hpp"
#include "sentiforest/corpus.hpp"
#include "sentiforest/csv.hpp"
#include "sentiforest/lexicon.hpp"
#include "sentiforest/textprep.hpp"

namespace sentiforest {

enum class Feature : std::size_t {
    NWords,
    BingPositive,
    BingNegative,
    AfinnMean,
    AfinnSd,
    NrcAnger,
    NrcFear,
    NrcAnticipation,
    NrcTrust,
    NrcSurprise,
    NrcSadness,
    NrcJoy,
    NrcDisgust,
    NrcNegative,
    NrcPositive,
    LoughranPositive,
    LoughranNegative,
    LoughranConstraining,
    LoughranUncertainty,
};

inline constexpr std::size_t kFeatureCount = 19;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "n_words",
    "bing_pos_ratio",
    "bing_neg_ratio",
    "afinn_mean",
    "afinn_sd",
    "nrc_anger_ratio",
    "nrc_fear_ratio",
    "nrc_anticipation_ratio",
    "nrc_trust_ratio",
    "nrc_surprise_ratio",
    "nrc_sadness_ratio",
    "nrc_joy_ratio",
    "nrc_disgust_ratio",
    "nrc_negative_ratio",
    "nrc_positive_ratio",
    "loughran_positive_ratio",
    "loughran_negative_ratio",
    "loughran_constraining_ratio",
    "loughran_uncertainty_ratio",
};

inline constexpr std::string_view kAfinnMissingColumn = "afinn_missing";

inline std::optional<std::size_t> feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name) return i;
    return std::nullopt;
}

/// Per-document feature row. Missing AFINN statistics hold NaN until imputed.
struct FeatureVector {
    std::string doc_id;
    Label label = Label::Human;
    std::array<double, kFeatureCount> values{};
    bool afinn_missing = false;
    // Counted for the new-corpus warning but not part of the schema.
    std::size_t loughran_litigious = 0;
    std::size_t loughran_superfluous = 0;

    double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
};

struct ImputationStats {
    double afinn_mean = 0;
    double afinn_sd = 0;

    std::map<std::string, double> to_map() const {
        return {{std::string(kFeatureNames[static_cast<std::size_t>(Feature::AfinnMean)]), afinn_mean},
                {std::string(kFeatureNames[static_cast<std::size_t>(Feature::AfinnSd)]), afinn_sd}};
    }

    static ImputationStats from_map(const std::map<std::string, double>& m) {
        ImputationStats s;
        try {
            s.afinn_mean = m.at("afinn_mean");
            s.afinn_sd = m.at("afinn_sd");
        } catch (const std::out_of_range&) {
            throw Error(ErrorKind::SchemaMismatch, "imputation statistics lack afinn_mean/afinn_sd");
        }
        return s;
    }

    void apply(FeatureVector& row) const {
        if (!row.afinn_missing) return;
        row[Feature::AfinnMean] = afinn_mean;
        row[Feature::AfinnSd] = afinn_sd;
    }
};

struct Dataset {
    std::vector<std::string> schema = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
    std::vector<FeatureVector> rows;
    std::map<std::string, double> imputation_stats;

    std::size_t size() const { return rows.size(); }
    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(static_cast<std::size_t>(r.label));
        return out;
    }
    std::array<std::size_t, kNumLabels> class_counts() const {
        std::array<std::size_t, kNumLabels> out{};
        for (const auto& r : rows) ++out[static_cast<std::size_t>(r.label)];
        return out;
    }
};

/// Aggregates a document's hits into its feature row.
///
/// Ratios are hit counts over the number of cleaned tokens. AFINN mean and
/// sample standard deviation (n - 1) are taken over hit valences; a single
/// hit has sd 0 and no hits marks the row for imputation.
inline FeatureVector featurize(const TokenizedDoc& doc, const std::vector<SentimentHit>& hits, Label label) {
    if (doc.tokens.empty()) throw Error(ErrorKind::InvalidArgument, "document '" + doc.doc_id + "' rejected: no words after cleaning");
    FeatureVector fv;
    fv.doc_id = doc.doc_id;
    fv.label = label;
    const double n_words = static_cast<double>(doc.tokens.size());
    fv[Feature::NWords] = n_words;

    std::array<std::size_t, kFeatureCount> counts{};
    auto bump = [&](Feature f) { ++counts[static_cast<std::size_t>(f)]; };
    std::vector<int> valences;
    for (const auto& h : hits) {
        if (h.doc_id != doc.doc_id)
            throw Error(ErrorKind::InvalidArgument, "hit for '" + h.doc_id + "' passed with document '" + doc.doc_id + "'");
        switch (h.lexicon) {
            case LexiconKind::Bing:
                bump(h.tag == "positive" ? Feature::BingPositive : Feature::BingNegative);
                break;
            case LexiconKind::Afinn:
                if (h.valence) valences.push_back(*h.valence);
                break;
            case LexiconKind::Nrc:
                for (std::size_t t = 0; t < kNrcTags.size(); ++t)
                    if (h.tag == kNrcTags[t]) ++counts[static_cast<std::size_t>(Feature::NrcAnger) + t];
                break;
            case LexiconKind::Loughran:
                if (h.tag == "positive") bump(Feature::LoughranPositive);
                else if (h.tag == "negative") bump(Feature::LoughranNegative);
                else if (h.tag == "constraining") bump(Feature::LoughranConstraining);
                else if (h.tag == "uncertainty") bump(Feature::LoughranUncertainty);
                else if (h.tag == "litigious") ++fv.loughran_litigious;
                else if (h.tag == "superfluous") ++fv.loughran_superfluous;
                break;
        }
    }
    for (std::size_t i = 1; i < kFeatureCount; ++i) {
        if (i == static_cast<std::size_t>(Feature::AfinnMean) || i == static_cast<std::size_t>(Feature::AfinnSd)) continue;
        fv.values[i] = static_cast<double>(counts[i]) / n_words;
    }

    if (valences.empty()) {
        fv.afinn_missing = true;
        fv[Feature::AfinnMean] = std::numeric_limits<double>::quiet_NaN();
        fv[Feature::AfinnSd] = std::numeric_limits<double>::quiet_NaN();
    } else {
        double sum = 0;
        for (int v : valences) sum += v;
        const double mean = sum / static_cast<double>(valences.size());
        double ss = 0;
        for (int v : valences) ss += (v - mean) * (v - mean);
        fv[Feature::AfinnMean] = mean;
        fv[Feature::AfinnSd] = valences.size() > 1 ? std::sqrt(ss / static_cast<double>(valences.size() - 1)) : 0.0;
    }
    return fv;
}

/// Mean AFINN statistics over the unflagged rows among `indices`.
inline ImputationStats compute_imputation(const std::vector<FeatureVector>& rows, std::span<const std::size_t> indices) {
    double mean_sum = 0, sd_sum = 0;
    std::size_t n = 0;
    for (auto i : indices) {
        const auto& r = rows[i];
        if (r.afinn_missing) continue;
        mean_sum += r[Feature::AfinnMean];
        sd_sum += r[Feature::AfinnSd];
        ++n;
    }
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "cannot impute: every row lacks AFINN hits");
    return {mean_sum / static_cast<double>(n), sd_sum / static_cast<double>(n)};
}

/// Fills flagged rows with statistics computed from `training_rows` only
/// and records them in the returned dataset.
inline Dataset impute(Dataset dataset, std::span<const std::size_t> training_rows) {
    const auto stats = compute_imputation(dataset.rows, training_rows);
    for (auto& r : dataset.rows) stats.apply(r);
    dataset.imputation_stats = stats.to_map();
    return dataset;
}

inline Dataset impute(Dataset dataset) {
    std::vector<std::size_t> all(dataset.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return impute(std::move(dataset), all);
}

/// Deterministic row permutation under `seed`.
inline Dataset shuffle_dataset(Dataset dataset, std::uint64_t seed) {
    Rng rng(seed);
    shuffle(dataset.rows, rng);
    return dataset;
}

// ---------------------------------------------------------------------------
// Model input selection

/// Names of the columns fed to the model, in order: a subset of the feature
/// names, optionally followed by the afinn_missing flag.
struct InputSchema {
    std::vector<std::string> names;

    static InputSchema standard(bool drop_n_words = false, bool afinn_flag = false) {
        InputSchema s;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            if (drop_n_words && i == static_cast<std::size_t>(Feature::NWords)) continue;
            s.names.emplace_back(kFeatureNames[i]);
        }
        if (afinn_flag) s.names.emplace_back(kAfinnMissingColumn);
        return s;
    }

    /// Column index per name; kFeatureCount stands for the afinn_missing flag.
    std::vector<std::size_t> resolve() const {
        std::vector<std::size_t> cols;
        cols.reserve(names.size());
        for (const auto& n : names) {
            if (n == kAfinnMissingColumn) {
                cols.push_back(kFeatureCount);
            } else if (auto idx = feature_index(n)) {
                cols.push_back(*idx);
            } else {
                throw Error(ErrorKind::SchemaMismatch, "unknown feature '" + n + "' in model schema");
            }
        }
        return cols;
    }
};

inline void extract_input(const FeatureVector& row, std::span<const std::size_t> columns, std::span<double> out) {
    for (std::size_t j = 0; j < columns.size(); ++j)
        out[j] = columns[j] == kFeatureCount ? (row.afinn_missing ? 1.0 : 0.0) : row.values[columns[j]];
}

// ---------------------------------------------------------------------------
// Corpus featurization

struct FeaturizeOptions {
    bool join_on_stems = false;
    bool keep_hits = false;
    std::size_t threads = 1;
};

struct FeaturizeResult {
    Dataset dataset;
    std::vector<std::string> rejected;  // ids of documents with no words left
    std::vector<std::string> warnings;
    std::vector<SentimentHit> hits;     // filled when keep_hits
};

inline FeaturizeResult featurize_corpus(const Corpus& corpus, const LexiconSet& lexicons, const StopList& stop_list,
                                        const FeaturizeOptions& options = {}) {
    const auto& docs = corpus.documents();
    std::vector<std::optional<FeatureVector>> rows(docs.size());
    std::vector<std::vector<SentimentHit>> doc_hits(docs.size());
    parallel_for(docs.size(), options.threads, [&](std::size_t i) {
        const auto tokens = tokenize(docs[i].body, stop_list, docs[i].id);
        if (tokens.tokens.empty()) return;
        auto hits = join_hits(tokens, lexicons, options.join_on_stems);
        rows[i] = featurize(tokens, hits, docs[i].label);
        if (options.keep_hits) doc_hits[i] = std::move(hits);
    });

    FeaturizeResult result;
    result.warnings = lexicons.warnings();
    std::size_t litigious = 0, superfluous = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!rows[i]) {
            result.rejected.push_back(docs[i].id);
            continue;
        }
        litigious += rows[i]->loughran_litigious;
        superfluous += rows[i]->loughran_superfluous;
        result.dataset.rows.push_back(std::move(*rows[i]));
        if (options.keep_hits) result.hits.insert(result.hits.end(), doc_hits[i].begin(), doc_hits[i].end());
    }
    if (litigious || superfluous)
        result.warnings.push_back("Loughran litigious (" + std::to_string(litigious) + ") / superfluous (" +
                                  std::to_string(superfluous) + ") hits found; these tags are not part of the feature schema");
    return result;
}

// ---------------------------------------------------------------------------
// Feature CSV

inline std::vector<std::string> feature_csv_header() {
    std::vector<std::string> header{"doc_id"};
    header.insert(header.end(), kFeatureNames.begin(), kFeatureNames.end());
    header.emplace_back(kAfinnMissingColumn);
    header.emplace_back("label");
    return header;
}

inline constexpr std::string_view kMissingValue = "NA";

inline void write_feature_csv(std::ostream& out, const Dataset& dataset, const LabelNames& names = {}) {
    csv::write_row(out, feature_csv_header());
    for (const auto& row : dataset.rows) {
        std::vector<std::string> fields{row.doc_id};
        for (double v : row.values) fields.push_back(std::isnan(v) ? std::string(kMissingValue) : format_double(v));
        fields.emplace_back(row.afinn_missing ? "1" : "0");
        fields.push_back(names.name(row.label));
        csv::write_row(out, fields);
    }
}

/// Reads a feature CSV written by write_feature_csv. A header that differs
/// from the feature schema is a schema mismatch.
inline Dataset read_feature_csv(std::istream& in, const LabelNames& names = {}) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields)) throw Error(ErrorKind::Parse, "empty feature CSV");
    const auto header = feature_csv_header();
    if (fields != header) {
        std::string detail = "feature CSV header does not match the feature schema";
        for (std::size_t i = 0; i < std::max(fields.size(), header.size()); ++i) {
            const auto got = i < fields.size() ? fields[i] : "<none>";
            const auto want = i < header.size() ? header[i] : "<none>";
            if (got != want) {
                detail += " (column " + std::to_string(i + 1) + ": expected '" + want + "', found '" + got + "')";
                break;
            }
        }
        throw Error(ErrorKind::SchemaMismatch, detail);
    }
    Dataset dataset;
    const auto afinn_mean = static_cast<std::size_t>(Feature::AfinnMean);
    const auto afinn_sd = static_cast<std::size_t>(Feature::AfinnSd);
    while (reader.next(fields)) {
        const auto line = reader.record_line();
        if (fields.size() == 1 && fields[0].empty()) continue;
        const auto at = [&](const std::string& msg) { return "feature CSV line " + std::to_string(line) + ": " + msg; };
        if (fields.size() != header.size()) throw Error(ErrorKind::Parse, at("wrong number of fields"));
        FeatureVector row;
        row.doc_id = fields[0];
        const auto& flag = fields[kFeatureCount + 1];
        if (flag != "0" && flag != "1") throw Error(ErrorKind::Parse, at("afinn_missing must be 0 or 1"));
        row.afinn_missing = flag == "1";
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const auto& cell = fields[i + 1];
            if (cell == kMissingValue) {
                if (!row.afinn_missing || (i != afinn_mean && i != afinn_sd))
                    throw Error(ErrorKind::Parse, at("unexpected missing value in " + header[i + 1]));
                row.values[i] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            try {
                row.values[i] = parse_double(cell);
            } catch (const Error&) {
                throw Error(ErrorKind::Parse, at("bad number '" + cell + "' in " + header[i + 1]));
            }
        }
        try {
            row.label = names.parse(fields.back());
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, at(e.what()));
        }
        dataset.rows.push_back(std::move(row));
    }
    return dataset;
}

inline Dataset load_feature_csv(const std::string& path, const LabelNames& names = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open feature CSV '" + path + "'");
    return read_feature_csv(in, names);
}

}  // namespace sentiforest

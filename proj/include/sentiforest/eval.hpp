#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/features.hpp"
#include "sentiforest/forest.hpp"

namespace sentiforest {

/// Rows are actual classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t n_classes = kNumLabels) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

    static ConfusionMatrix from_rows(const std::vector<std::vector<std::size_t>>& rows) {
        ConfusionMatrix m(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) {
            if (rows[a].size() != rows.size()) throw Error(ErrorKind::InvalidArgument, "confusion matrix must be square");
            for (std::size_t p = 0; p < rows.size(); ++p) m.at(a, p) = rows[a][p];
        }
        return m;
    }

    std::size_t& at(std::size_t actual, std::size_t predicted) { return counts_[actual * n_ + predicted]; }
    std::size_t at(std::size_t actual, std::size_t predicted) const { return counts_[actual * n_ + predicted]; }
    void add(std::size_t actual, std::size_t predicted) { ++at(actual, predicted); }

    std::size_t n_classes() const { return n_; }
    std::size_t total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }
    std::size_t trace() const {
        std::size_t t = 0;
        for (std::size_t c = 0; c < n_; ++c) t += at(c, c);
        return t;
    }
    std::size_t actual_count(std::size_t c) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < n_; ++p) s += at(c, p);
        return s;
    }
    std::size_t predicted_count(std::size_t c) const {
        std::size_t s = 0;
        for (std::size_t a = 0; a < n_; ++a) s += at(a, c);
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_;
    std::vector<std::size_t> counts_;
};

struct ClassMetrics {
    double tp_rate = 0;
    double fp_rate = 0;
    double precision = 0;
    double recall = 0;
    double f_measure = 0;
    double mcc = 0;
    double roc_area = 0;
    double prc_area = 0;
};

struct ThresholdMetrics {
    double accuracy = 0;
    double kappa = 0;
    std::vector<ClassMetrics> per_class;
    ClassMetrics weighted;
    std::vector<std::string> flags;
};

/// Accuracy, kappa and the per-class one-vs-rest rates. Weighted averages
/// use actual-class frequencies. A precision with an empty denominator is
/// reported as 0 and flagged.
inline ThresholdMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
    const auto n = static_cast<double>(cm.total());
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "confusion matrix is empty");
    ThresholdMetrics out;
    out.accuracy = static_cast<double>(cm.trace()) / n;
    double pe = 0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c)
        pe += (static_cast<double>(cm.actual_count(c)) / n) * (static_cast<double>(cm.predicted_count(c)) / n);
    out.kappa = pe < 1 ? (out.accuracy - pe) / (1 - pe) : (out.accuracy == 1 ? 1.0 : 0.0);

    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double fn = static_cast<double>(cm.actual_count(c)) - tp;
        const double fp = static_cast<double>(cm.predicted_count(c)) - tp;
        const double tn = n - tp - fn - fp;
        ClassMetrics m;
        m.tp_rate = m.recall = tp + fn > 0 ? tp / (tp + fn) : 0;
        m.fp_rate = fp + tn > 0 ? fp / (fp + tn) : 0;
        if (tp + fp > 0) {
            m.precision = tp / (tp + fp);
        } else {
            out.flags.push_back("precision undefined for class " + std::to_string(c) + " (never predicted); reported as 0");
        }
        m.f_measure = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0;
        const double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
        m.mcc = denom > 0 ? (tp * tn - fp * fn) / denom : 0;
        out.per_class.push_back(m);
    }
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const double w = static_cast<double>(cm.actual_count(c)) / n;
        const auto& m = out.per_class[c];
        out.weighted.tp_rate += w * m.tp_rate;
        out.weighted.fp_rate += w * m.fp_rate;
        out.weighted.precision += w * m.precision;
        out.weighted.recall += w * m.recall;
        out.weighted.f_measure += w * m.f_measure;
        out.weighted.mcc += w * m.mcc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Probabilistic errors

struct ErrorMetrics {
    double mae = 0;
    double rmse = 0;
    double rae = 0;   // percent
    double rrse = 0;  // percent
};

namespace detail {

inline void check_predictions(std::span<const std::size_t> truths, std::span<const std::vector<double>> probas,
                              std::size_t n_classes) {
    if (truths.size() != probas.size()) throw Error(ErrorKind::InvalidArgument, "truths and probabilities differ in length");
    if (truths.empty()) throw Error(ErrorKind::InvalidArgument, "no predictions to evaluate");
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] >= n_classes) throw Error(ErrorKind::InvalidArgument, "class index out of range");
        if (probas[i].size() != n_classes) throw Error(ErrorKind::InvalidArgument, "probability vector has the wrong length");
    }
}

}  // namespace detail

/// MAE and RMSE of probability vectors against one-hot truths, averaged
/// over every (instance, class) cell.
inline std::pair<double, double> absolute_errors(std::span<const std::size_t> truths, std::span<const std::vector<double>> probas,
                                                 std::size_t n_classes) {
    detail::check_predictions(truths, probas, n_classes);
    double abs_sum = 0, sq_sum = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double e = probas[i][c] - (truths[i] == c ? 1.0 : 0.0);
            abs_sum += std::abs(e);
            sq_sum += e * e;
        }
    }
    const double cells = static_cast<double>(truths.size() * n_classes);
    return {abs_sum / cells, std::sqrt(sq_sum / cells)};
}

/// Errors of always predicting the class frequencies of `truths`.
inline std::pair<double, double> prior_baseline_errors(std::span<const std::size_t> truths, std::size_t n_classes) {
    if (truths.empty()) throw Error(ErrorKind::InvalidArgument, "no instances");
    std::vector<double> prior(n_classes, 0.0);
    for (auto t : truths) prior.at(t) += 1;
    std::size_t present = 0;
    for (auto& p : prior) {
        present += p > 0;
        p /= static_cast<double>(truths.size());
    }
    if (present < 2) throw Error(ErrorKind::UndefinedMetric, "relative errors undefined: only one class present");
    std::vector<std::vector<double>> baseline(truths.size(), prior);
    return absolute_errors(truths, baseline, n_classes);
}

inline ErrorMetrics relative_errors(double mae, double rmse, double prior_mae, double prior_rmse) {
    if (prior_mae <= 0 || prior_rmse <= 0) throw Error(ErrorKind::UndefinedMetric, "relative errors undefined: degenerate baseline");
    return {mae, rmse, 100 * mae / prior_mae, 100 * rmse / prior_rmse};
}

inline ErrorMetrics probabilistic_errors(std::span<const std::size_t> truths, std::span<const std::vector<double>> probas,
                                         std::size_t n_classes) {
    const auto [mae, rmse] = absolute_errors(truths, probas, n_classes);
    const auto [pmae, prmse] = prior_baseline_errors(truths, n_classes);
    return relative_errors(mae, rmse, pmae, prmse);
}

// ---------------------------------------------------------------------------
// Ranking metrics

struct RankingAreas {
    double roc = 0;
    double prc = 0;
};

/// ROC area as the Mann-Whitney statistic (ties count 1/2) and PRC area as
/// the step integral of precision over recall, thresholds taken at distinct
/// scores in descending order.
inline RankingAreas roc_prc_area(const std::vector<bool>& positive, std::span<const double> scores) {
    if (positive.size() != scores.size()) throw Error(ErrorKind::InvalidArgument, "truths and scores differ in length");
    const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    const auto n_neg = positive.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::UndefinedMetric, "ROC/PRC area undefined: need positive and negative instances");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RankingAreas out;
    double tp = 0, fp = 0, prev_recall = 0, pairs = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        double group_pos = 0, group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (positive[order[j]] ? group_pos : group_neg) += 1;
            ++j;
        }
        // Positives in this group beat every negative ranked below and tie
        // with the negatives in the group.
        pairs += group_pos * (static_cast<double>(n_neg) - fp - group_neg) + 0.5 * group_pos * group_neg;
        tp += group_pos;
        fp += group_neg;
        const double recall = tp / static_cast<double>(n_pos);
        out.prc += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        i = j;
    }
    out.roc = pairs / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return out;
}

// ---------------------------------------------------------------------------
// Report

struct EvalReport {
    std::vector<Label> classes;
    std::size_t n_instances = 0;
    std::size_t correct = 0;
    double accuracy = 0;
    double kappa = 0;
    double mae = 0;
    double rmse = 0;
    double rae = 0;
    double rrse = 0;
    std::vector<ClassMetrics> per_class;
    ClassMetrics weighted;
    ConfusionMatrix confusion;
    std::vector<std::string> flags;
    double runtime_seconds = 0;
};

/// Full report from pooled per-instance probabilities. Predicted class is
/// the argmax with ties to the lowest index.
inline EvalReport build_report(std::span<const std::size_t> truths, std::span<const std::vector<double>> probas,
                               const std::vector<Label>& classes) {
    const auto k = classes.size();
    detail::check_predictions(truths, probas, k);
    EvalReport r;
    r.classes = classes;
    r.n_instances = truths.size();
    r.confusion = ConfusionMatrix(k);
    for (std::size_t i = 0; i < truths.size(); ++i) r.confusion.add(truths[i], argmax(probas[i]));
    r.correct = r.confusion.trace();

    auto tm = metrics_from_confusion(r.confusion);
    r.accuracy = tm.accuracy;
    r.kappa = tm.kappa;
    r.flags = std::move(tm.flags);
    const auto err = probabilistic_errors(truths, probas, k);
    r.mae = err.mae;
    r.rmse = err.rmse;
    r.rae = err.rae;
    r.rrse = err.rrse;

    r.per_class = std::move(tm.per_class);
    r.weighted = tm.weighted;
    std::vector<bool> positive(truths.size());
    std::vector<double> scores(truths.size());
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < truths.size(); ++i) {
            positive[i] = truths[i] == c;
            scores[i] = probas[i][c];
        }
        const auto areas = roc_prc_area(positive, scores);
        r.per_class[c].roc_area = areas.roc;
        r.per_class[c].prc_area = areas.prc;
        const double w = static_cast<double>(r.confusion.actual_count(c)) / static_cast<double>(r.n_instances);
        r.weighted.roc_area += w * areas.roc;
        r.weighted.prc_area += w * areas.prc;
    }
    return r;
}

namespace detail {

inline nlohmann::ordered_json class_metrics_json(const ClassMetrics& m) {
    return {{"tp_rate", m.tp_rate},     {"fp_rate", m.fp_rate}, {"precision", m.precision}, {"recall", m.recall},
            {"f_measure", m.f_measure}, {"mcc", m.mcc},         {"roc_area", m.roc_area},   {"prc_area", m.prc_area}};
}

}  // namespace detail

/// Machine-readable report. The runtime is left out unless asked for, so
/// fixed-seed reports compare byte for byte.
inline nlohmann::ordered_json to_json(const EvalReport& r, const LabelNames& names = {}, bool include_runtime = false) {
    nlohmann::ordered_json j;
    j["n_instances"] = r.n_instances;
    j["correct"] = r.correct;
    j["incorrect"] = r.n_instances - r.correct;
    j["accuracy"] = r.accuracy;
    j["kappa"] = r.kappa;
    j["mae"] = r.mae;
    j["rmse"] = r.rmse;
    j["rae_percent"] = r.rae;
    j["rrse_percent"] = r.rrse;
    auto per_class = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        auto m = detail::class_metrics_json(r.per_class[c]);
        m["class"] = names.name(r.classes[c]);
        per_class.push_back(m);
    }
    j["per_class"] = per_class;
    j["weighted"] = detail::class_metrics_json(r.weighted);
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < r.confusion.n_classes(); ++a) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t p = 0; p < r.confusion.n_classes(); ++p) row.push_back(r.confusion.at(a, p));
        rows.push_back(row);
    }
    auto class_names = nlohmann::ordered_json::array();
    for (auto c : r.classes) class_names.push_back(names.name(c));
    j["confusion"] = {{"classes", class_names}, {"matrix", rows}};
    j["flags"] = r.flags;
    if (include_runtime) j["runtime_seconds"] = r.runtime_seconds;
    return j;
}

/// Plain-text rendering in the classic toolkit layout: summary, detailed
/// accuracy by class, confusion matrix. Values are rounded to 4 decimals.
inline std::string render_report(const EvalReport& r, const LabelNames& names = {}) {
    std::ostringstream out;
    const auto fixed4 = [](double v) { return format_fixed(v, 4); };
    const auto n = static_cast<double>(r.n_instances);
    const auto line = [&](const std::string& label, const std::string& value, const std::string& suffix = {}) {
        out << std::left << std::setw(37) << label << std::right << std::setw(10) << value << suffix << '\n';
    };
    out << "=== Summary ===\n\n";
    const auto percent = [&](double count) {
        std::ostringstream cell;
        cell << std::setw(17) << fixed4(100 * count / n) << " %";
        return cell.str();
    };
    line("Correctly Classified Instances", std::to_string(r.correct), percent(static_cast<double>(r.correct)));
    line("Incorrectly Classified Instances", std::to_string(r.n_instances - r.correct),
         percent(n - static_cast<double>(r.correct)));
    line("Kappa statistic", fixed4(r.kappa));
    line("Mean absolute error", fixed4(r.mae));
    line("Root mean squared error", fixed4(r.rmse));
    line("Relative absolute error", fixed4(r.rae), " %");
    line("Root relative squared error", fixed4(r.rrse), " %");
    line("Total Number of Instances", std::to_string(r.n_instances));

    out << "\n=== Detailed Accuracy By Class ===\n\n";
    const auto row = [&](const std::string& head, const ClassMetrics& m, const std::string& cls) {
        out << std::left << std::setw(15) << head << std::right;
        for (double v : {m.tp_rate, m.fp_rate, m.precision, m.recall, m.f_measure, m.mcc, m.roc_area, m.prc_area})
            out << std::setw(10) << fixed4(v);
        out << "  " << cls << '\n';
    };
    out << std::left << std::setw(15) << "" << std::right;
    for (const char* h : {"TP Rate", "FP Rate", "Precision", "Recall", "F-Measure", "MCC", "ROC Area", "PRC Area"})
        out << std::setw(10) << h;
    out << "  Class\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) row("", r.per_class[c], names.name(r.classes[c]));
    row("Weighted Avg.", r.weighted, "");

    out << "\n=== Confusion Matrix ===\n\n";
    const auto k = r.confusion.n_classes();
    std::size_t width = 2;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t p = 0; p < k; ++p) width = std::max(width, std::to_string(r.confusion.at(a, p)).size() + 1);
    for (std::size_t p = 0; p < k; ++p) out << std::setw(static_cast<int>(width)) << static_cast<char>('a' + p) << ' ';
    out << "  <-- classified as\n";
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t p = 0; p < k; ++p) out << std::setw(static_cast<int>(width)) << r.confusion.at(a, p) << ' ';
        out << " |   " << static_cast<char>('a' + a) << " = " << names.name(r.classes[a]) << '\n';
    }
    for (const auto& f : r.flags) out << "\nnote: " << f << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Cross-validation

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Shuffles each class under `seed`, lays the classes end to end and deals
/// position i to fold i mod k. Per-fold class counts are then within one of
/// proportional.
inline std::vector<Fold> stratified_folds(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
    if (k > labels.size())
        throw Error(ErrorKind::InvalidArgument, "cannot make " + std::to_string(k) + " folds from " + std::to_string(labels.size()) + " rows");
    const auto n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (std::count_if(by_class.begin(), by_class.end(), [](const auto& v) { return !v.empty(); }) < 2)
        throw Error(ErrorKind::InvalidArgument, "stratified folds need at least two classes");

    Rng rng(seed);
    std::vector<Fold> folds(k);
    std::size_t position = 0;
    for (auto& members : by_class) {
        shuffle(members, rng);
        for (auto i : members) folds[position++ % k].test.push_back(i);
    }
    for (auto& fold : folds) {
        std::sort(fold.test.begin(), fold.test.end());
        std::vector<char> in_test(labels.size(), 0);
        for (auto i : fold.test) in_test[i] = 1;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!in_test[i]) fold.train.push_back(i);
    }
    return folds;
}

inline std::vector<Fold> stratified_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    const auto labels = dataset.labels();
    return stratified_folds(labels, k, seed);
}

struct CvOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 42;       // fold assignment
    bool global_imputation = false;       // impute once over the whole dataset before splitting
    InputSchema schema = InputSchema::standard();
};

/// Model for one fold, imputed from the fold's training rows only (unless
/// the dataset was already imputed globally).
inline ForestModel train_fold(const Dataset& dataset, const Fold& fold, const ForestConfig& config,
                              const InputSchema& schema = InputSchema::standard()) {
    Dataset train_set;
    train_set.schema = dataset.schema;
    train_set.rows.reserve(fold.train.size());
    for (auto i : fold.train) train_set.rows.push_back(dataset.rows[i]);
    if (dataset.imputation_stats.empty()) {
        train_set = impute(std::move(train_set));
    } else {
        train_set.imputation_stats = dataset.imputation_stats;
    }
    return train(train_set, config, schema);
}

struct CvPredictions {
    std::vector<std::size_t> truths;
    std::vector<std::vector<double>> probas;  // in original row order
    std::vector<std::size_t> fold_of;
};

inline CvPredictions cross_validate_predictions(const Dataset& input, const ForestConfig& config, const CvOptions& options = {}) {
    if (input.rows.empty()) throw Error(ErrorKind::InvalidArgument, "cannot cross-validate an empty dataset");
    Dataset dataset = input;
    dataset.imputation_stats.clear();
    if (options.global_imputation) dataset = impute(std::move(dataset));
    const auto folds = stratified_folds(dataset, options.folds, options.seed);

    CvPredictions out;
    out.truths = dataset.labels();
    out.probas.assign(dataset.rows.size(), {});
    out.fold_of.assign(dataset.rows.size(), 0);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        try {
            const auto model = train_fold(dataset, folds[f], config, options.schema);
            for (auto i : folds[f].test) {
                const auto proba = predict_proba(model, dataset.rows[i]);
                std::vector<double> full(kNumLabels, 0.0);
                for (std::size_t c = 0; c < model.classes.size(); ++c) full[static_cast<std::size_t>(model.classes[c])] = proba[c];
                out.probas[i] = std::move(full);
                out.fold_of[i] = f;
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "fold " + std::to_string(f + 1) + ": " + e.what());
        }
    }
    return out;
}

/// Stratified k-fold CV with all metrics computed once over the pooled
/// out-of-fold predictions.
inline EvalReport cross_validate(const Dataset& dataset, const ForestConfig& config, const CvOptions& options = {}) {
    const auto preds = cross_validate_predictions(dataset, config, options);
    return build_report(preds.truths, preds.probas, {Label::LLM, Label::Human});
}

}  // namespace sentiforest

// Acceptance checks. One PASS/FAIL line per criterion; the exit status is
// the number of failures.

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sentiforest/sentiforest.hpp"

using namespace sentiforest;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << "\n      failed: " << what;
        }
    }
    void near(double got, double want, double tol, const std::string& what) {
        detail << "\n      " << what << " = " << format_double(got) << " (want " << format_double(want) << " +/- "
               << format_double(tol) << ")";
        if (!(std::abs(got - want) <= tol)) {
            ok = false;
            detail << "  <-- out of tolerance";
        }
    }
    void note(const std::string& text) { detail << "\n      " << text; }
};

int failures = 0;

void run(int id, const std::string& name, double budget_seconds, const std::function<void(Check&)>& body) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(check);
    } catch (const std::exception& e) {
        check.ok = false;
        check.detail << "\n      exception: " << e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > budget_seconds) {
        check.ok = false;
        check.detail << "\n      runtime " << format_fixed(elapsed, 3) << " s exceeds " << budget_seconds << " s";
    }
    if (!check.ok) ++failures;
    std::cout << (check.ok ? "PASS" : "FAIL") << "  [" << id << "] " << name << " (" << format_fixed(elapsed, 3) << " s)"
              << check.detail.str() << '\n';
}

// --- 1 -----------------------------------------------------------------------

void metric_golden(Check& c) {
    const auto m = metrics_from_confusion(ConfusionMatrix::from_rows({{62, 11}, {12, 60}}));
    c.near(100 * m.accuracy, 84.1379, 1e-4, "accuracy %");
    c.near(m.kappa, 0.6827, 5e-4, "kappa");
    const auto& gpt = m.per_class[0];
    const auto& np = m.per_class[1];
    c.near(gpt.precision, 0.838, 1e-3, "ChatGPT precision");
    c.near(gpt.recall, 0.849, 1e-3, "ChatGPT recall");
    c.near(gpt.f_measure, 0.844, 1e-3, "ChatGPT F1");
    c.near(np.precision, 0.845, 1e-3, "NewPhytologist precision");
    c.near(np.recall, 0.833, 1e-3, "NewPhytologist recall");
    c.near(np.f_measure, 0.839, 1e-3, "NewPhytologist F1");
    c.near(gpt.mcc, 0.683, 1e-3, "ChatGPT MCC");
    c.near(np.mcc, 0.683, 1e-3, "NewPhytologist MCC");
    c.near(m.weighted.tp_rate, 0.841, 1e-3, "weighted TP rate");
}

// --- 2 -----------------------------------------------------------------------

void relative_error_consistency(Check& c) {
    std::vector<std::size_t> truths(73, 0);
    truths.insert(truths.end(), 72, 1);
    const auto [prior_mae, prior_rmse] = prior_baseline_errors(truths, 2);
    // Closed forms for a two-class prior baseline with p = 73/145.
    const double p = 73.0 / 145.0;
    c.near(prior_mae, 2 * p * (1 - p), 1e-12, "baseline MAE vs 2p(1-p)");
    c.near(prior_rmse, std::sqrt(p * (1 - p)), 1e-12, "baseline RMSE vs sqrt(p(1-p))");
    const auto rel = relative_errors(0.3016, 0.3724, prior_mae, prior_rmse);
    c.near(rel.rae, 60.31, 0.05, "RAE %");
    c.near(rel.rrse, 74.48, 0.05, "RRSE %");
    c.note("published: RAE 60.3095 %, RRSE 74.4571 %");
}

// --- 3 -----------------------------------------------------------------------

void demo_corpus_cv(Check& c) {
    const std::string data = SENTIFOREST_DATA_DIR;
    const auto corpus = load_corpus(data + "/demo/corpus.jsonl");
    c.expect(corpus.count(Label::LLM) == 73 && corpus.count(Label::Human) == 72, "demo corpus has 73 + 72 documents");
    const auto lexicons = LexiconSet::load_dir(data + "/lexicons");
    const auto stop = StopList::load(data + "/stopwords/smart.txt");
    const auto features = featurize_corpus(corpus, lexicons, stop).dataset;

    ForestConfig config;  // 1000 trees, seed 42
    const auto report = cross_validate(features, config, {});
    c.note("accuracy = " + format_fixed(report.accuracy, 4) + " (need >= 0.80), kappa = " + format_fixed(report.kappa, 4) +
           " (need >= 0.60)");
    c.expect(report.accuracy >= 0.80, "accuracy >= 0.80");
    c.expect(report.kappa >= 0.60, "kappa >= 0.60");

    const auto again = cross_validate(features, config, {});
    config.threads = 4;
    const auto threaded = cross_validate(features, config, {});
    const auto a = to_json(report).dump(), b = to_json(again).dump(), t = to_json(threaded).dump();
    c.expect(a == b, "repeat run is bit-identical");
    c.expect(a == t, "4-thread run is bit-identical to 1-thread run");
    c.note("repeat identical: " + std::string(a == b ? "yes" : "no") + ", threads 1 vs 4 identical: " + (a == t ? "yes" : "no"));
}

// --- 4 -----------------------------------------------------------------------

void feature_oracles(Check& c) {
    LexiconSet lex;
    lex.set(parse_lexicon("word,sentiment\ngood,positive\nhappy,positive\nbad,negative\nsad,negative\n", LexiconKind::Bing));
    lex.set(parse_lexicon("good\t3\nhappy\t3\nbad\t-3\nsad\t-2\nhate\t-3\n", LexiconKind::Afinn));
    lex.set(parse_lexicon("good\tjoy\t1\ngood\tpositive\t1\ngood\ttrust\t1\ngood\tanger\t0\n"
                          "happy\tjoy\t1\nhappy\tpositive\t1\nhappy\tanticipation\t1\n"
                          "bad\tanger\t1\nbad\tnegative\t1\nsad\tsadness\t1\nsad\tnegative\t1\n"
                          "hate\tanger\t1\nhate\tdisgust\t1\nhate\tnegative\t1\nfear\tfear\t1\nfear\tnegative\t1\n",
                          LexiconKind::Nrc));
    lex.set(parse_lexicon("word,sentiment\ngood,positive\nbad,negative\nmay,uncertainty\nmust,constraining\nlawsuit,litigious\n",
                          LexiconKind::Loughran));
    const auto stop = StopList::from_words({"the", "a", "is", "and", "was"});

    struct Case {
        std::string body;
        std::vector<std::pair<Feature, double>> expected;  // everything else 0
        bool afinn_missing = false;
        double sd = 0;
    };
    using F = Feature;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // Hand-derived: token lists after stop-word removal and the matching
    // lexicon entries are worked out in the comments.
    const std::vector<Case> cases{
        // good dog happy (3)
        {"The good dog is happy.",
         {{F::NWords, 3}, {F::BingPositive, 2.0 / 3}, {F::AfinnMean, 3}, {F::NrcJoy, 2.0 / 3}, {F::NrcPositive, 2.0 / 3},
          {F::NrcTrust, 1.0 / 3}, {F::NrcAnticipation, 1.0 / 3}, {F::LoughranPositive, 1.0 / 3}},
         false, 0.0},
        // bad bad weather sad cat (5); valences -3 -3 -2
        {"Bad bad weather and a sad cat.",
         {{F::NWords, 5}, {F::BingNegative, 3.0 / 5}, {F::AfinnMean, -8.0 / 3}, {F::NrcNegative, 3.0 / 5},
          {F::NrcAnger, 2.0 / 5}, {F::NrcSadness, 1.0 / 5}, {F::LoughranNegative, 2.0 / 5}},
         false, std::sqrt(1.0 / 3)},
        // weather grey (2); no hits at all
        {"The weather was grey", {{F::NWords, 2}, {F::AfinnMean, nan}, {F::AfinnSd, nan}}, true, nan},
        // i hate lawsuit it may fear storms (7); "42" dropped
        {"I hate the lawsuit; it may fear 42 storms.",
         {{F::NWords, 7}, {F::AfinnMean, -3}, {F::NrcAnger, 1.0 / 7}, {F::NrcDisgust, 1.0 / 7}, {F::NrcNegative, 2.0 / 7},
          {F::NrcFear, 1.0 / 7}, {F::LoughranUncertainty, 1.0 / 7}},
         false, 0.0},
        // good good don't be sad must be good (8); valences 3 3 -2 3
        {"Good? GOOD! don't be sad, must be good",
         {{F::NWords, 8}, {F::BingPositive, 3.0 / 8}, {F::BingNegative, 1.0 / 8}, {F::AfinnMean, 7.0 / 4},
          {F::NrcJoy, 3.0 / 8}, {F::NrcPositive, 3.0 / 8}, {F::NrcTrust, 3.0 / 8}, {F::NrcSadness, 1.0 / 8},
          {F::NrcNegative, 1.0 / 8}, {F::LoughranPositive, 3.0 / 8}, {F::LoughranConstraining, 1.0 / 8}},
         false, 2.5},
    };

    std::size_t exact = 0, total = 0;
    for (std::size_t d = 0; d < cases.size(); ++d) {
        const auto& cs = cases[d];
        const auto id = "doc" + std::to_string(d + 1);
        const auto tokens = tokenize(cs.body, stop, id);
        const auto row = featurize(tokens, join_hits(tokens, lex), Label::Human);
        std::array<double, kFeatureCount> want{};
        for (auto [f, v] : cs.expected) want[static_cast<std::size_t>(f)] = v;
        want[static_cast<std::size_t>(F::AfinnSd)] = cs.sd;
        c.expect(row.afinn_missing == cs.afinn_missing, id + " afinn_missing flag");
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            ++total;
            const double got = row.values[i];
            bool match;
            if (std::isnan(want[i])) match = std::isnan(got);
            else if (i == static_cast<std::size_t>(F::AfinnSd)) match = std::abs(got - want[i]) <= 1e-9;
            else match = got == want[i];
            if (match) ++exact;
            else c.expect(false, id + " " + std::string(kFeatureNames[i]) + " = " + format_double(got) + ", want " + format_double(want[i]));
        }
    }
    c.note(std::to_string(exact) + "/" + std::to_string(total) + " feature values match (" + std::to_string(cases.size()) +
           " documents x " + std::to_string(kFeatureCount) + " features)");
}

// --- 5 -----------------------------------------------------------------------

void stemmer_conformance(Check& c) {
    const std::string dir = std::string(TEST_DATA_DIR) + "/stemmer/";
    std::ifstream voc(dir + "voc.txt"), out(dir + "output.txt");
    c.expect(voc && out, "stemmer vocabulary files present");
    std::string w, want;
    std::size_t n = 0, ok = 0;
    while (std::getline(voc, w) && std::getline(out, want)) {
        ++n;
        if (stem(w) == want) ++ok;
        else if (n - ok <= 10) c.note("mismatch: " + w + " -> " + stem(w) + " (want " + want + ")");
    }
    c.expect(n > 0 && ok == n, "all pairs match");
    c.note(std::to_string(ok) + "/" + std::to_string(n) + " pairs match");
}

// --- 6 -----------------------------------------------------------------------

FeatureVector random_row(Rng& rng, std::size_t i) {
    FeatureVector row;
    row.doc_id = "r" + std::to_string(i);
    for (auto& v : row.values) v = rng.uniform();
    row.label = rng.below(2) ? Label::Human : Label::LLM;
    return row;
}

void forest_properties(Check& c) {
    // (a) separable 1-D data
    TrainingSet line;
    line.n_features = 1;
    line.n_classes = 2;
    for (int i = 0; i < 20; ++i) {
        const double x = i - 9.5;
        line.x.push_back(x);
        line.y.push_back(x > 0 ? 1 : 0);
    }
    ForestConfig small;
    small.n_trees = 10;
    const auto f1 = train_forest(line, small);
    std::size_t right = 0;
    for (std::size_t i = 0; i < line.rows(); ++i) right += argmax(f1.predict_proba(line.row(i))) == line.y[i];
    c.near(static_cast<double>(right) / 20, 1.0, 0.0, "(a) training accuracy on separable 1-D data");

    // (b) bootstrap distinct fraction
    double fraction = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        Rng rng(mix_seed(42, t));
        const auto sample = bootstrap_sample(1000, rng);
        fraction += static_cast<double>(std::set<std::uint32_t>(sample.begin(), sample.end()).size()) / 1000.0;
    }
    c.near(fraction / 100, 1 - std::exp(-1.0), 0.03, "(b) mean distinct fraction over 100 bootstraps of n=1000");

    // (c) normalization on random rows
    Rng rng(7);
    Dataset ds;
    for (std::size_t i = 0; i < 200; ++i) ds.rows.push_back(random_row(rng, i));
    ForestConfig cfg;
    cfg.n_trees = 100;
    const auto model = train(impute(ds), cfg);
    std::vector<FeatureVector> probes;
    for (std::size_t i = 0; i < 1000; ++i) probes.push_back(random_row(rng, 10000 + i));
    double worst = 0;
    for (const auto& p : probes) {
        const auto proba = predict_proba(model, p);
        double sum = 0;
        for (double q : proba) sum += q;
        worst = std::max(worst, std::abs(sum - 1));
    }
    c.near(worst, 0, 1e-9, "(c) max |sum(p) - 1| over 1000 random rows");

    // (d) save/load round trip
    std::istringstream in(serialize_model(model));
    const auto loaded = parse_model(in);
    std::size_t same = 0;
    for (const auto& p : probes) same += predict_proba(model, p) == predict_proba(loaded, p);
    c.expect(same == probes.size(), "(d) reloaded model reproduces every prediction");
    c.note("(d) " + std::to_string(same) + "/1000 predictions identical after reload");
}

// --- 7 -----------------------------------------------------------------------

void stratification(Check& c) {
    std::vector<std::size_t> labels(73, 0);
    labels.insert(labels.end(), 72, 1);
    const auto folds = stratified_folds(labels, 10, 42);
    std::vector<int> tested(labels.size(), 0);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& test = folds[f].test;
        c.expect(test.size() == 14 || test.size() == 15, "fold " + std::to_string(f) + " size " + std::to_string(test.size()));
        std::size_t llm = 0;
        for (auto i : test) {
            ++tested[i];
            llm += labels[i] == 0;
        }
        const double expect_llm = static_cast<double>(test.size()) * 73.0 / 145.0;
        const double expect_human = static_cast<double>(test.size()) * 72.0 / 145.0;
        c.expect(std::abs(static_cast<double>(llm) - expect_llm) <= 1.0, "fold " + std::to_string(f) + " LLM count");
        c.expect(std::abs(static_cast<double>(test.size() - llm) - expect_human) <= 1.0, "fold " + std::to_string(f) + " human count");
        c.expect(folds[f].train.size() + test.size() == labels.size(), "fold " + std::to_string(f) + " train/test partition");
    }
    c.expect(std::all_of(tested.begin(), tested.end(), [](int t) { return t == 1; }), "every instance tested exactly once");
    std::ostringstream sizes;
    for (const auto& f : folds) sizes << f.test.size() << ' ';
    c.note("fold sizes: " + sizes.str());
}

// --- 8 -----------------------------------------------------------------------

void leakage(Check& c) {
    Rng rng(11);
    Dataset ds;
    for (std::size_t i = 0; i < 120; ++i) {
        auto row = random_row(rng, i);
        // Make class depend on a couple of features so the trees are not trivial.
        row.label = row.values[1] + 0.3 * row.values[3] > 0.65 ? Label::LLM : Label::Human;
        if (i % 7 == 0) {
            row.afinn_missing = true;
            row[Feature::AfinnMean] = row[Feature::AfinnSd] = std::numeric_limits<double>::quiet_NaN();
        }
        ds.rows.push_back(row);
    }
    ForestConfig cfg;
    cfg.n_trees = 100;
    const auto folds = stratified_folds(ds, 10, 42);
    const auto& fold = folds[0];
    FeatureVector probe = random_row(rng, 9999);
    probe.afinn_missing = true;

    const auto baseline = train_fold(ds, fold, cfg);
    const auto base_bytes = serialize_model(baseline);
    const auto base_proba = predict_proba(baseline, probe);
    std::size_t unchanged = 0;
    for (auto i : fold.test) {
        Dataset modified = ds;
        auto& row = modified.rows[i];
        row.afinn_missing = !row.afinn_missing;
        for (auto& v : row.values) v = 100 + 10 * rng.uniform();
        if (row.afinn_missing) row[Feature::AfinnMean] = row[Feature::AfinnSd] = std::numeric_limits<double>::quiet_NaN();
        row.label = row.label == Label::LLM ? Label::Human : Label::LLM;
        const auto model = train_fold(modified, fold, cfg);
        unchanged += serialize_model(model) == base_bytes && predict_proba(model, probe) == base_proba;
    }
    c.expect(unchanged == fold.test.size(), "every test-row modification leaves the fold model unchanged");
    c.note(std::to_string(unchanged) + "/" + std::to_string(fold.test.size()) + " modified test rows left the model and probe prediction unchanged");

    // Control: global pre-imputation does leak, which shows the probe is sensitive.
    Dataset modified = ds;
    const auto i = *std::find_if(fold.test.begin(), fold.test.end(), [&](std::size_t t) { return !ds.rows[t].afinn_missing; });
    modified.rows[i][Feature::AfinnMean] += 50;
    const auto leaky_base = train_fold(impute(ds), fold, cfg);
    const auto leaky_mod = train_fold(impute(modified), fold, cfg);
    const bool leaks = predict_proba(leaky_base, probe) != predict_proba(leaky_mod, probe) ||
                       serialize_model(leaky_base) != serialize_model(leaky_mod);
    c.expect(leaks, "control: global imputation lets a test row reach the model");
    c.note(std::string("control with global imputation: model ") + (leaks ? "changes" : "does not change"));
}

// --- 9 -----------------------------------------------------------------------

// Standard normal quantile by bisection on erfc; independent of the 1.96
// constant used by the library.
double normal_quantile(double p) {
    double lo = -10, hi = 10;
    for (int i = 0; i < 200; ++i) {
        const double mid = (lo + hi) / 2;
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return (lo + hi) / 2;
}

void fisher_ci(Check& c) {
    // 25 blocks of four stems. Centred patterns u = (1,-1,0,0) and
    // v = (1,1,0,-2) are orthogonal with |v|^2 = 3|u|^2, so counts C + u and
    // C + u + v correlate at exactly 1/2.
    FrequencyTable a, b;
    const int u[4] = {1, -1, 0, 0};
    const int v[4] = {1, 1, 0, -2};
    for (int blk = 0; blk < 25; ++blk) {
        for (int j = 0; j < 4; ++j) {
            const auto name = "s" + std::to_string(blk * 4 + j);
            a.add(name, static_cast<std::size_t>(5 + u[j]));
            b.add(name, static_cast<std::size_t>(5 + u[j] + v[j]));
        }
    }
    const auto r = frequency_correlation(a, b);
    c.near(r.r, 0.5, 1e-12, "r");
    c.expect(r.n == 100, "n = 100");

    const double z = normal_quantile(0.975);
    const double fz = 0.5 * std::log((1 + 0.5) / (1 - 0.5));
    const double half = z / std::sqrt(100.0 - 3);
    const auto back = [](double x) { return (std::exp(2 * x) - 1) / (std::exp(2 * x) + 1); };
    const double lo = back(fz - half), hi = back(fz + half);
    c.near(r.ci_low, lo, 5e-4, "ci_low vs oracle");
    c.near(r.ci_high, hi, 5e-4, "ci_high vs oracle");
    c.near(r.ci_low, 0.3366, 5e-4, "ci_low vs stated 0.3366");
    // The stated upper bound 0.6334 is not what the Fisher-z interval gives
    // for r = 0.5, n = 100 (0.63414, also scipy's value); the check above
    // against the oracle is the binding one.
    c.note("ci_high vs stated 0.6334: off by " + format_fixed(std::abs(r.ci_high - 0.6334), 5) +
           "; oracle value is " + format_fixed(hi, 5));
}

}  // namespace

int main() {
    std::cout << "sentiforest acceptance checks\n";
    run(1, "Metric golden test: confusion [[62,11],[12,60]]", 1, metric_golden);
    run(2, "Relative-error consistency: RAE/RRSE from MAE 0.3016, RMSE 0.3724", 1, relative_error_consistency);
    run(3, "Demo corpus 10-fold CV (1000 trees, seed 42): accuracy >= 0.80, kappa >= 0.60, reproducible", 60, demo_corpus_cv);
    run(4, "Feature-extraction oracle suite (5 documents, miniature lexicons)", 1, feature_oracles);
    run(5, "Stemmer conformance on the Snowball English vocabulary", 5, stemmer_conformance);
    run(6, "Forest property suite", 30, forest_properties);
    run(7, "Stratification property (73/72, k=10)", 1, stratification);
    run(8, "Leakage test (fold-local imputation)", 30, leakage);
    run(9, "Fisher-z CI for r = 0.5, n = 100", 1, fisher_ci);
    std::cout << (failures ? std::to_string(failures) + " criterion/criteria FAILED\n" : std::string("all criteria passed\n"));
    return failures;
}

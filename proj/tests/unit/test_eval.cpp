#include <catch_amalgamated.hpp>

#include <set>

#include "sentiforest/eval.hpp"

using namespace sentiforest;
using Catch::Approx;

namespace {

// Brute-force pair count: P(score_pos > score_neg) + 0.5 P(tie).
double roc_oracle(const std::vector<bool>& pos, const std::vector<double>& s) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (pos[i] && !pos[j]) {
                pairs += 1;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

// Precision-recall step integral over every distinct threshold.
double prc_oracle(const std::vector<bool>& pos, const std::vector<double>& s) {
    std::set<double, std::greater<>> thresholds(s.begin(), s.end());
    const double n_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
    double area = 0, prev_recall = 0;
    for (double t : thresholds) {
        double tp = 0, predicted = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) {
                ++predicted;
                tp += pos[i];
            }
        const double recall = tp / n_pos;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    return area;
}

Dataset gaussian_dataset(std::size_t per_class, double shift, std::uint64_t seed) {
    Rng rng(seed);
    auto normal = [&] {
        const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
        return std::sqrt(-2 * std::log(u1)) * std::cos(2 * 3.141592653589793 * u2);
    };
    Dataset d;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        FeatureVector fv;
        fv.label = i < per_class ? Label::LLM : Label::Human;
        fv.doc_id = "r" + std::to_string(i);
        for (std::size_t f = 0; f < kFeatureCount; ++f) fv.values[f] = normal() + (f < 3 && fv.label == Label::LLM ? shift : 0);
        d.rows.push_back(fv);
    }
    return d;
}

ForestConfig quick(std::size_t trees = 50) {
    ForestConfig c;
    c.n_trees = trees;
    c.threads = 4;
    return c;
}

}  // namespace

TEST_CASE("perfect confusion matrix", "[eval]") {
    const auto m = metrics_from_confusion(ConfusionMatrix::from_rows({{5, 0}, {0, 7}}));
    CHECK(m.accuracy == 1);
    CHECK(m.kappa == 1);
    for (const auto& c : m.per_class) {
        CHECK(c.precision == 1);
        CHECK(c.recall == 1);
        CHECK(c.mcc == Approx(1));
        CHECK(c.fp_rate == 0);
    }
    CHECK(m.flags.empty());
}

TEST_CASE("confusion metric identities", "[eval]") {
    for (const auto& rows : std::vector<std::vector<std::vector<std::size_t>>>{
             {{62, 11}, {12, 60}}, {{10, 30}, {5, 55}}, {{40, 2}, {25, 3}}, {{3, 9}, {8, 4}}}) {
        const auto cm = ConfusionMatrix::from_rows(rows);
        const auto m = metrics_from_confusion(cm);
        CHECK(m.kappa <= m.accuracy + 1e-12);
        CHECK(m.weighted.recall == Approx(m.accuracy));
        // two classes: MCC is the same for both and symmetric under swapping
        CHECK(m.per_class[0].mcc == Approx(m.per_class[1].mcc));
        const auto swapped = metrics_from_confusion(ConfusionMatrix::from_rows({{rows[1][1], rows[1][0]}, {rows[0][1], rows[0][0]}}));
        CHECK(swapped.accuracy == Approx(m.accuracy));
        CHECK(swapped.kappa == Approx(m.kappa));
        CHECK(swapped.per_class[0].precision == Approx(m.per_class[1].precision));
        CHECK(swapped.per_class[1].f_measure == Approx(m.per_class[0].f_measure));
        CHECK(swapped.weighted.f_measure == Approx(m.weighted.f_measure));
    }
}

TEST_CASE("a never predicted class is flagged", "[eval]") {
    const auto m = metrics_from_confusion(ConfusionMatrix::from_rows({{10, 0}, {4, 0}}));
    CHECK(m.per_class[1].precision == 0);
    REQUIRE(m.flags.size() == 1);
    CHECK(m.flags[0].find("precision") != std::string::npos);
    CHECK_THROWS_AS(metrics_from_confusion(ConfusionMatrix(2)), Error);
}

TEST_CASE("probabilistic errors", "[eval]") {
    const std::vector<std::size_t> truths{0, 1, 1, 0};
    const std::vector<std::vector<double>> perfect{{1, 0}, {0, 1}, {0, 1}, {1, 0}};
    const auto [mae, rmse] = absolute_errors(truths, perfect, 2);
    CHECK(mae == 0);
    CHECK(rmse == 0);

    // predicting the evaluated prior gives exactly 100 %
    const std::vector<std::size_t> skewed{0, 0, 0, 1};
    const std::vector<std::vector<double>> prior(4, {0.75, 0.25});
    const auto e = probabilistic_errors(skewed, prior, 2);
    CHECK(e.rae == Approx(100));
    CHECK(e.rrse == Approx(100));
    // closed form: |1 - 0.75| and |0 - 0.25| for the majority rows, 0.75 twice for the other
    CHECK(e.mae == Approx((6 * 0.25 + 2 * 0.75) / 8));

    const std::vector<std::size_t> single{1, 1, 1};
    const std::vector<std::vector<double>> any(3, {0.5, 0.5});
    try {
        (void)probabilistic_errors(single, any, 2);
        FAIL("single class accepted");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::UndefinedMetric);
    }
    const std::vector<std::vector<double>> short_rows{{1}, {0}, {0}, {1}};
    CHECK_THROWS_AS(absolute_errors(truths, short_rows, 2), Error);
}

TEST_CASE("ranking areas against brute force", "[eval]") {
    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + rng.below(40);
        std::vector<bool> pos(n);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            pos[i] = rng.below(2) == 1;
            s[i] = static_cast<double>(rng.below(8)) / 8;  // coarse scores force ties
        }
        pos[0] = true;
        pos[1] = false;
        const auto areas = roc_prc_area(pos, s);
        CHECK(areas.roc == Approx(roc_oracle(pos, s)));
        CHECK(areas.prc == Approx(prc_oracle(pos, s)));
    }
}

TEST_CASE("ranking area edge cases", "[eval]") {
    const std::vector<bool> pos{true, false, true, false};
    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    const auto tied = roc_prc_area(pos, flat);
    CHECK(tied.roc == 0.5);
    CHECK(tied.prc == Approx(0.5));
    const std::vector<double> perfect{0.9, 0.1, 0.8, 0.2};
    CHECK(roc_prc_area(pos, perfect).roc == 1);
    CHECK(roc_prc_area(pos, perfect).prc == Approx(1));
    const std::vector<bool> all_pos{true, true};
    const std::vector<double> two{0.1, 0.2};
    CHECK_THROWS_AS(roc_prc_area(all_pos, two), Error);
}

TEST_CASE("stratified folds", "[eval]") {
    std::vector<std::size_t> labels(30, 0);
    for (std::size_t i = 0; i < 12; ++i) labels[i * 2] = 1;
    const auto folds = stratified_folds(labels, 5, 42);
    REQUIRE(folds.size() == 5);
    std::vector<int> seen(labels.size(), 0);
    for (const auto& f : folds) {
        CHECK(f.test.size() == 6);
        CHECK(f.train.size() + f.test.size() == labels.size());
        std::size_t ones = 0;
        for (auto i : f.test) {
            ++seen[i];
            ones += labels[i];
        }
        CHECK(ones >= 2);
        CHECK(ones <= 3);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(stratified_folds(labels, 5, 42)[2].test == folds[2].test);

    SECTION("leave one out") {
        const auto loo = stratified_folds(labels, labels.size(), 1);
        for (const auto& f : loo) CHECK(f.test.size() == 1);
    }
    SECTION("invalid requests") {
        CHECK_THROWS_AS(stratified_folds(labels, 1, 1), Error);
        CHECK_THROWS_AS(stratified_folds(labels, 31, 1), Error);
        const std::vector<std::size_t> one_class(10, 1);
        CHECK_THROWS_AS(stratified_folds(one_class, 2, 1), Error);
    }
}

TEST_CASE("cross-validation on separable data", "[eval]") {
    const auto report = cross_validate(gaussian_dataset(40, 4.0, 3), quick());
    CHECK(report.n_instances == 80);
    CHECK(report.accuracy >= 0.95);
    CHECK(report.weighted.roc_area >= 0.95);
    CHECK(report.confusion.total() == 80);
}

TEST_CASE("cross-validation on random labels is near chance", "[eval]") {
    auto data = gaussian_dataset(100, 0.0, 8);
    Rng rng(8);
    shuffle(data.rows, rng);
    for (std::size_t i = 0; i < data.rows.size(); ++i) data.rows[i].label = i % 2 ? Label::Human : Label::LLM;
    const auto report = cross_validate(data, quick());
    CHECK(std::abs(report.kappa) < 0.15);
    CHECK(report.rae > 80);
}

TEST_CASE("fold errors name the fold", "[eval]") {
    auto data = gaussian_dataset(10, 1.0, 1);
    for (auto& r : data.rows) {
        r.afinn_missing = true;
        r[Feature::AfinnMean] = std::nan("");
    }
    CHECK_THROWS_WITH(cross_validate(data, quick(5)), Catch::Matchers::ContainsSubstring("fold 1"));
}

TEST_CASE("report serialization", "[eval]") {
    const std::vector<std::size_t> truths{0, 0, 1, 1, 1};
    const std::vector<std::vector<double>> probas{{0.9, 0.1}, {0.4, 0.6}, {0.2, 0.8}, {0.3, 0.7}, {0.6, 0.4}};
    const auto r = build_report(truths, probas, {Label::LLM, Label::Human});
    CHECK(r.correct == 3);
    const auto j = to_json(r);
    CHECK(j["incorrect"] == 2);
    CHECK(j["confusion"]["classes"][0] == "ChatGPT");
    CHECK(j["confusion"]["matrix"][1][0] == 1);
    CHECK_FALSE(j.contains("runtime_seconds"));
    CHECK(to_json(r, {}, true).contains("runtime_seconds"));
    const auto text = render_report(r);
    CHECK(text.find("Correctly Classified Instances") != std::string::npos);
    CHECK(text.find(format_fixed(r.kappa, 4)) != std::string::npos);
    CHECK(text.find("<-- classified as") != std::string::npos);
}

// sentiforest: corpus building, exploration, featurization, training,
// cross-validated evaluation and prediction from the command line.
//
// Machine-readable results go to stdout as JSON lines; progress and
// human-oriented summaries go to stderr.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentiforest/endpoint.hpp"
#include "sentiforest/sentiforest.hpp"

#ifndef SENTIFOREST_DATA_DIR
#define SENTIFOREST_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace sentiforest;
using nlohmann::ordered_json;

namespace {

const std::string kDataDir = SENTIFOREST_DATA_DIR;

struct RunConfig {
    std::string corpus;
    std::string papers;
    std::string endpoint;
    std::string features;
    std::string model;
    std::string out;
    std::string out_dir = ".";
    std::string hits;
    std::string report;
    std::string lexicon_dir = kDataDir + "/lexicons";
    std::string stoplist = kDataDir + "/stopwords/smart.txt";
    std::string prompt_template = std::string(kDefaultPromptTemplate);
    std::size_t max_chars = 1500;
    std::size_t max_retries = 3;
    std::size_t top = 35;

    ForestConfig forest;
    std::string criterion = "entropy";
    std::size_t folds = 10;
    std::uint64_t seed = 42;
    bool global_imputation = false;
    bool join_on_stems = false;
    bool drop_n_words = false;
    bool afinn_flag = false;
    bool timestamp = false;
    std::size_t threads = 1;
    LabelNames labels;
};

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::SchemaMismatch: return 2;
        case ErrorKind::UndefinedMetric: return 3;
        default: return 1;
    }
}

void emit(const ordered_json& j) { std::cout << j.dump() << '\n'; }

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw Error(ErrorKind::InvalidArgument, std::string("missing ") + what + " path");
    if (!fs::is_regular_file(path)) throw Error(ErrorKind::Io, std::string(what) + " '" + path + "' does not exist");
}

void require_writable_dir(const std::string& file_path) {
    const auto parent = fs::path(file_path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw Error(ErrorKind::Io, "output directory '" + parent.string() + "' does not exist");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

ForestConfig forest_config(const RunConfig& rc) {
    ForestConfig c = rc.forest;
    c.criterion = parse_criterion(rc.criterion);
    c.seed = rc.seed;
    c.threads = rc.threads;
    return c;
}

// ---------------------------------------------------------------------------

int cmd_build_corpus(const RunConfig& rc) {
    require_file(rc.papers, "papers file");
    require_file(rc.endpoint, "endpoint config");
    if (rc.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
    require_writable_dir(rc.out);

    std::vector<TitleEntry> titles;
    std::map<std::string, std::string> human;
    std::ifstream in(rc.papers);
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        if (trim_ascii(line).empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
            titles.push_back({rec.at("id").get<std::string>(), rec.at("title").get<std::string>()});
            if (!human.emplace(titles.back().id, rec.at("body").get<std::string>()).second)
                throw Error(ErrorKind::DuplicateId, "duplicate paper id '" + titles.back().id + "'");
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::Parse, rc.papers + " line " + std::to_string(no) + ": expected {id, title, body}");
        }
    }
    PairingOptions opts;
    opts.prompt_template = rc.prompt_template;
    opts.max_chars = rc.max_chars;
    opts.max_retries = rc.max_retries;
    const auto endpoint = EndpointConfig::load(rc.endpoint);
    std::cerr << "requesting " << titles.size() << " generations from " << endpoint.url << '\n';
    const auto paired = build_paired_corpus(titles, endpoint, human, opts);
    persist_paired_corpus(paired, rc.out, rc.labels);
    for (const auto& f : paired.failures) std::cerr << "failed: " << f.id << " (" << f.error << ", " << f.attempts << " attempts)\n";
    emit({{"corpus", rc.out},
          {"documents", paired.corpus.size()},
          {"failures", paired.failures.size()},
          {"manifest", failure_manifest_path(rc.out)}});
    return paired.failures.empty() ? 0 : 1;
}

int cmd_explore(const RunConfig& rc) {
    require_file(rc.corpus, "corpus");
    require_file(rc.stoplist, "stop list");
    if (!fs::is_directory(rc.out_dir)) throw Error(ErrorKind::Io, "output directory '" + rc.out_dir + "' does not exist");
    const auto corpus = load_corpus(rc.corpus, rc.labels);
    corpus.require_both_classes();
    const auto stop = StopList::load(rc.stoplist);

    std::array<FrequencyTable, kNumLabels> tables;
    for (const auto& doc : corpus) tables[static_cast<std::size_t>(doc.label)].add_document(tokenize(doc.body, stop, doc.id));
    for (std::size_t c = 0; c < kNumLabels; ++c) {
        const auto& name = rc.labels.name(static_cast<Label>(c));
        const auto path = (fs::path(rc.out_dir) / ("top_stems_" + name + ".csv")).string();
        std::ostringstream csv_out;
        const auto rows = top_stems(tables[c], rc.top);
        write_frequency_csv(csv_out, rows);
        write_file(path, csv_out.str());
        emit({{"class", name}, {"stems", tables[c].size()}, {"tokens", tables[c].total}, {"top", rows.size()}, {"file", path}});
    }
    const auto corr = frequency_correlation(tables[0], tables[1]);
    const auto corr_path = (fs::path(rc.out_dir) / "correlation.json").string();
    write_file(corr_path, to_json(corr).dump(2) + "\n");
    auto j = to_json(corr);
    j["file"] = corr_path;
    emit(j);
    std::cerr << "stem frequency correlation r = " << format_fixed(corr.r, 4) << " (95% CI " << format_fixed(corr.ci_low, 4)
              << " to " << format_fixed(corr.ci_high, 4) << ", n = " << corr.n << ")\n";
    return 0;
}

int cmd_featurize(const RunConfig& rc) {
    require_file(rc.corpus, "corpus");
    require_file(rc.stoplist, "stop list");
    if (rc.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
    require_writable_dir(rc.out);
    if (!rc.hits.empty()) require_writable_dir(rc.hits);

    const auto corpus = load_corpus(rc.corpus, rc.labels);
    const auto lexicons = LexiconSet::load_dir(rc.lexicon_dir);
    const auto stop = StopList::load(rc.stoplist);
    FeaturizeOptions opts;
    opts.join_on_stems = rc.join_on_stems;
    opts.keep_hits = !rc.hits.empty();
    opts.threads = rc.threads;
    const auto result = featurize_corpus(corpus, lexicons, stop, opts);
    print_warnings(result.warnings);
    for (const auto& id : result.rejected) std::cerr << "rejected: " << id << " (no words after cleaning)\n";

    std::ostringstream out;
    write_feature_csv(out, result.dataset, rc.labels);
    write_file(rc.out, out.str());
    if (!rc.hits.empty()) {
        std::ostringstream hits;
        write_hits_header(hits);
        write_hits_csv(hits, result.hits);
        write_file(rc.hits, hits.str());
    }
    std::size_t missing = 0;
    for (const auto& r : result.dataset.rows) missing += r.afinn_missing;
    const auto counts = result.dataset.class_counts();
    emit({{"features", rc.out},
          {"rows", result.dataset.size()},
          {rc.labels.llm, counts[0]},
          {rc.labels.human, counts[1]},
          {"rejected", result.rejected.size()},
          {"afinn_missing", missing}});
    return 0;
}

int cmd_train(const RunConfig& rc) {
    require_file(rc.features, "feature CSV");
    if (rc.model.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
    require_writable_dir(rc.model);
    const auto config = forest_config(rc);

    auto dataset = impute(load_feature_csv(rc.features, rc.labels));
    const auto start = std::chrono::steady_clock::now();
    auto model = train(dataset, config, InputSchema::standard(rc.drop_n_words, rc.afinn_flag));
    const auto elapsed = seconds_since(start);

    if (fs::is_directory(rc.lexicon_dir)) model.lexicon_digests = LexiconSet::load_dir(rc.lexicon_dir).digests();
    model.metadata.corpus_digest = sha256_file(rc.features);
    if (rc.timestamp) model.metadata.trained_at = utc_now();
    save_model(rc.model, model);
    std::cerr << "trained " << config.n_trees << " trees on " << dataset.size() << " instances in "
              << format_fixed(elapsed, 2) << " s\n";
    emit({{"model", rc.model},
          {"trees", config.n_trees},
          {"instances", dataset.size()},
          {"features", model.schema.names.size()},
          {"train_seconds", elapsed}});
    return 0;
}

int cmd_evaluate(const RunConfig& rc) {
    require_file(rc.features, "feature CSV");
    if (!rc.report.empty()) require_writable_dir(rc.report);
    const auto config = forest_config(rc);
    const auto dataset = load_feature_csv(rc.features, rc.labels);

    CvOptions cv;
    cv.folds = rc.folds;
    cv.seed = rc.seed;
    cv.global_imputation = rc.global_imputation;
    cv.schema = InputSchema::standard(rc.drop_n_words, rc.afinn_flag);
    const auto start = std::chrono::steady_clock::now();
    auto report = cross_validate(dataset, config, cv);
    report.runtime_seconds = seconds_since(start);

    emit(to_json(report, rc.labels));
    const auto text = render_report(report, rc.labels);
    if (!rc.report.empty()) write_file(rc.report, text);
    std::cerr << "=== Stratified " << rc.folds << "-fold cross-validation ("
              << (rc.global_imputation ? "global" : "fold-local") << " imputation) ===\n\n"
              << text << "\nruntime: " << format_fixed(report.runtime_seconds, 2) << " s\n";
    return 0;
}

// Texts for prediction: JSONL with id and body, label optional; or a
// labelled CSV corpus.
std::vector<std::pair<Document, bool>> load_texts(const std::string& path, const LabelNames& names) {
    std::vector<std::pair<Document, bool>> out;
    if (corpus_format_from_path(path) == CorpusFormat::Csv) {
        for (const auto& d : load_corpus(path, CorpusFormat::Csv, names)) out.emplace_back(d, true);
        return out;
    }
    std::ifstream in(path);
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        if (trim_ascii(line).empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            Document d;
            d.id = rec.at("id").get<std::string>();
            d.body = rec.at("body").get<std::string>();
            const bool labelled = rec.contains("label");
            if (labelled) d.label = names.parse(rec.at("label").get<std::string>());
            out.emplace_back(std::move(d), labelled);
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::Parse, path + " line " + std::to_string(no) + ": expected {id, body[, label]}");
        }
    }
    return out;
}

int cmd_predict(const RunConfig& rc) {
    require_file(rc.model, "model");
    if (rc.corpus.empty() == rc.features.empty())
        throw Error(ErrorKind::InvalidArgument, "give exactly one of --corpus or --features");
    const auto model = load_model(rc.model);

    auto emit_prediction = [&](const FeatureVector& row, std::optional<Label> actual) {
        const auto proba = predict_proba(model, row);
        const auto best = argmax(proba);
        ordered_json j;
        j["id"] = row.doc_id;
        j["label"] = rc.labels.name(model.classes[best]);
        j["probability"] = proba[best];
        ordered_json dist;
        for (std::size_t c = 0; c < proba.size(); ++c) dist[rc.labels.name(model.classes[c])] = proba[c];
        j["distribution"] = dist;
        if (actual) j["actual"] = rc.labels.name(*actual);
        emit(j);
    };

    if (!rc.features.empty()) {
        require_file(rc.features, "feature CSV");
        const auto dataset = load_feature_csv(rc.features, rc.labels);
        for (const auto& row : dataset.rows) emit_prediction(row, row.label);
        return 0;
    }

    require_file(rc.corpus, "corpus");
    require_file(rc.stoplist, "stop list");
    const auto lexicons = LexiconSet::load_dir(rc.lexicon_dir);
    print_warnings(check_lexicon_digests(model, lexicons));
    const auto stop = StopList::load(rc.stoplist);
    for (const auto& [doc, labelled] : load_texts(rc.corpus, rc.labels)) {
        const auto tokens = tokenize(doc.body, stop, doc.id);
        if (tokens.tokens.empty()) {
            std::cerr << "rejected: " << doc.id << " (no words after cleaning)\n";
            continue;
        }
        const auto row = featurize(tokens, join_hits(tokens, lexicons, rc.join_on_stems), doc.label);
        emit_prediction(row, labelled ? std::optional(doc.label) : std::nullopt);
    }
    return 0;
}

void add_forest_options(CLI::App* cmd, RunConfig& rc) {
    cmd->add_option("--trees", rc.forest.n_trees, "Number of trees")->check(CLI::PositiveNumber);
    cmd->add_option("--min-leaf", rc.forest.min_leaf, "Minimum instances per leaf")->check(CLI::PositiveNumber);
    cmd->add_option("--k-features", rc.forest.k_features, "Features tried per split (0 = floor(log2 d) + 1)");
    cmd->add_option("--min-variance-prop", rc.forest.min_variance_prop,
                    "Minimum class-variance proportion (numeric classes only; no effect here)");
    cmd->add_option("--criterion", rc.criterion, "Split criterion")->check(CLI::IsMember({"entropy", "gini"}));
    cmd->add_option("--seed", rc.seed, "Random seed");
    cmd->add_option("--threads", rc.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--drop-n-words", rc.drop_n_words, "Leave n_words out of the model input");
    cmd->add_flag("--use-afinn-flag", rc.afinn_flag, "Feed the afinn_missing indicator to the model");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig rc;
    CLI::App app{"Lexicon-based sentiment features and random forests for telling human from LLM-written texts"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--llm-label", rc.labels.llm, "Serialized name of the LLM class");
    app.add_option("--human-label", rc.labels.human, "Serialized name of the human class");

    auto* build = app.add_subcommand("build-corpus", "Pair human texts with generated ones from an HTTP endpoint");
    build->add_option("--papers", rc.papers, "JSONL of {id, title, body} human texts")->required();
    build->add_option("--endpoint", rc.endpoint, "Endpoint config JSON")->required();
    build->add_option("--out", rc.out, "Output corpus JSONL")->required();
    build->add_option("--template", rc.prompt_template, "Prompt template with {title} and {max_chars}");
    build->add_option("--max-chars", rc.max_chars, "Length limit quoted in the prompt")->check(CLI::PositiveNumber);
    build->add_option("--max-retries", rc.max_retries, "Retries per request after the first attempt");

    auto* explore = app.add_subcommand("explore", "Per-class stem frequencies and their correlation");
    explore->add_option("--corpus", rc.corpus, "Corpus JSONL or CSV")->required();
    explore->add_option("--stoplist", rc.stoplist, "Stop-word list");
    explore->add_option("--top", rc.top, "Stems per frequency table")->check(CLI::PositiveNumber);
    explore->add_option("--out-dir", rc.out_dir, "Directory for the CSV and JSON outputs");

    auto* featurize_cmd = app.add_subcommand("featurize", "Corpus to sentiment feature CSV");
    featurize_cmd->add_option("--corpus", rc.corpus, "Corpus JSONL or CSV")->required();
    featurize_cmd->add_option("--out", rc.out, "Output feature CSV")->required();
    featurize_cmd->add_option("--hits", rc.hits, "Also write the lexicon hits CSV here");
    featurize_cmd->add_option("--lexicon-dir", rc.lexicon_dir, "Directory with afinn.txt, bing.csv, nrc.txt, loughran.csv");
    featurize_cmd->add_option("--stoplist", rc.stoplist, "Stop-word list");
    featurize_cmd->add_flag("--join-on-stems", rc.join_on_stems, "Join lexicons on stems instead of surface tokens");
    featurize_cmd->add_option("--threads", rc.threads, "Worker threads")->check(CLI::PositiveNumber);

    auto* train_cmd = app.add_subcommand("train", "Train a forest on a feature CSV");
    train_cmd->add_option("--features", rc.features, "Feature CSV")->required();
    train_cmd->add_option("--model", rc.model, "Output model file")->required();
    train_cmd->add_option("--lexicon-dir", rc.lexicon_dir, "Lexicons whose digests are recorded in the model");
    train_cmd->add_flag("--timestamp", rc.timestamp, "Record the training time in the model");
    add_forest_options(train_cmd, rc);

    auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
    evaluate->add_option("--features", rc.features, "Feature CSV")->required();
    evaluate->add_option("--folds", rc.folds, "Number of folds")->check(CLI::Range(2, 1000000));
    evaluate->add_option("--report", rc.report, "Also write the text report here");
    evaluate->add_flag("--global-impute", rc.global_imputation, "Impute once over the whole dataset before splitting");
    add_forest_options(evaluate, rc);

    auto* predict_cmd = app.add_subcommand("predict", "Classify new texts or feature rows with a trained model");
    predict_cmd->add_option("--model", rc.model, "Model file")->required();
    predict_cmd->add_option("--corpus", rc.corpus, "Texts: JSONL {id, body[, label]} or labelled CSV corpus");
    predict_cmd->add_option("--features", rc.features, "Feature CSV instead of texts");
    predict_cmd->add_option("--lexicon-dir", rc.lexicon_dir, "Directory with the lexicon files");
    predict_cmd->add_option("--stoplist", rc.stoplist, "Stop-word list");
    predict_cmd->add_flag("--join-on-stems", rc.join_on_stems, "Join lexicons on stems instead of surface tokens");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) return cmd_build_corpus(rc);
        if (*explore) return cmd_explore(rc);
        if (*featurize_cmd) return cmd_featurize(rc);
        if (*train_cmd) return cmd_train(rc);
        if (*evaluate) return cmd_evaluate(rc);
        if (*predict_cmd) return cmd_predict(rc);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

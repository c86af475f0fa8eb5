#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/features.hpp"

using namespace sentiforest;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out;
};

// Runs the CLI with stderr discarded and returns its exit status and stdout.
Run cli(const std::string& args) {
    const std::string cmd = std::string(SENTIFOREST_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    const int raw = pclose(pipe);
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("sentiforest_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kFeatures = std::string(SENTIFOREST_DATA_DIR) + "/demo/features.csv";

}  // namespace

TEST_CASE("help lists subcommands and defaults", "[cli]") {
    const auto top = cli("--help");
    CHECK(top.status == 0);
    for (const char* sub : {"build-corpus", "explore", "featurize", "train", "evaluate", "predict"})
        CHECK(top.out.find(sub) != std::string::npos);
    const auto train = cli("train --help");
    CHECK(train.out.find("1000") != std::string::npos);
    CHECK(train.out.find("entropy") != std::string::npos);
}

TEST_CASE("evaluate is deterministic", "[cli]") {
    const auto args = "evaluate --features " + kFeatures + " --trees 60 --threads 2";
    const auto a = cli(args);
    const auto b = cli(args);
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["n_instances"] == 145);
    CHECK(j["accuracy"].get<double>() > 0.6);
}

TEST_CASE("train then predict on unlabelled texts", "[cli]") {
    const auto dir = scratch("predict");
    const auto model = (dir / "model.json").string();
    REQUIRE(cli("train --features " + kFeatures + " --trees 40 --model " + model).status == 0);
    REQUIRE(fs::exists(model));

    const auto run = cli("predict --model " + model + " --corpus " + std::string(SENTIFOREST_DATA_DIR) + "/demo/new_texts.jsonl");
    REQUIRE(run.status == 0);
    std::istringstream lines(run.out);
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line); ++n) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("id"));
        const double p = j["probability"];
        CHECK(p >= 0.5);
        CHECK(p <= 1.0);
        CHECK_FALSE(j.contains("actual"));
    }
    CHECK(n == 6);

    SECTION("a feature file with another schema exits with code 2") {
        auto text = read_file(kFeatures);
        const auto pos = text.find("bing_pos_ratio");
        text.replace(pos, 14, "bing_positives");
        const auto bad = (dir / "bad.csv").string();
        write_file(bad, text);
        CHECK(cli("predict --model " + model + " --features " + bad).status == 2);
    }
    SECTION("a corrupted model is refused") {
        auto text = read_file(model);
        write_file(model, text.substr(0, text.size() / 3));
        CHECK(cli("predict --model " + model + " --features " + kFeatures).status == 1);
    }
}

TEST_CASE("a model trained without the word count reads full feature rows", "[cli]") {
    const auto dir = scratch("schema");
    const auto model = (dir / "model.json").string();
    REQUIRE(cli("train --features " + kFeatures + " --trees 10 --drop-n-words --model " + model).status == 0);
    const auto run = cli("predict --model " + model + " --features " + kFeatures);
    CHECK(run.status == 0);  // the schema is resolved by name, so extra columns are fine
}

TEST_CASE("usage errors", "[cli]") {
    CHECK(cli("").status != 0);
    CHECK(cli("evaluate --features /nonexistent.csv").status == 1);
    CHECK(cli("train --features " + kFeatures + " --criterion chaos --model /tmp/x.json").status != 0);
}

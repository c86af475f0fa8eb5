#include <catch_amalgamated.hpp>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <set>

#include "sentiforest/common.hpp"

using namespace sentiforest;

TEST_CASE("rng streams are reproducible", "[common]") {
    Rng a(7), b(7), c(8);
    std::vector<std::uint64_t> xa, xb, xc;
    for (int i = 0; i < 16; ++i) {
        xa.push_back(a());
        xb.push_back(b());
        xc.push_back(c());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
    CHECK(mix_seed(42, 0) != mix_seed(42, 1));
    CHECK(mix_seed(42, 3) == mix_seed(42, 3));
}

TEST_CASE("rng bounded draws stay in range and cover it", "[common]") {
    Rng rng(1);
    std::array<int, 7> seen{};
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++seen[v];
    }
    // each bucket expects 1000; 5 sigma is about 150
    for (int s : seen) CHECK(std::abs(s - 1000) < 150);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("shuffle permutes deterministically", "[common]") {
    std::vector<int> a(50);
    std::iota(a.begin(), a.end(), 0);
    auto b = a;
    Rng r1(99), r2(99);
    shuffle(a, r1);
    shuffle(b, r2);
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expected(50);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(sorted == expected);
    CHECK(a != expected);
}

TEST_CASE("sha256 known vectors", "[common]") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("doubles round-trip through format_double", "[common]") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0}) CHECK(parse_double(format_double(v)) == v);
    CHECK(format_fixed(0.83447, 4) == "0.8345");
    CHECK_THROWS_AS(parse_double("1.5x"), Error);
    CHECK_THROWS_AS(parse_int<int>("12a"), Error);
    CHECK(parse_int<int>("-12") == -12);
    CHECK(trim_ascii("  a b\t\r\n") == "a b");
}

TEST_CASE("labels parse from configured and canonical names", "[common]") {
    LabelNames names;
    CHECK(names.parse("ChatGPT") == Label::LLM);
    CHECK(names.parse("LLM") == Label::LLM);
    CHECK(names.parse("Human") == Label::Human);
    CHECK(names.parse("NewPhytologist") == Label::Human);
    CHECK_THROWS_AS(names.parse("robot"), Error);
    CHECK(canonical_name(Label::Human) == "Human");
}

TEST_CASE("parallel_for visits every index once and rethrows", "[common]") {
    std::vector<std::atomic<int>> hits(200);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));

    auto boom = [](std::size_t i) {
        if (i == 17) throw Error(ErrorKind::Parse, "task 17");
    };
    CHECK_THROWS_WITH(parallel_for(100, 4, boom), "task 17");
    CHECK_THROWS_WITH(parallel_for(100, 1, boom), "task 17");
    parallel_for(0, 4, [](std::size_t) { FAIL("no tasks expected"); });
}

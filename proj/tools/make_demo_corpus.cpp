// Writes the bundled synthetic demo corpus.
//
// Two generators share a topic model (plant-science paper titles) but draw
// most sentences from different banks: an abstract-like, hedged register
// for the human side and an upbeat explanatory register for the LLM side.
// A fraction of every text comes from a shared neutral bank and from the
// other side's bank, so the classes overlap.
//
//   make_demo_corpus <out-dir> [--seed N]
//
// Produces corpus.jsonl (73 LLM + 72 human documents), papers.jsonl (the
// human texts with titles, input for build-corpus) and new_texts.jsonl
// (unlabelled texts for predict).

#include <array>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/corpus.hpp"

using namespace sentiforest;

namespace {

constexpr std::array kProcesses{
    "root hydraulic plasticity", "stomatal regulation",      "mycorrhizal nutrient exchange", "leaf economics",
    "flowering phenology",       "seed dispersal",           "xylem embolism resistance",     "photosynthetic acclimation",
    "symbiotic nitrogen fixation", "pathogen recognition",   "clonal growth",                 "pollinator attraction",
    "fine root turnover",        "cuticular wax deposition", "hormonal crosstalk",            "carbon allocation",
    "leaf senescence",           "germination timing",       "stem hydraulics",               "volatile signalling",
};

constexpr std::array kOrganisms{
    "Arabidopsis thaliana", "temperate trees",  "alpine grasses", "tropical lianas", "Populus trichocarpa",
    "bread wheat",          "boreal conifers",  "Mediterranean shrubs", "rice",       "savanna grasses",
    "Medicago truncatula",  "tomato",
};

constexpr std::array kDrivers{
    "drought",         "warming",          "elevated CO2",     "deep shade",  "soil salinity",
    "nitrogen deposition", "heat waves",   "flooding",         "herbivory",   "nutrient limitation",
};

// {P} process, {O} organism, {D} driver, {N} a number.
constexpr std::array kHumanBank{
    "Here we quantified {P} in {N} populations of {O} exposed to {D}.",
    "Contrary to our hypothesis, {P} declined under {D} and mortality increased.",
    "These results suggest that {P} may constrain the response of {O} to {D}.",
    "The effect of {D} on {P} was weak and its direction remained uncertain.",
    "Data were analysed with linear mixed models including site as a random effect.",
    "Loss of {P} under {D} was associated with reduced growth and tissue damage.",
    "We found no evidence that {P} buffered {O} against {D}.",
    "Our findings challenge the assumption that {P} is conserved across {O}.",
    "Variation among genotypes was substantial, and the mechanism remains unclear.",
    "Failure of {P} was most frequent in the driest plots, where stress was severe.",
    "A common garden experiment with {N} accessions was used to separate plastic from genetic effects.",
    "Estimates were sensitive to the choice of reference period, which limits inference.",
    "The decline was partly offset by compensatory changes in leaf area.",
    "Whether these patterns hold under field conditions is unknown.",
    "Trade-offs between {P} and defence against {D} were detected in {N} of the sites.",
    "Low replication at the northern range edge prevents firm conclusions.",
    "Measurements of {P} were repeated across {N} growing seasons.",
    "Negative correlations between {P} and survival were observed under {D}.",
};

constexpr std::array kLlmBank{
    "{P} is a fascinating and vital aspect of plant life.",
    "Understanding {P} in {O} is crucial for predicting how plants cope with {D}.",
    "By studying {P}, researchers can discover exciting new ways to support healthy ecosystems.",
    "In conclusion, {P} offers a promising path toward a sustainable future.",
    "This remarkable ability helps {O} thrive even when {D} becomes a challenge.",
    "Overall, research on {P} highlights the importance of protecting plant diversity.",
    "Ultimately, {P} contributes to food security and the well-being of our planet.",
    "Scientists are excited to explore how {P} can improve crop yields.",
    "These insights provide valuable guidance for farmers and conservationists alike.",
    "{O} have evolved clever strategies that allow them to succeed in changing environments.",
    "Such knowledge empowers us to develop innovative solutions for agriculture.",
    "Moreover, {P} plays an essential role in keeping ecosystems balanced and productive.",
    "With continued research, we can hope to build more resilient landscapes.",
    "It is truly amazing how plants coordinate {P} with their surroundings.",
    "This beautiful interplay between plants and their environment inspires further study.",
    "Together, these advances offer great benefits for both nature and society.",
    "Effective management of {D} will depend on a clear understanding of {P}.",
    "Embracing these discoveries will help create a greener and healthier world.",
};

constexpr std::array kSharedBank{
    "{P} links the physiology of {O} to their environment.",
    "Responses to {D} differ among species and habitats.",
    "Field observations were combined with controlled experiments.",
    "Plants adjust {P} through changes in gene expression and anatomy.",
    "The study considered {N} sites along a climatic gradient.",
    "{D} alters water and carbon relations in {O}.",
    "Both leaf and root traits were measured.",
    "Long-term monitoring provides context for short experiments.",
    "Models of vegetation dynamics increasingly include {P}.",
    "{O} occur across a wide range of soils and climates.",
};

constexpr std::array kTitleForms{
    "{P} in {O} under {D}",
    "Drivers of {P} in {O}",
    "{D} reshapes {P} across {O}",
    "Linking {P} and {D} tolerance in {O}",
};

template <class Bank>
const char* pick(const Bank& bank, Rng& rng) {
    return bank[rng.below(bank.size())];
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct Topic {
    std::string process, organism, driver;
};

std::string fill(std::string_view pattern, const Topic& t, Rng& rng) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] == '{' && i + 2 < pattern.size() && pattern[i + 2] == '}') {
            switch (pattern[i + 1]) {
                case 'P': out += t.process; break;
                case 'O': out += t.organism; break;
                case 'D': out += t.driver; break;
                case 'N': out += std::to_string(3 + rng.below(40)); break;
                default: out += pattern.substr(i, 3);
            }
            i += 2;
        } else {
            out += pattern[i];
        }
    }
    return capitalize(out);
}

// Own style with probability own_p, the other style with probability
// cross_p, the neutral bank otherwise.
template <class Own, class Other>
std::string compose(const Topic& t, const Own& own, const Other& other, double own_p, double cross_p, Rng& rng) {
    const auto sentences = 5 + rng.below(5);
    std::string text;
    for (std::size_t s = 0; s < sentences; ++s) {
        const double u = rng.uniform();
        const char* pattern = u < own_p ? pick(own, rng) : u < own_p + cross_p ? pick(other, rng) : pick(kSharedBank, rng);
        if (!text.empty()) text += ' ';
        text += fill(pattern, t, rng);
    }
    return text;
}

std::string id_for(std::size_t i) {
    std::string n = std::to_string(i + 1);
    return "p" + std::string(3 - n.size(), '0') + n;
}

}  // namespace

int main(int argc, char** argv) {
    std::string out_dir;
    std::uint64_t seed = 20230415;
    double own_p = 0.5, cross_p = 0.15;
    CLI::App app{"Generate the synthetic demo corpus"};
    app.option_defaults()->always_capture_default();
    app.add_option("out-dir", out_dir, "Output directory")->required();
    app.add_option("--seed", seed, "Generator seed");
    app.add_option("--own", own_p, "Probability of a sentence from the document's own style bank");
    app.add_option("--cross", cross_p, "Probability of a sentence from the other style bank");
    CLI11_PARSE(app, argc, argv);

    constexpr std::size_t kPairs = 72;
    Rng rng(seed);
    Corpus corpus;
    std::vector<std::pair<TitleEntry, std::string>> papers;
    std::vector<Topic> topics;
    for (std::size_t i = 0; i <= kPairs; ++i)
        topics.push_back({pick(kProcesses, rng), pick(kOrganisms, rng), pick(kDrivers, rng)});

    for (std::size_t i = 0; i <= kPairs; ++i) {
        const auto& t = topics[i];
        const auto id = id_for(i);
        const auto title = fill(pick(kTitleForms, rng), t, rng);
        if (i < kPairs) {
            const auto human = compose(t, kHumanBank, kLlmBank, own_p, cross_p, rng);
            corpus.add({id + "-human", title, human, Label::Human, "NewPhytologist"});
            papers.push_back({{id, title}, human});
        }
        // One unpaired generated text, as in a corpus where a human text
        // was dropped during cleaning.
        corpus.add({id + "-llm", title, compose(t, kLlmBank, kHumanBank, own_p, cross_p, rng), Label::LLM, "ChatGPT"});
    }

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    save_corpus((dir / "corpus.jsonl").string(), corpus);

    std::string lines;
    for (const auto& [entry, body] : papers) {
        nlohmann::ordered_json j{{"id", entry.id}, {"title", entry.title}, {"body", body}};
        lines += j.dump() + "\n";
    }
    write_file((dir / "papers.jsonl").string(), lines);

    lines.clear();
    Rng fresh(mix_seed(seed, 1));
    for (std::size_t i = 0; i < 6; ++i) {
        const Topic t{pick(kProcesses, fresh), pick(kOrganisms, fresh), pick(kDrivers, fresh)};
        const bool llm = i % 2 == 0;
        const auto body = llm ? compose(t, kLlmBank, kHumanBank, own_p, cross_p, fresh)
                              : compose(t, kHumanBank, kLlmBank, own_p, cross_p, fresh);
        nlohmann::ordered_json j{{"id", "new" + std::to_string(i + 1)}, {"body", body}};
        lines += j.dump() + "\n";
    }
    write_file((dir / "new_texts.jsonl").string(), lines);

    std::cerr << "wrote " << corpus.size() << " documents (" << corpus.count(Label::LLM) << " LLM, "
              << corpus.count(Label::Human) << " human) to " << dir.string() << '\n';
    return 0;
}

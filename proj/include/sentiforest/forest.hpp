#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sentiforest/common.hpp"
#include "sentiforest/features.hpp"
#include "sentiforest/lexicon.hpp"

namespace sentiforest {

enum class SplitCriterion { Entropy, Gini };

inline std::string_view criterion_name(SplitCriterion c) { return c == SplitCriterion::Entropy ? "entropy" : "gini"; }

inline SplitCriterion parse_criterion(std::string_view name) {
    if (name == "entropy" || name == "infogain") return SplitCriterion::Entropy;
    if (name == "gini") return SplitCriterion::Gini;
    throw Error(ErrorKind::InvalidArgument, "unknown split criterion '" + std::string(name) + "'");
}

struct ForestConfig {
    std::size_t n_trees = 1000;
    std::size_t min_leaf = 1;
    /// Minimum class-variance proportion for a split. Only meaningful for
    /// numeric-class trees; stored and reported, never consulted here.
    double min_variance_prop = 1e-3;
    /// Features drawn per split; 0 selects floor(log2(d)) + 1.
    std::size_t k_features = 0;
    std::uint64_t seed = 42;
    SplitCriterion criterion = SplitCriterion::Entropy;
    /// Worker threads. Has no influence on the trained model.
    std::size_t threads = 1;

    std::size_t features_per_split(std::size_t n_features) const {
        if (k_features) return k_features;
        return static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(n_features)))) + 1;
    }

    void validate(std::size_t n_features) const {
        if (n_trees == 0) throw Error(ErrorKind::InvalidArgument, "n_trees must be at least 1");
        if (min_leaf == 0) throw Error(ErrorKind::InvalidArgument, "min_leaf must be at least 1");
        if (k_features > n_features)
            throw Error(ErrorKind::InvalidArgument, "k_features (" + std::to_string(k_features) + ") exceeds the " +
                                                        std::to_string(n_features) + " available features");
    }
};

/// Dense numeric training data with class indices.
struct TrainingSet {
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::vector<double> x;  // row-major
    std::vector<std::uint32_t> y;

    std::size_t rows() const { return y.size(); }
    double at(std::size_t row, std::size_t feature) const { return x[row * n_features + feature]; }
    std::span<const double> row(std::size_t r) const { return {x.data() + r * n_features, n_features}; }
};

/// Binary decision tree over numeric features. Rows with value <= threshold
/// descend left. Leaves keep the class counts of the training instances
/// (bootstrap multiplicities included) that reached them.
class DecisionTree {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0;
        std::uint32_t left = 0;     // leaf: offset into the count table
        std::uint32_t right = 0;

        bool is_leaf() const { return feature < 0; }
    };

    DecisionTree() = default;
    DecisionTree(std::size_t n_classes, std::vector<Node> nodes, std::vector<std::uint32_t> counts)
        : n_classes_(n_classes), nodes_(std::move(nodes)), counts_(std::move(counts)) {}

    std::size_t leaf_for(std::span<const double> row) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return i;
    }

    std::span<const std::uint32_t> leaf_counts(std::size_t node) const {
        return {counts_.data() + nodes_[node].left, n_classes_};
    }

    /// Adds this tree's normalized leaf distribution for `row` to `out`.
    void accumulate(std::span<const double> row, std::span<double> out) const {
        const auto counts = leaf_counts(leaf_for(row));
        double total = 0;
        for (auto c : counts) total += c;
        for (std::size_t c = 0; c < n_classes_; ++c) out[c] += counts[c] / total;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::uint32_t>& counts() const { return counts_; }
    std::size_t n_classes() const { return n_classes_; }
    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
    }

    friend bool operator==(const DecisionTree& a, const DecisionTree& b) {
        return a.n_classes_ == b.n_classes_ && a.counts_ == b.counts_ &&
               std::equal(a.nodes_.begin(), a.nodes_.end(), b.nodes_.begin(), b.nodes_.end(), [](const Node& p, const Node& q) {
                   return p.feature == q.feature && p.threshold == q.threshold && p.left == q.left && p.right == q.right;
               });
    }

private:
    std::size_t n_classes_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> counts_;
};

namespace detail {

inline double impurity(std::span<const double> counts, double total, SplitCriterion criterion) {
    if (total <= 0) return 0;
    double acc = 0;
    if (criterion == SplitCriterion::Entropy) {
        for (double c : counts)
            if (c > 0) acc -= (c / total) * std::log2(c / total);
        return acc;
    }
    acc = 1;
    for (double c : counts) acc -= (c / total) * (c / total);
    return acc;
}

inline constexpr double kMinGain = 1e-12;

// Grows one random tree: at each node a random feature order is drawn and
// features are examined until k have been tried and one of them gave a
// positive gain (or all are exhausted).
class TreeGrower {
public:
    TreeGrower(const TrainingSet& data, const ForestConfig& config, Rng& rng)
        : data_(data), config_(config), rng_(rng), k_(config.features_per_split(data.n_features)) {}

    DecisionTree grow(std::vector<std::uint32_t> sample) {
        nodes_.clear();
        counts_.clear();
        build(sample);
        return DecisionTree(data_.n_classes, std::move(nodes_), std::move(counts_));
    }

private:
    struct Split {
        double gain = 0;
        std::int32_t feature = -1;
        double threshold = 0;
    };

    std::uint32_t make_leaf(std::span<const double> class_counts) {
        DecisionTree::Node leaf;
        leaf.left = static_cast<std::uint32_t>(counts_.size());
        for (double c : class_counts) counts_.push_back(static_cast<std::uint32_t>(c));
        nodes_.push_back(leaf);
        return static_cast<std::uint32_t>(nodes_.size() - 1);
    }

    std::uint32_t build(std::span<std::uint32_t> rows) {
        std::vector<double> class_counts(data_.n_classes, 0.0);
        for (auto r : rows) class_counts[data_.y[r]] += 1;
        const auto total = static_cast<double>(rows.size());
        const bool pure = std::count_if(class_counts.begin(), class_counts.end(), [](double c) { return c > 0; }) <= 1;
        if (pure || rows.size() < 2 * config_.min_leaf) return make_leaf(class_counts);

        const double parent = impurity(class_counts, total, config_.criterion);
        std::vector<std::size_t> order(data_.n_features);
        std::iota(order.begin(), order.end(), 0);
        Split best;
        for (std::size_t tried = 0; tried < order.size(); ++tried) {
            if (tried >= k_ && best.gain > kMinGain) break;
            const auto pick = tried + static_cast<std::size_t>(rng_.below(order.size() - tried));
            std::swap(order[tried], order[pick]);
            evaluate(rows, order[tried], class_counts, parent, best);
        }
        if (best.feature < 0 || best.gain <= kMinGain) return make_leaf(class_counts);

        const auto f = static_cast<std::size_t>(best.feature);
        const auto middle = std::stable_partition(rows.begin(), rows.end(),
                                                  [&](std::uint32_t r) { return data_.at(r, f) <= best.threshold; });
        const auto split_at = static_cast<std::size_t>(middle - rows.begin());

        DecisionTree::Node node;
        node.feature = best.feature;
        node.threshold = best.threshold;
        nodes_.push_back(node);
        const auto self = nodes_.size() - 1;
        const auto left = build(rows.subspan(0, split_at));
        const auto right = build(rows.subspan(split_at));
        nodes_[self].left = left;
        nodes_[self].right = right;
        return static_cast<std::uint32_t>(self);
    }

    void evaluate(std::span<const std::uint32_t> rows, std::size_t feature, std::span<const double> class_counts,
                  double parent, Split& best) {
        sorted_.assign(rows.begin(), rows.end());
        std::sort(sorted_.begin(), sorted_.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = data_.at(a, feature), vb = data_.at(b, feature);
            return va != vb ? va < vb : a < b;
        });
        const auto m = sorted_.size();
        const auto total = static_cast<double>(m);
        left_.assign(class_counts.size(), 0.0);
        right_.assign(class_counts.begin(), class_counts.end());
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const auto cls = data_.y[sorted_[i]];
            left_[cls] += 1;
            right_[cls] -= 1;
            const double v = data_.at(sorted_[i], feature);
            const double next = data_.at(sorted_[i + 1], feature);
            if (!(v < next)) continue;
            const auto n_left = i + 1;
            if (n_left < config_.min_leaf || m - n_left < config_.min_leaf) continue;
            const double wl = static_cast<double>(n_left) / total;
            const double gain = parent - wl * impurity(left_, static_cast<double>(n_left), config_.criterion) -
                                (1 - wl) * impurity(right_, static_cast<double>(m - n_left), config_.criterion);
            if (gain > best.gain) {
                double threshold = v + (next - v) / 2;
                if (!(threshold < next)) threshold = v;
                best = {gain, static_cast<std::int32_t>(feature), threshold};
            }
        }
    }

    const TrainingSet& data_;
    const ForestConfig& config_;
    Rng& rng_;
    std::size_t k_;
    std::vector<DecisionTree::Node> nodes_;
    std::vector<std::uint32_t> counts_;
    std::vector<std::uint32_t> sorted_;
    std::vector<double> left_, right_;
};

}  // namespace detail

/// n draws with replacement from [0, n).
inline std::vector<std::uint32_t> bootstrap_sample(std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
    return sample;
}

/// Grows one tree on the given sample of row indices.
inline DecisionTree grow_tree(const TrainingSet& data, std::vector<std::uint32_t> sample, const ForestConfig& config, Rng& rng) {
    detail::TreeGrower grower(data, config, rng);
    return grower.grow(std::move(sample));
}

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::size_t n_features, std::size_t n_classes, std::vector<DecisionTree> trees)
        : n_features_(n_features), n_classes_(n_classes), trees_(std::move(trees)) {}

    /// Mean of the trees' normalized leaf distributions.
    std::vector<double> predict_proba(std::span<const double> row) const {
        if (row.size() != n_features_)
            throw Error(ErrorKind::SchemaMismatch, "row has " + std::to_string(row.size()) + " features, model expects " +
                                                       std::to_string(n_features_));
        std::vector<double> proba(n_classes_, 0.0);
        for (const auto& tree : trees_) tree.accumulate(row, proba);
        for (auto& p : proba) p /= static_cast<double>(trees_.size());
        return proba;
    }

    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::size_t n_features() const { return n_features_; }
    std::size_t n_classes() const { return n_classes_; }

    friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<DecisionTree> trees_;
};

/// Bagged random trees. Tree t draws its bootstrap sample and split features
/// from a generator seeded with mix_seed(config.seed, t), so the forest does
/// not depend on how trees are spread over threads.
inline RandomForest train_forest(const TrainingSet& data, const ForestConfig& config) {
    if (data.rows() == 0) throw Error(ErrorKind::InvalidArgument, "cannot train on an empty dataset");
    if (data.n_features == 0) throw Error(ErrorKind::InvalidArgument, "cannot train without features");
    config.validate(data.n_features);
    std::vector<std::size_t> seen(data.n_classes, 0);
    for (auto y : data.y) {
        if (y >= data.n_classes) throw Error(ErrorKind::InvalidArgument, "class index out of range");
        ++seen[y];
    }
    if (std::count_if(seen.begin(), seen.end(), [](std::size_t c) { return c > 0; }) < 2)
        throw Error(ErrorKind::InvalidArgument, "training data must contain at least two classes");
    for (double v : data.x)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "training data contains missing or non-finite values; impute first");

    std::vector<DecisionTree> trees(config.n_trees);
    parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
        Rng rng(mix_seed(config.seed, t));
        auto sample = bootstrap_sample(data.rows(), rng);
        trees[t] = grow_tree(data, std::move(sample), config, rng);
    });
    return RandomForest(data.n_features, data.n_classes, std::move(trees));
}

/// Index of the largest probability; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> proba) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < proba.size(); ++i)
        if (proba[i] > proba[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------
// Trained model with its feature schema and provenance

struct TrainingMetadata {
    std::size_t n_instances = 0;
    std::string corpus_digest;  // SHA-256 of the training input, if known
    std::string trained_at;     // optional wall-clock stamp
};

struct ForestModel {
    RandomForest forest;
    InputSchema schema;
    std::vector<Label> classes;
    ImputationStats imputation;
    std::map<std::string, std::string> lexicon_digests;
    ForestConfig config;
    TrainingMetadata metadata;
};

/// Builds the training matrix. Rows are put into a canonical order (doc_id,
/// then values, then label) so bootstrap indices do not depend on input order.
inline TrainingSet make_training_set(const Dataset& dataset, const InputSchema& schema, const std::vector<Label>& classes) {
    const auto columns = schema.resolve();
    std::vector<std::size_t> order(dataset.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = dataset.rows[a];
        const auto& rb = dataset.rows[b];
        if (ra.doc_id != rb.doc_id) return ra.doc_id < rb.doc_id;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (ra.values[i] != rb.values[i]) return ra.values[i] < rb.values[i];
        if (ra.afinn_missing != rb.afinn_missing) return rb.afinn_missing;
        return ra.label < rb.label;
    });
    TrainingSet set;
    set.n_features = columns.size();
    set.n_classes = classes.size();
    set.x.resize(order.size() * columns.size());
    set.y.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& row = dataset.rows[order[i]];
        extract_input(row, columns, std::span<double>(set.x.data() + i * columns.size(), columns.size()));
        const auto cls = std::find(classes.begin(), classes.end(), row.label);
        set.y.push_back(static_cast<std::uint32_t>(cls - classes.begin()));
    }
    return set;
}

/// Trains on an imputed dataset.
inline ForestModel train(const Dataset& dataset, const ForestConfig& config,
                         const InputSchema& schema = InputSchema::standard()) {
    if (dataset.rows.empty()) throw Error(ErrorKind::InvalidArgument, "cannot train on an empty dataset");
    ForestModel model;
    model.schema = schema;
    const auto counts = dataset.class_counts();
    for (std::size_t c = 0; c < kNumLabels; ++c)
        if (counts[c]) model.classes.push_back(static_cast<Label>(c));
    if (model.classes.size() < 2) throw Error(ErrorKind::InvalidArgument, "training data must contain both classes");

    if (!dataset.imputation_stats.empty()) {
        model.imputation = ImputationStats::from_map(dataset.imputation_stats);
    } else {
        for (const auto& r : dataset.rows)
            if (r.afinn_missing) throw Error(ErrorKind::InvalidArgument, "dataset has rows without AFINN statistics; impute first");
        std::vector<std::size_t> all(dataset.rows.size());
        std::iota(all.begin(), all.end(), 0);
        model.imputation = compute_imputation(dataset.rows, all);
    }
    model.config = config;
    model.metadata.n_instances = dataset.rows.size();
    model.forest = train_forest(make_training_set(dataset, schema, model.classes), config);
    return model;
}

inline std::vector<double> model_input(const ForestModel& model, FeatureVector row) {
    model.imputation.apply(row);
    const auto columns = model.schema.resolve();
    std::vector<double> input(columns.size());
    extract_input(row, columns, input);
    return input;
}

/// Class probabilities in model.classes order. Missing AFINN statistics are
/// filled from the model's imputation statistics.
inline std::vector<double> predict_proba(const ForestModel& model, const FeatureVector& row) {
    return model.forest.predict_proba(model_input(model, row));
}

inline Label predict(const ForestModel& model, const FeatureVector& row) {
    return model.classes[argmax(predict_proba(model, row))];
}

// ---------------------------------------------------------------------------
// Model file
//
// One JSON document. Everything but the trees goes into a small header
// object; the trees follow as a nested array where an internal node is
// {"f": feature, "t": threshold, "l": left, "r": right} and a leaf is its
// array of class counts. The checksum is the SHA-256 of the header's compact
// serialization followed by the trees' serialization.

inline constexpr int kModelVersion = 1;
inline constexpr std::string_view kModelFormat = "sentiforest-model";

namespace detail {

inline nlohmann::ordered_json model_header(const ForestModel& m) {
    nlohmann::ordered_json h;
    h["format"] = kModelFormat;
    h["version"] = kModelVersion;
    h["schema"] = m.schema.names;
    auto classes = nlohmann::ordered_json::array();
    for (auto c : m.classes) classes.push_back(canonical_name(c));
    h["classes"] = classes;
    h["config"] = {{"n_trees", m.config.n_trees},
                   {"min_leaf", m.config.min_leaf},
                   {"min_variance_prop", m.config.min_variance_prop},
                   {"k_features", m.config.k_features},
                   {"seed", m.config.seed},
                   {"criterion", criterion_name(m.config.criterion)}};
    h["imputation_stats"] = {{"afinn_mean", m.imputation.afinn_mean}, {"afinn_sd", m.imputation.afinn_sd}};
    nlohmann::ordered_json lexicons = nlohmann::ordered_json::object();
    for (const auto& [name, digest] : m.lexicon_digests) lexicons[name] = digest;
    h["digests"] = {{"lexicons", lexicons}, {"corpus", m.metadata.corpus_digest}};
    nlohmann::ordered_json meta;
    meta["n_instances"] = m.metadata.n_instances;
    if (!m.metadata.trained_at.empty()) meta["trained_at"] = m.metadata.trained_at;
    h["metadata"] = meta;
    return h;
}

inline void write_node(std::string& out, const DecisionTree& tree, std::size_t i) {
    const auto& node = tree.nodes()[i];
    if (node.is_leaf()) {
        out += '[';
        const auto counts = tree.leaf_counts(i);
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (c) out += ',';
            out += std::to_string(counts[c]);
        }
        out += ']';
        return;
    }
    out += "{\"f\":";
    out += std::to_string(node.feature);
    out += ",\"t\":";
    out += format_double(node.threshold);
    out += ",\"l\":";
    write_node(out, tree, node.left);
    out += ",\"r\":";
    write_node(out, tree, node.right);
    out += '}';
}

inline std::string trees_text(const RandomForest& forest) {
    std::string out = "[";
    for (std::size_t t = 0; t < forest.trees().size(); ++t) {
        if (t) out += ',';
        write_node(out, forest.trees()[t], 0);
    }
    out += ']';
    return out;
}

inline std::string model_checksum(const std::string& header, const std::string& trees) {
    return sha256_hex(header + trees);
}

// SAX consumer: builds the header as a DOM and the trees directly into flat
// node tables, so very large forests never exist as a JSON tree in memory.
class ModelReader : public nlohmann::json_sax<nlohmann::json> {
public:
    nlohmann::json header;
    std::vector<std::vector<DecisionTree::Node>> tree_nodes;
    std::vector<std::vector<std::uint32_t>> tree_counts;
    std::vector<std::size_t> leaf_widths;  // class-count length of every leaf seen
    std::string error;

    bool null() override { return fail("unexpected null"); }
    bool boolean(bool v) override { return put(v); }
    bool number_integer(number_integer_t v) override { return in_trees() ? tree_number(static_cast<double>(v), true, v >= 0) : put(v); }
    bool number_unsigned(number_unsigned_t v) override { return in_trees() ? tree_number(static_cast<double>(v), true, true) : put(v); }
    bool number_float(number_float_t v, const string_t&) override { return in_trees() ? tree_number(v, false, false) : put(v); }
    bool string(string_t& v) override { return in_trees() ? fail("unexpected string in trees") : put(v); }
    bool binary(binary_t&) override { return fail("unexpected binary value"); }

    bool start_object(std::size_t) override {
        if (in_trees()) return tree_start(false);
        return open(nlohmann::json::object());
    }
    bool key(string_t& k) override {
        if (in_trees()) {
            if (frames_.empty() || frames_.back().leaf) return fail("unexpected key in trees");
            if (k.size() != 1 || std::string_view("ftlr").find(k[0]) == std::string_view::npos)
                return fail("unknown node field '" + k + "'");
            frames_.back().pending = k[0];
            return true;
        }
        if (stack_.size() == 1 && k == "trees") expect_trees_ = true;
        key_ = k;
        return true;
    }
    bool end_object() override {
        if (in_trees()) return tree_end(false);
        stack_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override {
        if (expect_trees_) {
            expect_trees_ = false;
            trees_open_ = true;
            return true;
        }
        if (in_trees()) return tree_start(true);
        return open(nlohmann::json::array());
    }
    bool end_array() override {
        if (in_trees()) {
            if (frames_.empty()) {
                trees_open_ = false;
                return true;
            }
            return tree_end(true);
        }
        stack_.pop_back();
        return true;
    }
    bool parse_error(std::size_t pos, const std::string&, const nlohmann::detail::exception&) override {
        return fail("malformed JSON at byte " + std::to_string(pos));
    }

private:
    struct Frame {
        std::uint32_t node = 0;
        bool leaf = false;
        char pending = 0;
        unsigned seen = 0;  // bit per field: f t l r
    };

    bool in_trees() const { return trees_open_; }

    bool fail(std::string msg) {
        if (error.empty()) error = std::move(msg);
        return false;
    }

    nlohmann::json* slot(nlohmann::json value) {
        if (stack_.empty()) {
            header = std::move(value);
            return &header;
        }
        auto* top = stack_.back();
        if (top->is_object()) return &((*top)[key_] = std::move(value));
        top->push_back(std::move(value));
        return &top->back();
    }
    template <class V>
    bool put(V&& v) {
        if (expect_trees_) return fail("trees must be an array");
        slot(nlohmann::json(std::forward<V>(v)));
        return true;
    }
    bool open(nlohmann::json empty) {
        if (expect_trees_) return fail("trees must be an array");
        stack_.push_back(slot(std::move(empty)));
        return true;
    }

    bool tree_start(bool leaf) {
        if (!frames_.empty()) {
            auto& parent = frames_.back();
            if (parent.leaf) return fail("nested array inside a leaf");
            if (parent.pending != 'l' && parent.pending != 'r') return fail("child node outside 'l'/'r'");
        } else {
            tree_nodes.emplace_back();
            tree_counts.emplace_back();
        }
        auto& nodes = tree_nodes.back();
        const auto index = static_cast<std::uint32_t>(nodes.size());
        DecisionTree::Node node;
        if (leaf) node.left = static_cast<std::uint32_t>(tree_counts.back().size());
        else node.feature = 0;
        nodes.push_back(node);
        if (!frames_.empty()) {
            auto& parent = frames_.back();
            auto& pnode = nodes[parent.node];
            (parent.pending == 'l' ? pnode.left : pnode.right) = index;
            parent.seen |= parent.pending == 'l' ? 4u : 8u;
            parent.pending = 0;
        }
        frames_.push_back({index, leaf, 0, 0});
        return true;
    }

    bool tree_end(bool leaf) {
        if (frames_.empty() || frames_.back().leaf != leaf) return fail("unbalanced tree encoding");
        const auto frame = frames_.back();
        frames_.pop_back();
        if (leaf) {
            const auto& node = tree_nodes.back()[frame.node];
            leaf_widths.push_back(tree_counts.back().size() - node.left);
        } else if (frame.seen != 15u) {
            return fail("internal node lacks one of f, t, l, r");
        }
        return true;
    }

    bool tree_number(double v, bool integral, bool non_negative) {
        if (frames_.empty()) return fail("number outside a tree node");
        auto& frame = frames_.back();
        if (frame.leaf) {
            if (!integral || !non_negative || v > std::numeric_limits<std::uint32_t>::max())
                return fail("leaf counts must be non-negative integers");
            tree_counts.back().push_back(static_cast<std::uint32_t>(v));
            return true;
        }
        auto& node = tree_nodes.back()[frame.node];
        if (frame.pending == 'f') {
            if (!integral || !non_negative || v > std::numeric_limits<std::int32_t>::max())
                return fail("feature index must be a non-negative integer");
            node.feature = static_cast<std::int32_t>(v);
            frame.seen |= 1u;
        } else if (frame.pending == 't') {
            node.threshold = v;
            frame.seen |= 2u;
        } else {
            return fail("unexpected number in internal node");
        }
        frame.pending = 0;
        return true;
    }

    std::vector<nlohmann::json*> stack_;
    std::string key_;
    bool expect_trees_ = false;
    bool trees_open_ = false;
    std::vector<Frame> frames_;
};

template <class T>
T header_field(const nlohmann::json& h, const char* key) {
    const auto it = h.find(key);
    if (it == h.end()) throw Error(ErrorKind::Corrupt, std::string("model file lacks '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Corrupt, std::string("model field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

/// Serializes the model as a single JSON document.
inline std::string serialize_model(const ForestModel& model) {
    const auto header = detail::model_header(model).dump();
    const auto trees = detail::trees_text(model.forest);
    std::string out = header.substr(0, header.size() - 1);
    out += ",\"checksum\":\"" + detail::model_checksum(header, trees) + "\",\"trees\":";
    out += trees;
    out += "}\n";
    return out;
}

inline void save_model(const std::string& path, const ForestModel& model) { write_file(path, serialize_model(model)); }

inline ForestModel parse_model(std::istream& in) {
    detail::ModelReader reader;
    const bool ok = nlohmann::json::sax_parse(in, &reader, nlohmann::json::input_format_t::json, true, true);
    if (!ok) throw Error(ErrorKind::Corrupt, "corrupted model file: " + (reader.error.empty() ? "parse failure" : reader.error));
    const auto& h = reader.header;
    if (!h.is_object()) throw Error(ErrorKind::Corrupt, "corrupted model file: not a JSON object");
    if (detail::header_field<std::string>(h, "format") != kModelFormat)
        throw Error(ErrorKind::Corrupt, "not a sentiforest model file");
    const auto version = detail::header_field<int>(h, "version");
    if (version != kModelVersion)
        throw Error(ErrorKind::Version, "model version " + std::to_string(version) + " is not supported (expected " +
                                            std::to_string(kModelVersion) + ")");

    ForestModel m;
    m.schema.names = detail::header_field<std::vector<std::string>>(h, "schema");
    for (const auto& c : detail::header_field<std::vector<std::string>>(h, "classes")) m.classes.push_back(LabelNames{}.parse(c));
    const auto config = detail::header_field<nlohmann::json>(h, "config");
    m.config.n_trees = detail::header_field<std::size_t>(config, "n_trees");
    m.config.min_leaf = detail::header_field<std::size_t>(config, "min_leaf");
    m.config.min_variance_prop = detail::header_field<double>(config, "min_variance_prop");
    m.config.k_features = detail::header_field<std::size_t>(config, "k_features");
    m.config.seed = detail::header_field<std::uint64_t>(config, "seed");
    m.config.criterion = parse_criterion(detail::header_field<std::string>(config, "criterion"));
    const auto stats = detail::header_field<nlohmann::json>(h, "imputation_stats");
    m.imputation.afinn_mean = detail::header_field<double>(stats, "afinn_mean");
    m.imputation.afinn_sd = detail::header_field<double>(stats, "afinn_sd");
    const auto digests = detail::header_field<nlohmann::json>(h, "digests");
    m.lexicon_digests = detail::header_field<std::map<std::string, std::string>>(digests, "lexicons");
    m.metadata.corpus_digest = detail::header_field<std::string>(digests, "corpus");
    const auto meta = detail::header_field<nlohmann::json>(h, "metadata");
    m.metadata.n_instances = detail::header_field<std::size_t>(meta, "n_instances");
    if (meta.contains("trained_at")) m.metadata.trained_at = detail::header_field<std::string>(meta, "trained_at");
    const auto checksum = detail::header_field<std::string>(h, "checksum");

    const auto n_features = m.schema.resolve().size();
    const auto n_classes = m.classes.size();
    if (n_classes < 2) throw Error(ErrorKind::Corrupt, "model lists fewer than two classes");
    for (auto w : reader.leaf_widths)
        if (w != n_classes) throw Error(ErrorKind::Corrupt, "leaf count vector does not match the class list");
    std::vector<DecisionTree> trees;
    trees.reserve(reader.tree_nodes.size());
    for (std::size_t t = 0; t < reader.tree_nodes.size(); ++t) {
        for (const auto& node : reader.tree_nodes[t]) {
            if (node.is_leaf()) continue;
            if (static_cast<std::size_t>(node.feature) >= n_features)
                throw Error(ErrorKind::Corrupt, "tree " + std::to_string(t) + " references a feature outside the schema");
            if (!std::isfinite(node.threshold)) throw Error(ErrorKind::Corrupt, "non-finite split threshold");
        }
        trees.emplace_back(n_classes, std::move(reader.tree_nodes[t]), std::move(reader.tree_counts[t]));
    }
    if (trees.empty()) throw Error(ErrorKind::Corrupt, "model contains no trees");
    m.forest = RandomForest(n_features, n_classes, std::move(trees));

    if (detail::model_checksum(detail::model_header(m).dump(), detail::trees_text(m.forest)) != checksum)
        throw Error(ErrorKind::Corrupt, "model checksum mismatch; the file is corrupted");
    return m;
}

inline ForestModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open model '" + path + "'");
    return parse_model(in);
}

/// One warning per lexicon whose digest differs from the one recorded at
/// training time.
inline std::vector<std::string> check_lexicon_digests(const ForestModel& model, const LexiconSet& lexicons) {
    std::vector<std::string> warnings;
    const auto current = lexicons.digests();
    for (const auto& [name, digest] : model.lexicon_digests) {
        const auto it = current.find(name);
        if (it == current.end())
            warnings.push_back("lexicon '" + name + "' used in training is not loaded");
        else if (it->second != digest)
            warnings.push_back("lexicon '" + name + "' differs from the one the model was trained with (digest " +
                               digest.substr(0, 12) + " vs " + it->second.substr(0, 12) + ")");
    }
    return warnings;
}

}  // namespace sentiforest

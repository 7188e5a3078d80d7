#include "csforest/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "csforest/error.hpp"
#include "csforest/parallel.hpp"

namespace csforest {

std::size_t TreeParams::resolved_features(std::size_t dim) const {
    if (features_per_split) return *features_per_split;
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
}

void TreeParams::validate(std::size_t dim) const {
    if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
    const std::size_t f = resolved_features(dim);
    if (f < 1 || f > dim)
        throw ConfigError("features_per_split must lie in [1, " + std::to_string(dim) + "]");
}

std::size_t BitMask::count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

Bootstrap bootstrap_indices(std::size_t population, std::size_t draws, Rng& rng) {
    Bootstrap b;
    b.in_bag = BitMask(population);
    if (population == 0) return b;
    b.draws.reserve(draws);
    for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t d = rng.uniform_index(population);
        b.draws.push_back(d);
        b.in_bag.set(d);
    }
    for (std::size_t i = 0; i < population; ++i)
        if (!b.in_bag.test(i)) b.out_of_bag.push_back(i);
    return b;
}

Bootstrap bootstrap_indices(std::size_t n, Rng& rng) { return bootstrap_indices(n, n, rng); }

TreeModel::TreeModel(std::size_t dim, std::size_t alphabet, std::vector<Node> nodes, std::vector<double> leaf_values)
    : dim_(dim), alphabet_(alphabet), nodes_(std::move(nodes)), leaf_values_(std::move(leaf_values)) {}

std::size_t TreeModel::depth() const {
    if (nodes_.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [id, d] = stack.back();
        stack.pop_back();
        const Node& n = nodes_[id];
        if (n.feature < 0) {
            best = std::max(best, d);
        } else {
            stack.emplace_back(n.left, d + 1);
            stack.emplace_back(n.right, d + 1);
        }
    }
    return best;
}

std::span<const double> TreeModel::leaf_fractions(std::span<const double> x) const {
    if (x.size() != dim_)
        throw DataError("feature vector has dimension " + std::to_string(x.size()) + ", tree expects " +
                        std::to_string(dim_));
    std::uint32_t id = 0;
    while (nodes_[id].feature >= 0) {
        const Node& n = nodes_[id];
        id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return {leaf_values_.data() + std::size_t{nodes_[id].left} * alphabet_, alphabet_};
}

double TreeModel::predict_fraction(std::span<const double> x, std::size_t target) const {
    if (target >= alphabet_) throw DataError("target class outside the tree alphabet");
    return leaf_fractions(x)[target];
}

std::string TreeModel::to_json() const {
    nlohmann::json j;
    j["format"] = "csforest.tree";
    j["version"] = 1;
    j["dim"] = dim_;
    j["alphabet"] = alphabet_;
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& n : nodes_) nodes.push_back({n.feature, n.threshold, n.left, n.right});
    j["leaf_values"] = leaf_values_;
    return j.dump();
}

TreeModel TreeModel::from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "csforest.tree" || j.at("version") != 1)
            throw DataError("unsupported tree serialization format");
        std::vector<Node> nodes;
        for (const auto& n : j.at("nodes"))
            nodes.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<double>(), n.at(2).get<std::uint32_t>(),
                             n.at(3).get<std::uint32_t>()});
        return TreeModel(j.at("dim").get<std::size_t>(), j.at("alphabet").get<std::size_t>(), std::move(nodes),
                         j.at("leaf_values").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tree JSON: ") + e.what());
    }
}

namespace {

struct Entry {
    std::size_t row;
    int label;
};

struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // sum over children of (sum_c count_c^2) / n_child; higher is purer
};

class TreeGrower {
public:
    TreeGrower(const Matrix& x, std::size_t alphabet, const TreeParams& params, Rng& rng)
        : x_(x), alphabet_(alphabet), params_(params), rng_(rng),
          mtry_(params.resolved_features(x.cols())), features_(x.cols()) {
        for (std::size_t j = 0; j < features_.size(); ++j) features_[j] = j;
    }

    TreeModel grow(std::vector<Entry> entries) {
        entries_ = std::move(entries);
        struct Task {
            std::uint32_t node;
            std::size_t lo, hi, depth;
        };
        nodes_.push_back({});
        std::vector<Task> stack{{0, 0, entries_.size(), 0}};
        std::vector<std::int64_t> counts(alphabet_);
        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = t.lo; i < t.hi; ++i) ++counts[static_cast<std::size_t>(entries_[i].label)];
            const std::size_t n = t.hi - t.lo;
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
            const bool depth_stop = params_.max_depth && t.depth >= *params_.max_depth;
            Split split;
            if (!pure && !depth_stop && n >= 2 * params_.min_leaf) split = best_split(t.lo, t.hi, counts);
            if (split.feature < 0) {
                make_leaf(t.node, counts, n);
                continue;
            }
            auto mid = std::partition(entries_.begin() + static_cast<std::ptrdiff_t>(t.lo),
                                      entries_.begin() + static_cast<std::ptrdiff_t>(t.hi), [&](const Entry& e) {
                                          return x_(e.row, static_cast<std::size_t>(split.feature)) <= split.threshold;
                                      });
            const std::size_t cut = static_cast<std::size_t>(mid - entries_.begin());
            const auto left = static_cast<std::uint32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            nodes_[t.node] = {split.feature, split.threshold, left, left + 1};
            stack.push_back({left + 1, cut, t.hi, t.depth + 1});
            stack.push_back({left, t.lo, cut, t.depth + 1});
        }
        return TreeModel(x_.cols(), alphabet_, std::move(nodes_), std::move(leaf_values_));
    }

private:
    void make_leaf(std::uint32_t node, const std::vector<std::int64_t>& counts, std::size_t n) {
        const auto slot = static_cast<std::uint32_t>(leaf_values_.size() / alphabet_);
        for (auto c : counts) leaf_values_.push_back(static_cast<double>(c) / static_cast<double>(n));
        nodes_[node] = {-1, 0.0, slot, slot};
    }

    Split best_split(std::size_t lo, std::size_t hi, const std::vector<std::int64_t>& parent_counts) {
        // Draw mtry candidate features, then scan them in ascending index order
        // so that the strict-improvement rule prefers lower feature indices.
        for (std::size_t i = 0; i < mtry_; ++i) {
            const std::size_t j = i + rng_.uniform_index(features_.size() - i);
            std::swap(features_[i], features_[j]);
        }
        std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
        std::sort(candidates.begin(), candidates.end());

        const std::size_t n = hi - lo;
        std::int64_t parent_sq = 0;
        for (auto c : parent_counts) parent_sq += c * c;
        const double parent_score = static_cast<double>(parent_sq) / static_cast<double>(n);

        Split best;
        best.score = parent_score;
        const double min_gain = 1e-12 * static_cast<double>(n);
        std::vector<std::int64_t> left(alphabet_), right(alphabet_);
        for (std::size_t f : candidates) {
            scratch_.clear();
            for (std::size_t i = lo; i < hi; ++i) scratch_.emplace_back(x_(entries_[i].row, f), entries_[i].label);
            std::sort(scratch_.begin(), scratch_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (scratch_.front().first == scratch_.back().first) continue;
            std::fill(left.begin(), left.end(), 0);
            right = parent_counts;
            std::int64_t left_sq = 0, right_sq = parent_sq;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto c = static_cast<std::size_t>(scratch_[i].second);
                left_sq += 2 * left[c] + 1;
                right_sq -= 2 * right[c] - 1;
                ++left[c];
                --right[c];
                const std::size_t nl = i + 1, nr = n - nl;
                if (scratch_[i].first == scratch_[i + 1].first) continue;
                if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
                const double score = static_cast<double>(left_sq) / static_cast<double>(nl) +
                                     static_cast<double>(right_sq) / static_cast<double>(nr);
                if (score > best.score && score > parent_score + min_gain) {
                    const double a = scratch_[i].first, b = scratch_[i + 1].first;
                    double thr = a + (b - a) / 2.0;
                    if (!(thr >= a && thr < b)) thr = a;
                    best = {static_cast<std::int32_t>(f), thr, score};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    std::size_t alphabet_;
    const TreeParams& params_;
    Rng& rng_;
    std::size_t mtry_;
    std::vector<std::size_t> features_;
    std::vector<Entry> entries_;
    std::vector<TreeModel::Node> nodes_;
    std::vector<double> leaf_values_;
    std::vector<std::pair<double, int>> scratch_;
};

} // namespace

TreeModel fit_tree(const Matrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                   std::size_t alphabet, const TreeParams& params, Rng& rng) {
    if (rows.empty()) throw DataError("cannot fit a tree on zero rows");
    if (labels.size() != rows.size()) throw DataError("one label per training row required");
    if (alphabet < 1) throw DataError("empty label alphabet");
    params.validate(x.cols());
    std::vector<Entry> entries;
    entries.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.rows()) throw DataError("training row index out of range");
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= alphabet)
            throw DataError("training label outside the alphabet");
        entries.push_back({rows[i], labels[i]});
    }
    return TreeGrower(x, alphabet, params, rng).grow(std::move(entries));
}

std::vector<double> Forest::predict_proba(std::span<const double> x) const {
    std::vector<double> acc(alphabet_, 0.0);
    for (const auto& t : trees_) {
        auto f = t.leaf_fractions(x);
        for (std::size_t c = 0; c < alphabet_; ++c) acc[c] += f[c];
    }
    if (!trees_.empty())
        for (auto& v : acc) v /= static_cast<double>(trees_.size());
    return acc;
}

Forest fit_forest(const Matrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                  std::size_t alphabet, std::size_t n_trees, const TreeParams& params, std::uint64_t seed,
                  std::size_t threads) {
    if (n_trees == 0) throw ConfigError("forest needs at least one tree");
    if (rows.empty()) throw DataError("cannot fit a forest on zero rows");
    std::vector<TreeModel> trees(n_trees);
    parallel_for(n_trees, threads, [&](std::size_t t) {
        Rng rng(derive_seed(seed, "forest", t));
        auto boot = bootstrap_indices(rows.size(), rng);
        std::vector<std::size_t> sample_rows;
        std::vector<int> sample_labels;
        sample_rows.reserve(rows.size());
        sample_labels.reserve(rows.size());
        for (auto d : boot.draws) {
            sample_rows.push_back(rows[d]);
            sample_labels.push_back(labels[d]);
        }
        trees[t] = fit_tree(x, sample_rows, sample_labels, alphabet, params, rng);
    });
    return Forest(std::move(trees), alphabet);
}

} // namespace csforest

#ifndef CSFOREST_TREE_HPP
#define CSFOREST_TREE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csforest/dataset.hpp"
#include "csforest/rng.hpp"

namespace csforest {

/// CART growth controls. Defaults: unlimited depth, min_leaf = 1,
/// ceil(sqrt(p)) candidate features per split.
struct TreeParams {
    std::optional<std::size_t> max_depth;
    std::size_t min_leaf = 1;
    std::optional<std::size_t> features_per_split;

    std::size_t resolved_features(std::size_t dim) const;
    void validate(std::size_t dim) const;
};

/// Fixed-size bit set used for bootstrap in-bag masks.
class BitMask {
public:
    BitMask() = default;
    explicit BitMask(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    std::size_t size() const noexcept { return size_; }
    void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    std::size_t count() const;
    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct Bootstrap {
    std::vector<std::size_t> draws;       // n draws with replacement, in draw order
    BitMask in_bag;
    std::vector<std::size_t> out_of_bag;  // ascending
};

/// n uniform draws with replacement from {0..n-1} (`draws` < n allowed via the
/// two-argument overload), plus the complementary out-of-bag set.
Bootstrap bootstrap_indices(std::size_t n, Rng& rng);
Bootstrap bootstrap_indices(std::size_t population, std::size_t draws, Rng& rng);

/// A fitted classification tree. Internal nodes route x[feature] <= threshold
/// to the left child; leaves hold class fractions over the fitted alphabet.
class TreeModel {
public:
    struct Node {
        std::int32_t feature = -1;   // -1 marks a leaf
        double threshold = 0.0;
        std::uint32_t left = 0;      // child index, or leaf slot for leaves
        std::uint32_t right = 0;
        bool operator==(const Node&) const = default;
    };

    TreeModel() = default;
    TreeModel(std::size_t dim, std::size_t alphabet, std::vector<Node> nodes, std::vector<double> leaf_values);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t alphabet() const noexcept { return alphabet_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept { return leaf_values_.size() / (alphabet_ ? alphabet_ : 1); }
    std::size_t depth() const;
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Class fractions of the leaf that x falls into.
    std::span<const double> leaf_fractions(std::span<const double> x) const;
    /// Throws DataError on dimension mismatch or an out-of-alphabet target.
    double predict_fraction(std::span<const double> x, std::size_t target) const;

    /// Versioned JSON text; see from_json.
    std::string to_json() const;
    static TreeModel from_json(const std::string& text);

    friend bool operator==(const TreeModel&, const TreeModel&) = default;

private:
    std::size_t dim_ = 0;
    std::size_t alphabet_ = 0;
    std::vector<Node> nodes_;
    std::vector<double> leaf_values_;
};

/// Grows one tree on `rows` (indices into x, repeats allowed) with labels[i]
/// in [0, alphabet) for rows[i]. At each node, features_per_split features are
/// drawn without replacement; the (feature, midpoint threshold) with the lowest
/// weighted Gini impurity wins, ties going to the lower feature and then the
/// lower threshold. Nodes stop at the depth limit, when they are pure, when
/// they cannot give min_leaf rows to both children, or when no split lowers
/// impurity.
TreeModel fit_tree(const Matrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                   std::size_t alphabet, const TreeParams& params, Rng& rng);

/// Bagged ensemble used by the split-conformal baselines.
class Forest {
public:
    Forest() = default;
    Forest(std::vector<TreeModel> trees, std::size_t alphabet)
        : trees_(std::move(trees)), alphabet_(alphabet) {}

    std::size_t size() const noexcept { return trees_.size(); }
    std::size_t alphabet() const noexcept { return alphabet_; }
    const std::vector<TreeModel>& trees() const noexcept { return trees_; }

    /// Mean leaf fractions over all trees.
    std::vector<double> predict_proba(std::span<const double> x) const;

private:
    std::vector<TreeModel> trees_;
    std::size_t alphabet_ = 0;
};

/// Fits n_trees trees, each on a bootstrap of `rows`; tree t draws from
/// derive_seed(seed, "forest", t), so the result is thread-count independent.
Forest fit_forest(const Matrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                  std::size_t alphabet, std::size_t n_trees, const TreeParams& params, std::uint64_t seed,
                  std::size_t threads = 1);

} // namespace csforest

#endif // CSFOREST_TREE_HPP

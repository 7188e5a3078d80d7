#ifndef CSFOREST_CSFOREST_HPP
#define CSFOREST_CSFOREST_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csforest/dataset.hpp"
#include "csforest/prediction.hpp"
#include "csforest/rng.hpp"
#include "csforest/tree.hpp"

namespace csforest {

struct CsForestParams {
    double alpha = 0.05;
    double gamma = 1.0;          // other-class bootstrap size is min(ceil(m * gamma), n - n_k)
    std::size_t b_tilde = 3000;  // nominal tree count; the realized count is Binomial-thinned
    TreeParams tree;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const;
};

// Alphabet of every per-class tree.
inline constexpr int kTargetLabel = 0;
inline constexpr int kOtherLabel = 1;
inline constexpr int kTestLabel = 2;
inline constexpr std::size_t kEnsembleAlphabet = 3;

struct TreeCount {
    std::size_t count = 0;
    std::size_t redraws = 0;  // number of zero draws that were rejected
};

/// Draws B ~ Binomial(b_tilde, (1 - 1/(n_k + 1))^n_k), redrawing while B == 0.
TreeCount sample_tree_count(std::size_t b_tilde, std::size_t n_k, Rng& rng);

/// Trees for one class k. Tree b is trained on a bootstrap of the class-k
/// rows, a bootstrap of the test cohort and a bootstrap of the other training
/// classes, with labels {k, other, test}. Leaf predictions for every class-k
/// training row and test row are cached per tree.
struct ClassEnsemble {
    int class_index = 0;
    std::size_t train_size = 0;   // n_k
    std::size_t test_size = 0;    // m
    std::size_t other_draws = 0;  // size of the other-class bootstrap per tree
    TreeCount tree_count;
    std::vector<TreeModel> trees;
    std::vector<BitMask> train_in_bag;  // per tree, over the n_k class-k rows
    std::vector<BitMask> test_in_bag;   // per tree, over the m test rows
    Matrix train_fraction;              // B x n_k, class-k leaf fraction at each class-k row
    Matrix test_fraction;               // B x m

    std::size_t size() const noexcept { return trees.size(); }
};

/// Grows one ClassEnsemble. Tree b uses the stream derive_seed(seed, "tree", k, b).
ClassEnsemble build_class_ensemble(const Matrix& train_k, const Matrix& train_other, const Matrix& test,
                                   int class_index, const CsForestParams& params);

/// Mean class-k fraction at x over trees whose bootstraps exclude both test
/// row i and class-k row i'. Empty when no such tree exists (degenerate pair).
std::optional<double> pair_ensemble_fraction(const ClassEnsemble& ens, std::size_t test_index,
                                             std::size_t train_index, std::span<const double> x);

/// Calibrated scores s_ik = (1 + #{i' : f^{ii'}(x_i) >= f^{ii'}(x_i')}) / (n_k + 1),
/// with both sides of each comparison averaged over the same leave-pair-out
/// trees. A degenerate pair counts as a success.
struct ScoreMatrix {
    Matrix scores;                        // m x K
    std::vector<std::size_t> class_sizes; // n_k
    std::size_t degenerate_pairs = 0;
};

ScoreMatrix calibrated_scores(std::span<const ClassEnsemble> ensembles, std::size_t threads = 1);

/// {k : s_ik >= alpha}.
PredictionSets prediction_sets(const ScoreMatrix& scores, double alpha, std::vector<std::string> class_names);

struct CsForestResult {
    ScoreMatrix scores;
    PredictionSets sets;
    std::vector<TreeCount> tree_counts;  // per class
};

/// Full pipeline on labeled training data and an (unlabeled) test cohort.
/// Test labels, if present, are ignored.
CsForestResult run_csforest(const Dataset& train, const Dataset& test, const CsForestParams& params);

/// Pairwise comparison audit for one class and one held test point, using the
/// exchangeable re-characterization: the n class-k rows and the held point form
/// a pool of n + 1, and each of b_tilde trees is trained on n draws from that
/// pool (labeled k) plus bootstraps of the remaining test rows and of the
/// other classes. A(l, j) = 1{mu_lj(X_l) >= mu_lj(X_j)}, where mu_lj averages
/// trees excluding both l and j (A(l, j) = 1 if there are none).
struct AuditRecord {
    std::size_t n = 0;  // class-k training rows; the matrix is (n+1) x (n+1)
    double alpha = 0.0;
    std::vector<std::uint8_t> comparisons;  // row-major (n+1)^2
    std::vector<std::size_t> row_sums;
    bool unit_diagonal = false;
    bool tournament = false;  // A(l, j) + A(j, l) >= 1 for all pairs
    std::vector<std::size_t> strange_set;  // {j : row_sum_j <= (n+1) alpha - 1}
    double bound = 0.0;                    // 2 alpha (n+1)
    bool bound_holds = false;
    double held_score = 0.0;  // row_sum of the held point / (n+1)

    bool at(std::size_t l, std::size_t j) const { return comparisons[l * (n + 1) + j] != 0; }
    bool passed() const { return unit_diagonal && bound_holds; }
};

AuditRecord audit_strange_set(const Matrix& train_k, const Matrix& train_other, const Matrix& test,
                              std::size_t held_test_index, double alpha, const CsForestParams& params);

} // namespace csforest

#endif // CSFOREST_CSFOREST_HPP

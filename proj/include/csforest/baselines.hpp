#ifndef CSFOREST_BASELINES_HPP
#define CSFOREST_BASELINES_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "csforest/dataset.hpp"
#include "csforest/prediction.hpp"
#include "csforest/tree.hpp"

namespace csforest {

/// Stratified 50/50 split of the training rows (fold 1 fits, fold 2
/// calibrates) and, optionally, a 50/50 split of the test rows.
struct SplitPlan {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> calibration;
    std::vector<std::size_t> test_a;
    std::vector<std::size_t> test_b;
    std::uint64_t seed = 0;
};

/// Each class with c rows sends ceil(c/2) to `fit` and floor(c/2) to
/// `calibration`. Test rows are halved the same way when split_test is set.
SplitPlan make_split_plan(const Dataset& train, std::size_t test_size, std::uint64_t seed, bool split_test);

struct BaselineParams {
    double alpha = 0.05;
    std::size_t n_trees = 500;
    TreeParams tree;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool randomized = false;  // ACRF family only

    void validate() const;
};

/// (1 + #{i : score_test >= scores_cal[i]}) / (|cal| + 1).
double split_conformal_pvalue(std::span<const double> scores_cal, double score_test);

/// Same p-value against a pre-sorted calibration list (ascending).
double split_conformal_pvalue_sorted(std::span<const double> sorted_cal, double score_test);

/// Conformalized random forest: forest on fold 1, per-class calibration of
/// the predicted class probability on fold 2.
PredictionSets crf(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan);

/// Product Gaussian kernel density estimate with per-dimension bandwidths.
class KernelDensity {
public:
    /// Normal-reference bandwidth h_j = sd_j * (4 / ((p + 2) n))^(1/(p + 4)),
    /// floored at 1e-6 * (range_j + 1e-12).
    explicit KernelDensity(Matrix points);

    double log_density(std::span<const double> x) const;
    const std::vector<double>& bandwidths() const noexcept { return bandwidth_; }

private:
    Matrix points_;
    std::vector<double> bandwidth_;
    double log_norm_ = 0.0;
};

/// Density-set classifier: per-class KDE on fold 1, conformal calibration of
/// log densities on fold 2.
PredictionSets dc(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan);

/// Two-way crossed split conformal with per-class forests separating the
/// class from the test fold, calibrated on the held-out training fold.
PredictionSets bcops(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan);

/// Class order used by the adaptive sets: probabilities descending, ties to
/// the lower class index.
std::vector<std::size_t> descending_order(std::span<const double> pi);

/// Generalized inverse quantile conformity score. Non-randomized: the total
/// probability of the classes ranked strictly ahead of y. Randomized with
/// u in [0, 1]: that total plus (1 - u) * pi_y.
double acrf_score(std::span<const double> pi, std::size_t y, std::optional<double> u, bool randomized);

/// Adaptive set S(pi, tau): the L top-ranked classes, L = min{c : cum_c > tau}
/// (all classes if none). Randomized: L = min{c : cum_c >= tau}, dropping the
/// L-th class when u < (cum_L - tau) / pi_(L).
std::vector<int> acrf_set(std::span<const double> pi, double tau, std::optional<double> u, bool randomized);

/// Smallest v with total weight of {values <= v} >= 1 - alpha, where
/// `infinity_weight` sits on +inf. Returns +inf when the finite mass falls short.
double weighted_upper_quantile(std::span<const double> values, std::span<const double> weights,
                               double infinity_weight, double alpha);

/// Same with equal weights 1/(n+1) on each value and on +inf.
double conformal_upper_quantile(std::span<const double> values, double alpha);

/// Adaptive-coverage CRF (marginal coverage).
PredictionSets acrf(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan);

/// Odds r(x) = P[test | x] / P[train | x] for one test fold.
using OddsFunction = std::function<double(std::span<const double>)>;

/// Odds from a forest separating `test_rows` from `train_rows`, with the test
/// probability clamped to [1e-3, 1 - 1e-3].
OddsFunction fit_odds_model(const Matrix& train_x, std::span<const std::size_t> train_rows, const Matrix& test_x,
                            std::span<const std::size_t> test_rows, const BaselineParams& params,
                            std::uint64_t seed);

/// ACRF with covariate-shift weighted calibration. Test fold a is predicted
/// with odds fitted on the other test fold against the fitting fold.
PredictionSets acrf_shift(const Dataset& train, const Dataset& test, const BaselineParams& params,
                          const SplitPlan& plan);

/// Same, with caller-supplied odds for predicting test_a and test_b.
PredictionSets acrf_shift_with_odds(const Dataset& train, const Dataset& test, const BaselineParams& params,
                                    const SplitPlan& plan, const OddsFunction& odds_for_a,
                                    const OddsFunction& odds_for_b);

} // namespace csforest

#endif // CSFOREST_BASELINES_HPP

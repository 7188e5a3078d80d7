#include "csforest/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "csforest/error.hpp"
#include "csforest/parallel.hpp"
#include "csforest/rng.hpp"

namespace csforest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuantileSlack = 1e-12;

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

void require_labeled(const Dataset& train) {
    for (int y : train.labels())
        if (y < 0) throw DataError("training rows must all carry class labels");
}

void require_compatible(const Dataset& train, const Dataset& test) {
    if (train.dim() != test.dim()) throw DataError("train and test feature dimensions differ");
    require_labeled(train);
}

std::vector<std::size_t> rows_of_class(const Dataset& train, std::span<const std::size_t> rows, int k) {
    std::vector<std::size_t> out;
    for (auto r : rows)
        if (train.label(r) == k) out.push_back(r);
    return out;
}

std::vector<int> labels_of(const Dataset& train, std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(train.label(r));
    return out;
}

void require_class_in_folds(const Dataset& train, const SplitPlan& plan) {
    for (std::size_t k = 0; k < train.num_classes(); ++k) {
        const int kk = static_cast<int>(k);
        if (rows_of_class(train, plan.fit, kk).empty())
            throw DataError("class '" + train.class_names()[k] + "' missing from the fitting fold");
        if (rows_of_class(train, plan.calibration, kk).empty())
            throw DataError("class '" + train.class_names()[k] + "' missing from the calibration fold");
    }
}

} // namespace

void BaselineParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
}

SplitPlan make_split_plan(const Dataset& train, std::size_t test_size, std::uint64_t seed, bool split_test) {
    SplitPlan plan;
    plan.seed = seed;
    for (std::size_t k = 0; k < train.num_classes(); ++k) {
        auto rows = train.rows_with_label(static_cast<int>(k));
        Rng rng(derive_seed(seed, "split_train", k));
        shuffle(rows, rng);
        const std::size_t n_fit = rows.size() - rows.size() / 2;
        plan.fit.insert(plan.fit.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_fit));
        plan.calibration.insert(plan.calibration.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_fit), rows.end());
    }
    std::sort(plan.fit.begin(), plan.fit.end());
    std::sort(plan.calibration.begin(), plan.calibration.end());
    if (split_test) {
        std::vector<std::size_t> rows(test_size);
        std::iota(rows.begin(), rows.end(), 0);
        Rng rng(derive_seed(seed, "split_test"));
        shuffle(rows, rng);
        const std::size_t n_a = rows.size() - rows.size() / 2;
        plan.test_a.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_a));
        plan.test_b.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_a), rows.end());
        std::sort(plan.test_a.begin(), plan.test_a.end());
        std::sort(plan.test_b.begin(), plan.test_b.end());
    }
    return plan;
}

double split_conformal_pvalue(std::span<const double> scores_cal, double score_test) {
    if (scores_cal.empty()) throw DataError("split conformal p-value needs calibration scores");
    std::size_t below = 0;
    for (double s : scores_cal)
        if (score_test >= s) ++below;
    return static_cast<double>(1 + below) / static_cast<double>(scores_cal.size() + 1);
}

double split_conformal_pvalue_sorted(std::span<const double> sorted_cal, double score_test) {
    if (sorted_cal.empty()) throw DataError("split conformal p-value needs calibration scores");
    const auto below = static_cast<std::size_t>(std::upper_bound(sorted_cal.begin(), sorted_cal.end(), score_test) -
                                                sorted_cal.begin());
    return static_cast<double>(1 + below) / static_cast<double>(sorted_cal.size() + 1);
}

PredictionSets crf(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan) {
    params.validate();
    require_compatible(train, test);
    require_class_in_folds(train, plan);
    const std::size_t K = train.num_classes(), m = test.size();
    const auto fit_labels = labels_of(train, plan.fit);
    const Forest forest = fit_forest(train.features(), plan.fit, fit_labels, K, params.n_trees, params.tree,
                                     derive_seed(params.seed, "crf"), params.threads);

    std::vector<std::vector<double>> cal(K);
    for (auto r : plan.calibration) {
        const auto k = static_cast<std::size_t>(train.label(r));
        cal[k].push_back(forest.predict_proba(train.row(r))[k]);
    }
    for (auto& c : cal) std::sort(c.begin(), c.end());

    Matrix pvalues(m, K);
    parallel_for(m, params.threads, [&](std::size_t i) {
        const auto p = forest.predict_proba(test.row(i));
        for (std::size_t k = 0; k < K; ++k) pvalues(i, k) = split_conformal_pvalue_sorted(cal[k], p[k]);
    });
    return threshold_scores(pvalues, params.alpha, train.class_names());
}

KernelDensity::KernelDensity(Matrix points) : points_(std::move(points)) {
    const std::size_t n = points_.rows(), p = points_.cols();
    if (n == 0) throw DataError("kernel density needs at least one point");
    const double factor = std::pow(4.0 / ((static_cast<double>(p) + 2.0) * static_cast<double>(n)),
                                   1.0 / (static_cast<double>(p) + 4.0));
    bandwidth_.resize(p);
    constexpr double half_log_2pi = 0.91893853320467274178;
    log_norm_ = -std::log(static_cast<double>(n));
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0, lo = points_(0, j), hi = points_(0, j);
        for (std::size_t i = 0; i < n; ++i) {
            mean += points_(i, j);
            lo = std::min(lo, points_(i, j));
            hi = std::max(hi, points_(i, j));
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (points_(i, j) - mean) * (points_(i, j) - mean);
        const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        const double floor = 1e-6 * ((hi - lo) + 1e-12);
        bandwidth_[j] = std::max(sd * factor, floor);
        log_norm_ -= std::log(bandwidth_[j]) + half_log_2pi;
    }
}

double KernelDensity::log_density(std::span<const double> x) const {
    if (x.size() != points_.cols()) throw DataError("kernel density dimension mismatch");
    const std::size_t n = points_.rows();
    std::vector<double> terms(n);
    double top = -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        double e = 0.0;
        auto row = points_.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double z = (x[j] - row[j]) / bandwidth_[j];
            e -= 0.5 * z * z;
        }
        terms[i] = e;
        top = std::max(top, e);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - top);
    return top + std::log(acc) + log_norm_;
}

PredictionSets dc(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan) {
    params.validate();
    require_compatible(train, test);
    require_class_in_folds(train, plan);
    const std::size_t K = train.num_classes(), m = test.size();
    std::vector<KernelDensity> kde;
    std::vector<std::vector<double>> cal(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto fit_rows = rows_of_class(train, plan.fit, static_cast<int>(k));
        if (fit_rows.size() < 2)
            throw DataError("class '" + train.class_names()[k] + "' needs >= 2 rows in the fitting fold");
        kde.emplace_back(train.features().select_rows(fit_rows));
        for (auto r : rows_of_class(train, plan.calibration, static_cast<int>(k)))
            cal[k].push_back(kde[k].log_density(train.row(r)));
        std::sort(cal[k].begin(), cal[k].end());
    }
    Matrix pvalues(m, K);
    parallel_for(m, params.threads, [&](std::size_t i) {
        for (std::size_t k = 0; k < K; ++k)
            pvalues(i, k) = split_conformal_pvalue_sorted(cal[k], kde[k].log_density(test.row(i)));
    });
    return threshold_scores(pvalues, params.alpha, train.class_names());
}

PredictionSets bcops(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan) {
    params.validate();
    require_compatible(train, test);
    require_class_in_folds(train, plan);
    if (plan.test_a.empty() || plan.test_b.empty()) throw DataError("BCOPS needs two non-empty test folds");
    const std::size_t K = train.num_classes(), m = test.size(), p = train.dim();
    Matrix pvalues(m, K);

    // Round 0 fits on (fit fold, test_a) and predicts test_b; round 1 swaps.
    const std::vector<std::size_t>* train_fold[2] = {&plan.fit, &plan.calibration};
    const std::vector<std::size_t>* test_fold[2] = {&plan.test_a, &plan.test_b};
    for (std::size_t round = 0; round < 2; ++round) {
        const auto& fit_train = *train_fold[round];
        const auto& cal_train = *train_fold[1 - round];
        const auto& fit_test = *test_fold[round];
        const auto& predict_test = *test_fold[1 - round];
        for (std::size_t k = 0; k < K; ++k) {
            const auto rows_k = rows_of_class(train, fit_train, static_cast<int>(k));
            Matrix x(rows_k.size() + fit_test.size(), p);
            std::vector<std::size_t> rows(x.rows());
            std::vector<int> labels(x.rows());
            for (std::size_t i = 0; i < rows_k.size(); ++i) {
                std::copy_n(train.row(rows_k[i]).begin(), p, x.row(i).begin());
                labels[i] = 1;
            }
            for (std::size_t i = 0; i < fit_test.size(); ++i) {
                std::copy_n(test.row(fit_test[i]).begin(), p, x.row(rows_k.size() + i).begin());
                labels[rows_k.size() + i] = 0;
            }
            std::iota(rows.begin(), rows.end(), 0);
            const Forest forest = fit_forest(x, rows, labels, 2, params.n_trees, params.tree,
                                             derive_seed(params.seed, "bcops", round, k), params.threads);
            std::vector<double> cal;
            for (auto r : rows_of_class(train, cal_train, static_cast<int>(k)))
                cal.push_back(forest.predict_proba(train.row(r))[1]);
            std::sort(cal.begin(), cal.end());
            parallel_for(predict_test.size(), params.threads, [&](std::size_t t) {
                const std::size_t i = predict_test[t];
                pvalues(i, k) = split_conformal_pvalue_sorted(cal, forest.predict_proba(test.row(i))[1]);
            });
        }
    }
    return threshold_scores(pvalues, params.alpha, train.class_names());
}

std::vector<std::size_t> descending_order(std::span<const double> pi) {
    std::vector<std::size_t> order(pi.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pi[a] > pi[b]; });
    return order;
}

namespace {

void validate_probabilities(std::span<const double> pi) {
    if (pi.empty()) throw DataError("empty probability vector");
    double total = 0.0;
    for (double v : pi) {
        if (!(v >= 0.0)) throw DataError("probabilities must be non-negative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DataError("probabilities must sum to 1");
}

} // namespace

double acrf_score(std::span<const double> pi, std::size_t y, std::optional<double> u, bool randomized) {
    validate_probabilities(pi);
    if (y >= pi.size()) throw DataError("class outside the probability vector");
    if (randomized && !u) throw DataError("randomized score needs u");
    if (u && !(*u >= 0.0 && *u <= 1.0)) throw DataError("u must lie in [0, 1]");
    const auto order = descending_order(pi);
    double ahead = 0.0;
    for (std::size_t c : order) {
        if (c == y) break;
        ahead += pi[c];
    }
    if (!randomized) return ahead;
    return ahead + (1.0 - *u) * pi[y];
}

std::vector<int> acrf_set(std::span<const double> pi, double tau, std::optional<double> u, bool randomized) {
    const auto order = descending_order(pi);
    const std::size_t C = pi.size();
    std::size_t L = C;
    double cum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        cum += pi[order[c]];
        if (randomized ? cum >= tau : cum > tau) {
            L = c + 1;
            if (randomized) {
                const double v = (cum - tau) / pi[order[c]];
                if (*u < v) L = c;
            }
            break;
        }
    }
    std::vector<int> set;
    for (std::size_t c = 0; c < L; ++c) set.push_back(static_cast<int>(order[c]));
    std::sort(set.begin(), set.end());
    return set;
}

double weighted_upper_quantile(std::span<const double> values, std::span<const double> weights,
                               double infinity_weight, double alpha) {
    if (values.size() != weights.size()) throw DataError("one weight per value required");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double total = infinity_weight;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DataError("quantile weights must be non-negative");
        total += w;
    }
    if (!(infinity_weight >= 0.0) || std::abs(total - 1.0) > 1e-9)
        throw DataError("quantile weights must sum to 1");
    const double target = 1.0 - alpha - kQuantileSlack;
    double cum = 0.0;
    for (std::size_t t = 0; t < order.size(); ++t) {
        cum += weights[order[t]];
        // Equal values share one atom: only test after the last of a run.
        if (t + 1 < order.size() && values[order[t + 1]] == values[order[t]]) continue;
        if (cum >= target) return values[order[t]];
    }
    return kInf;
}

double conformal_upper_quantile(std::span<const double> values, double alpha) {
    const std::size_t n = values.size();
    const double pos = std::ceil((1.0 - alpha) * static_cast<double>(n + 1) - 1e-9);
    if (pos > static_cast<double>(n)) return kInf;
    const auto k = static_cast<std::size_t>(std::max(pos, 1.0));
    std::vector<double> sorted(values.begin(), values.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
    return sorted[k - 1];
}

namespace {

struct AdaptiveCalibration {
    Forest forest;
    std::vector<double> scores;          // E_i on the calibration fold
    std::vector<std::size_t> rows;       // calibration rows, aligned with scores
};

AdaptiveCalibration calibrate_adaptive(const Dataset& train, const BaselineParams& params, const SplitPlan& plan) {
    const std::size_t K = train.num_classes();
    if (plan.fit.empty() || plan.calibration.empty()) throw DataError("adaptive sets need both training folds");
    AdaptiveCalibration out;
    const auto labels = labels_of(train, plan.fit);
    out.forest = fit_forest(train.features(), plan.fit, labels, K, params.n_trees, params.tree,
                            derive_seed(params.seed, "acrf"), params.threads);
    out.rows = plan.calibration;
    out.scores.resize(out.rows.size());
    for (std::size_t t = 0; t < out.rows.size(); ++t) {
        const std::size_t r = out.rows[t];
        const auto pi = out.forest.predict_proba(train.row(r));
        std::optional<double> u;
        if (params.randomized) u = Rng(derive_seed(params.seed, "acrf_u_cal", r)).uniform();
        out.scores[t] = acrf_score(pi, static_cast<std::size_t>(train.label(r)), u, params.randomized);
    }
    return out;
}

std::optional<double> test_uniform(const BaselineParams& params, std::size_t i) {
    if (!params.randomized) return std::nullopt;
    return Rng(derive_seed(params.seed, "acrf_u_test", i)).uniform();
}

} // namespace

PredictionSets acrf(const Dataset& train, const Dataset& test, const BaselineParams& params, const SplitPlan& plan) {
    params.validate();
    require_compatible(train, test);
    const auto cal = calibrate_adaptive(train, params, plan);
    const double tau = conformal_upper_quantile(cal.scores, params.alpha);
    PredictionSets out;
    out.class_names = train.class_names();
    out.sets.resize(test.size());
    parallel_for(test.size(), params.threads, [&](std::size_t i) {
        out.sets[i] = acrf_set(cal.forest.predict_proba(test.row(i)), tau, test_uniform(params, i), params.randomized);
    });
    return out;
}

OddsFunction fit_odds_model(const Matrix& train_x, std::span<const std::size_t> train_rows, const Matrix& test_x,
                            std::span<const std::size_t> test_rows, const BaselineParams& params,
                            std::uint64_t seed) {
    if (train_rows.empty() || test_rows.empty()) throw DataError("odds model needs train and test rows");
    const std::size_t p = train_x.cols();
    Matrix x(train_rows.size() + test_rows.size(), p);
    std::vector<int> labels(x.rows());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        std::copy_n(train_x.row(train_rows[i]).begin(), p, x.row(i).begin());
        labels[i] = 0;
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
        std::copy_n(test_x.row(test_rows[i]).begin(), p, x.row(train_rows.size() + i).begin());
        labels[train_rows.size() + i] = 1;
    }
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
    auto forest = std::make_shared<const Forest>(
        fit_forest(x, rows, labels, 2, params.n_trees, params.tree, seed, params.threads));
    return [forest](std::span<const double> q) {
        const double pt = std::clamp(forest->predict_proba(q)[1], 1e-3, 1.0 - 1e-3);
        return pt / (1.0 - pt);
    };
}

PredictionSets acrf_shift_with_odds(const Dataset& train, const Dataset& test, const BaselineParams& params,
                                    const SplitPlan& plan, const OddsFunction& odds_for_a,
                                    const OddsFunction& odds_for_b) {
    params.validate();
    require_compatible(train, test);
    const auto cal = calibrate_adaptive(train, params, plan);
    PredictionSets out;
    out.class_names = train.class_names();
    out.sets.resize(test.size());

    auto predict_fold = [&](const std::vector<std::size_t>& fold, const OddsFunction& odds) {
        std::vector<double> cal_odds(cal.rows.size());
        double total = 0.0;
        for (std::size_t t = 0; t < cal.rows.size(); ++t) {
            cal_odds[t] = odds(train.row(cal.rows[t]));
            total += cal_odds[t];
        }
        parallel_for(fold.size(), params.threads, [&](std::size_t f) {
            const std::size_t i = fold[f];
            const double r0 = odds(test.row(i));
            const double denom = r0 + total;
            std::vector<double> w(cal_odds.size());
            for (std::size_t t = 0; t < w.size(); ++t) w[t] = cal_odds[t] / denom;
            const double tau = weighted_upper_quantile(cal.scores, w, r0 / denom, params.alpha);
            out.sets[i] = acrf_set(cal.forest.predict_proba(test.row(i)), tau, test_uniform(params, i),
                                   params.randomized);
        });
    };
    predict_fold(plan.test_a, odds_for_a);
    predict_fold(plan.test_b, odds_for_b);
    return out;
}

PredictionSets acrf_shift(const Dataset& train, const Dataset& test, const BaselineParams& params,
                          const SplitPlan& plan) {
    if (plan.test_a.empty() || plan.test_b.empty()) throw DataError("ACRF-shift needs two non-empty test folds");
    const auto odds_a = fit_odds_model(train.features(), plan.fit, test.features(), plan.test_b, params,
                                       derive_seed(params.seed, "odds", 0));
    const auto odds_b = fit_odds_model(train.features(), plan.fit, test.features(), plan.test_a, params,
                                       derive_seed(params.seed, "odds", 1));
    return acrf_shift_with_odds(train, test, params, plan, odds_a, odds_b);
}

} // namespace csforest

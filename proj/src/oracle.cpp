#include "csforest/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csforest/error.hpp"
#include "csforest/rng.hpp"

namespace csforest {

namespace {

double log_mixture(const std::vector<WeightedComponent>& mix, std::span<const double> x) {
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(mix.size());
    for (const auto& c : mix) {
        if (c.weight <= 0.0) continue;
        terms.push_back(std::log(c.weight) + c.spec.log_density(x));
        top = std::max(top, terms.back());
    }
    if (terms.empty() || !std::isfinite(top)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - top);
    return top + std::log(acc);
}

} // namespace

void OracleSpec::validate() const {
    if (classes.empty()) throw ConfigError("oracle needs class densities");
    if (mc_samples < 1000) throw ConfigError("oracle Monte Carlo count must be >= 1000");
    if (!(w >= 0.0)) throw ConfigError("oracle weight w must be >= 0");
    const std::size_t dim = classes.front().mean.size();
    for (const auto& c : classes) c.validate(dim);
    for (const auto* mix : {&test_mixture, &train_mixture})
        for (const auto& c : *mix) {
            c.spec.validate(dim);
            if (c.weight < 0.0) throw ConfigError("mixture weights must be non-negative");
        }
}

double OracleSpec::log_mu(std::span<const double> x) const {
    const double lte = log_mixture(test_mixture, x);
    if (w == 0.0) return lte;
    const double ltr = std::log(w) + log_mixture(train_mixture, x);
    const double top = std::max(lte, ltr);
    if (!std::isfinite(top)) return top;
    return top + std::log(std::exp(lte - top) + std::exp(ltr - top));
}

OracleSpec oracle_for_design(const SyntheticDesign& design, double w, std::size_t mc_samples, std::uint64_t seed) {
    design.validate();
    OracleSpec spec;
    spec.class_names = design.class_names;
    spec.classes = design.inliers;
    spec.w = w;
    spec.mc_samples = mc_samples;
    spec.seed = seed;
    double n_tr = 0.0, n_te = 0.0;
    for (auto c : design.train_counts) n_tr += static_cast<double>(c);
    for (auto c : design.test_counts) n_te += static_cast<double>(c);
    for (auto c : design.outlier_test_counts) n_te += static_cast<double>(c);
    for (std::size_t k = 0; k < design.inliers.size(); ++k) {
        spec.train_mixture.push_back({static_cast<double>(design.train_counts[k]) / n_tr, design.inliers[k]});
        spec.test_mixture.push_back({static_cast<double>(design.test_counts[k]) / n_te, design.inliers[k]});
    }
    for (std::size_t r = 0; r < design.outliers.size(); ++r)
        spec.test_mixture.push_back({static_cast<double>(design.outlier_test_counts[r]) / n_te, design.outliers[r]});
    spec.validate();
    return spec;
}

double oracle_log_score(const OracleSpec& spec, std::span<const double> x, std::size_t k) {
    if (k >= spec.classes.size()) throw DataError("oracle class out of range");
    if (x.size() != spec.classes[k].mean.size()) throw DataError("oracle feature dimension mismatch");
    const double lmu = spec.log_mu(x);
    if (!std::isfinite(lmu)) throw DataError("mu(x) is zero; oracle score undefined");
    return spec.classes[k].log_density(x) - lmu;
}

double oracle_score(const OracleSpec& spec, std::span<const double> x, std::size_t k) {
    return std::exp(oracle_log_score(spec, x, k));
}

std::vector<double> oracle_reference(const OracleSpec& spec, std::size_t k) {
    spec.validate();
    const auto& f = spec.classes.at(k);
    Rng rng(derive_seed(spec.seed, "oracle_mc", k));
    std::vector<double> buf(f.mean.size());
    std::vector<double> ref(spec.mc_samples);
    for (auto& r : ref) {
        f.sample_into(rng, buf);
        r = oracle_log_score(spec, buf, k);
    }
    std::sort(ref.begin(), ref.end());
    return ref;
}

PredictionSets oracle_sets(const OracleSpec& spec, const Dataset& test, double alpha) {
    spec.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const std::size_t K = spec.classes.size();
    Matrix rank(test.size(), K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto ref = oracle_reference(spec, k);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double s = oracle_log_score(spec, test.row(i), k);
            const auto below = std::upper_bound(ref.begin(), ref.end(), s) - ref.begin();
            rank(i, k) = static_cast<double>(below) / static_cast<double>(ref.size());
        }
    }
    auto names = spec.class_names;
    if (names.empty())
        for (std::size_t k = 0; k < K; ++k) names.push_back(std::to_string(k + 1));
    return threshold_scores(rank, alpha, std::move(names));
}

} // namespace csforest

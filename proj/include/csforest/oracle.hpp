#ifndef CSFOREST_ORACLE_HPP
#define CSFOREST_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "csforest/dataset.hpp"
#include "csforest/prediction.hpp"

namespace csforest {

struct WeightedComponent {
    double weight = 0.0;
    GaussianClassSpec spec;
};

/// Known-density setting. mu(x) = f_te(x) + w * f_tr(x), with f_te and f_tr
/// given as Gaussian mixtures.
struct OracleSpec {
    std::vector<std::string> class_names;
    std::vector<GaussianClassSpec> classes;  // f_k
    std::vector<WeightedComponent> test_mixture;
    std::vector<WeightedComponent> train_mixture;
    double w = 1.0;
    std::size_t mc_samples = 50000;
    std::uint64_t seed = 0;

    void validate() const;
    double log_mu(std::span<const double> x) const;
};

/// Oracle for a synthetic design: mixture weights are the design's count
/// proportions in each cohort.
OracleSpec oracle_for_design(const SyntheticDesign& design, double w, std::size_t mc_samples, std::uint64_t seed);

/// log s_k(x; mu) = log f_k(x) - log mu(x).
double oracle_log_score(const OracleSpec& spec, std::span<const double> x, std::size_t k);

/// s_k(x; mu) = f_k(x) / mu(x). Throws when mu(x) underflows to zero.
double oracle_score(const OracleSpec& spec, std::span<const double> x, std::size_t k);

/// Monte Carlo reference distribution of log s_k(X; mu), X ~ f_k, sorted ascending.
std::vector<double> oracle_reference(const OracleSpec& spec, std::size_t k);

/// C(x) = {k : P_{X ~ f_k}[s_k(x) >= s_k(X)] >= alpha}, with the probability
/// estimated from spec.mc_samples draws per class.
PredictionSets oracle_sets(const OracleSpec& spec, const Dataset& test, double alpha);

} // namespace csforest

#endif // CSFOREST_ORACLE_HPP

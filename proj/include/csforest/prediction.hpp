#ifndef CSFOREST_PREDICTION_HPP
#define CSFOREST_PREDICTION_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "csforest/dataset.hpp"

namespace csforest {

/// Per test sample set-valued predictions over classes 0..K-1. An empty set
/// flags the sample as an outlier. `scores`, when present, holds one
/// calibrated score (or conformal p-value) per (sample, class).
struct PredictionSets {
    std::vector<std::string> class_names;
    std::vector<std::vector<int>> sets;   // each sorted ascending
    std::optional<Matrix> scores;

    std::size_t size() const noexcept { return sets.size(); }
    bool contains(std::size_t i, int k) const;
};

/// Sets {k : scores(i, k) >= alpha}.
PredictionSets threshold_scores(const Matrix& scores, double alpha, std::vector<std::string> class_names);

/// CSV: `sample,score_<class>...,set`. The set is a ';'-joined list of class
/// names; an empty set is written as the token OUTLIER.
void write_prediction_csv(const PredictionSets& sets, const std::string& path);
PredictionSets read_prediction_csv(const std::string& path);

} // namespace csforest

#endif // CSFOREST_PREDICTION_HPP

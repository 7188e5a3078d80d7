#ifndef CSFOREST_EVAL_HPP
#define CSFOREST_EVAL_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "csforest/prediction.hpp"

namespace csforest {

/// Outcome mix for the test rows of one true class. For inlier classes
/// singleton + multi + empty + miss = 1, where miss means a non-empty set
/// without the true label. Outlier rows have no coverage; their rejection
/// rate is `empty`.
struct ClassBreakdown {
    std::string name;
    bool outlier = false;
    std::size_t count = 0;
    std::optional<double> coverage;
    double singleton = 0.0;
    double multi = 0.0;
    double empty = 0.0;
    double miss = 0.0;
    double type2 = 0.0;  // share of rows whose set holds a label other than the truth

    friend bool operator==(const ClassBreakdown&, const ClassBreakdown&) = default;
};

struct EvalReport {
    std::string method;
    std::vector<ClassBreakdown> classes;  // inlier classes in label order, then the outlier group
    std::size_t inlier_count = 0;
    std::size_t outlier_count = 0;
    double type1 = 0.0;          // inliers whose set misses the true label
    double type2 = 0.0;          // all rows whose set holds a wrong label
    double type2_inlier = 0.0;
    double type2_outlier = 0.0;  // = 1 - outlier rejection rate
    double mean_set_size = 0.0;

    const ClassBreakdown* find(const std::string& name) const;

    /// Stable ordered key/value view; coverage of the outlier group is omitted.
    std::vector<std::pair<std::string, double>> fields() const;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// truth holds class indices or kOutlier, aligned with `sets`.
EvalReport type_errors(const PredictionSets& sets, std::span<const int> truth, std::string method = {});

struct AggregateReport {
    std::string method;
    std::size_t runs = 0;
    std::vector<std::string> keys;
    std::vector<double> mean;
    std::vector<double> sd;  // sample standard deviation; 0 for a single run

    double mean_of(const std::string& key) const;
    double sd_of(const std::string& key) const;
};

/// Field-wise mean and sample sd across reports with identical structure.
AggregateReport aggregate_runs(std::span<const EvalReport> reports);

enum class ReportFormat { Json, Csv, LongCsv };

/// Json and Csv are lossless (import_report reads them back); LongCsv is the
/// plot-ready `class,category,rate` table.
void export_report(const EvalReport& report, const std::string& path, ReportFormat format);
EvalReport import_report(const std::string& path);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

} // namespace csforest

#endif // CSFOREST_EVAL_HPP

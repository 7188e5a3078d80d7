#ifndef CSFOREST_EXPERIMENT_HPP
#define CSFOREST_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csforest/dataset.hpp"
#include "csforest/eval.hpp"
#include "csforest/oracle.hpp"
#include "csforest/prediction.hpp"
#include "csforest/tree.hpp"

namespace csforest {

/// Registered method names.
inline const std::vector<std::string>& method_registry() {
    static const std::vector<std::string> names{"csforest", "bcops",       "crf",        "dc",
                                                "acrf",     "acrf_random", "acrf_shift", "oracle"};
    return names;
}

struct MethodSpec {
    std::string name;
    std::string label;  // output name; defaults to `name`
    double alpha = 0.05;
    double gamma = 1.0;
    bool gamma_log = false;  // csforest: use gamma = 1 / log(n_test) instead
    bool randomized = false; // acrf_shift: randomized tie-breaking
    std::size_t b_tilde = 3000;
    std::size_t n_trees = 500;
    TreeParams tree;
    double oracle_w = 1.0;
    std::size_t oracle_mc = 50000;

    const std::string& display() const { return label.empty() ? name : label; }
};

struct DataSource {
    std::string kind = "example1";  // example1 | wide_outliers | label_shift | scenario | csv
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 200;
    std::optional<std::size_t> dim;
    std::vector<std::size_t> train_counts;  // label_shift
    std::vector<std::size_t> test_counts;
    std::optional<ShiftScenario> train_scenario;
    std::optional<ShiftScenario> test_scenario;
    std::string train_csv, test_csv;
    std::string pool_csv;  // one labeled file split per class into train and test
    std::string label_column = "label";
    std::map<std::string, std::size_t> train_subsample;  // with pool_csv: per-class train draws
    std::map<std::string, std::size_t> test_subsample;   // with pool_csv: per-class test draws
};

struct AuditSpec {
    std::vector<std::size_t> n_values{3, 6, 9, 12};
    std::vector<double> alphas{0.05, 0.2, 0.5};
    std::size_t seeds = 1000;
    std::size_t b_tilde = 20;
    std::size_t test_per_class = 2;
};

struct ExperimentConfig {
    DataSource data;
    std::vector<MethodSpec> methods;
    std::size_t repetitions = 1;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string output_dir;
    AuditSpec audit;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

/// Parses the JSON config format. Relative CSV paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

struct ExperimentData {
    Dataset train;
    Dataset test;
    std::optional<OracleSpec> oracle;  // known-density synthetic sources only
};

ExperimentData make_data(const DataSource& source, std::uint64_t seed);

struct MethodRun {
    PredictionSets sets;
    EvalReport report;
    nlohmann::ordered_json log;  // seeds, realized tree counts, parameters
};

/// Runs one registered method; labels in data.test are used only for the report.
MethodRun run_method(const MethodSpec& spec, const ExperimentData& data, std::uint64_t seed, std::size_t threads);

/// Seed derivations used by run_experiment.
std::uint64_t repetition_seed(std::uint64_t master, std::size_t rep);
std::uint64_t data_seed(std::uint64_t rep_seed);
std::uint64_t method_seed(std::uint64_t rep_seed, const std::string& method_label);

struct ExperimentSummary {
    std::vector<std::string> written;  // files, in write order
    std::vector<AggregateReport> per_method;
};

/// Writes <label>_rep<r>_sets.csv and <label>_rep<r>_report.json for every
/// repetition and method, then manifest.json.
ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* progress = nullptr);

/// Writes train.csv and test.csv for one repetition.
std::vector<std::string> generate_data_files(const ExperimentConfig& config, std::size_t rep = 0);

struct AuditOutcome {
    std::size_t instances = 0;
    std::size_t violations = 0;
    std::size_t max_strange = 0;
};

/// Strange-set audits on Example-1 instances for every (n, alpha, seed);
/// one CSV line per instance goes to `log`.
AuditOutcome run_audit(const AuditSpec& spec, std::uint64_t master_seed, std::size_t threads, std::ostream& log);

/// Method | Type I | Type II | Type II (inliers) | Type II (outliers), mean +- sd.
void write_comparison_table(const std::vector<AggregateReport>& rows, std::ostream& out, bool csv);

/// Groups reports by method name (first-appearance order) and aggregates.
std::vector<AggregateReport> aggregate_by_method(const std::vector<EvalReport>& reports);

} // namespace csforest

#endif // CSFOREST_EXPERIMENT_HPP

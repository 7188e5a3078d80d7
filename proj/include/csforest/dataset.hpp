#ifndef CSFOREST_DATASET_HPP
#define CSFOREST_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace csforest {

// Label sentinels. Class labels are 0-based indices into Dataset::class_names.
inline constexpr int kUnlabeled = -1;
inline constexpr int kOutlier = -2;   // ground truth for rows from no training class; eval only
inline constexpr const char* kOutlierName = "R";

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    void append_row(std::span<const double> values);

    /// New matrix holding the given rows in order.
    Matrix select_rows(std::span<const std::size_t> rows) const;

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Features plus per-row labels. Immutable after construction.
class Dataset {
public:
    Dataset() = default;
    /// Validates: n >= 1, p >= 1, labels.size() == n, each label is a class
    /// index, kUnlabeled or kOutlier.
    Dataset(Matrix features, std::vector<int> labels, std::vector<std::string> class_names);

    const Matrix& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<std::string>& class_names() const noexcept { return class_names_; }

    std::size_t size() const noexcept { return features_.rows(); }
    std::size_t dim() const noexcept { return features_.cols(); }
    std::size_t num_classes() const noexcept { return class_names_.size(); }

    std::span<const double> row(std::size_t i) const { return features_.row(i); }
    int label(std::size_t i) const { return labels_[i]; }

    /// Row indices carrying the given label.
    std::vector<std::size_t> rows_with_label(int label) const;
    std::vector<std::size_t> class_counts() const;

    Dataset subset(std::span<const std::size_t> rows) const;
    /// Same rows with every label replaced by kUnlabeled.
    Dataset without_labels() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    Matrix features_;
    std::vector<int> labels_;
    std::vector<std::string> class_names_;
};

/// Diagonal Gaussian component.
struct GaussianClassSpec {
    std::vector<double> mean;
    std::vector<double> sd;

    void validate(std::size_t dim) const;
    double log_density(std::span<const double> x) const;
    template <class RngT>
    void sample_into(RngT& rng, std::span<double> out) const {
        for (std::size_t j = 0; j < mean.size(); ++j) out[j] = rng.normal(mean[j], sd[j]);
    }
};

/// Mixture (pi_1..pi_K, epsilon) over inlier classes plus one outlier component.
struct ShiftScenario {
    std::vector<std::string> class_names;
    std::vector<GaussianClassSpec> inliers;
    std::vector<double> weights;
    std::optional<GaussianClassSpec> outlier;
    double outlier_weight = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Fixed-count synthetic design: inlier classes seen in training and extra
/// outlier components that only appear in the test cohort.
struct SyntheticDesign {
    std::vector<std::string> class_names;
    std::vector<GaussianClassSpec> inliers;
    std::vector<GaussianClassSpec> outliers;
    std::vector<std::size_t> train_counts;          // per inlier class
    std::vector<std::size_t> test_counts;           // per inlier class
    std::vector<std::size_t> outlier_test_counts;   // per outlier component

    std::size_t dim() const { return inliers.empty() ? 0 : inliers.front().mean.size(); }
    void validate() const;
};

/// Two classes and one outlier component in R^p (p >= 2); dims 3..p are N(0,1) noise.
/// class 1: X1~N(0,1), X2~N(0,1); class 2: X1~N(3,0.5), X2~N(0,1); R: X1~N(0,1), X2~N(3,1).
SyntheticDesign example1_design(std::size_t n_train_per_class, std::size_t n_test_per_class,
                                std::size_t dim = 10);

/// Example 1 scaled up to R^dim: coordinates are grouped in blocks of
/// max(1, dim/10). Class 2 is N(3, 0.5) on block 0; outliers R1..R4 are
/// N(3, 1) on blocks 1..4; everything else is N(0, 1). Stands in for the
/// digit experiments.
SyntheticDesign wide_outlier_design(std::size_t n_train_per_class, std::size_t n_test_per_class,
                                    std::size_t dim = 50);

/// Six overlapping classes for label-shift experiments: classes j and j+3 share
/// a shifted coordinate and differ by a unit shift in a second one. Counts per
/// class are supplied by the caller.
SyntheticDesign label_shift_design(std::vector<std::size_t> train_counts,
                                   std::vector<std::size_t> test_counts, std::size_t dim = 10);

/// Samples (train, test). Train rows are grouped by class; test rows by class
/// then outlier component (outliers labeled kOutlier).
std::pair<Dataset, Dataset> generate(const SyntheticDesign& design, std::uint64_t seed);

std::pair<Dataset, Dataset> generate_example1(std::size_t n_train_per_class,
                                              std::size_t n_test_per_class, std::uint64_t seed);

Dataset sample_shift_scenario(const ShiftScenario& scenario);

/// Reads a comma-separated file. A first row containing any non-numeric cell
/// is treated as a header. Label values become class indices in order of
/// first appearance.
Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column);

/// Writes features (x1..xp) and, when any row is labeled, a leading `label`
/// column holding class names ("R" for outliers, empty for unlabeled).
void save_csv(const Dataset& data, const std::string& path);

/// Re-expresses labels against `class_names`; labels whose name is not listed
/// become kOutlier.
Dataset remap_labels(const Dataset& data, const std::vector<std::string>& class_names);

/// Uniform without-replacement sample of each listed class (keyed by class
/// name). Unlisted classes are dropped; the result's classes are the listed
/// ones with a non-zero count, in their original order.
Dataset subsample_per_class(const Dataset& data, const std::map<std::string, std::size_t>& counts,
                            std::uint64_t seed);

/// Disjoint per-class draws from one labeled pool: for each class, a random
/// permutation supplies train_counts[name] training rows followed by
/// test_counts[name] test rows. Training classes are those with a non-zero
/// train count; test rows of any other class are labeled kOutlier.
std::pair<Dataset, Dataset> split_per_class(const Dataset& data, const std::map<std::string, std::size_t>& train_counts,
                                            const std::map<std::string, std::size_t>& test_counts,
                                            std::uint64_t seed);

} // namespace csforest

#endif // CSFOREST_DATASET_HPP

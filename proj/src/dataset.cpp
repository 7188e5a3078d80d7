#include "csforest/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "csforest/error.hpp"
#include "csforest/rng.hpp"

namespace csforest {

void Matrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw DataError("row dimension mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Dataset::Dataset(Matrix features, std::vector<int> labels, std::vector<std::string> class_names)
    : features_(std::move(features)), labels_(std::move(labels)), class_names_(std::move(class_names)) {
    if (features_.rows() == 0) throw DataError("dataset has no rows");
    if (features_.cols() == 0) throw DataError("dataset has no feature columns");
    if (labels_.size() != features_.rows()) throw DataError("label count does not match row count");
    const int k = static_cast<int>(class_names_.size());
    for (int y : labels_) {
        if (y != kUnlabeled && y != kOutlier && (y < 0 || y >= k))
            throw DataError("label " + std::to_string(y) + " outside class range");
    }
}

std::vector<std::size_t> Dataset::rows_with_label(int label) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == label) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (int y : labels_)
        if (y >= 0) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (auto r : rows) labels.push_back(labels_[r]);
    return Dataset(features_.select_rows(rows), std::move(labels), class_names_);
}

Dataset Dataset::without_labels() const {
    return Dataset(features_, std::vector<int>(labels_.size(), kUnlabeled), class_names_);
}

void GaussianClassSpec::validate(std::size_t dim) const {
    if (mean.size() != dim || sd.size() != dim)
        throw ConfigError("Gaussian spec dimension does not match dataset dimension");
    for (double s : sd)
        if (!(s > 0.0)) throw ConfigError("Gaussian standard deviations must be positive");
}

double GaussianClassSpec::log_density(std::span<const double> x) const {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double acc = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
        const double z = (x[j] - mean[j]) / sd[j];
        acc -= 0.5 * z * z + std::log(sd[j]) + half_log_2pi;
    }
    return acc;
}

void ShiftScenario::validate() const {
    if (inliers.empty()) throw ConfigError("scenario needs at least one inlier class");
    if (weights.size() != inliers.size()) throw ConfigError("one mixture weight per inlier class required");
    if (!class_names.empty() && class_names.size() != inliers.size())
        throw ConfigError("one class name per inlier class required");
    const std::size_t dim = inliers.front().mean.size();
    if (dim == 0) throw ConfigError("scenario dimension must be >= 1");
    double total = outlier_weight;
    for (std::size_t k = 0; k < inliers.size(); ++k) {
        inliers[k].validate(dim);
        if (weights[k] < 0.0) throw ConfigError("mixture weights must be non-negative");
        total += weights[k];
    }
    if (outlier_weight < 0.0) throw ConfigError("outlier weight must be non-negative");
    if (outlier_weight > 0.0 && !outlier) throw ConfigError("outlier weight set without an outlier spec");
    if (outlier) outlier->validate(dim);
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
    if (samples == 0) throw ConfigError("scenario sample count must be >= 1");
}

void SyntheticDesign::validate() const {
    if (inliers.empty()) throw ConfigError("design needs at least one inlier class");
    if (class_names.size() != inliers.size() || train_counts.size() != inliers.size() ||
        test_counts.size() != inliers.size())
        throw ConfigError("design per-class vectors disagree in length");
    if (outlier_test_counts.size() != outliers.size())
        throw ConfigError("one test count per outlier component required");
    const std::size_t p = dim();
    if (p == 0) throw ConfigError("design dimension must be >= 1");
    for (const auto& s : inliers) s.validate(p);
    for (const auto& s : outliers) s.validate(p);
}

namespace {

GaussianClassSpec standard_normal(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

} // namespace

SyntheticDesign example1_design(std::size_t n_train_per_class, std::size_t n_test_per_class,
                                std::size_t dim) {
    if (n_train_per_class == 0 || n_test_per_class == 0) throw ConfigError("per-class counts must be >= 1");
    if (dim < 2) throw ConfigError("Example-1 design needs dim >= 2");
    SyntheticDesign d;
    d.class_names = {"1", "2"};
    auto c1 = standard_normal(dim);
    auto c2 = standard_normal(dim);
    c2.mean[0] = 3.0;
    c2.sd[0] = 0.5;
    auto r = standard_normal(dim);
    r.mean[1] = 3.0;
    d.inliers = {c1, c2};
    d.outliers = {r};
    d.train_counts = {n_train_per_class, n_train_per_class};
    d.test_counts = {n_test_per_class, n_test_per_class};
    d.outlier_test_counts = {n_test_per_class};
    return d;
}

SyntheticDesign wide_outlier_design(std::size_t n_train_per_class, std::size_t n_test_per_class,
                                    std::size_t dim) {
    if (n_train_per_class == 0 || n_test_per_class == 0) throw ConfigError("per-class counts must be >= 1");
    if (dim < 5) throw ConfigError("wide outlier design needs dim >= 5");
    // Coordinates come in blocks of max(1, dim / 10); block 0 carries the
    // class-2 shift and blocks 1..4 the four outlier shifts.
    const std::size_t blk = std::max<std::size_t>(1, dim / 10);
    SyntheticDesign d;
    d.class_names = {"1", "2"};
    auto c2 = standard_normal(dim);
    for (std::size_t q = 0; q < blk; ++q) {
        c2.mean[q] = 3.0;
        c2.sd[q] = 0.5;
    }
    d.inliers = {standard_normal(dim), c2};
    for (std::size_t j = 1; j <= 4; ++j) {
        auto r = standard_normal(dim);
        for (std::size_t q = 0; q < blk; ++q) r.mean[j * blk + q] = 3.0;
        d.outliers.push_back(r);
        d.outlier_test_counts.push_back(n_test_per_class);
    }
    d.train_counts = {n_train_per_class, n_train_per_class};
    d.test_counts = {n_test_per_class, n_test_per_class};
    return d;
}

SyntheticDesign label_shift_design(std::vector<std::size_t> train_counts,
                                   std::vector<std::size_t> test_counts, std::size_t dim) {
    if (train_counts.size() != 6 || test_counts.size() != 6)
        throw ConfigError("label-shift design has six classes");
    if (dim < 6) throw ConfigError("label-shift design needs dim >= 6");
    SyntheticDesign d;
    for (std::size_t k = 0; k < 6; ++k) {
        d.class_names.push_back(std::to_string(k));
        auto s = standard_normal(dim);
        s.mean[k % 3] = 3.0;
        if (k >= 3) s.mean[k] = 1.0;
        d.inliers.push_back(s);
    }
    d.train_counts = std::move(train_counts);
    d.test_counts = std::move(test_counts);
    return d;
}

std::pair<Dataset, Dataset> generate(const SyntheticDesign& design, std::uint64_t seed) {
    design.validate();
    const std::size_t p = design.dim();
    Rng rng(derive_seed(seed, "generate"));
    std::vector<double> buf(p);

    Matrix xtr, xte;
    std::vector<int> ytr, yte;
    for (std::size_t k = 0; k < design.inliers.size(); ++k) {
        for (std::size_t i = 0; i < design.train_counts[k]; ++i) {
            design.inliers[k].sample_into(rng, buf);
            xtr.append_row(buf);
            ytr.push_back(static_cast<int>(k));
        }
    }
    for (std::size_t k = 0; k < design.inliers.size(); ++k) {
        for (std::size_t i = 0; i < design.test_counts[k]; ++i) {
            design.inliers[k].sample_into(rng, buf);
            xte.append_row(buf);
            yte.push_back(static_cast<int>(k));
        }
    }
    for (std::size_t r = 0; r < design.outliers.size(); ++r) {
        for (std::size_t i = 0; i < design.outlier_test_counts[r]; ++i) {
            design.outliers[r].sample_into(rng, buf);
            xte.append_row(buf);
            yte.push_back(kOutlier);
        }
    }
    return {Dataset(std::move(xtr), std::move(ytr), design.class_names),
            Dataset(std::move(xte), std::move(yte), design.class_names)};
}

std::pair<Dataset, Dataset> generate_example1(std::size_t n_train_per_class,
                                              std::size_t n_test_per_class, std::uint64_t seed) {
    return generate(example1_design(n_train_per_class, n_test_per_class), seed);
}

Dataset sample_shift_scenario(const ShiftScenario& scenario) {
    scenario.validate();
    const std::size_t p = scenario.inliers.front().mean.size();
    const std::size_t k_count = scenario.inliers.size();
    std::vector<std::string> names = scenario.class_names;
    if (names.empty())
        for (std::size_t k = 0; k < k_count; ++k) names.push_back(std::to_string(k + 1));

    Rng rng(derive_seed(scenario.seed, "scenario"));
    std::vector<double> buf(p);
    Matrix x;
    std::vector<int> y;
    for (std::size_t i = 0; i < scenario.samples; ++i) {
        const double u = rng.uniform();
        double cum = 0.0;
        int component = kOutlier;
        for (std::size_t k = 0; k < k_count; ++k) {
            cum += scenario.weights[k];
            if (u < cum) {
                component = static_cast<int>(k);
                break;
            }
        }
        // u landing past the inlier mass belongs to the outlier component, or to
        // the last positive-weight class when rounding leaves a gap.
        if (component == kOutlier && !(scenario.outlier && scenario.outlier_weight > 0.0)) {
            for (std::size_t k = k_count; k-- > 0;)
                if (scenario.weights[k] > 0.0) {
                    component = static_cast<int>(k);
                    break;
                }
        }
        const auto& spec = component == kOutlier ? *scenario.outlier
                                                 : scenario.inliers[static_cast<std::size_t>(component)];
        spec.sample_into(rng, buf);
        x.append_row(buf);
        y.push_back(component);
    }
    return Dataset(std::move(x), std::move(y), std::move(names));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ') ++start;
        cells.push_back(cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

} // namespace

Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
        row_lines.push_back(line_no);
    }
    if (rows.empty()) throw DataError(path + ": no data rows");

    std::vector<std::string> header;
    bool has_header = false;
    for (const auto& cell : rows.front()) {
        double v;
        if (!parse_number(cell, v)) has_header = true;
    }
    if (has_header) header = rows.front();
    const std::size_t first = has_header ? 1 : 0;
    if (rows.size() == first) throw DataError(path + ": no data rows");

    const std::size_t width = rows[first].size();
    std::optional<std::size_t> label_idx;
    if (label_column) {
        if (has_header) {
            auto it = std::find(header.begin(), header.end(), *label_column);
            if (it == header.end()) throw ConfigError("unknown label column '" + *label_column + "'");
            label_idx = static_cast<std::size_t>(it - header.begin());
        } else {
            // Headerless files may name the label column by 0-based position.
            double pos;
            if (!parse_number(*label_column, pos) || pos < 0 || pos >= static_cast<double>(width) ||
                pos != std::floor(pos))
                throw ConfigError("unknown label column '" + *label_column + "'");
            label_idx = static_cast<std::size_t>(pos);
        }
    }
    if (has_header && header.size() != width)
        throw ParseError(path, row_lines[first], "expected " + std::to_string(header.size()) + " columns");
    if (label_idx && width < 2) throw DataError(path + ": no feature columns besides the label");

    Matrix x;
    std::vector<int> y;
    std::vector<std::string> names;
    std::map<std::string, int> name_index;
    std::vector<double> buf;
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        if (cells.size() != width)
            throw ParseError(path, row_lines[r],
                             "expected " + std::to_string(width) + " columns, got " + std::to_string(cells.size()));
        buf.clear();
        int label = kUnlabeled;
        for (std::size_t c = 0; c < width; ++c) {
            if (label_idx && c == *label_idx) {
                auto [it, inserted] = name_index.emplace(cells[c], static_cast<int>(names.size()));
                if (inserted) names.push_back(cells[c]);
                label = it->second;
                continue;
            }
            double v;
            if (!parse_number(cells[c], v))
                throw ParseError(path, row_lines[r], "non-numeric feature '" + cells[c] + "' in column " +
                                                         std::to_string(c + 1));
            buf.push_back(v);
        }
        x.append_row(buf);
        y.push_back(label);
    }
    return Dataset(std::move(x), std::move(y), std::move(names));
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    const bool labeled = std::any_of(data.labels().begin(), data.labels().end(),
                                     [](int y) { return y != kUnlabeled; });
    out << std::setprecision(17);
    if (labeled) out << "label,";
    for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << "x" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (labeled) {
            const int y = data.label(i);
            if (y == kOutlier) out << kOutlierName;
            else if (y >= 0) out << data.class_names()[static_cast<std::size_t>(y)];
            out << ',';
        }
        auto row = data.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

Dataset remap_labels(const Dataset& data, const std::vector<std::string>& class_names) {
    std::vector<int> labels;
    labels.reserve(data.size());
    for (int y : data.labels()) {
        if (y < 0) {
            labels.push_back(y);
            continue;
        }
        const auto& name = data.class_names()[static_cast<std::size_t>(y)];
        auto it = std::find(class_names.begin(), class_names.end(), name);
        labels.push_back(it == class_names.end() ? kOutlier : static_cast<int>(it - class_names.begin()));
    }
    return Dataset(data.features(), std::move(labels), class_names);
}

Dataset subsample_per_class(const Dataset& data, const std::map<std::string, std::size_t>& counts,
                            std::uint64_t seed) {
    const auto& names = data.class_names();
    for (const auto& [name, count] : counts) {
        if (std::find(names.begin(), names.end(), name) == names.end())
            throw DataError("class '" + name + "' not present in dataset");
    }
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> kept;
    for (std::size_t k = 0; k < names.size(); ++k) {
        auto it = counts.find(names[k]);
        if (it == counts.end() || it->second == 0) continue;
        auto rows = data.rows_with_label(static_cast<int>(k));
        if (rows.size() < it->second)
            throw DataError("class '" + names[k] + "' has " + std::to_string(rows.size()) + " rows, " +
                            std::to_string(it->second) + " requested");
        Rng rng(derive_seed(seed, "subsample", k));
        // Partial Fisher-Yates: the first `count` slots become the sample.
        for (std::size_t i = 0; i < it->second; ++i) {
            std::size_t j = i + rng.uniform_index(rows.size() - i);
            std::swap(rows[i], rows[j]);
        }
        const int new_label = static_cast<int>(kept.size());
        kept.push_back(names[k]);
        for (std::size_t i = 0; i < it->second; ++i) {
            x.append_row(data.row(rows[i]));
            y.push_back(new_label);
        }
    }
    if (y.empty()) throw DataError("subsample selected no rows");
    return Dataset(std::move(x), std::move(y), std::move(kept));
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& data, const std::map<std::string, std::size_t>& train_counts,
                                            const std::map<std::string, std::size_t>& test_counts,
                                            std::uint64_t seed) {
    const auto& names = data.class_names();
    for (const auto* counts : {&train_counts, &test_counts})
        for (const auto& [name, count] : *counts)
            if (std::find(names.begin(), names.end(), name) == names.end())
                throw DataError("class '" + name + "' not present in dataset");
    std::vector<std::size_t> train_rows, test_rows;
    std::vector<std::string> train_names;
    for (std::size_t k = 0; k < names.size(); ++k) {
        auto a = train_counts.find(names[k]);
        auto b = test_counts.find(names[k]);
        const std::size_t na = a == train_counts.end() ? 0 : a->second;
        const std::size_t nb = b == test_counts.end() ? 0 : b->second;
        if (na + nb == 0) continue;
        auto rows = data.rows_with_label(static_cast<int>(k));
        if (rows.size() < na + nb)
            throw DataError("class '" + names[k] + "' has " + std::to_string(rows.size()) + " rows, " +
                            std::to_string(na + nb) + " requested");
        Rng rng(derive_seed(seed, "split", k));
        for (std::size_t i = 0; i < na + nb; ++i) {
            std::size_t j = i + rng.uniform_index(rows.size() - i);
            std::swap(rows[i], rows[j]);
        }
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(na));
        test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(na),
                         rows.begin() + static_cast<std::ptrdiff_t>(na + nb));
        if (na > 0) train_names.push_back(names[k]);
    }
    if (train_rows.empty() || test_rows.empty()) throw DataError("split selected no training or no test rows");
    return {remap_labels(data.subset(train_rows), train_names), remap_labels(data.subset(test_rows), train_names)};
}

} // namespace csforest

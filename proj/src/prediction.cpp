#include "csforest/prediction.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "csforest/error.hpp"

namespace csforest {

bool PredictionSets::contains(std::size_t i, int k) const {
    const auto& s = sets[i];
    return std::binary_search(s.begin(), s.end(), k);
}

PredictionSets threshold_scores(const Matrix& scores, double alpha, std::vector<std::string> class_names) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    PredictionSets out;
    out.class_names = std::move(class_names);
    out.sets.resize(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i)
        for (std::size_t k = 0; k < scores.cols(); ++k)
            if (scores(i, k) >= alpha) out.sets[i].push_back(static_cast<int>(k));
    out.scores = scores;
    return out;
}

void write_prediction_csv(const PredictionSets& sets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << std::setprecision(17);
    out << "sample";
    if (sets.scores)
        for (const auto& name : sets.class_names) out << ",score_" << name;
    out << ",set\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
        out << i;
        if (sets.scores)
            for (std::size_t k = 0; k < sets.scores->cols(); ++k) out << ',' << (*sets.scores)(i, k);
        out << ',';
        if (sets.sets[i].empty()) out << "OUTLIER";
        for (std::size_t j = 0; j < sets.sets[i].size(); ++j)
            out << (j ? ";" : "") << sets.class_names[static_cast<std::size_t>(sets.sets[i][j])];
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

PredictionSets read_prediction_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty prediction file");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 2 || header.front() != "sample" || header.back() != "set")
        throw ParseError(path, 1, "unexpected prediction header");
    PredictionSets out;
    for (std::size_t c = 1; c + 1 < header.size(); ++c) {
        if (header[c].rfind("score_", 0) != 0) throw ParseError(path, 1, "unexpected column " + header[c]);
        out.class_names.push_back(header[c].substr(6));
    }
    const bool has_scores = !out.class_names.empty();
    Matrix scores;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size()) throw ParseError(path, line_no, "wrong column count");
        std::vector<double> row;
        for (std::size_t c = 1; c + 1 < cells.size(); ++c) row.push_back(std::stod(cells[c]));
        if (has_scores) scores.append_row(row);
        std::vector<int> set;
        if (cells.back() != "OUTLIER") {
            std::istringstream ss(cells.back());
            std::string name;
            while (std::getline(ss, name, ';')) {
                auto it = std::find(out.class_names.begin(), out.class_names.end(), name);
                if (it == out.class_names.end()) {
                    if (has_scores) throw ParseError(path, line_no, "unknown class " + name);
                    out.class_names.push_back(name);
                    it = out.class_names.end() - 1;
                }
                set.push_back(static_cast<int>(it - out.class_names.begin()));
            }
            std::sort(set.begin(), set.end());
        }
        out.sets.push_back(std::move(set));
    }
    if (has_scores) out.scores = std::move(scores);
    return out;
}

} // namespace csforest

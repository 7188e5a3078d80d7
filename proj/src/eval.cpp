#include "csforest/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "csforest/error.hpp"

namespace csforest {

const ClassBreakdown* EvalReport::find(const std::string& name) const {
    for (const auto& c : classes)
        if (c.name == name) return &c;
    return nullptr;
}

std::vector<std::pair<std::string, double>> EvalReport::fields() const {
    std::vector<std::pair<std::string, double>> f{
        {"type1", type1},
        {"type2", type2},
        {"type2_inlier", type2_inlier},
        {"type2_outlier", type2_outlier},
        {"mean_set_size", mean_set_size},
        {"inlier_count", static_cast<double>(inlier_count)},
        {"outlier_count", static_cast<double>(outlier_count)},
    };
    for (const auto& c : classes) {
        const std::string p = "class." + c.name + ".";
        f.emplace_back(p + "outlier", c.outlier ? 1.0 : 0.0);
        f.emplace_back(p + "count", static_cast<double>(c.count));
        if (c.coverage) f.emplace_back(p + "coverage", *c.coverage);
        f.emplace_back(p + "singleton", c.singleton);
        f.emplace_back(p + "multi", c.multi);
        f.emplace_back(p + "empty", c.empty);
        f.emplace_back(p + "miss", c.miss);
        f.emplace_back(p + "type2", c.type2);
    }
    return f;
}

EvalReport type_errors(const PredictionSets& sets, std::span<const int> truth, std::string method) {
    if (sets.size() != truth.size())
        throw DataError("prediction count " + std::to_string(sets.size()) + " does not match truth count " +
                        std::to_string(truth.size()));
    const std::size_t K = sets.class_names.size();
    EvalReport r;
    r.method = std::move(method);

    struct Tally {
        std::size_t n = 0, singleton = 0, multi = 0, empty = 0, miss = 0, wrong = 0;
    };
    std::vector<Tally> tally(K + 1);  // slot K: outliers
    std::size_t set_sizes = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int y = truth[i];
        if (y != kOutlier && (y < 0 || static_cast<std::size_t>(y) >= K))
            throw DataError("truth label outside the class range at row " + std::to_string(i));
        const auto& s = sets.sets[i];
        set_sizes += s.size();
        Tally& t = tally[y == kOutlier ? K : static_cast<std::size_t>(y)];
        ++t.n;
        const bool hit = y != kOutlier && std::binary_search(s.begin(), s.end(), y);
        if (s.empty()) ++t.empty;
        else if (hit && s.size() == 1) ++t.singleton;
        else if (hit) ++t.multi;
        else ++t.miss;
        if (s.size() > (hit ? 1U : 0U)) ++t.wrong;
    }

    auto rate = [](std::size_t a, std::size_t n) { return n ? static_cast<double>(a) / static_cast<double>(n) : 0.0; };
    std::size_t inlier_missed = 0, inlier_wrong = 0;
    for (std::size_t k = 0; k <= K; ++k) {
        const Tally& t = tally[k];
        ClassBreakdown c;
        c.outlier = k == K;
        c.name = c.outlier ? kOutlierName : sets.class_names[k];
        c.count = t.n;
        c.singleton = rate(t.singleton, t.n);
        c.multi = rate(t.multi, t.n);
        c.empty = rate(t.empty, t.n);
        c.miss = rate(t.miss, t.n);
        c.type2 = rate(t.wrong, t.n);
        if (!c.outlier) {
            c.coverage = rate(t.singleton + t.multi, t.n);
            r.inlier_count += t.n;
            inlier_missed += t.empty + t.miss;
            inlier_wrong += t.wrong;
        } else {
            r.outlier_count = t.n;
        }
        if (c.outlier && t.n == 0) continue;  // no outlier group without outlier rows
        r.classes.push_back(std::move(c));
    }
    const std::size_t outlier_wrong = tally[K].wrong;
    r.type1 = rate(inlier_missed, r.inlier_count);
    r.type2 = rate(inlier_wrong + outlier_wrong, truth.size());
    r.type2_inlier = rate(inlier_wrong, r.inlier_count);
    r.type2_outlier = rate(outlier_wrong, r.outlier_count);
    r.mean_set_size = rate(set_sizes, truth.size());
    return r;
}

double AggregateReport::mean_of(const std::string& key) const {
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) throw DataError("no field '" + key + "' in aggregate");
    return mean[static_cast<std::size_t>(it - keys.begin())];
}

double AggregateReport::sd_of(const std::string& key) const {
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) throw DataError("no field '" + key + "' in aggregate");
    return sd[static_cast<std::size_t>(it - keys.begin())];
}

AggregateReport aggregate_runs(std::span<const EvalReport> reports) {
    if (reports.empty()) throw DataError("nothing to aggregate");
    AggregateReport agg;
    agg.method = reports.front().method;
    agg.runs = reports.size();
    const auto first = reports.front().fields();
    for (const auto& [k, v] : first) agg.keys.push_back(k);
    const std::size_t F = first.size();
    std::vector<std::vector<double>> values(F);
    for (const auto& r : reports) {
        const auto f = r.fields();
        if (f.size() != F) throw DataError("reports have different structure");
        for (std::size_t j = 0; j < F; ++j) {
            if (f[j].first != agg.keys[j]) throw DataError("reports have different structure");
            values[j].push_back(f[j].second);
        }
    }
    for (const auto& v : values) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        agg.mean.push_back(m);
        agg.sd.push_back(v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0);
    }
    return agg;
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["inlier_count"] = r.inlier_count;
    j["outlier_count"] = r.outlier_count;
    j["type1"] = r.type1;
    j["type2"] = r.type2;
    j["type2_inlier"] = r.type2_inlier;
    j["type2_outlier"] = r.type2_outlier;
    j["mean_set_size"] = r.mean_set_size;
    auto& classes = j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : r.classes) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["outlier"] = c.outlier;
        cj["count"] = c.count;
        cj["coverage"] = c.coverage ? nlohmann::ordered_json(*c.coverage) : nlohmann::ordered_json(nullptr);
        cj["singleton"] = c.singleton;
        cj["multi"] = c.multi;
        cj["empty"] = c.empty;
        cj["miss"] = c.miss;
        cj["type2"] = c.type2;
        classes.push_back(std::move(cj));
    }
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        EvalReport r;
        r.method = j.at("method").get<std::string>();
        r.inlier_count = j.at("inlier_count").get<std::size_t>();
        r.outlier_count = j.at("outlier_count").get<std::size_t>();
        r.type1 = j.at("type1").get<double>();
        r.type2 = j.at("type2").get<double>();
        r.type2_inlier = j.at("type2_inlier").get<double>();
        r.type2_outlier = j.at("type2_outlier").get<double>();
        r.mean_set_size = j.at("mean_set_size").get<double>();
        for (const auto& cj : j.at("classes")) {
            ClassBreakdown c;
            c.name = cj.at("name").get<std::string>();
            c.outlier = cj.at("outlier").get<bool>();
            c.count = cj.at("count").get<std::size_t>();
            if (!cj.at("coverage").is_null()) c.coverage = cj.at("coverage").get<double>();
            c.singleton = cj.at("singleton").get<double>();
            c.multi = cj.at("multi").get<double>();
            c.empty = cj.at("empty").get<double>();
            c.miss = cj.at("miss").get<double>();
            c.type2 = cj.at("type2").get<double>();
            r.classes.push_back(std::move(c));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report JSON: ") + e.what());
    }
}

namespace {

EvalReport report_from_flat_csv(std::istream& in, const std::string& path) {
    std::string line;
    std::getline(in, line);
    if (line != "key,value") throw ParseError(path, 1, "expected header key,value");
    EvalReport r;
    std::map<std::string, ClassBreakdown*> by_name;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw ParseError(path, line_no, "expected key,value");
        const std::string key = line.substr(0, comma), value = line.substr(comma + 1);
        if (key == "method") {
            r.method = value;
            continue;
        }
        double v;
        try {
            v = std::stod(value);
        } catch (const std::exception&) {
            throw ParseError(path, line_no, "non-numeric value '" + value + "'");
        }
        if (key.rfind("class.", 0) == 0) {
            const auto dot = key.rfind('.');
            const std::string name = key.substr(6, dot - 6), field = key.substr(dot + 1);
            if (!by_name.count(name)) {
                r.classes.push_back({});
                r.classes.back().name = name;
                by_name.clear();
                for (auto& c : r.classes) by_name[c.name] = &c;
            }
            ClassBreakdown& c = *by_name[name];
            if (field == "outlier") c.outlier = v != 0.0;
            else if (field == "count") c.count = static_cast<std::size_t>(v);
            else if (field == "coverage") c.coverage = v;
            else if (field == "singleton") c.singleton = v;
            else if (field == "multi") c.multi = v;
            else if (field == "empty") c.empty = v;
            else if (field == "miss") c.miss = v;
            else if (field == "type2") c.type2 = v;
            else throw ParseError(path, line_no, "unknown class field '" + field + "'");
        } else if (key == "type1") r.type1 = v;
        else if (key == "type2") r.type2 = v;
        else if (key == "type2_inlier") r.type2_inlier = v;
        else if (key == "type2_outlier") r.type2_outlier = v;
        else if (key == "mean_set_size") r.mean_set_size = v;
        else if (key == "inlier_count") r.inlier_count = static_cast<std::size_t>(v);
        else if (key == "outlier_count") r.outlier_count = static_cast<std::size_t>(v);
        else throw ParseError(path, line_no, "unknown key '" + key + "'");
    }
    return r;
}

} // namespace

void export_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << std::setprecision(17);
    switch (format) {
    case ReportFormat::Json:
        out << report_to_json(report);
        break;
    case ReportFormat::Csv:
        out << "key,value\nmethod," << report.method << '\n';
        for (const auto& [k, v] : report.fields()) out << k << ',' << v << '\n';
        break;
    case ReportFormat::LongCsv:
        out << "method,class,category,rate\n";
        for (const auto& c : report.classes) {
            auto row = [&](const char* cat, double v) {
                out << report.method << ',' << c.name << ',' << cat << ',' << v << '\n';
            };
            row("singleton", c.singleton);
            row("multi", c.multi);
            row("empty", c.empty);
            row("miss", c.miss);
        }
        break;
    }
    if (!out) throw DataError("failed writing " + path);
}

EvalReport import_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.rfind("key,value", 0) == 0) {
        std::istringstream s(text);
        return report_from_flat_csv(s, path);
    }
    return report_from_json(text);
}

} // namespace csforest

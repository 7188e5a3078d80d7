// Acceptance suite: one PASS/FAIL line per criterion. Exit code 3 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "csforest/baselines.hpp"
#include "csforest/csforest.hpp"
#include "csforest/experiment.hpp"
#include "csforest/rng.hpp"

using namespace csforest;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr std::uint64_t kMasterSeed = 20240611;
constexpr double kAlpha = 0.05;
constexpr std::size_t kSeedsExample1 = 20;
constexpr std::size_t kBTildeExample1 = 1000;
constexpr double kCoverageFloor = 1.0 - 2.0 * kAlpha;  // every seed
constexpr double kCoverageMeanFloor = 0.93;
constexpr double kRejectionGap = 0.05;      // CSForest over BCOPS
constexpr double kOracleAgreement = 0.70;
constexpr double kOracleSetSizeGap = 0.25;
constexpr const char* kDigitsCsv = CSFOREST_DATA_DIR "/digits.csv";
constexpr std::size_t kSeedsDigits = 5;
constexpr std::size_t kBTildeDigits = 500;
constexpr std::size_t kDigitsTestPerClass = 75;  // the smallest digit class has 174 images
constexpr double kDigitsTypeICeiling = kAlpha + 0.04;
constexpr std::size_t kTinyTrainPerClass = 170;
constexpr std::size_t kSeedsShift = 5;
constexpr double kShiftAcrfFloor = 2.0 * kAlpha;
constexpr double kShiftCeiling = kAlpha + 0.05;
constexpr std::size_t kSeedsTiny = 20;
constexpr double kTinyGap = 0.20;
constexpr double kAcrfGridStep = 5e-5;
constexpr double kAcrfGridTol = 1e-4;

std::map<int, std::string> results;
int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail;
    results[id] = line.str();
    std::cerr << "  done " << id << std::endl;
}

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

MethodSpec spec(const std::string& name, const std::string& label = {}) {
    MethodSpec m;
    m.name = name;
    m.label = label;
    m.alpha = kAlpha;
    return m;
}

double inlier_rate(const EvalReport& r, double ClassBreakdown::*field) {
    double num = 0.0;
    for (const auto& c : r.classes)
        if (!c.outlier) num += (c.*field) * static_cast<double>(c.count);
    return num / static_cast<double>(r.inlier_count);
}

double rejection(const EvalReport& r) {
    const auto* c = r.find(kOutlierName);
    return c ? c->empty : 0.0;
}

// ---------------------------------------------------------------- criteria 1, 2, 6, 7

void example1_block() {
    struct Run {
        std::map<std::string, EvalReport> reports;
        std::size_t agree = 0, rows = 0;
    };
    std::vector<Run> runs;
    const std::vector<std::pair<std::string, MethodSpec>> methods = [] {
        std::vector<std::pair<std::string, MethodSpec>> out;
        auto cs = [](const std::string& label, double gamma, bool log) {
            MethodSpec m = spec("csforest", label);
            m.b_tilde = kBTildeExample1;
            m.gamma = gamma;
            m.gamma_log = log;
            return m;
        };
        out.emplace_back("csforest", cs("csforest", 1.0, false));
        out.emplace_back("csforest0", cs("csforest0", 0.0, false));
        out.emplace_back("csforest_log", cs("csforest_log", 0.0, true));
        out.emplace_back("bcops", spec("bcops"));
        out.emplace_back("crf", spec("crf"));
        out.emplace_back("dc", spec("dc"));
        out.emplace_back("oracle", spec("oracle"));
        return out;
    }();

    for (std::size_t s = 0; s < kSeedsExample1; ++s) {
        DataSource src;
        src.kind = "example1";
        src.train_per_class = 200;
        src.test_per_class = 200;
        const std::uint64_t seed = derive_seed(kMasterSeed, "example1", s);
        const ExperimentData data = make_data(src, seed);
        Run run;
        std::map<std::string, PredictionSets> sets;
        for (const auto& [label, m] : methods) {
            auto r = run_method(m, data, derive_seed(seed, "method", hash_tag(label)), 1);
            run.reports[label] = r.report;
            sets[label] = std::move(r.sets);
        }
        const auto& a = sets["csforest"].sets;
        const auto& b = sets["oracle"].sets;
        for (std::size_t i = 0; i < a.size(); ++i) run.agree += a[i] == b[i];
        run.rows = a.size();
        runs.push_back(std::move(run));
    }

    auto coverage_check = [&](const std::string& label, double& worst, double& avg) {
        worst = 1.0;
        std::vector<double> all;
        for (const auto& run : runs)
            for (const auto& c : run.reports.at(label).classes)
                if (!c.outlier) {
                    worst = std::min(worst, *c.coverage);
                    all.push_back(*c.coverage);
                }
        avg = mean(all);
        return worst >= kCoverageFloor && avg >= kCoverageMeanFloor;
    };

    {
        double worst, avg;
        const bool ok = coverage_check("csforest", worst, avg);
        report(1, "per-class coverage, Example 1", ok,
               "min over classes and seeds " + fmt(worst) + " (>= " + fmt(kCoverageFloor, 2) + "), mean " + fmt(avg) +
                   " (>= " + fmt(kCoverageMeanFloor, 2) + ")");
    }
    {
        auto avg = [&](const std::string& label, auto fn) {
            std::vector<double> v;
            for (const auto& run : runs) v.push_back(fn(run.reports.at(label)));
            return mean(v);
        };
        const double cs = avg("csforest", rejection), bc = avg("bcops", rejection), cr = avg("crf", rejection),
                     dcr = avg("dc", rejection);
        auto multi = [](const EvalReport& r) { return inlier_rate(r, &ClassBreakdown::multi); };
        const double cs_multi = avg("csforest", multi), bc_multi = avg("bcops", multi);
        const bool ok = cs > bc && bc > cr && cs > dcr && cs - bc >= kRejectionGap && cs_multi <= bc_multi;
        report(2, "outlier rejection ordering, Example 1", ok,
               "rejection csforest " + fmt(cs) + ", bcops " + fmt(bc) + ", crf " + fmt(cr) + ", dc " + fmt(dcr) +
                   "; gap " + fmt(cs - bc) + " (>= " + fmt(kRejectionGap, 2) + "); inlier multi-label csforest " +
                   fmt(cs_multi) + " <= bcops " + fmt(bc_multi));
    }
    {
        std::size_t agree = 0, rows = 0;
        std::vector<double> cs_size, or_size;
        for (const auto& run : runs) {
            agree += run.agree;
            rows += run.rows;
            cs_size.push_back(run.reports.at("csforest").mean_set_size);
            or_size.push_back(run.reports.at("oracle").mean_set_size);
        }
        const double rate = static_cast<double>(agree) / static_cast<double>(rows);
        const double gap = std::abs(mean(cs_size) - mean(or_size));
        report(6, "agreement with the density-ratio oracle", rate >= kOracleAgreement && gap <= kOracleSetSizeGap,
               "identical sets on " + fmt(rate) + " of test points (>= " + fmt(kOracleAgreement, 2) +
                   "), mean set size " + fmt(mean(cs_size)) + " vs oracle " + fmt(mean(or_size)) + " (gap <= " +
                   fmt(kOracleSetSizeGap, 2) + ")");
    }
    {
        bool ok = true;
        std::string detail;
        for (const auto* label : {"csforest0", "csforest_log", "csforest"}) {
            double worst, avg;
            ok = coverage_check(label, worst, avg) && ok;
            detail += std::string(label) + " min " + fmt(worst) + " mean " + fmt(avg) + "; ";
        }
        std::vector<double> t1, t0;
        for (const auto& run : runs) {
            t1.push_back(run.reports.at("csforest").type2_inlier);
            t0.push_back(run.reports.at("csforest0").type2_inlier);
        }
        ok = ok && mean(t1) <= mean(t0);
        detail += "inlier type II gamma=1 " + fmt(mean(t1)) + " <= gamma=0 " + fmt(mean(t0));
        report(7, "gamma sweep {0, 1/log m, 1}", ok, detail);
    }
}

// ---------------------------------------------------------------- criterion 3

DataSource digits_source(std::size_t train_per_digit, std::size_t test_per_digit) {
    DataSource src;
    src.kind = "csv";
    src.pool_csv = kDigitsCsv;
    for (int d = 0; d < 10; ++d) {
        if (d < 6) src.train_subsample[std::to_string(d)] = train_per_digit;
        src.test_subsample[std::to_string(d)] = test_per_digit;
    }
    return src;
}

void digits_block() {
    const std::vector<std::string> names{"csforest", "bcops", "crf", "dc", "acrf", "acrf_random", "acrf_shift"};
    std::map<std::string, std::vector<double>> type1, type2;
    for (std::size_t s = 0; s < kSeedsDigits; ++s) {
        const std::uint64_t seed = derive_seed(kMasterSeed, "digits", s);
        const ExperimentData data = make_data(digits_source(100, kDigitsTestPerClass), seed);
        for (const auto& n : names) {
            MethodSpec m = spec(n);
            m.b_tilde = kBTildeDigits;
            const auto r = run_method(m, data, derive_seed(seed, "method", hash_tag(n)), 1).report;
            type1[n].push_back(r.type1);
            type2[n].push_back(r.type2);
        }
    }
    bool ok = true;
    std::string worst_name;
    double worst = 0.0;
    for (const auto& n : names) {
        const double t = mean(type1[n]);
        if (t >= worst) worst = t, worst_name = n;
        ok = ok && t <= kDigitsTypeICeiling;
    }
    const double cs = mean(type2["csforest"]), bc = mean(type2["bcops"]), cr = mean(type2["crf"]),
                 dcv = mean(type2["dc"]);
    ok = ok && cs < bc && cs < cr && dcv > cs && dcv > bc && dcv > cr;
    report(3, "type I/II on handwritten digits (0-5 inliers, 6-9 outliers)", ok,
           "max type I " + fmt(worst) + " (" + worst_name + ", <= " + fmt(kDigitsTypeICeiling, 2) +
               "); type II csforest " + fmt(cs) + ", bcops " + fmt(bc) + ", crf " + fmt(cr) + ", dc " + fmt(dcv));
}

// ---------------------------------------------------------------- criterion 4

void shift_block() {
    const std::vector<std::string> names{"acrf", "csforest", "crf", "bcops"};
    std::map<std::string, std::vector<double>> type1;
    for (std::size_t s = 0; s < kSeedsShift; ++s) {
        DataSource src;
        src.kind = "label_shift";
        src.train_counts = {250, 250, 250, 50, 50, 50};
        src.test_counts = {50, 50, 50, 250, 250, 250};
        const std::uint64_t seed = derive_seed(kMasterSeed, "shift", s);
        const ExperimentData data = make_data(src, seed);
        for (const auto& n : names) {
            MethodSpec m = spec(n);
            m.b_tilde = kBTildeDigits;
            type1[n].push_back(run_method(m, data, derive_seed(seed, "method", hash_tag(n)), 1).report.type1);
        }
    }
    const double acrf = mean(type1["acrf"]);
    bool ok = acrf >= kShiftAcrfFloor;
    std::string detail = "acrf type I " + fmt(acrf) + " (>= " + fmt(kShiftAcrfFloor, 2) + ")";
    for (const auto* n : {"csforest", "crf", "bcops"}) {
        const double t = mean(type1[n]);
        ok = ok && t <= kShiftCeiling;
        detail += ", " + std::string(n) + " " + fmt(t);
    }
    report(4, "label shift breaks marginal ACRF only", ok, detail + " (<= " + fmt(kShiftCeiling, 2) + ")");
}

// ---------------------------------------------------------------- criterion 5

void audit_block() {
    AuditSpec spec;  // n in {3, 6, 9, 12}, alpha in {0.05, 0.2, 0.5}, 1000 seeds
    std::ostringstream sink;
    const auto out = run_audit(spec, kMasterSeed, 1, sink);
    std::size_t unit_diag_failures = 0;
    std::istringstream lines(sink.str());
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() > 6 && cells[6] != "1") ++unit_diag_failures;
    }
    report(5, "strange-set audit", out.violations == 0 && unit_diag_failures == 0 && out.instances == 12000,
           std::to_string(out.instances) + " instances, " + std::to_string(out.violations) + " violations, " +
               std::to_string(unit_diag_failures) + " non-unit diagonals, largest strange set " +
               std::to_string(out.max_strange));
}

// ---------------------------------------------------------------- criterion 8

void tiny_block() {
    std::size_t cs_wrong = 0, dc_wrong = 0, outliers = 0;
    for (std::size_t s = 0; s < kSeedsTiny; ++s) {
        const std::uint64_t seed = derive_seed(kMasterSeed, "tiny", s);
        const ExperimentData data = make_data(digits_source(kTinyTrainPerClass, 5), seed);
        MethodSpec cs = spec("csforest");
        cs.b_tilde = kBTildeExample1;
        const auto a = run_method(cs, data, derive_seed(seed, "method", hash_tag("csforest")), 1).report;
        const auto b = run_method(spec("dc"), data, derive_seed(seed, "method", hash_tag("dc")), 1).report;
        outliers += a.outlier_count;
        cs_wrong += static_cast<std::size_t>(std::llround(a.type2_outlier * static_cast<double>(a.outlier_count)));
        dc_wrong += static_cast<std::size_t>(std::llround(b.type2_outlier * static_cast<double>(b.outlier_count)));
    }
    const double cs = static_cast<double>(cs_wrong) / static_cast<double>(outliers);
    const double dcv = static_cast<double>(dc_wrong) / static_cast<double>(outliers);
    report(8, "five test rows per digit", dcv - cs >= kTinyGap,
           "outlier type II csforest " + fmt(cs) + " vs dc " + fmt(dcv) + " (gap " + fmt(dcv - cs) + " >= " +
               fmt(kTinyGap, 2) + ", " + std::to_string(outliers) + " outlier rows)");
}

// ---------------------------------------------------------------- criterion 9

// Smallest grid tau at which y enters the adaptive set.
double grid_score(std::span<const double> pi, std::size_t y, std::optional<double> u, bool randomized) {
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / kAcrfGridStep));
    for (std::size_t t = 0; t <= steps; ++t) {
        const double tau = static_cast<double>(t) * kAcrfGridStep;
        const auto set = acrf_set(pi, tau, u, randomized);
        if (std::find(set.begin(), set.end(), static_cast<int>(y)) != set.end()) return tau;
    }
    return 1.0;
}

void baseline_oracle_block() {
    Rng rng(derive_seed(kMasterSeed, "acrf_grid"));
    double max_dev = 0.0;
    for (int v = 0; v < 1000; ++v) {
        const std::size_t K = 2 + rng.uniform_index(5);
        std::vector<double> pi(K);
        double tot = 0.0;
        for (auto& p : pi) tot += (p = -std::log(1.0 - rng.uniform()));
        for (auto& p : pi) p /= tot;
        const std::size_t y = rng.uniform_index(K);
        const double u = rng.uniform();
        max_dev = std::max(max_dev, std::abs(acrf_score(pi, y, std::nullopt, false) -
                                             grid_score(pi, y, std::nullopt, false)));
        max_dev = std::max(max_dev, std::abs(acrf_score(pi, y, u, true) - grid_score(pi, y, u, true)));
    }
    const bool grid_ok = max_dev <= kAcrfGridTol;

    // Constant odds reduce the weighted calibration to the unweighted one.
    std::size_t mismatched = 0, compared = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        DataSource src;
        src.kind = "example1";
        src.train_per_class = 100;
        src.test_per_class = 60;
        const ExperimentData data = make_data(src, derive_seed(kMasterSeed, "const_odds", s));
        for (bool randomized : {false, true}) {
            BaselineParams p;
            p.alpha = kAlpha;
            p.n_trees = 200;
            p.randomized = randomized;
            p.seed = derive_seed(kMasterSeed, "const_odds_fit", s);
            const Dataset test = data.test.without_labels();
            const SplitPlan plan = make_split_plan(data.train, test.size(), derive_seed(p.seed, "plan"), true);
            const OddsFunction one = [](std::span<const double>) { return 1.0; };
            const auto a = acrf(data.train, test, p, plan);
            const auto b = acrf_shift_with_odds(data.train, test, p, plan, one, one);
            for (std::size_t i = 0; i < a.size(); ++i) mismatched += a.sets[i] != b.sets[i];
            compared += a.size();
        }
    }

    // Every calibration list over a 3-letter alphabet with n <= 8.
    std::size_t pv_cases = 0, pv_bad = 0;
    for (std::size_t n = 1; n <= 8; ++n) {
        std::size_t total = 1;
        for (std::size_t i = 0; i < n; ++i) total *= 3;
        std::vector<double> cal(n);
        for (std::size_t code = 0; code < total; ++code) {
            std::size_t c = code;
            for (auto& x : cal) x = static_cast<double>(c % 3), c /= 3;
            std::vector<double> sorted = cal;
            std::sort(sorted.begin(), sorted.end());
            for (double t : {-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
                std::size_t le = 0;
                for (double x : cal) le += x <= t;
                const double direct = static_cast<double>(1 + le) / static_cast<double>(n + 1);
                ++pv_cases;
                if (split_conformal_pvalue(cal, t) != direct || split_conformal_pvalue_sorted(sorted, t) != direct)
                    ++pv_bad;
            }
        }
    }
    report(9, "baseline reference checks", grid_ok && mismatched == 0 && pv_bad == 0,
           "acrf score (plain and randomized) vs tau grid max |diff| " + fmt(max_dev, 6) + " (<= " + fmt(kAcrfGridTol, 4) +
               "); constant-odds shift vs acrf " + std::to_string(mismatched) + "/" + std::to_string(compared) +
               " differing sets; p-value enumeration " + std::to_string(pv_bad) + "/" + std::to_string(pv_cases) +
               " mismatches");
}

// ---------------------------------------------------------------- criterion 10

std::map<std::string, std::string> slurp_dir(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        out[e.path().filename().string()] = buf.str();
    }
    return out;
}

void determinism_block() {
    const fs::path root = fs::temp_directory_path() / ("csforest_acceptance_" + std::to_string(kMasterSeed));
    fs::remove_all(root);
    bool ok = true;
    std::string detail;
    for (const auto* kind : {"example1", "label_shift"}) {
        ExperimentConfig c;
        c.data.kind = kind;
        c.data.train_per_class = 60;
        c.data.test_per_class = 40;
        if (std::string(kind) == "label_shift") {
            c.data.train_counts = {60, 60, 60, 20, 20, 20};
            c.data.test_counts = {20, 20, 20, 60, 60, 60};
        }
        c.repetitions = 2;
        c.seed = kMasterSeed;
        for (const auto& n : method_registry()) {
            MethodSpec m = spec(n);
            m.b_tilde = 200;
            m.n_trees = 100;
            m.oracle_mc = 5000;
            c.methods.push_back(m);
        }
        std::vector<std::map<std::string, std::string>> outputs;
        std::size_t files = 0;
        for (std::size_t threads : {1, 1, 3, 8}) {
            c.threads = threads;
            c.output_dir = (root / (std::string(kind) + "_" + std::to_string(outputs.size()))).string();
            files = run_experiment(c).written.size();
            outputs.push_back(slurp_dir(c.output_dir));
        }
        const bool same = std::all_of(outputs.begin(), outputs.end(), [&](const auto& o) { return o == outputs[0]; });
        ok = ok && same && outputs[0].size() == files;
        if (!detail.empty()) detail += "; ";
        detail += std::string(kind) + ": " + std::to_string(files) + " files " + (same ? "identical" : "DIFFER") +
                  " across threads {1, 1, 3, 8}";
    }
    fs::remove_all(root);
    report(10, "byte-identical run outputs", ok, detail);
}

} // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    std::cout << "acceptance suite, master seed " << kMasterSeed << ", alpha " << kAlpha << std::endl;
    example1_block();
    digits_block();
    shift_block();
    audit_block();
    tiny_block();
    baseline_oracle_block();
    determinism_block();
    for (const auto& [id, line] : results) std::cout << line << '\n';
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " (" << fmt(secs, 1) << " s)"
              << std::endl;
    return failures == 0 ? 0 : 3;
}

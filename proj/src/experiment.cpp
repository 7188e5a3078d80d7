#include "csforest/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "csforest/baselines.hpp"
#include "csforest/csforest.hpp"
#include "csforest/error.hpp"
#include "csforest/rng.hpp"

namespace csforest {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (methods.empty()) throw ConfigError("config lists no methods");
    const auto& reg = method_registry();
    std::vector<std::string> labels;
    for (const auto& m : methods) {
        if (std::find(reg.begin(), reg.end(), m.name) == reg.end())
            throw ConfigError("unknown method '" + m.name + "'");
        if (!(m.alpha > 0.0 && m.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1) for " + m.display());
        if (!(m.gamma >= 0.0)) throw ConfigError("gamma must be >= 0 for " + m.display());
        if (m.b_tilde < 1 || m.n_trees < 1) throw ConfigError("tree counts must be >= 1 for " + m.display());
        if (std::find(labels.begin(), labels.end(), m.display()) != labels.end())
            throw ConfigError("duplicate method label '" + m.display() + "'");
        labels.push_back(m.display());
    }
    static const std::vector<std::string> kinds{"example1", "wide_outliers", "label_shift", "scenario", "csv"};
    if (std::find(kinds.begin(), kinds.end(), data.kind) == kinds.end())
        throw ConfigError("unknown data source '" + data.kind + "'");
}

namespace {

TreeParams parse_tree(const json& j) {
    TreeParams t;
    if (j.contains("max_depth") && !j["max_depth"].is_null()) t.max_depth = j["max_depth"].get<std::size_t>();
    if (j.contains("min_leaf")) t.min_leaf = j["min_leaf"].get<std::size_t>();
    if (j.contains("features_per_split") && !j["features_per_split"].is_null())
        t.features_per_split = j["features_per_split"].get<std::size_t>();
    return t;
}

ordered_json tree_json(const TreeParams& t) {
    ordered_json j;
    j["max_depth"] = t.max_depth ? ordered_json(*t.max_depth) : ordered_json(nullptr);
    j["min_leaf"] = t.min_leaf;
    j["features_per_split"] = t.features_per_split ? ordered_json(*t.features_per_split) : ordered_json(nullptr);
    return j;
}

GaussianClassSpec parse_gaussian(const json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("sd").get<std::vector<double>>()};
}

ShiftScenario parse_scenario(const json& j) {
    ShiftScenario s;
    for (const auto& c : j.at("classes")) {
        s.class_names.push_back(c.at("name").get<std::string>());
        s.inliers.push_back(parse_gaussian(c));
        s.weights.push_back(c.at("weight").get<double>());
    }
    if (j.contains("outlier")) {
        s.outlier = parse_gaussian(j["outlier"]);
        s.outlier_weight = j["outlier"].at("weight").get<double>();
    }
    s.samples = j.at("samples").get<std::size_t>();
    return s;
}

ordered_json scenario_json(const ShiftScenario& s) {
    ordered_json j;
    auto& classes = j["classes"] = ordered_json::array();
    for (std::size_t k = 0; k < s.inliers.size(); ++k)
        classes.push_back({{"name", s.class_names[k]},
                           {"mean", s.inliers[k].mean},
                           {"sd", s.inliers[k].sd},
                           {"weight", s.weights[k]}});
    if (s.outlier)
        j["outlier"] = {{"mean", s.outlier->mean}, {"sd", s.outlier->sd}, {"weight", s.outlier_weight}};
    j["samples"] = s.samples;
    return j;
}

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base) / path).lexically_normal().string();
}

} // namespace

ExperimentConfig parse_config(const json& j, const std::string& base_dir) {
    try {
        ExperimentConfig c;
        c.seed = j.value("seed", c.seed);
        c.repetitions = j.value("repetitions", c.repetitions);
        c.threads = j.value("threads", c.threads);
        c.output_dir = j.value("output_dir", c.output_dir);
        const double default_alpha = j.value("alpha", 0.05);

        if (j.contains("data")) {
            const auto& d = j["data"];
            auto& s = c.data;
            s.kind = d.value("source", s.kind);
            s.train_per_class = d.value("train_per_class", s.train_per_class);
            s.test_per_class = d.value("test_per_class", s.test_per_class);
            if (d.contains("dim")) s.dim = d["dim"].get<std::size_t>();
            s.train_counts = d.value("train_counts", s.train_counts);
            s.test_counts = d.value("test_counts", s.test_counts);
            if (d.contains("train")) s.train_scenario = parse_scenario(d["train"]);
            if (d.contains("test")) s.test_scenario = parse_scenario(d["test"]);
            s.train_csv = resolve(d.value("train_csv", std::string{}), base_dir);
            s.test_csv = resolve(d.value("test_csv", std::string{}), base_dir);
            s.pool_csv = resolve(d.value("pool_csv", std::string{}), base_dir);
            s.label_column = d.value("label_column", s.label_column);
            if (d.contains("train_subsample"))
                s.train_subsample = d["train_subsample"].get<std::map<std::string, std::size_t>>();
            if (d.contains("test_subsample"))
                s.test_subsample = d["test_subsample"].get<std::map<std::string, std::size_t>>();
        }
        if (j.contains("methods")) {
            for (const auto& mj : j["methods"]) {
                MethodSpec m;
                if (mj.is_string()) {
                    m.name = mj.get<std::string>();
                    m.alpha = default_alpha;
                    c.methods.push_back(m);
                    continue;
                }
                m.name = mj.at("name").get<std::string>();
                m.label = mj.value("label", std::string{});
                m.alpha = mj.value("alpha", default_alpha);
                if (mj.contains("gamma")) {
                    if (mj["gamma"].is_string()) {
                        if (mj["gamma"] != "log") throw ConfigError("gamma must be a number or \"log\"");
                        m.gamma_log = true;
                    } else {
                        m.gamma = mj["gamma"].get<double>();
                    }
                }
                m.b_tilde = mj.value("b_tilde", m.b_tilde);
                m.n_trees = mj.value("n_trees", m.n_trees);
                m.randomized = mj.value("randomized", m.randomized);
                if (mj.contains("tree")) m.tree = parse_tree(mj["tree"]);
                m.oracle_w = mj.value("w", m.oracle_w);
                m.oracle_mc = mj.value("mc_samples", m.oracle_mc);
                c.methods.push_back(m);
            }
        }
        if (j.contains("audit")) {
            const auto& a = j["audit"];
            c.audit.n_values = a.value("n_values", c.audit.n_values);
            c.audit.alphas = a.value("alphas", c.audit.alphas);
            c.audit.seeds = a.value("seeds", c.audit.seeds);
            c.audit.b_tilde = a.value("b_tilde", c.audit.b_tilde);
            c.audit.test_per_class = a.value("test_per_class", c.audit.test_per_class);
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j, fs::path(path).parent_path().string());
}

ordered_json ExperimentConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["repetitions"] = repetitions;
    // threads is omitted: outputs do not depend on it.
    ordered_json d;
    d["source"] = data.kind;
    d["train_per_class"] = data.train_per_class;
    d["test_per_class"] = data.test_per_class;
    d["dim"] = data.dim ? ordered_json(*data.dim) : ordered_json(nullptr);
    d["train_counts"] = data.train_counts;
    d["test_counts"] = data.test_counts;
    if (data.train_scenario) d["train"] = scenario_json(*data.train_scenario);
    if (data.test_scenario) d["test"] = scenario_json(*data.test_scenario);
    if (data.kind == "csv") {
        if (!data.pool_csv.empty()) d["pool_csv"] = data.pool_csv;
        else {
            d["train_csv"] = data.train_csv;
            d["test_csv"] = data.test_csv;
        }
        d["label_column"] = data.label_column;
        d["train_subsample"] = data.train_subsample;
        d["test_subsample"] = data.test_subsample;
    }
    j["data"] = d;
    auto& ms = j["methods"] = ordered_json::array();
    for (const auto& m : methods) {
        ordered_json mj;
        mj["name"] = m.name;
        mj["label"] = m.display();
        mj["alpha"] = m.alpha;
        if (m.name == "csforest") {
            mj["gamma"] = m.gamma_log ? ordered_json("log") : ordered_json(m.gamma);
            mj["b_tilde"] = m.b_tilde;
        } else if (m.name == "oracle") {
            mj["w"] = m.oracle_w;
            mj["mc_samples"] = m.oracle_mc;
        } else {
            mj["n_trees"] = m.n_trees;
            if (m.name == "acrf_shift") mj["randomized"] = m.randomized;
        }
        if (m.name != "dc" && m.name != "oracle") mj["tree"] = tree_json(m.tree);
        ms.push_back(std::move(mj));
    }
    return j;
}

ExperimentData make_data(const DataSource& s, std::uint64_t seed) {
    auto with_oracle = [&](const SyntheticDesign& design) {
        auto [train, test] = generate(design, seed);
        return ExperimentData{std::move(train), std::move(test), oracle_for_design(design, 1.0, 50000, seed)};
    };
    if (s.kind == "example1") return with_oracle(example1_design(s.train_per_class, s.test_per_class, s.dim.value_or(10)));
    if (s.kind == "wide_outliers")
        return with_oracle(wide_outlier_design(s.train_per_class, s.test_per_class, s.dim.value_or(50)));
    if (s.kind == "label_shift") {
        auto tr = s.train_counts.empty() ? std::vector<std::size_t>{250, 250, 250, 50, 50, 50} : s.train_counts;
        auto te = s.test_counts.empty() ? std::vector<std::size_t>{50, 50, 50, 250, 250, 250} : s.test_counts;
        return with_oracle(label_shift_design(tr, te, s.dim.value_or(10)));
    }
    if (s.kind == "scenario") {
        if (!s.train_scenario || !s.test_scenario) throw ConfigError("scenario source needs train and test scenarios");
        ShiftScenario tr = *s.train_scenario, te = *s.test_scenario;
        if (tr.outlier_weight > 0.0) throw ConfigError("training scenario cannot contain outliers");
        tr.seed = derive_seed(seed, "train_scenario");
        te.seed = derive_seed(seed, "test_scenario");
        if (te.class_names.empty()) te.class_names = tr.class_names;
        Dataset train = sample_shift_scenario(tr);
        Dataset test = remap_labels(sample_shift_scenario(te), train.class_names());
        OracleSpec spec;
        spec.class_names = train.class_names();
        spec.classes = tr.inliers;
        for (std::size_t k = 0; k < tr.inliers.size(); ++k) spec.train_mixture.push_back({tr.weights[k], tr.inliers[k]});
        for (std::size_t k = 0; k < te.inliers.size(); ++k) spec.test_mixture.push_back({te.weights[k], te.inliers[k]});
        if (te.outlier) spec.test_mixture.push_back({te.outlier_weight, *te.outlier});
        spec.seed = seed;
        return {std::move(train), std::move(test), std::move(spec)};
    }
    if (s.kind == "csv") {
        if (!s.pool_csv.empty()) {
            if (s.train_subsample.empty() || s.test_subsample.empty())
                throw ConfigError("pool_csv needs train_subsample and test_subsample counts");
            auto [train, test] = split_per_class(load_csv(s.pool_csv, s.label_column), s.train_subsample,
                                                 s.test_subsample, derive_seed(seed, "pool_split"));
            return {std::move(train), std::move(test), std::nullopt};
        }
        if (s.train_csv.empty() || s.test_csv.empty())
            throw ConfigError("csv source needs pool_csv, or train_csv and test_csv");
        Dataset train = load_csv(s.train_csv, s.label_column);
        if (!s.train_subsample.empty()) train = subsample_per_class(train, s.train_subsample, derive_seed(seed, "train_sub"));
        Dataset test = load_csv(s.test_csv, s.label_column);
        if (!s.test_subsample.empty()) test = subsample_per_class(test, s.test_subsample, derive_seed(seed, "test_sub"));
        test = remap_labels(test, train.class_names());
        return {std::move(train), std::move(test), std::nullopt};
    }
    throw ConfigError("unknown data source '" + s.kind + "'");
}

std::uint64_t repetition_seed(std::uint64_t master, std::size_t rep) { return derive_seed(master, "rep", rep); }
std::uint64_t data_seed(std::uint64_t rep_seed) { return derive_seed(rep_seed, "data"); }
std::uint64_t method_seed(std::uint64_t rep_seed, const std::string& method_label) {
    return derive_seed(rep_seed, "method", hash_tag(method_label));
}

MethodRun run_method(const MethodSpec& spec, const ExperimentData& data, std::uint64_t seed, std::size_t threads) {
    const Dataset& train = data.train;
    const Dataset& test = data.test;
    MethodRun run;
    run.log["method"] = spec.name;
    run.log["label"] = spec.display();
    run.log["seed"] = seed;

    if (spec.name == "csforest") {
        CsForestParams p;
        p.alpha = spec.alpha;
        p.gamma = spec.gamma_log ? 1.0 / std::log(static_cast<double>(test.size())) : spec.gamma;
        p.b_tilde = spec.b_tilde;
        p.tree = spec.tree;
        p.seed = seed;
        p.threads = threads;
        auto result = run_csforest(train, test.without_labels(), p);
        run.sets = std::move(result.sets);
        run.log["gamma"] = p.gamma;
        auto& counts = run.log["tree_counts"] = ordered_json::array();
        std::size_t redraws = 0;
        for (const auto& tc : result.tree_counts) {
            counts.push_back(tc.count);
            redraws += tc.redraws;
        }
        run.log["zero_count_redraws"] = redraws;
        run.log["degenerate_pairs"] = result.scores.degenerate_pairs;
    } else if (spec.name == "oracle") {
        if (!data.oracle) throw ConfigError("oracle needs a synthetic data source with known densities");
        OracleSpec o = *data.oracle;
        o.w = spec.oracle_w;
        o.mc_samples = spec.oracle_mc;
        o.seed = seed;
        run.sets = oracle_sets(o, test, spec.alpha);
        run.log["w"] = o.w;
        run.log["mc_samples"] = o.mc_samples;
    } else {
        BaselineParams p;
        p.alpha = spec.alpha;
        p.n_trees = spec.n_trees;
        p.tree = spec.tree;
        p.seed = seed;
        p.threads = threads;
        const std::uint64_t plan_seed = derive_seed(seed, "plan");
        const SplitPlan plan = make_split_plan(train, test.size(), plan_seed, true);
        run.log["plan_seed"] = plan_seed;
        const Dataset unlabeled = test.without_labels();
        if (spec.name == "crf") run.sets = crf(train, unlabeled, p, plan);
        else if (spec.name == "dc") run.sets = dc(train, unlabeled, p, plan);
        else if (spec.name == "bcops") run.sets = bcops(train, unlabeled, p, plan);
        else if (spec.name == "acrf") run.sets = acrf(train, unlabeled, p, plan);
        else if (spec.name == "acrf_random") {
            p.randomized = true;
            run.sets = acrf(train, unlabeled, p, plan);
        } else if (spec.name == "acrf_shift") {
            p.randomized = spec.randomized;
            run.sets = acrf_shift(train, unlabeled, p, plan);
        } else {
            throw ConfigError("unknown method '" + spec.name + "'");
        }
    }
    const bool labeled = std::none_of(test.labels().begin(), test.labels().end(), [](int y) { return y == kUnlabeled; });
    if (labeled) run.report = type_errors(run.sets, test.labels(), spec.display());
    else run.report.method = spec.display();
    return run;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, std::ostream* progress) {
    config.validate();
    if (config.output_dir.empty()) throw ConfigError("no output directory configured");
    fs::create_directories(config.output_dir);
    ExperimentSummary summary;
    std::vector<EvalReport> reports;

    ordered_json manifest;
    manifest["config"] = config.to_json();
    auto& reps = manifest["repetitions"] = ordered_json::array();
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        const std::uint64_t rs = repetition_seed(config.seed, r), ds = data_seed(rs);
        const ExperimentData data = make_data(config.data, ds);
        ordered_json rj;
        rj["rep"] = r;
        rj["rep_seed"] = rs;
        rj["data_seed"] = ds;
        rj["train_rows"] = data.train.size();
        rj["test_rows"] = data.test.size();
        auto& mlog = rj["methods"] = ordered_json::array();
        for (const auto& m : config.methods) {
            auto run = run_method(m, data, method_seed(rs, m.display()), config.threads);
            const std::string stem = (fs::path(config.output_dir) / (m.display() + "_rep" + std::to_string(r))).string();
            write_prediction_csv(run.sets, stem + "_sets.csv");
            summary.written.push_back(stem + "_sets.csv");
            if (!run.report.classes.empty()) {
                export_report(run.report, stem + "_report.json", ReportFormat::Json);
                summary.written.push_back(stem + "_report.json");
                reports.push_back(run.report);
                if (progress)
                    *progress << "rep " << r << ' ' << m.display() << std::fixed << std::setprecision(3)
                              << " type1=" << run.report.type1 << " type2=" << run.report.type2 << '\n'
                              << std::defaultfloat;
            }
            mlog.push_back(std::move(run.log));
        }
        reps.push_back(std::move(rj));
    }
    const std::string manifest_path = (fs::path(config.output_dir) / "manifest.json").string();
    auto& files = manifest["files"] = ordered_json::array();
    for (const auto& f : summary.written) files.push_back(fs::path(f).filename().string());
    std::ofstream out(manifest_path);
    if (!out) throw DataError("cannot write " + manifest_path);
    out << manifest.dump(2) << '\n';
    summary.written.push_back(manifest_path);
    summary.per_method = aggregate_by_method(reports);
    return summary;
}

std::vector<std::string> generate_data_files(const ExperimentConfig& config, std::size_t rep) {
    if (config.output_dir.empty()) throw ConfigError("no output directory configured");
    fs::create_directories(config.output_dir);
    const ExperimentData data = make_data(config.data, data_seed(repetition_seed(config.seed, rep)));
    const std::string train = (fs::path(config.output_dir) / "train.csv").string();
    const std::string test = (fs::path(config.output_dir) / "test.csv").string();
    save_csv(data.train, train);
    save_csv(data.test, test);
    return {train, test};
}

AuditOutcome run_audit(const AuditSpec& spec, std::uint64_t master_seed, std::size_t threads, std::ostream& log) {
    if (spec.n_values.empty() || spec.alphas.empty() || spec.seeds == 0) throw ConfigError("empty audit sweep");
    AuditOutcome outcome;
    log << "n,alpha,seed,held,strange_set_size,bound,unit_diagonal,tournament,held_score,ok\n";
    for (std::size_t n : spec.n_values) {
        if (n < 1) throw ConfigError("audit n must be >= 1");
        for (std::size_t s = 0; s < spec.seeds; ++s) {
            const std::uint64_t seed = derive_seed(master_seed, "audit_instance", n, s);
            auto [train, test] = generate_example1(n, spec.test_per_class, seed);
            const Matrix xk = train.features().select_rows(train.rows_with_label(0));
            const Matrix xo = train.features().select_rows(train.rows_with_label(1));
            const std::size_t held = s % test.size();
            CsForestParams p;
            p.b_tilde = spec.b_tilde;
            p.seed = seed;
            p.threads = threads;
            for (double alpha : spec.alphas) {
                p.alpha = alpha;
                const auto rec = audit_strange_set(xk, xo, test.features(), held, alpha, p);
                ++outcome.instances;
                if (!rec.passed()) ++outcome.violations;
                outcome.max_strange = std::max(outcome.max_strange, rec.strange_set.size());
                log << n << ',' << alpha << ',' << s << ',' << held << ',' << rec.strange_set.size() << ','
                    << rec.bound << ',' << rec.unit_diagonal << ',' << rec.tournament << ',' << rec.held_score << ','
                    << (rec.passed() ? "pass" : "FAIL") << '\n';
            }
        }
    }
    return outcome;
}

std::vector<AggregateReport> aggregate_by_method(const std::vector<EvalReport>& reports) {
    std::vector<std::string> order;
    for (const auto& r : reports)
        if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
    std::vector<AggregateReport> out;
    for (const auto& name : order) {
        std::vector<EvalReport> group;
        for (const auto& r : reports)
            if (r.method == name) group.push_back(r);
        out.push_back(aggregate_runs(group));
    }
    return out;
}

void write_comparison_table(const std::vector<AggregateReport>& rows, std::ostream& out, bool csv) {
    static const char* keys[] = {"type1", "type2", "type2_inlier", "type2_outlier"};
    std::ostringstream buf;
    buf << std::fixed << std::setprecision(3);
    if (csv) {
        buf << "method,runs";
        for (auto k : keys) buf << ',' << k << "_mean," << k << "_sd";
        buf << '\n';
        for (const auto& r : rows) {
            buf << r.method << ',' << r.runs;
            for (auto k : keys) buf << ',' << r.mean_of(k) << ',' << r.sd_of(k);
            buf << '\n';
        }
    } else {
        buf << std::left << std::setw(14) << "Method" << std::setw(18) << "Type I" << std::setw(18) << "Type II"
            << std::setw(20) << "Type II (inlier)" << "Type II (outlier)\n";
        for (const auto& r : rows) {
            buf << std::setw(14) << r.method;
            for (std::size_t i = 0; i < 4; ++i) {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(3) << r.mean_of(keys[i]) << " +- " << r.sd_of(keys[i]);
                if (i < 3) buf << std::setw(i < 2 ? 18 : 20);
                buf << cell.str();
            }
            buf << '\n';
        }
    }
    out << buf.str();
}

} // namespace csforest

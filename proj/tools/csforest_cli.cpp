// csforest command line: generate | run | audit | compare
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csforest/error.hpp"
#include "csforest/eval.hpp"
#include "csforest/experiment.hpp"

using namespace csforest;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kViolation = 3 };

struct Overrides {
    std::string config;
    std::string source;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps, threads, train_per_class, test_per_class, dim;
    std::optional<double> alpha;
    std::string output_dir;
    std::vector<std::string> methods;
    std::string train_csv, test_csv, label_column;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--source", o.source, "example1 | wide_outliers | label_shift | csv");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("-o,--output-dir", o.output_dir, "output directory (env CSFOREST_OUTPUT_DIR)");
    cmd->add_option("--train-per-class", o.train_per_class);
    cmd->add_option("--test-per-class", o.test_per_class);
    cmd->add_option("--dim", o.dim);
    cmd->add_option("--train", o.train_csv, "training CSV (csv source)");
    cmd->add_option("--test", o.test_csv, "test CSV (csv source)");
    cmd->add_option("--label-column", o.label_column);
}

// flags > config file > environment > defaults
ExperimentConfig resolve(const Overrides& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (c.output_dir.empty())
        if (const char* env = std::getenv("CSFOREST_OUTPUT_DIR")) c.output_dir = env;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (!o.source.empty()) c.data.kind = o.source;
    if (!o.train_csv.empty() || !o.test_csv.empty()) c.data.kind = "csv";
    if (!o.train_csv.empty()) c.data.train_csv = o.train_csv;
    if (!o.test_csv.empty()) c.data.test_csv = o.test_csv;
    if (!o.label_column.empty()) c.data.label_column = o.label_column;
    if (o.seed) c.seed = *o.seed;
    if (o.reps) c.repetitions = *o.reps;
    if (o.threads) c.threads = *o.threads;
    if (o.train_per_class) c.data.train_per_class = *o.train_per_class;
    if (o.test_per_class) c.data.test_per_class = *o.test_per_class;
    if (o.dim) c.data.dim = *o.dim;
    if (!o.methods.empty()) {
        c.methods.clear();
        for (const auto& m : o.methods) c.methods.push_back(MethodSpec{.name = m});
    }
    if (o.alpha)
        for (auto& m : c.methods) m.alpha = *o.alpha;
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal set-valued classification with outlier detection"};
    app.require_subcommand(1);

    Overrides gen_o;
    std::size_t gen_rep = 0;
    auto* gen = app.add_subcommand("generate", "write train.csv and test.csv for a synthetic source");
    add_common(gen, gen_o);
    gen->add_option("--rep", gen_rep, "repetition index");

    Overrides run_o;
    auto* run = app.add_subcommand("run", "run methods and write sets, reports and a manifest");
    add_common(run, run_o);
    run->add_option("--reps", run_o.reps, "repetitions");
    run->add_option("--alpha", run_o.alpha, "nominal level for every method");
    run->add_option("-m,--method", run_o.methods, "method name (repeatable); replaces the config list");
    bool run_table = false;
    run->add_flag("--table", run_table, "print the mean +- sd comparison table");

    Overrides audit_o;
    AuditSpec audit_spec;
    bool audit_cli_n = false, audit_cli_alpha = false;
    std::optional<std::size_t> audit_seeds, audit_b;
    std::vector<std::size_t> audit_n;
    std::vector<double> audit_alpha;
    std::string audit_log;
    auto* audit = app.add_subcommand("audit", "check the strange-set bound on small instances");
    audit->add_option("-c,--config", audit_o.config)->check(CLI::ExistingFile);
    audit->add_option("--seed", audit_o.seed);
    audit->add_option("--threads", audit_o.threads);
    audit->add_option("--n", audit_n, "training sizes")->each([&](const std::string&) { audit_cli_n = true; });
    audit->add_option("--alpha", audit_alpha, "levels")->each([&](const std::string&) { audit_cli_alpha = true; });
    audit->add_option("--seeds", audit_seeds, "instances per (n, alpha)");
    audit->add_option("--b-tilde", audit_b);
    audit->add_option("--log", audit_log, "per-instance CSV log (default: stdout summary only)");

    std::vector<std::string> cmp_files;
    bool cmp_csv = false;
    auto* cmp = app.add_subcommand("compare", "aggregate report files into a comparison table");
    cmp->add_option("reports", cmp_files, "report files (.json or key,value .csv)")->required()->check(CLI::ExistingFile);
    cmp->add_flag("--csv", cmp_csv, "CSV instead of aligned text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) {
            for (const auto& f : generate_data_files(resolve(gen_o), gen_rep)) std::cout << f << '\n';
        } else if (run->parsed()) {
            const auto config = resolve(run_o);
            const auto summary = run_experiment(config, &std::cerr);
            if (run_table) write_comparison_table(summary.per_method, std::cout, false);
        } else if (audit->parsed()) {
            ExperimentConfig c = resolve(audit_o);
            AuditSpec spec = c.audit;
            if (audit_cli_n) spec.n_values = audit_n;
            if (audit_cli_alpha) spec.alphas = audit_alpha;
            if (audit_seeds) spec.seeds = *audit_seeds;
            if (audit_b) spec.b_tilde = *audit_b;
            std::ofstream log_file;
            std::ostringstream sink;
            std::ostream* log = &sink;
            if (!audit_log.empty()) {
                log_file.open(audit_log);
                if (!log_file) throw DataError("cannot write " + audit_log);
                log = &log_file;
            }
            const auto out = run_audit(spec, c.seed, c.threads, *log);
            std::cout << "instances=" << out.instances << " violations=" << out.violations
                      << " max_strange_set=" << out.max_strange << '\n';
            if (out.violations > 0) return kViolation;
        } else if (cmp->parsed()) {
            std::vector<EvalReport> reports;
            for (const auto& f : cmp_files) reports.push_back(import_report(f));
            write_comparison_table(aggregate_by_method(reports), std::cout, cmp_csv);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

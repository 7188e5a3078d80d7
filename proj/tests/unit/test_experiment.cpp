#include <doctest.h>

#include "csforest/error.hpp"
#include "csforest/experiment.hpp"
#include "test_support.hpp"

using namespace csforest;

TEST_SUITE("experiment") {

TEST_CASE("config parsing") {
    auto j = nlohmann::json::parse(R"({
        "seed": 9, "repetitions": 2, "alpha": 0.1,
        "data": {"source": "csv", "train_csv": "a.csv", "test_csv": "/abs/b.csv"},
        "methods": ["crf", {"name": "csforest", "label": "cs_log", "gamma": "log", "b_tilde": 50,
                            "tree": {"max_depth": 4, "features_per_split": 2}}]
    })");
    auto c = parse_config(j, "/base");
    CHECK(c.seed == 9);
    CHECK(c.repetitions == 2);
    CHECK(c.data.train_csv == "/base/a.csv");
    CHECK(c.data.test_csv == "/abs/b.csv");
    REQUIRE(c.methods.size() == 2);
    CHECK(c.methods[0].alpha == 0.1);
    CHECK(c.methods[1].display() == "cs_log");
    CHECK(c.methods[1].gamma_log);
    CHECK(*c.methods[1].tree.max_depth == 4);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"methods":[{"name":"csforest","gamma":"sqrt"}]})")),
                    ConfigError);
    auto c = parse_config(nlohmann::json::parse(R"({"methods":["nope"]})"));
    CHECK_THROWS_AS(c.validate(), ConfigError);
    auto d = parse_config(nlohmann::json::parse(R"({"methods":["crf","crf"]})"));
    CHECK_THROWS_AS(d.validate(), ConfigError);
    CHECK_THROWS_AS(load_config("/no/such/config.json"), ConfigError);
}

TEST_CASE("label-shift preset counts") {
    DataSource s;
    s.kind = "label_shift";
    s.train_counts = {500, 500, 500, 100, 100, 100};
    s.test_counts = {100, 100, 100, 500, 500, 500};
    auto d = make_data(s, 1);
    CHECK(d.train.class_counts() == std::vector<std::size_t>{500, 500, 500, 100, 100, 100});
    CHECK(d.test.size() == 1800);
    CHECK(d.oracle.has_value());
}

TEST_CASE("generate writes two files, reproducibly") {
    testing::TempDir dir("generate");
    ExperimentConfig c;
    c.data.train_per_class = 10;
    c.data.test_per_class = 5;
    c.output_dir = dir.file("a");
    auto files = generate_data_files(c);
    REQUIRE(files.size() == 2);
    const auto first = testing::read_text(files[0]);
    generate_data_files(c);
    CHECK(testing::read_text(files[0]) == first);
    auto back = load_csv(files[1], std::string("label"));
    CHECK(back.size() == 15);
}

TEST_CASE("single method run writes sets, report and manifest") {
    testing::TempDir dir("run");
    ExperimentConfig c;
    c.data.train_per_class = 30;
    c.data.test_per_class = 10;
    c.methods.push_back(MethodSpec{.name = "crf", .n_trees = 50});
    c.output_dir = dir.file("out");
    auto summary = run_experiment(c);
    CHECK(summary.written.size() == 3);
    REQUIRE(summary.per_method.size() == 1);
    auto manifest = nlohmann::json::parse(testing::read_text(dir.file("out/manifest.json")));
    CHECK(manifest["repetitions"][0]["methods"][0]["seed"].is_number_unsigned());
    CHECK(manifest["files"].size() == 2);
}

TEST_CASE("oracle needs known densities") {
    testing::TempDir dir("oracle_csv");
    auto [train, test] = generate_example1(10, 5, 1);
    save_csv(train, dir.file("tr.csv"));
    save_csv(test, dir.file("te.csv"));
    DataSource s;
    s.kind = "csv";
    s.train_csv = dir.file("tr.csv");
    s.test_csv = dir.file("te.csv");
    auto d = make_data(s, 1);
    CHECK_FALSE(d.oracle.has_value());
    CHECK_THROWS_AS(run_method(MethodSpec{.name = "oracle"}, d, 1, 1), ConfigError);
    CHECK(d.test.rows_with_label(kOutlier).size() == 5);
}

TEST_CASE("audit sweep") {
    AuditSpec a;
    a.n_values = {3, 5};
    a.alphas = {0.2, 0.5};
    a.seeds = 10;
    a.b_tilde = 8;
    std::ostringstream log;
    auto out = run_audit(a, 4, 1, log);
    CHECK(out.instances == 40);
    CHECK(out.violations == 0);
    CHECK(log.str().rfind("n,alpha,seed,held,strange_set_size", 0) == 0);
}

TEST_CASE("comparison table") {
    EvalReport r;
    r.method = "csforest";
    r.type1 = 0.05;
    std::vector<EvalReport> v{r, r};
    std::ostringstream text, csv;
    auto rows = aggregate_by_method(v);
    write_comparison_table(rows, text, false);
    write_comparison_table(rows, csv, true);
    CHECK(text.str().rfind("Method", 0) == 0);
    CHECK(text.str().find("0.050 +- 0.000") != std::string::npos);
    CHECK(csv.str().find("csforest,2,0.050,0.000") != std::string::npos);
}


TEST_CASE("shipped configs parse") {
    for (const char* name : {"example1.json", "digits.json", "label_shift.json", "audit.json"}) {
        CAPTURE(name);
        const auto c = load_config(std::string(CSFOREST_CONFIG_DIR) + "/" + name);
        if (!c.methods.empty()) CHECK_NOTHROW(c.validate());
    }
    const auto d = make_data(load_config(std::string(CSFOREST_CONFIG_DIR) + "/digits.json").data, 1);
    CHECK(d.train.class_counts() == std::vector<std::size_t>(6, 100));
    CHECK(d.test.size() == 750);
}

}

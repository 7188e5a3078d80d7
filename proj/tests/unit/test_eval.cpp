#include <doctest.h>

#include "csforest/error.hpp"
#include "csforest/eval.hpp"
#include "test_support.hpp"

using namespace csforest;

TEST_SUITE("eval") {

PredictionSets make_sets(std::vector<std::vector<int>> s) {
    PredictionSets p;
    p.class_names = {"1", "2"};
    p.sets = std::move(s);
    return p;
}

TEST_CASE("perfect sets") {
    auto r = type_errors(make_sets({{0}, {1}, {}}), std::vector<int>{0, 1, kOutlier});
    CHECK(r.type1 == 0.0);
    CHECK(r.type2 == 0.0);
    CHECK(r.find("R")->empty == 1.0);
    CHECK_FALSE(r.find("R")->coverage.has_value());
}

TEST_CASE("full sets") {
    auto r = type_errors(make_sets({{0, 1}, {0, 1}, {0, 1}}), std::vector<int>{0, 1, kOutlier});
    CHECK(r.type1 == 0.0);
    CHECK(r.type2_inlier == 1.0);
    CHECK(r.type2_outlier == 1.0);
    CHECK(r.mean_set_size == 2.0);
}

TEST_CASE("mixed inlier sets") {
    auto r = type_errors(make_sets({{0}, {0, 1}, {}}), std::vector<int>{0, 0, 0});
    CHECK(r.type1 == doctest::Approx(1.0 / 3.0));
    CHECK(r.type2 == doctest::Approx(1.0 / 3.0));
    const auto* c = r.find("1");
    CHECK(*c->coverage + r.type1 == doctest::Approx(1.0));
    CHECK(c->singleton + c->multi + c->empty + c->miss == doctest::Approx(1.0));
    // A class with no test rows still appears, with zero counts.
    CHECK(r.find("2")->count == 0);
}

TEST_CASE("rates ignore sample order") {
    auto a = type_errors(make_sets({{0}, {0, 1}, {}, {1}}), std::vector<int>{0, 1, kOutlier, 0});
    auto b = type_errors(make_sets({{1}, {}, {0, 1}, {0}}), std::vector<int>{0, kOutlier, 1, 0});
    CHECK(a == b);
}

TEST_CASE("length mismatch") {
    CHECK_THROWS_AS(type_errors(make_sets({{0}}), std::vector<int>{0, 1}), DataError);
}

TEST_CASE("aggregate") {
    EvalReport a, b;
    a.method = b.method = "m";
    a.type1 = 0.04;
    b.type1 = 0.06;
    std::vector<EvalReport> one{a};
    CHECK(aggregate_runs(one).sd_of("type1") == 0.0);
    std::vector<EvalReport> two{a, b};
    auto agg = aggregate_runs(two);
    CHECK(agg.mean_of("type1") == doctest::Approx(0.05));
    CHECK(agg.sd_of("type1") == doctest::Approx(0.0141421).epsilon(1e-4));
    b.classes.push_back({});
    std::vector<EvalReport> bad{a, b};
    CHECK_THROWS_AS(aggregate_runs(bad), DataError);
}

TEST_CASE("export and import round trip") {
    testing::TempDir dir("eval_io");
    auto r = type_errors(make_sets({{0}, {0, 1}, {}, {1}, {0}}), std::vector<int>{0, 1, kOutlier, 1, kOutlier}, "x");
    export_report(r, dir.file("r.json"), ReportFormat::Json);
    export_report(r, dir.file("r.csv"), ReportFormat::Csv);
    export_report(r, dir.file("long.csv"), ReportFormat::LongCsv);
    CHECK(import_report(dir.file("r.json")) == r);
    CHECK(import_report(dir.file("r.csv")) == r);
    const auto text = testing::read_text(dir.file("long.csv"));
    CHECK(text.rfind("method,class,category,rate\n", 0) == 0);
    CHECK(text.find("x,R,empty,0.5") != std::string::npos);
    CHECK_THROWS_AS(export_report(r, dir.file("no/such/dir.json"), ReportFormat::Json), DataError);
}

TEST_CASE("prediction csv round trip") {
    testing::TempDir dir("pred_io");
    PredictionSets p = make_sets({{0}, {}, {0, 1}});
    p.scores = Matrix(3, 2, 0.25);
    write_prediction_csv(p, dir.file("p.csv"));
    auto back = read_prediction_csv(dir.file("p.csv"));
    CHECK(back.sets == p.sets);
    CHECK(back.class_names == p.class_names);
    CHECK(*back.scores == *p.scores);
    CHECK(testing::read_text(dir.file("p.csv")).find("OUTLIER") != std::string::npos);
}

}

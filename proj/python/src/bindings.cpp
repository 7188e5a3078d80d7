// Python bindings: datasets, methods, evaluation, audits and experiment runs.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "csforest/baselines.hpp"
#include "csforest/error.hpp"
#include "csforest/eval.hpp"
#include "csforest/experiment.hpp"

namespace py = pybind11;
using namespace csforest;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array2& a) {
    if (a.ndim() != 2) throw DataError("expected a 2-d feature array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy_n(a.data(), a.size(), m.row(0).data());
    return m;
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::array_t<int> to_array(const std::vector<int>& v) {
    py::array_t<int> out(v.size());
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<int> to_labels(const Labels& y) {
    if (y.ndim() != 1) throw DataError("expected a 1-d label array");
    return {y.data(), y.data() + y.size()};
}

Dataset make_dataset(const Array2& x, const std::optional<Labels>& y, std::vector<std::string> names) {
    Matrix m = to_matrix(x);
    std::vector<int> labels = y ? to_labels(*y) : std::vector<int>(m.rows(), kUnlabeled);
    return Dataset(std::move(m), std::move(labels), std::move(names));
}

std::vector<std::string> default_names(const Labels& y) {
    int k = -1;
    for (int v : to_labels(y)) k = std::max(k, v);
    std::vector<std::string> names;
    for (int i = 0; i <= k; ++i) names.push_back(std::to_string(i));
    return names;
}

ExperimentData from_arrays(const Array2& x_train, const Labels& y_train, const Array2& x_test,
                           const std::optional<Labels>& y_test, std::optional<std::vector<std::string>> names) {
    auto n = names ? *names : default_names(y_train);
    return ExperimentData{make_dataset(x_train, y_train, n), make_dataset(x_test, y_test, n), std::nullopt};
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    for (const auto& [k, v] : r.fields()) d[py::str(k)] = v;
    return d;
}

py::dict sets_dict(const PredictionSets& s) {
    py::dict d;
    d["class_names"] = s.class_names;
    d["sets"] = s.sets;
    d["scores"] = s.scores ? py::object(to_array(*s.scores)) : py::none();
    return d;
}

MethodSpec method_spec(const std::string& name, double alpha, const py::kwargs& opts) {
    nlohmann::json j = {{"name", name}, {"alpha", alpha}};
    for (auto [k, v] : opts) {
        const auto key = py::str(k).cast<std::string>();
        if (key == "gamma" && py::isinstance<py::str>(v)) j[key] = v.cast<std::string>();
        else if (py::isinstance<py::bool_>(v)) j[key] = v.cast<bool>();
        else if (py::isinstance<py::int_>(v)) j[key] = v.cast<std::int64_t>();
        else if (py::isinstance<py::float_>(v)) j[key] = v.cast<double>();
        else if (py::isinstance<py::str>(v)) j[key] = v.cast<std::string>();
        else if (py::isinstance<py::dict>(v)) {
            j[key] = nlohmann::json::object();
            for (auto [tk, tv] : v.cast<py::dict>()) j[key][py::str(tk).cast<std::string>()] = tv.cast<std::int64_t>();
        } else throw ConfigError("unsupported option type for '" + key + "'");
    }
    auto config = parse_config(nlohmann::json{{"methods", nlohmann::json::array({j})}});
    config.validate();
    return config.methods.front();
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Conformal set-valued classification with outlier detection";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    m.attr("OUTLIER") = kOutlier;
    m.attr("UNLABELED") = kUnlabeled;
    m.attr("METHODS") = method_registry();

    py::class_<ExperimentData>(m, "Data")
        .def_property_readonly("x_train", [](const ExperimentData& d) { return to_array(d.train.features()); })
        .def_property_readonly("y_train", [](const ExperimentData& d) { return to_array(d.train.labels()); })
        .def_property_readonly("x_test", [](const ExperimentData& d) { return to_array(d.test.features()); })
        .def_property_readonly("y_test", [](const ExperimentData& d) { return to_array(d.test.labels()); })
        .def_property_readonly("class_names", [](const ExperimentData& d) { return d.train.class_names(); })
        .def_property_readonly("has_oracle", [](const ExperimentData& d) { return d.oracle.has_value(); });

    m.def("from_arrays", &from_arrays, py::arg("x_train"), py::arg("y_train"), py::arg("x_test"),
          py::arg("y_test") = py::none(), py::arg("class_names") = py::none(),
          "Wraps numpy arrays; y_test may use OUTLIER for rows from no training class.");

    m.def(
        "make_data",
        [](const std::string& source_json, std::uint64_t seed) {
            auto j = nlohmann::json::parse(source_json);
            return make_data(parse_config(nlohmann::json{{"data", j}}).data, seed);
        },
        py::arg("source"), py::arg("seed"), "Builds data from a JSON `data` section of an experiment config.");

    m.def(
        "example1",
        [](std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
            DataSource s;
            s.train_per_class = n_train;
            s.test_per_class = n_test;
            return make_data(s, seed);
        },
        py::arg("n_train_per_class") = 200, py::arg("n_test_per_class") = 200, py::arg("seed") = 1);

    m.def(
        "load_csv",
        [](const std::string& path, std::optional<std::string> label_column) {
            const Dataset d = load_csv(path, label_column);
            return py::make_tuple(to_array(d.features()), to_array(d.labels()), d.class_names());
        },
        py::arg("path"), py::arg("label_column") = "label");

    m.def(
        "run_method",
        [](const std::string& name, const ExperimentData& data, double alpha, std::uint64_t seed,
           std::size_t threads, const py::kwargs& opts) {
            const MethodSpec spec = method_spec(name, alpha, opts);
            MethodRun run;
            {
                py::gil_scoped_release release;
                run = run_method(spec, data, seed, threads);
            }
            py::dict out = sets_dict(run.sets);
            const bool labeled = std::none_of(data.test.labels().begin(), data.test.labels().end(),
                                              [](int y) { return y == kUnlabeled; });
            out["report"] = labeled ? py::object(report_dict(run.report)) : py::none();
            out["log"] = run.log.dump();
            return out;
        },
        py::arg("name"), py::arg("data"), py::arg("alpha") = 0.05, py::arg("seed") = 1, py::arg("threads") = 1,
        "Runs one method. Options: gamma (number or 'log'), b_tilde, n_trees, randomized, tree, w, mc_samples.");

    m.def(
        "type_errors",
        [](const std::vector<std::vector<int>>& sets, const Labels& truth, std::vector<std::string> names) {
            PredictionSets p;
            p.class_names = std::move(names);
            p.sets = sets;
            return report_dict(type_errors(p, to_labels(truth)));
        },
        py::arg("sets"), py::arg("truth"), py::arg("class_names"));

    m.def(
        "split_conformal_pvalue",
        [](std::vector<double> cal, double test) { return split_conformal_pvalue(cal, test); }, py::arg("calibration"),
        py::arg("score"));

    m.def(
        "audit",
        [](std::vector<std::size_t> n_values, std::vector<double> alphas, std::size_t seeds, std::size_t b_tilde,
           std::uint64_t seed, std::size_t threads) {
            AuditSpec spec;
            spec.n_values = std::move(n_values);
            spec.alphas = std::move(alphas);
            spec.seeds = seeds;
            spec.b_tilde = b_tilde;
            std::ostringstream log;
            AuditOutcome out;
            {
                py::gil_scoped_release release;
                out = run_audit(spec, seed, threads, log);
            }
            py::dict d;
            d["instances"] = out.instances;
            d["violations"] = out.violations;
            d["max_strange_set"] = out.max_strange;
            d["log"] = log.str();
            return d;
        },
        py::arg("n_values") = std::vector<std::size_t>{3, 6, 9, 12},
        py::arg("alphas") = std::vector<double>{0.05, 0.2, 0.5}, py::arg("seeds") = 100, py::arg("b_tilde") = 20,
        py::arg("seed") = 1, py::arg("threads") = 1, "Strange-set audits; returns counts and the per-instance CSV log.");

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& output_dir) {
            auto config = parse_config(nlohmann::json::parse(config_json));
            if (!output_dir.empty()) config.output_dir = output_dir;
            ExperimentSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(config);
            }
            return s.written;
        },
        py::arg("config"), py::arg("output_dir") = "", "Runs a JSON config; returns the written file paths.");
}

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spurcor/correlation.hpp"
#include "spurcor/dataset.hpp"
#include "spurcor/estimators.hpp"
#include "spurcor/mvn.hpp"
#include "spurcor/procedures.hpp"
#include "spurcor/simulation.hpp"

namespace py = pybind11;
using namespace spurcor;

namespace {

GroupedDataset dataset_from_groups(const std::vector<Eigen::MatrixXd>& groups) {
    GroupedDataset ds;
    ds.groups = groups;
    ds.validate();
    return ds;
}

} // namespace

PYBIND11_MODULE(_spurcor, m) {
    m.doc() = "multiple testing with spurious-correlation maxT";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::enum_<Method>(m, "Method")
        .value("bonferroni", Method::Bonferroni)
        .value("maxt", Method::MaxT)
        .value("stepdown_maxt", Method::StepDownMaxT)
        .value("proposal", Method::Proposal)
        .value("global_pooled", Method::GlobalPooledNegativeControl);

    py::enum_<Sidedness>(m, "Sidedness")
        .value("two_sided", Sidedness::TwoSided)
        .value("one_sided_upper", Sidedness::OneSidedUpper);

    py::class_<GroupedDataset>(m, "Dataset")
        .def(py::init(&dataset_from_groups), py::arg("groups"),
             "build from a list of (n_u x p) arrays; the first entry is the control group")
        .def_property_readonly("m", &GroupedDataset::m)
        .def_property_readonly("p", &GroupedDataset::p)
        .def("n", &GroupedDataset::n, py::arg("group"))
        .def_readonly("groups", &GroupedDataset::groups);

    m.def("load_csv", [](const std::string& path, char delimiter,
                         const std::string& group_column, long control_label) {
            CsvOptions options;
            options.delimiter = delimiter;
            options.group_column = group_column;
            options.control_label = control_label;
            return load_csv_file(path, options);
        },
        py::arg("path"), py::arg("delimiter") = ',', py::arg("group_column") = "group",
        py::arg("control_label") = 0);

    m.def("t_statistics", [](const GroupedDataset& ds, Sidedness sidedness) {
            return t_statistics(ds, sidedness).values;
        },
        py::arg("dataset"), py::arg("sidedness") = Sidedness::TwoSided,
        "matrix of two-sample t statistics, one row per case group");

    m.def("cov_tilde", &cov_tilde, py::arg("dataset"), py::arg("group"));
    m.def("cov_global_pooled", &cov_global_pooled, py::arg("dataset"), py::arg("group"));

    m.def("correlation_matrix", [](const GroupedDataset& ds, const std::string& policy,
                                   double theta, std::uint64_t repair_seed) {
            CorrelationModel model;
            if (policy == "conventional")
                model = build_conventional(ds);
            else if (policy == "spurious")
                model = build_spurious(ds, theta, repair_seed);
            else if (policy == "global-pooled")
                model = build_global_pooled(ds, repair_seed);
            else
                throw ValidationError("unknown policy '" + policy + "'");
            return py::make_tuple(model.psi, model.repaired, model.clamped);
        },
        py::arg("dataset"), py::arg("policy") = "spurious", py::arg("theta") = 1.0,
        py::arg("repair_seed") = 0,
        "(psi, repaired, clamped) under the given correlation policy");

    py::class_<Hypothesis>(m, "Hypothesis")
        .def_readonly("s", &Hypothesis::s)
        .def_readonly("j", &Hypothesis::j)
        .def_readonly("t", &Hypothesis::t_value)
        .def_readonly("adjusted_p", &Hypothesis::adjusted_p)
        .def_readonly("rejected", &Hypothesis::rejected)
        .def("__repr__", [](const Hypothesis& h) {
            return "Hypothesis(s=" + std::to_string(h.s) + ", j=" + std::to_string(h.j) +
                   ", adjusted_p=" + std::to_string(h.adjusted_p) + ")";
        });

    py::class_<TestOutcome>(m, "TestOutcome")
        .def_readonly("hypotheses", &TestOutcome::hypotheses)
        .def_readonly("alpha", &TestOutcome::alpha)
        .def_readonly("seed", &TestOutcome::seed)
        .def_readonly("critical_values", &TestOutcome::critical_values)
        .def_readonly("repaired", &TestOutcome::repaired)
        .def_property_readonly("method",
                               [](const TestOutcome& o) { return method_name(o.method); })
        .def_property_readonly("n_rejected", &TestOutcome::n_rejected)
        .def("adjusted_p", [](const TestOutcome& o) {
            std::vector<double> out;
            for (const auto& h : o.hypotheses) out.push_back(h.adjusted_p);
            return out;
        })
        .def("to_json", [](const TestOutcome& o) { return to_json(o); });

    m.def("analyze", [](const GroupedDataset& ds, Method method, double alpha,
                        Sidedness sidedness, double theta, int n_draws, std::uint64_t seed) {
            AnalysisOptions options;
            options.alpha = alpha;
            options.sidedness = sidedness;
            options.theta = theta;
            options.n_draws = n_draws;
            options.seed = seed;
            return run_analysis(ds, method, options);
        },
        py::arg("dataset"), py::arg("method") = Method::Proposal, py::arg("alpha") = 0.05,
        py::arg("sidedness") = Sidedness::TwoSided, py::arg("theta") = 1.0,
        py::arg("n_draws") = 100000, py::arg("seed") = 0);

    m.def("critical_value", [](const Eigen::MatrixXd& psi, double alpha, int n_draws,
                               std::uint64_t seed, Sidedness sidedness) {
            GaussianPool pool(psi, n_draws, seed);
            std::vector<int> full(psi.rows());
            for (int i = 0; i < static_cast<int>(full.size()); ++i) full[i] = i;
            return pool.critical_value(alpha, full, sidedness);
        },
        py::arg("psi"), py::arg("alpha") = 0.05, py::arg("n_draws") = 100000,
        py::arg("seed") = 0, py::arg("sidedness") = Sidedness::TwoSided,
        "Monte Carlo (1-alpha) quantile of the max statistic under psi");

    m.def("simulate", [](const std::string& scenario_json) {
            return report_to_json(run_simulation(scenario_from_json(scenario_json)));
        },
        py::arg("scenario_json"), "run one scenario and return the JSON report");
}

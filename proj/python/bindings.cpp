#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "scmlab/analysis.hpp"
#include "scmlab/config.hpp"
#include "scmlab/experiments.hpp"
#include "scmlab/macro.hpp"
#include "scmlab/micro.hpp"
#include "scmlab/moments.hpp"
#include "scmlab/trajectory_csv.hpp"

namespace py = pybind11;
using namespace scm;

namespace {

py::array_t<double> stacked(const Trajectory& t, bool q) {
    const auto s = static_cast<py::ssize_t>(t.samples.size());
    const py::ssize_t rows = t.config.K, cols = q ? t.config.K : t.config.M;
    py::array_t<double> out({s, rows, cols});
    auto a = out.mutable_unchecked<3>();
    for (py::ssize_t i = 0; i < s; ++i) {
        const auto& m = q ? t.samples[i].state.Q : t.samples[i].state.R;
        for (py::ssize_t r = 0; r < rows; ++r)
            for (py::ssize_t c = 0; c < cols; ++c) a(i, r, c) = m(r, c);
    }
    return out;
}

std::vector<double> column(const Trajectory& t, bool eps) {
    std::vector<double> v;
    for (const auto& s : t.samples) v.push_back(eps ? s.eps_g : s.alpha);
    return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Order-parameter dynamics of soft committee machines";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
    auto search = py::register_exception<SearchError>(m, "SearchError", error.ptr());
    py::register_exception<BracketError>(m, "BracketError", search.ptr());
    py::register_exception<analysis::FixedPointError>(m, "FixedPointError", search.ptr());
    py::register_exception<micro::StepDivergenceError>(m, "StepDivergenceError", error.ptr());
    py::register_exception<BoundaryError>(m, "BoundaryError", error.ptr());
    py::register_exception<IntegrationError>(m, "IntegrationError", error.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());

    py::enum_<ActivationKind>(m, "Activation").value("relu", ActivationKind::ReLU).value("erf", ActivationKind::Erf);
    py::enum_<Eta2Mode>(m, "Eta2Mode").value("off", Eta2Mode::Off).value("perceptron", Eta2Mode::PerceptronExact);

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init([](int k, int mm, double eta, ActivationKind act, Eta2Mode e2) {
                 NetConfig c{k, mm, eta, act, e2};
                 c.validate();
                 return c;
             }),
             py::arg("K"), py::arg("M"), py::arg("eta") = 0.1, py::arg("activation") = ActivationKind::ReLU,
             py::arg("eta2") = Eta2Mode::Off)
        .def_readwrite("K", &NetConfig::K)
        .def_readwrite("M", &NetConfig::M)
        .def_readwrite("eta", &NetConfig::eta)
        .def_readwrite("activation", &NetConfig::activation)
        .def_readwrite("eta2", &NetConfig::eta2_mode);

    py::class_<OrderParameters>(m, "OrderParameters")
        .def(py::init([](const Eigen::MatrixXd& r, const Eigen::MatrixXd& q, std::optional<Eigen::MatrixXd> t) {
                 OrderParameters s(r, q, t ? *t : Eigen::MatrixXd::Identity(r.cols(), r.cols()));
                 s.check_shapes();
                 return s;
             }),
             py::arg("R"), py::arg("Q"), py::arg("T") = py::none())
        .def_static("zeros", &OrderParameters::zeros, py::arg("K"), py::arg("M"))
        .def_readwrite("R", &OrderParameters::R)
        .def_readwrite("Q", &OrderParameters::Q)
        .def_readwrite("T", &OrderParameters::T)
        .def("invariant_violation", &OrderParameters::invariant_violation)
        .def("flatten", [](const OrderParameters& s) { return flatten(s); })
        .def("__repr__", [](const OrderParameters& s) {
            return "OrderParameters(K=" + std::to_string(s.students()) + ", M=" + std::to_string(s.teachers()) + ")";
        });
    m.def("unflatten", &unflatten, py::arg("x"), py::arg("like"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("config", &Trajectory::config)
        .def_readonly("initial", &Trajectory::initial)
        .def_property_readonly("source", [](const Trajectory& t) { return std::string(to_string(t.source)); })
        .def_property_readonly("alpha", [](const Trajectory& t) { return column(t, false); })
        .def_property_readonly("eps_g", [](const Trajectory& t) { return column(t, true); })
        .def_property_readonly("R", [](const Trajectory& t) { return stacked(t, false); })
        .def_property_readonly("Q", [](const Trajectory& t) { return stacked(t, true); })
        .def("final_state", [](const Trajectory& t) { return t.back().state; })
        .def("__len__", [](const Trajectory& t) { return t.samples.size(); })
        .def("to_csv", &format_csv);
    m.def("parse_csv", [](const std::string& text) { return parse_csv(text); }, py::arg("text"));

    m.def(
        "rhs",
        [](const OrderParameters& s, const NetConfig& c) {
            const auto d = macro::rhs(s, c);
            return py::make_tuple(d.dR, d.dQ);
        },
        py::arg("state"), py::arg("config"), "(dR/dalpha, dQ/dalpha) at a state");
    m.def("gen_error", &macro::gen_error, py::arg("state"), py::arg("config"));
    m.def(
        "integrate",
        [](const OrderParameters& s, const NetConfig& c, double alpha_max, double step, long long stride) {
            return macro::integrate(s, c, alpha_max, {step}, stride);
        },
        py::arg("state"), py::arg("config"), py::arg("alpha_max"), py::arg("step") = 0.01, py::arg("stride") = 100);

    m.def("flat_rhs", &analysis::flat_rhs, py::arg("state"), py::arg("config"));
    m.def("jacobian", &analysis::jacobian, py::arg("state"), py::arg("config"), py::arg("h") = 1e-6);
    m.def(
        "eigs",
        [](const Eigen::MatrixXd& a) {
            const auto r = analysis::eigs(a);
            return py::make_tuple(r.values, r.vectors);
        },
        py::arg("matrix"), "Eigenvalues (descending real part) and unit eigenvectors as columns");
    m.def(
        "find_fixed_point",
        [](const NetConfig& c, const OrderParameters& g, double tol, int iters) {
            const auto r = analysis::find_fixed_point(c, g, tol, iters);
            py::dict d;
            d["state"] = r.state;
            d["iterations"] = r.iterations;
            d["residual"] = r.residual;
            d["used_pseudo_inverse"] = r.used_pseudo_inverse;
            return d;
        },
        py::arg("config"), py::arg("guess"), py::arg("tol") = 1e-12, py::arg("max_iterations") = 200);
    m.def("stability_indicator", &analysis::stability_indicator, py::arg("fixed_point"), py::arg("config"));
    m.def("critical_learning_rate", &analysis::critical_learning_rate, py::arg("config"), py::arg("fixed_point"),
          py::arg("bracket"), py::arg("tol") = 1e-4);
    m.def(
        "detect_plateau",
        [](const Trajectory& t, double window, double slope_tol) {
            py::list out;
            for (const auto& p : analysis::detect_plateau(t, window, slope_tol)) {
                py::dict d;
                d["alpha_start"] = p.alpha_start;
                d["alpha_end"] = p.alpha_end;
                d["eps_g"] = p.eps_g;
                d["mean_R"] = p.mean_R;
                out.append(d);
            }
            return out;
        },
        py::arg("trajectory"), py::arg("window") = 50.0, py::arg("slope_tol") = 1e-5);
    m.def("direction_angle_deg", &analysis::direction_angle_deg, py::arg("a"), py::arg("b"));

    auto mo = m.def_submodule("moments", "Gaussian moment kernels");
    mo.def(
        "i3",
        [](ActivationKind act, const Eigen::Matrix3d& c) { return moments::i3(act, moments::Covariance3::from_matrix(c)); },
        py::arg("activation"), py::arg("cov"));
    mo.def(
        "i2",
        [](ActivationKind act, const Eigen::Matrix2d& c) { return moments::i2(act, moments::Covariance2::from_matrix(c)); },
        py::arg("activation"), py::arg("cov"));
    mo.def("delta2_perceptron", &moments::delta2_perceptron, py::arg("q"), py::arg("r"), py::arg("t"));
    py::enum_<moments::MomentForm>(mo, "Form")
        .value("i3_relu", moments::MomentForm::I3Relu)
        .value("i3_erf", moments::MomentForm::I3Erf)
        .value("i2_relu", moments::MomentForm::I2Relu)
        .value("i2_erf", moments::MomentForm::I2Erf)
        .value("delta2_perceptron", moments::MomentForm::Delta2Perceptron);
    mo.def(
        "mc_average",
        [](moments::MomentForm f, const Eigen::MatrixXd& cov, std::int64_t n, std::uint64_t seed) {
            const auto e = moments::mc_average(f, cov, n, seed);
            return py::make_tuple(e.mean, e.stderr_mean);
        },
        py::arg("form"), py::arg("cov"), py::arg("n"), py::arg("seed") = 1, "(mean, standard error)");

    m.def(
        "simulate",
        [](const OrderParameters& s, const NetConfig& c, int n, long long steps, long long stride, std::uint64_t seed,
           bool allow_small_n) {
            micro::SimConfig sc;
            sc.N = n;
            sc.K = c.K;
            sc.M = c.M;
            sc.eta = c.eta;
            sc.activation = c.activation;
            sc.steps = steps;
            sc.measure_stride = stride;
            sc.seed = seed;
            sc.allow_small_n = allow_small_n;
            py::gil_scoped_release release;
            return micro::run(sc, s);
        },
        py::arg("state"), py::arg("config"), py::arg("N"), py::arg("steps"), py::arg("measure_stride") = 100,
        py::arg("seed") = 1, py::arg("allow_small_n") = false,
        "SGD simulation at dimension N; the eta^2 setting of config does not apply");

    m.def(
        "load_config",
        [](const std::filesystem::path& p) {
            const auto c = load_config(p);
            return py::make_tuple(c.net, c.initial);
        },
        py::arg("path"), "(NetConfig, initial OrderParameters) from a config file");
    m.def(
        "reproduce",
        [](const std::string& name, const std::filesystem::path& out, int sim_n, bool run_sim) {
            experiments::ReproduceOptions o;
            o.out_dir = out;
            o.sim_n = sim_n;
            o.run_sim = run_sim;
            const Report r = [&] {
                py::gil_scoped_release release;
                return experiments::reproduce(name, o);
            }();
            return py::make_tuple(r.all_pass(), r.text());
        },
        py::arg("name"), py::arg("out_dir") = "results", py::arg("sim_n") = 0, py::arg("run_sim") = true,
        "(all checks passed, report text)");
}

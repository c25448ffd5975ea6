#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flr/adaptive.hpp"
#include "flr/cli.hpp"
#include "flr/error.hpp"
#include "flr/functionals.hpp"
#include "flr/harness.hpp"
#include "flr/oracle.hpp"
#include "flr/simulate.hpp"

namespace py = pybind11;

namespace {

flr::SequenceModel make_model(const std::string& regime, double p, double a, double r, double d) {
    flr::SequenceModel m;
    m.regime = flr::parse_regime(regime);
    m.p = p;
    m.a = a;
    m.r = r;
    m.d = d;
    m.validate();
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Adaptive estimation of linear functionals in functional linear regression";

    py::register_exception<flr::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<flr::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("normalize_functional", [](const std::string& text) { return flr::to_string(flr::parse_functional(text)); },
          py::arg("functional"));

    m.def("coefficients",
          [](const std::string& functional, std::int64_t count) {
              return flr::coefficients(flr::parse_functional(functional), count);
          },
          py::arg("functional"), py::arg("m"));

    m.def("simulate",
          [](std::int64_t n, std::uint64_t seed, const std::string& regime, double p, double a, double sigma,
             double slope_scale, double rotation, std::int64_t J) {
              flr::SimConfig c;
              c.model = make_model(regime, p, a, 1.0, 1.0);
              c.n = n;
              c.seed = seed;
              c.sigma = sigma;
              c.slope_scale = slope_scale;
              c.rotation = rotation;
              c.J = J;
              c.validate();
              const auto slope = flr::make_slope(c.model, c.truncation(), c.slope_scale);
              auto data = flr::draw_dataset(c, slope);
              return py::make_tuple(std::move(data.x), std::move(data.y), slope.coeffs);
          },
          py::arg("n"), py::arg("seed") = 1, py::arg("regime") = "pp", py::arg("p") = 1.0, py::arg("a") = 1.0,
          py::arg("sigma") = 1.0, py::arg("slope_scale") = 0.9, py::arg("rotation") = 0.0, py::arg("J") = 0);

    m.def("adaptive_estimate_json",
          [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& functional,
             double penalty_constant) {
              if (x.rows() != y.size()) throw flr::InvalidArgument("x and y have different row counts");
              flr::Dataset data;
              data.x = x;
              data.y = y;
              flr::AdaptiveOptions opts;
              opts.penalty_constant = penalty_constant;
              py::gil_scoped_release release;
              return flr::to_json(flr::adaptive_estimate(data, flr::parse_functional(functional), opts)).dump();
          },
          py::arg("x"), py::arg("y"), py::arg("functional"),
          py::arg("penalty_constant") = flr::kDefaultPenaltyConstant);

    m.def("lemma_suite",
          [](std::int64_t instances, std::uint64_t seed, std::int64_t max_m) {
              const auto rep = flr::lemma_suite(instances, seed, max_m);
              return py::make_tuple(rep.instances, rep.violations);
          },
          py::arg("instances") = 10000, py::arg("seed") = 7, py::arg("max_m") = 20);

    m.def("run_cli",
          [](const std::vector<std::string>& args) {
              std::vector<const char*> argv{"flr"};
              for (const auto& a : args) argv.push_back(a.c_str());
              std::ostringstream out, err;
              int code = 0;
              {
                  py::gil_scoped_release release;
                  code = flr::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
              }
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"));
}

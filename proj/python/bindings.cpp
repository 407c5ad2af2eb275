// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nepqn/analysis.hpp"
#include "nepqn/keldysh.hpp"
#include "nepqn/problems.hpp"
#include "nepqn/solvers.hpp"

namespace py = pybind11;
using namespace nepqn;

namespace
{

Variant variant_from_string(const std::string &name)
{
  if (name == "QN1")
  {
    return Variant::qn1;
  }
  if (name == "QN2")
  {
    return Variant::qn2;
  }
  if (name == "QN3")
  {
    return Variant::qn3;
  }
  if (name == "QN4")
  {
    return Variant::qn4;
  }
  throw py::value_error("variant must be one of QN1, QN2, QN3, QN4");
}

py::dict trace_to_dict(const IterationTrace &trace)
{
  py::list mu, resid, err, rho, rk, x;
  for (const auto &rec : trace.records)
  {
    mu.append(rec.mu);
    resid.append(rec.resid_norm);
    err.append(rec.err_norm ? py::cast(*rec.err_norm) : py::none());
    rho.append(rec.rho_est ? py::cast(*rec.rho_est) : py::none());
    rk.append(rec.r_k_norm ? py::cast(*rec.r_k_norm) : py::none());
    x.append(rec.x);
  }
  py::dict out;
  out["status"] = to_string(trace.status);
  out["mu"] = mu;
  out["resid_norm"] = resid;
  out["err_norm"] = err;
  out["rho_est"] = rho;
  out["r_k_norm"] = rk;
  out["x"] = x;
  out["breakdown_reason"] = trace.breakdown_reason;
  return out;
}

}  // namespace

PYBIND11_MODULE(_nepqn, m)
{
  m.doc() = "Quasi-Newton solvers and Keldysh diagnostics for nonlinear eigenvalue problems";

  py::class_<NepProblem>(m, "NepProblem")
      .def_property_readonly("dimension", &NepProblem::dimension)
      .def("evaluate", &NepProblem::evaluate, py::arg("lam"))
      .def("derivative", &NepProblem::derivative, py::arg("lam"))
      .def("higher_derivative", &NepProblem::higher_derivative, py::arg("order"), py::arg("lam"))
      .def("poles", &NepProblem::poles);

  py::class_<Eigentriplet>(m, "Eigentriplet")
      .def_readonly("lam", &Eigentriplet::lambda)
      .def_readonly("right_vec", &Eigentriplet::right_vec)
      .def_readonly("left_vec", &Eigentriplet::left_vec);

  m.def("loaded_string", &loaded_string, py::arg("n"), py::arg("c_scale"));
  m.def("circle_quadratic", &circle_quadratic, py::arg("r"));
  m.def("counterexample", &counterexample, py::arg("f_coeffs"));
  m.def("linear", &linear, py::arg("a"));
  m.def(
      "polynomial",
      [](const std::vector<Matrix> &coeffs) { return NepProblem::polynomial(coeffs); },
      py::arg("coeffs"));

  m.def(
      "enumerate_spectrum",
      [](const NepProblem &problem) {
        const SpectrumReport report = enumerate_spectrum(problem);
        py::list out;
        for (const auto &t : report.triplets)
        {
          out.append(py::make_tuple(t.lambda, t.right_vec, t.left_vec));
        }
        return out;
      },
      py::arg("problem"));

  m.def(
      "solve",
      [](const NepProblem &problem, const std::string &variant, Complex sigma, Complex mu0,
         const Vector &x0, const Vector &c, double tol_residual, int max_iter) {
        SolverConfig config;
        config.variant = variant_from_string(variant);
        config.sigma = sigma;
        config.mu0 = mu0;
        config.x0 = x0;
        config.c = c;
        config.tol_residual = tol_residual;
        config.max_iter = max_iter;
        return trace_to_dict(run(problem, config));
      },
      py::arg("problem"), py::arg("variant"), py::arg("sigma"), py::arg("mu0"), py::arg("x0"),
      py::arg("c"), py::arg("tol_residual") = 1e-12, py::arg("max_iter") = 100);

  m.def(
      "convergence_factors",
      [](const NepProblem &problem, Complex sigma, const Vector &x0, const Vector &c,
         Complex lam, const Vector &v, const Vector &u) {
        Eigentriplet target{lam, v, u};
        py::dict out;
        out["rho_A1"] = matrix_a1(problem, sigma, x0, c, target).spectral_radius();
        out["rho_A2"] = matrix_a2(problem, sigma, c, target).spectral_radius();
        out["rho_B"] = matrix_b(problem, sigma, c, target).spectral_radius();
        return out;
      },
      py::arg("problem"), py::arg("sigma"), py::arg("x0"), py::arg("c"), py::arg("lam"),
      py::arg("v"), py::arg("u"));

  m.def("spectral_radius", py::overload_cast<const Matrix &>(&spectral_radius), py::arg("m"));

  m.def(
      "partial_fraction",
      [](const NepProblem &problem, Complex z) {
        KeldyshDecomposition d;
        d.problem = problem;
        const SpectrumReport report = enumerate_spectrum(problem);
        d.triplets = report.triplets;
        return d.partial_fraction(z);
      },
      py::arg("problem"), py::arg("z"),
      "Partial-fraction reconstruction of M(z)^-1 over the full spectrum");

  m.def(
      "contour_remainder",
      [](const NepProblem &problem, Complex center, double radius, int nodes, Complex z) {
        return contour_remainder(problem, Contour{center, radius, nodes}, z);
      },
      py::arg("problem"), py::arg("center"), py::arg("radius"), py::arg("nodes"), py::arg("z"));

  py::register_exception<NepError>(m, "NepError");
}

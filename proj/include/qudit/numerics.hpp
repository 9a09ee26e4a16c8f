// Thin RAII wrappers over the GSL routines used by the simulator and fits.
#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_multiroots.h>
#include <gsl/gsl_odeiv2.h>
#include <gsl/gsl_roots.h>

#include <functional>
#include <memory>

#include "core.hpp"

namespace qd::num {

inline void quiet_gsl() {
  static bool once = [] {
    gsl_set_error_handler_off();
    return true;
  }();
  (void)once;
}

// ------------------------------------------------------------------ ODE

// Integrates dU/dt = -i H(t) U for a D x D complex matrix with rk8pd and
// returns U at each requested time (times must be non-decreasing).
struct MatrixOde {
  std::function<void(double, const Mat&, Mat&)> rhs;  // writes dU/dt
  int dim = 0;
  double rtol = 1e-10;
  double atol = 1e-12;

  std::vector<Mat> solve(const Mat& U0, double t0, const std::vector<double>& times) const {
    quiet_gsl();
    const size_t n = 2 * static_cast<size_t>(dim) * dim;
    struct Ctx {
      const MatrixOde* self;
      Mat U, dU;
    } ctx{this, Mat(dim, dim), Mat(dim, dim)};
    auto f = [](double t, const double y[], double dydt[], void* p) -> int {
      auto* c = static_cast<Ctx*>(p);
      const int D = c->self->dim;
      c->U = Eigen::Map<const Mat>(reinterpret_cast<const cplx*>(y), D, D);
      c->self->rhs(t, c->U, c->dU);
      Eigen::Map<Mat>(reinterpret_cast<cplx*>(dydt), D, D) = c->dU;
      return GSL_SUCCESS;
    };
    gsl_odeiv2_system sys{f, nullptr, n, &ctx};
    std::unique_ptr<gsl_odeiv2_driver, decltype(&gsl_odeiv2_driver_free)> drv(
        gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_rk8pd, 1e-3, atol, rtol), &gsl_odeiv2_driver_free);
    gsl_odeiv2_driver_set_nmax(drv.get(), 10000000);
    std::vector<double> y(n);
    Eigen::Map<Mat>(reinterpret_cast<cplx*>(y.data()), dim, dim) = U0;
    double t = t0;
    std::vector<Mat> out;
    out.reserve(times.size());
    for (double ti : times) {
      if (ti > t) {
        int st = gsl_odeiv2_driver_apply(drv.get(), &t, ti, y.data());
        if (st != GSL_SUCCESS) throw ConvergenceError(std::string("ODE integration failed: ") + gsl_strerror(st));
      }
      out.push_back(Eigen::Map<const Mat>(reinterpret_cast<const cplx*>(y.data()), dim, dim));
    }
    return out;
  }
};

// ------------------------------------------------------------- 1-D solvers

inline double brent_root(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-10,
                         int max_iter = 200) {
  quiet_gsl();
  struct P {
    const std::function<double(double)>* f;
  } p{&f};
  gsl_function F{[](double x, void* q) { return (*static_cast<P*>(q)->f)(x); }, &p};
  std::unique_ptr<gsl_root_fsolver, decltype(&gsl_root_fsolver_free)> s(
      gsl_root_fsolver_alloc(gsl_root_fsolver_brent), &gsl_root_fsolver_free);
  if (gsl_root_fsolver_set(s.get(), &F, lo, hi) != GSL_SUCCESS)
    throw ConvergenceError("root bracket does not change sign");
  for (int i = 0; i < max_iter; ++i) {
    gsl_root_fsolver_iterate(s.get());
    double a = gsl_root_fsolver_x_lower(s.get()), b = gsl_root_fsolver_x_upper(s.get());
    if (gsl_root_test_interval(a, b, xtol, 0) == GSL_SUCCESS) return gsl_root_fsolver_root(s.get());
  }
  throw ConvergenceError("Brent root finder did not converge");
}

// Minimize on [lo, hi]: a coarse scan locates the basin, Brent refines it.
inline double brent_minimize(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-12,
                             int scan = 40) {
  quiet_gsl();
  int best = 0;
  double fbest = INFINITY;
  std::vector<double> xs(scan + 1), fs(scan + 1);
  for (int i = 0; i <= scan; ++i) {
    xs[i] = lo + (hi - lo) * i / scan;
    fs[i] = f(xs[i]);
    if (fs[i] < fbest) {
      fbest = fs[i];
      best = i;
    }
  }
  if (best == 0 || best == scan) return xs[best];
  struct P {
    const std::function<double(double)>* f;
  } p{&f};
  gsl_function F{[](double x, void* q) { return (*static_cast<P*>(q)->f)(x); }, &p};
  std::unique_ptr<gsl_min_fminimizer, decltype(&gsl_min_fminimizer_free)> s(
      gsl_min_fminimizer_alloc(gsl_min_fminimizer_brent), &gsl_min_fminimizer_free);
  if (gsl_min_fminimizer_set_with_values(s.get(), &F, xs[best], fs[best], xs[best - 1], fs[best - 1], xs[best + 1],
                                         fs[best + 1]) != GSL_SUCCESS)
    return xs[best];
  for (int i = 0; i < 500; ++i) {
    gsl_min_fminimizer_iterate(s.get());
    double a = gsl_min_fminimizer_x_lower(s.get()), b = gsl_min_fminimizer_x_upper(s.get());
    if (gsl_min_test_interval(a, b, xtol, 0.0) == GSL_SUCCESS) break;
  }
  return gsl_min_fminimizer_x_minimum(s.get());
}

// ------------------------------------------------------------ N-D solvers

inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double step, double size_tol = 1e-10,
                                       int max_iter = 5000) {
  quiet_gsl();
  const size_t n = x0.size();
  struct P {
    const std::function<double(const std::vector<double>&)>* f;
    size_t n;
  } p{&f, n};
  gsl_multimin_function F;
  F.n = n;
  F.params = &p;
  F.f = [](const gsl_vector* x, void* q) {
    auto* pp = static_cast<P*>(q);
    std::vector<double> v(pp->n);
    for (size_t i = 0; i < pp->n; ++i) v[i] = gsl_vector_get(x, i);
    return (*pp->f)(v);
  };
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n), &gsl_vector_free),
      ss(gsl_vector_alloc(n), &gsl_vector_free);
  for (size_t i = 0; i < n; ++i) gsl_vector_set(x.get(), i, x0[i]);
  gsl_vector_set_all(ss.get(), step);
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), &gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &F, x.get(), ss.get());
  for (int i = 0; i < max_iter; ++i) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), size_tol) == GSL_SUCCESS) break;
  }
  for (size_t i = 0; i < n; ++i) x0[i] = gsl_vector_get(s->x, i);
  return x0;
}

// Hybrid Powell root finder for F(x) = 0 in n dimensions.
inline std::vector<double> multiroot(const std::function<std::vector<double>(const std::vector<double>&)>& F,
                                     std::vector<double> x0, double ftol = 1e-13, int max_iter = 500) {
  quiet_gsl();
  const size_t n = x0.size();
  struct P {
    const std::function<std::vector<double>(const std::vector<double>&)>* F;
    size_t n;
  } p{&F, n};
  gsl_multiroot_function fn{[](const gsl_vector* x, void* q, gsl_vector* out) -> int {
                              auto* pp = static_cast<P*>(q);
                              std::vector<double> v(pp->n);
                              for (size_t i = 0; i < pp->n; ++i) v[i] = gsl_vector_get(x, i);
                              auto r = (*pp->F)(v);
                              for (size_t i = 0; i < pp->n; ++i) gsl_vector_set(out, i, r[i]);
                              return GSL_SUCCESS;
                            },
                            n, &p};
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n), &gsl_vector_free);
  for (size_t i = 0; i < n; ++i) gsl_vector_set(x.get(), i, x0[i]);
  std::unique_ptr<gsl_multiroot_fsolver, decltype(&gsl_multiroot_fsolver_free)> s(
      gsl_multiroot_fsolver_alloc(gsl_multiroot_fsolver_hybrids, n), &gsl_multiroot_fsolver_free);
  gsl_multiroot_fsolver_set(s.get(), &fn, x.get());
  bool ok = false;
  for (int i = 0; i < max_iter; ++i) {
    int st = gsl_multiroot_fsolver_iterate(s.get());
    if (gsl_multiroot_test_residual(s->f, ftol) == GSL_SUCCESS) {
      ok = true;
      break;
    }
    if (st != GSL_SUCCESS) break;
  }
  for (size_t i = 0; i < n; ++i) x0[i] = gsl_vector_get(s->x, i);
  if (!ok) {
    auto r = F(x0);
    double worst = 0;
    for (double v : r) worst = std::max(worst, std::abs(v));
    if (worst > 1e3 * ftol) throw ConvergenceError("multiroot did not converge");
  }
  return x0;
}

// Unweighted nonlinear least squares with a finite-difference Jacobian.
inline std::vector<double> least_squares(
    const std::function<double(double, const std::vector<double>&)>& model, const std::vector<double>& t,
    const std::vector<double>& y, std::vector<double> p0, int max_iter = 500) {
  quiet_gsl();
  const size_t n = t.size(), k = p0.size();
  if (n < k) throw ValidationError("least_squares: fewer points than parameters");
  struct P {
    const std::function<double(double, const std::vector<double>&)>* m;
    const std::vector<double>* t;
    const std::vector<double>* y;
    size_t k;
  } p{&model, &t, &y, k};
  gsl_multifit_nlinear_fdf fdf{};
  fdf.f = [](const gsl_vector* x, void* q, gsl_vector* r) -> int {
    auto* pp = static_cast<P*>(q);
    std::vector<double> v(pp->k);
    for (size_t i = 0; i < pp->k; ++i) v[i] = gsl_vector_get(x, i);
    for (size_t i = 0; i < pp->t->size(); ++i) gsl_vector_set(r, i, (*pp->m)((*pp->t)[i], v) - (*pp->y)[i]);
    return GSL_SUCCESS;
  };
  fdf.df = nullptr;
  fdf.fvv = nullptr;
  fdf.n = n;
  fdf.p = k;
  fdf.params = &p;
  gsl_multifit_nlinear_parameters par = gsl_multifit_nlinear_default_parameters();
  std::unique_ptr<gsl_multifit_nlinear_workspace, decltype(&gsl_multifit_nlinear_free)> w(
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &par, n, k), &gsl_multifit_nlinear_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(k), &gsl_vector_free);
  for (size_t i = 0; i < k; ++i) gsl_vector_set(x.get(), i, p0[i]);
  gsl_multifit_nlinear_init(x.get(), &fdf, w.get());
  int info = 0;
  int st = gsl_multifit_nlinear_driver(max_iter, 1e-12, 1e-12, 1e-14, nullptr, nullptr, &info, w.get());
  if (st != GSL_SUCCESS && st != GSL_EMAXITER) throw ConvergenceError("least-squares fit failed");
  gsl_vector* xr = gsl_multifit_nlinear_position(w.get());
  for (size_t i = 0; i < k; ++i) p0[i] = gsl_vector_get(xr, i);
  return p0;
}

}  // namespace qd::num

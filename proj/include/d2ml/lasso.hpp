#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "d2ml/error.hpp"
#include "d2ml/matrix.hpp"
#include "d2ml/numerics.hpp"

namespace d2ml {

enum class PenaltyKind { rigorous, adaptive };
enum class InformationCriterion { aic, aicc, bic };
enum class FirstStage { univariate, multivariate };

inline std::string to_string(PenaltyKind k) { return k == PenaltyKind::rigorous ? "rigorous" : "adaptive"; }

inline std::string to_string(InformationCriterion ic) {
  switch (ic) {
    case InformationCriterion::aic: return "aic";
    case InformationCriterion::aicc: return "aicc";
    case InformationCriterion::bic: return "bic";
  }
  return "bic";
}

inline std::string to_string(FirstStage f) {
  return f == FirstStage::univariate ? "univariate" : "multivariate";
}

inline PenaltyKind parse_penalty_kind(const std::string& s) {
  if (s == "rigorous") return PenaltyKind::rigorous;
  if (s == "adaptive") return PenaltyKind::adaptive;
  throw ConfigError("lasso", "unknown estimator '" + s + "' (expected rigorous or adaptive)");
}

inline InformationCriterion parse_ic(const std::string& s) {
  if (s == "aic") return InformationCriterion::aic;
  if (s == "aicc") return InformationCriterion::aicc;
  if (s == "bic") return InformationCriterion::bic;
  throw ConfigError("lasso", "unknown information criterion '" + s + "'");
}

inline FirstStage parse_first_stage(const std::string& s) {
  if (s == "univariate") return FirstStage::univariate;
  if (s == "multivariate") return FirstStage::multivariate;
  throw ConfigError("lasso", "unknown first stage '" + s + "'");
}

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::rigorous;
  double c = 1.1;
  std::optional<double> gamma;  // unset: 0.1 / log(max(T, p))
  int hac_bandwidth = 2;
  int max_loading_iter = 15;
  double loading_tol = 1e-4;
  InformationCriterion ic = InformationCriterion::bic;
  int grid_size = 100;
  double grid_floor = 1e-4;
  FirstStage first_stage = FirstStage::univariate;
  double cd_tol = 1e-7;
  int cd_max_sweeps = 10000;

  void validate() const {
    if (!(c > 1.0)) throw ConfigError("lasso", "plug-in constant c must exceed 1");
    if (hac_bandwidth < 0) throw ConfigError("lasso", "hac_bandwidth must be >= 0");
    if (grid_size < 10) throw ConfigError("lasso", "grid_size must be >= 10");
    if (max_loading_iter < 1) throw ConfigError("lasso", "max_loading_iter must be >= 1");
    if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) throw ConfigError("lasso", "gamma must lie in (0,1)");
  }
};

struct IcPoint {
  double lambda = 0.0;
  std::size_t k = 0;
  double rss = 0.0;
  double score = 0.0;
  bool skipped = false;
};

struct LassoFit {
  Vector beta;
  std::vector<std::size_t> active;
  double lambda = 0.0;
  Vector loadings;
  Vector post_beta;
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  double rss = std::numeric_limits<double>::quiet_NaN();
  bool refitted = false;
  bool degenerate_loading = false;
  int sweeps = 0;
  int loading_iterations = 0;
  std::optional<std::vector<IcPoint>> ic_scores;

  bool exact_fit() const { return refitted && sigma2 <= tol::exact_fit_sigma2; }
};

inline double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw DataError("lasso", std::string("non-finite value in ") + what);
}

inline std::vector<std::size_t> support(std::span<const double> beta) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) out.push_back(j);
  return out;
}

/// Cyclic coordinate descent on sum (y - Xb)^2 + sum_j pen_j |b_j| from
/// sufficient statistics G = X'X, c = X'y. `beta` is the warm start and the
/// result. Returns the number of sweeps.
inline int coordinate_descent_gram(const DenseMatrix& g, std::span<const double> c,
                                   std::span<const double> pen, std::span<double> beta,
                                   double tol, int max_sweeps) {
  const std::size_t p = c.size();
  Vector grad(c.begin(), c.end());
  for (std::size_t k = 0; k < p; ++k) {
    if (beta[k] == 0.0) continue;
    for (std::size_t j = 0; j < p; ++j) grad[j] -= g(j, k) * beta[k];
  }
  double max_change = 0.0;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double gjj = g(j, j);
      const double old = beta[j];
      const double next = gjj > 0.0 ? soft_threshold(grad[j] + gjj * old, 0.5 * pen[j]) / gjj : 0.0;
      if (next == old) continue;
      const double delta = next - old;
      beta[j] = next;
      for (std::size_t k = 0; k < p; ++k) grad[k] -= g(k, j) * delta;
      max_change = std::max(max_change, std::abs(delta));
    }
    if (max_change < tol) return sweep;
  }
  throw ConvergenceError("lasso",
                         "coordinate descent did not converge in " + std::to_string(max_sweeps) +
                             " sweeps (last max change " + std::to_string(max_change) + ")",
                         max_change);
}

inline DenseMatrix columns_of(const DenseMatrix& x, std::span<const std::size_t> idx) {
  DenseMatrix out(x.rows(), idx.size());
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t a = 0; a < idx.size(); ++a) out(t, a) = x(t, idx[a]);
  return out;
}

inline Vector residuals(const DenseMatrix& x, std::span<const double> y, std::span<const double> beta) {
  Vector r(y.begin(), y.end());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double s = 0.0;
    auto row = x.row(t);
    for (std::size_t j = 0; j < beta.size(); ++j)
      if (beta[j] != 0.0) s += row[j] * beta[j];
    r[t] -= s;
  }
  return r;
}

inline void check_problem(std::span<const double> y, const DenseMatrix& x) {
  if (x.rows() != y.size()) throw DimensionError("lasso", "y length differs from rows of X");
  require_finite(y, "y");
  require_finite(x.values(), "X");
}

}  // namespace detail

struct CoordinateDescentOptions {
  double tol = 1e-7;
  int max_sweeps = 10000;
};

/// Minimizes sum_t (y_t - x_t'b)^2 + lambda * sum_j psi_j |b_j|.
inline LassoFit coordinate_descent(std::span<const double> y, const DenseMatrix& x, double lambda,
                                   std::span<const double> loadings,
                                   CoordinateDescentOptions opts = {}) {
  detail::check_problem(y, x);
  if (loadings.size() != x.cols()) throw DimensionError("lasso", "one loading per regressor required");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("lasso", "lambda must be finite and >= 0");
  for (double l : loadings)
    if (!(l > 0.0) || !std::isfinite(l)) throw DataError("lasso", "loadings must be positive and finite");

  const DenseMatrix g = gram(x);
  const Vector c = cross(x, y);
  Vector pen(loadings.size());
  for (std::size_t j = 0; j < pen.size(); ++j) pen[j] = lambda * loadings[j];

  LassoFit fit;
  fit.beta.assign(x.cols(), 0.0);
  fit.sweeps = detail::coordinate_descent_gram(g, c, pen, fit.beta, opts.tol, opts.max_sweeps);
  fit.active = detail::support(fit.beta);
  fit.lambda = lambda;
  fit.loadings.assign(loadings.begin(), loadings.end());
  fit.post_beta.assign(x.cols(), 0.0);
  return fit;
}

/// Smallest lambda with an all-zero solution: 2 max_j |X_j'y| / psi_j.
inline double lambda_max(std::span<const double> y, const DenseMatrix& x, std::span<const double> loadings) {
  const Vector c = cross(x, y);
  double out = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) out = std::max(out, 2.0 * std::abs(c[j]) / loadings[j]);
  // Round up until the solver's own threshold test zeroes every coordinate.
  for (std::size_t j = 0; j < c.size(); ++j)
    while (0.5 * (out * loadings[j]) < std::abs(c[j])) out = std::nextafter(out, HUGE_VAL);
  return out;
}

/// Largest KKT violation of a penalized solution, on the per-observation
/// scale |2 X_j'r / T| versus lambda psi_j / T.
inline double kkt_violation(const LassoFit& fit, std::span<const double> y, const DenseMatrix& x) {
  const Vector r = detail::residuals(x, y, fit.beta);
  const Vector xr = cross(x, r);
  const double t = static_cast<double>(x.rows());
  double worst = 0.0;
  for (std::size_t j = 0; j < xr.size(); ++j) {
    const double grad = 2.0 * xr[j] / t;
    const double bound = fit.lambda * fit.loadings[j] / t;
    if (fit.beta[j] != 0.0) {
      const double sgn = fit.beta[j] > 0.0 ? 1.0 : -1.0;
      worst = std::max(worst, std::abs(grad - sgn * bound));
    } else {
      worst = std::max(worst, std::abs(grad) - bound);
    }
  }
  return worst;
}

/// Unpenalized refit on the active set. Empty active set: post_beta = 0 and
/// sigma2 = y'y / T.
inline LassoFit post_lasso_ols(LassoFit fit, std::span<const double> y, const DenseMatrix& x) {
  detail::check_problem(y, x);
  const std::size_t t = x.rows();
  const std::size_t k = fit.active.size();
  if (k >= t)
    throw DimensionError("lasso", "post-LASSO refit needs |active| < T (|active|=" +
                                      std::to_string(k) + ", T=" + std::to_string(t) + ")");
  fit.post_beta.assign(x.cols(), 0.0);
  if (k == 0) {
    fit.rss = dot(y, y);
    fit.sigma2 = fit.rss / static_cast<double>(t);
  } else {
    const OlsResult r = ols(detail::columns_of(x, fit.active), y);
    for (std::size_t a = 0; a < k; ++a) fit.post_beta[fit.active[a]] = r.beta[a];
    fit.rss = r.rss;
    fit.sigma2 = r.sigma2;
  }
  fit.refitted = true;
  return fit;
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(), p);
}

/// Plug-in penalty level 2 c sqrt(T) Phi^{-1}(1 - gamma / (2p)).
inline double rigorous_lambda(std::size_t t, std::size_t p, const PenaltyConfig& cfg) {
  const double gamma = cfg.gamma.value_or(
      0.1 / std::log(static_cast<double>(std::max(t, p))));
  return 2.0 * cfg.c * std::sqrt(static_cast<double>(t)) *
         normal_quantile(1.0 - gamma / (2.0 * static_cast<double>(p)));
}

/// psi_j^2 = (1/T) sum_t x_jt^2 u_t^2.
inline Vector heteroskedastic_loadings(const DenseMatrix& x, std::span<const double> u) {
  Vector out(x.cols(), 0.0);
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double s = x(t, j) * u[t];
      out[j] += s * s;
    }
  for (double& v : out) v = std::sqrt(v / static_cast<double>(x.rows()));
  return out;
}

/// Long-run standard deviation of the scores x_jt u_t with Bartlett weights
/// 1 - l / (bandwidth + 1); bandwidth 0 is the heteroskedastic case.
inline Vector hac_loadings(const DenseMatrix& x, std::span<const double> u, int bandwidth) {
  const std::size_t t = x.rows();
  const std::size_t p = x.cols();
  Vector out(p, 0.0);
  Vector s(t);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t r = 0; r < t; ++r) s[r] = x(r, j) * u[r];
    double lrv = 0.0;
    for (std::size_t r = 0; r < t; ++r) lrv += s[r] * s[r];
    for (int l = 1; l <= bandwidth && static_cast<std::size_t>(l) < t; ++l) {
      double gl = 0.0;
      for (std::size_t r = static_cast<std::size_t>(l); r < t; ++r) gl += s[r] * s[r - l];
      lrv += 2.0 * (1.0 - static_cast<double>(l) / (bandwidth + 1.0)) * gl;
    }
    out[j] = std::sqrt(std::max(lrv, 0.0) / static_cast<double>(t));
  }
  return out;
}

namespace detail {

// Returns true when any loading needed clamping.
inline bool clamp_loadings(Vector& psi) {
  bool clamped = false;
  for (double& v : psi)
    if (!(v > 1e-8)) {
      v = 1e-8;
      clamped = true;
    }
  return clamped;
}

}  // namespace detail

/// Plug-in LASSO with HAC-robust penalty loadings, iterated from a demeaned-y
/// residual proxy, finished by a post-OLS refit.
inline LassoFit rigorous_lasso(std::span<const double> y, const DenseMatrix& x, const PenaltyConfig& cfg) {
  cfg.validate();
  detail::check_problem(y, x);
  const std::size_t t = x.rows();
  const std::size_t p = x.cols();
  if (t < 10) throw DimensionError("lasso", "rigorous LASSO needs T >= 10");

  const double lambda = rigorous_lambda(t, p, cfg);
  const DenseMatrix g = gram(x);
  const Vector c = cross(x, y);

  Vector u(y.begin(), y.end());
  double ybar = 0.0;
  for (double v : u) ybar += v;
  ybar /= static_cast<double>(t);
  for (double& v : u) v -= ybar;

  Vector psi = hac_loadings(x, u, cfg.hac_bandwidth);
  bool degenerate = detail::clamp_loadings(psi);

  LassoFit fit;
  Vector beta(p, 0.0);
  int sweeps = 0;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_loading_iter; ++iter) {
    Vector pen(p);
    for (std::size_t j = 0; j < p; ++j) pen[j] = lambda * psi[j];
    sweeps += detail::coordinate_descent_gram(g, c, pen, beta, cfg.cd_tol, cfg.cd_max_sweeps);

    fit.beta = beta;
    fit.active = detail::support(beta);
    fit.lambda = lambda;
    fit.loadings = psi;
    fit = post_lasso_ols(std::move(fit), y, x);

    if (iter == cfg.max_loading_iter) break;
    u = detail::residuals(x, y, fit.post_beta);
    Vector next = hac_loadings(x, u, cfg.hac_bandwidth);
    degenerate = detail::clamp_loadings(next) || degenerate;
    double change = 0.0;
    for (std::size_t j = 0; j < p; ++j) change = std::max(change, std::abs(next[j] - psi[j]) / psi[j]);
    psi = std::move(next);
    if (change < cfg.loading_tol) break;
  }
  fit.sweeps = sweeps;
  fit.loading_iterations = std::min(iter, cfg.max_loading_iter);
  fit.degenerate_loading = degenerate;
  return fit;
}

inline double information_criterion(InformationCriterion ic, double rss, std::size_t t, std::size_t k) {
  const double tt = static_cast<double>(t);
  const double kk = static_cast<double>(k);
  const double fit_term = tt * std::log(std::max(rss / tt, 1e-300));
  switch (ic) {
    case InformationCriterion::aic: return fit_term + 2.0 * kk;
    case InformationCriterion::bic: return fit_term + kk * std::log(tt);
    case InformationCriterion::aicc: return fit_term + 2.0 * kk + 2.0 * kk * (kk + 1.0) / (tt - kk - 1.0);
  }
  return fit_term;
}

/// Adaptive weights 1/|b0_j| from univariate or joint OLS; zero first-stage
/// coefficients (and anything larger) clamp to 1e8.
inline Vector adaptive_weights(std::span<const double> y, const DenseMatrix& x, FirstStage first_stage) {
  const std::size_t p = x.cols();
  Vector b0(p, 0.0);
  if (first_stage == FirstStage::univariate) {
    const Vector c = cross(x, y);
    for (std::size_t j = 0; j < p; ++j) {
      double xx = 0.0;
      for (std::size_t t = 0; t < x.rows(); ++t) xx += x(t, j) * x(t, j);
      b0[j] = xx > 0.0 ? c[j] / xx : 0.0;
    }
  } else {
    if (p >= x.rows())
      throw DimensionError("lasso", "multivariate first stage needs p < T");
    b0 = ols(x, y).beta;
  }
  Vector w(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double a = std::abs(b0[j]);
    w[j] = a > 0.0 ? std::min(1.0 / a, 1e8) : 1e8;
  }
  return w;
}

/// Adaptive LASSO over a log-spaced grid from lambda_max down to
/// lambda_max * grid_floor, each grid point refit by OLS and scored by the
/// configured information criterion.
inline LassoFit adaptive_lasso(std::span<const double> y, const DenseMatrix& x, const PenaltyConfig& cfg,
                               FirstStage first_stage) {
  cfg.validate();
  detail::check_problem(y, x);
  const std::size_t t = x.rows();
  const std::size_t p = x.cols();

  const Vector w = adaptive_weights(y, x, first_stage);
  const DenseMatrix g = gram(x);
  const Vector c = cross(x, y);
  const double yy = dot(y, y);

  double lmax = 0.0;
  for (std::size_t j = 0; j < p; ++j) lmax = std::max(lmax, 2.0 * std::abs(c[j]) / w[j]);

  std::vector<IcPoint> table;
  Vector beta(p, 0.0);
  Vector best_beta(p, 0.0);
  double best_lambda = lmax;
  double best_score = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  std::vector<std::size_t> last_active{static_cast<std::size_t>(-1)};
  OlsResult last_refit;
  bool last_ok = false;

  const int n = cfg.grid_size;
  bool saturated = false;
  for (int k = 0; k < n; ++k) {
    const double lambda = lmax * std::pow(cfg.grid_floor, static_cast<double>(k) / (n - 1));
    if (saturated) {
      // Past interpolation every smaller lambda is infeasible; skip the solves.
      IcPoint pt;
      pt.lambda = lambda;
      pt.k = t;
      pt.skipped = true;
      table.push_back(pt);
      continue;
    }
    Vector pen(p);
    for (std::size_t j = 0; j < p; ++j) pen[j] = lambda * w[j];
    sweeps += detail::coordinate_descent_gram(g, c, pen, beta, cfg.cd_tol, cfg.cd_max_sweeps);
    const auto active = detail::support(beta);

    IcPoint pt;
    pt.lambda = lambda;
    pt.k = active.size();
    const bool feasible = pt.k < t && !(cfg.ic == InformationCriterion::aicc && pt.k + 1 >= t);
    if (!feasible) {
      saturated = pt.k >= t;
      pt.skipped = true;
      table.push_back(pt);
      continue;
    }
    if (active != last_active) {
      last_active = active;
      try {
        last_refit = ols_from_gram(g, c, yy, t, active);
        last_ok = true;
      } catch (const SingularityError&) {
        last_ok = false;
      }
    }
    if (!last_ok) {
      pt.skipped = true;
      table.push_back(pt);
      continue;
    }
    pt.rss = last_refit.rss;
    pt.score = information_criterion(cfg.ic, pt.rss, t, pt.k);
    if (pt.score < best_score) {
      best_score = pt.score;
      best_beta = beta;
      best_lambda = lambda;
    }
    table.push_back(pt);
  }

  LassoFit fit;
  fit.beta = best_beta;
  fit.active = detail::support(best_beta);
  fit.lambda = best_lambda;
  fit.loadings = w;
  fit.sweeps = sweeps;
  fit.ic_scores = std::move(table);
  return post_lasso_ols(std::move(fit), y, x);
}

/// Dispatches on cfg.kind.
inline LassoFit fit_lasso(std::span<const double> y, const DenseMatrix& x, const PenaltyConfig& cfg) {
  return cfg.kind == PenaltyKind::rigorous ? rigorous_lasso(y, x, cfg)
                                           : adaptive_lasso(y, x, cfg, cfg.first_stage);
}

}  // namespace d2ml

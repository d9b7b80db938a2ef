#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "d2ml/error.hpp"
#include "d2ml/matrix.hpp"

namespace d2ml {

/// Working tolerances shared by every kernel.
namespace tol {
inline constexpr double singular_pivot = 1e-12;   // relative to the pivot's original diagonal
inline constexpr double reconstruction = 1e-8;
inline constexpr double symmetry = 1e-10;
inline constexpr double exact_fit_sigma2 = 1e-12;
inline constexpr double dense_nonzero = 1e-10;
inline constexpr double pca_residual = 1e-9;
inline constexpr int pca_max_iter = 10000;
}  // namespace tol

enum class NormKind { l1, l2, linf };

inline std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::l1: return "l1";
    case NormKind::l2: return "l2";
    case NormKind::linf: return "linf";
  }
  return "l2";
}

inline NormKind parse_norm_kind(const std::string& s) {
  if (s == "l1") return NormKind::l1;
  if (s == "l2") return NormKind::l2;
  if (s == "linf") return NormKind::linf;
  throw ConfigError("numerics", "unknown norm '" + s + "' (expected l1, l2 or linf)");
}

/// Lower-triangular L with LL' = S.
inline DenseMatrix cholesky(const DenseMatrix& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw DimensionError("numerics", "cholesky needs a square matrix");
  const double scale = std::max(max_abs(s), 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(s(i, j) - s(j, i)) > tol::symmetry * scale)
        throw DataError("numerics", "cholesky input is not symmetric at (" + std::to_string(i) +
                                        "," + std::to_string(j) + ")");

  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol::singular_pivot * std::abs(s(j, j)))) {
      throw NotPositiveDefiniteError(
          "numerics",
          "matrix is not positive definite: leading minor " + std::to_string(j + 1) +
              " has pivot " + std::to_string(d),
          j + 1);
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / ljj;
    }
  }
  return l;
}

/// Solves LL'x = b given the Cholesky factor.
inline Vector cholesky_solve(const DenseMatrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  Vector x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * x[k];
    x[i] = v / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = x[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * x[k];
    x[i] = v / l(i, i);
  }
  return x;
}

struct OlsResult {
  Vector beta;
  double sigma2 = 0.0;
  double rss = 0.0;
};

namespace detail {

inline DenseMatrix factor_normal_equations(const DenseMatrix& g) {
  try {
    return cholesky(g);
  } catch (const NotPositiveDefiniteError& e) {
    throw SingularityError("numerics",
                           "X'X is singular to working precision at pivot " +
                               std::to_string(e.pivot()),
                           e.pivot());
  }
}

}  // namespace detail

/// Least squares for y on the columns of x (no intercept); sigma2 = RSS / (T - k).
inline OlsResult ols(const DenseMatrix& x, std::span<const double> y) {
  const std::size_t t = x.rows();
  const std::size_t k = x.cols();
  if (y.size() != t) throw DimensionError("numerics", "ols: y length differs from rows of X");
  if (t <= k)
    throw DimensionError("numerics", "ols needs T > k (T=" + std::to_string(t) +
                                         ", k=" + std::to_string(k) + ")");
  OlsResult out;
  out.beta.assign(k, 0.0);
  if (k > 0) {
    const DenseMatrix l = detail::factor_normal_equations(gram(x));
    out.beta = cholesky_solve(l, cross(x, y));
  }
  double rss = 0.0;
  for (std::size_t r = 0; r < t; ++r) {
    const double e = y[r] - dot(x.row(r), out.beta);
    rss += e * e;
  }
  out.rss = rss;
  out.sigma2 = rss / static_cast<double>(t - k);
  return out;
}

/// OLS from sufficient statistics restricted to the columns in `idx`.
/// RSS is computed as y'y - 2c'b + b'Gb and clamped at zero.
inline OlsResult ols_from_gram(const DenseMatrix& g, std::span<const double> c, double yy,
                               std::size_t t, std::span<const std::size_t> idx) {
  const std::size_t k = idx.size();
  if (t <= k) throw DimensionError("numerics", "ols needs T > k");
  OlsResult out;
  if (k == 0) {
    out.rss = yy;
    out.sigma2 = yy / static_cast<double>(t);
    return out;
  }
  DenseMatrix sub(k, k);
  Vector cs(k);
  for (std::size_t a = 0; a < k; ++a) {
    cs[a] = c[idx[a]];
    for (std::size_t b = 0; b < k; ++b) sub(a, b) = g(idx[a], idx[b]);
  }
  out.beta = cholesky_solve(detail::factor_normal_equations(sub), cs);
  double quad = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < k; ++b) s += sub(a, b) * out.beta[b];
    quad += out.beta[a] * s;
  }
  out.rss = std::max(0.0, yy - 2.0 * dot(cs, out.beta) + quad);
  out.sigma2 = out.rss / static_cast<double>(t - k);
  return out;
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
inline DenseMatrix invert_spd(const DenseMatrix& s) {
  const std::size_t n = s.rows();
  DenseMatrix l;
  try {
    l = cholesky(s);
  } catch (const NotPositiveDefiniteError& e) {
    throw SingularityError("numerics",
                           std::string("cannot invert: ") + e.what(), e.pivot());
  }
  DenseMatrix inv(n, n);
  Vector unit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    unit[j] = 1.0;
    const Vector colj = cholesky_solve(l, unit);
    unit[j] = 0.0;
    inv.set_col(j, colj);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = avg;
      inv(j, i) = avg;
    }
  return inv;
}

/// Sample covariance of the columns (divisor T - 1).
inline DenseMatrix sample_covariance(const DenseMatrix& data) {
  const std::size_t t = data.rows();
  const std::size_t m = data.cols();
  if (t < 2) throw DimensionError("numerics", "sample covariance needs T >= 2");
  Vector mean(m, 0.0);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < m; ++j) mean[j] += data(r, j);
  for (double& v : mean) v /= static_cast<double>(t);
  DenseMatrix centered(t, m);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t j = 0; j < m; ++j) centered(r, j) = data(r, j) - mean[j];
  DenseMatrix cov = gram(centered);
  for (double& v : cov.values()) v /= static_cast<double>(t - 1);
  return cov;
}

/// Column norms; with include_diagonal=false the diagonal entry counts as zero.
inline Vector column_norms(const DenseMatrix& m, bool include_diagonal,
                           NormKind kind = NormKind::l2) {
  if (m.rows() != m.cols()) throw DimensionError("numerics", "column_norms needs a square matrix");
  const std::size_t n = m.cols();
  Vector out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j && !include_diagonal) continue;
      const double a = std::abs(m(i, j));
      switch (kind) {
        case NormKind::l1: acc += a; break;
        case NormKind::l2: acc += a * a; break;
        case NormKind::linf: acc = std::max(acc, a); break;
      }
    }
    out[j] = kind == NormKind::l2 ? std::sqrt(acc) : acc;
  }
  return out;
}

/// Row norms. Only meaningful for symmetric concentration matrices.
inline Vector row_norms(const DenseMatrix& m, bool include_diagonal,
                        NormKind kind = NormKind::l2) {
  return column_norms(m.transpose(), include_diagonal, kind);
}

struct PrincipalComponents {
  DenseMatrix scores;    // T x k, unit sample variance
  DenseMatrix loadings;  // M x k, unit-length eigenvectors of the correlation matrix
  Vector eigenvalues;    // k leading eigenvalues
  double total_variance = 0.0;

  double explained_share(std::size_t c) const { return eigenvalues[c] / total_variance; }
};

/// Leading k principal components by power iteration with deflation on the
/// correlation matrix of `data` (T x M). Component c starts from e_c plus a
/// small uniform tilt so that structured correlation matrices never leave the
/// start orthogonal to the leading eigenvector; tied eigenvalues resolve to
/// whatever direction that start converges to.
inline PrincipalComponents principal_components(const DenseMatrix& data, std::size_t k) {
  const std::size_t t = data.rows();
  const std::size_t m = data.cols();
  if (k < 1 || k >= std::min(t, m))
    throw DimensionError("numerics", "principal_components needs 1 <= k < min(T, M)");

  DenseMatrix z(t, m);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += data(r, j);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) var += (data(r, j) - mean) * (data(r, j) - mean);
    var /= static_cast<double>(t - 1);
    if (!(var > 0.0)) throw DegenerateSeriesError("numerics", "zero-variance column in PCA input");
    const double sd = std::sqrt(var);
    for (std::size_t r = 0; r < t; ++r) z(r, j) = (data(r, j) - mean) / sd;
  }
  DenseMatrix corr = gram(z);
  for (double& v : corr.values()) v /= static_cast<double>(t - 1);

  PrincipalComponents out;
  out.scores = DenseMatrix(t, k);
  out.loadings = DenseMatrix(m, k);
  out.eigenvalues.assign(k, 0.0);
  for (std::size_t j = 0; j < m; ++j) out.total_variance += corr(j, j);

  DenseMatrix work = corr;
  const double tilt = 0.01 / std::sqrt(static_cast<double>(m));
  for (std::size_t c = 0; c < k; ++c) {
    Vector v(m, tilt);
    v[c] += 1.0;
    double nv = std::sqrt(dot(v, v));
    for (double& x : v) x /= nv;

    double lambda = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    int iter = 0;
    for (; iter < tol::pca_max_iter; ++iter) {
      Vector w = work * std::span<const double>(v);
      lambda = dot(v, w);
      residual = 0.0;
      for (std::size_t i = 0; i < m; ++i) residual += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
      residual = std::sqrt(residual);
      if (residual < tol::pca_residual) break;
      const double nw = std::sqrt(dot(w, w));
      if (nw == 0.0) {
        residual = 0.0;
        break;
      }
      for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nw;
    }
    if (!(residual < tol::pca_residual))
      throw ConvergenceError("numerics",
                             "power iteration did not converge for component " +
                                 std::to_string(c + 1) + " (residual " +
                                 std::to_string(residual) + ")",
                             residual);

    for (double x : v) {
      if (std::abs(x) > 1e-12) {
        if (x < 0.0)
          for (double& y : v) y = -y;
        break;
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) work(i, j) -= lambda * v[i] * v[j];

    out.eigenvalues[c] = lambda;
    out.loadings.set_col(c, v);
    Vector score = z * std::span<const double>(v);
    double mean = 0.0;
    for (double s : score) mean += s;
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (double s : score) var += (s - mean) * (s - mean);
    var /= static_cast<double>(t - 1);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (double& s : score) s = (s - mean) / sd;
    out.scores.set_col(c, score);
  }
  return out;
}

}  // namespace d2ml

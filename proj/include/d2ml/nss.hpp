#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2ml/error.hpp"
#include "d2ml/io.hpp"
#include "d2ml/lasso.hpp"
#include "d2ml/matrix.hpp"
#include "d2ml/numerics.hpp"
#include "d2ml/panel.hpp"
#include "d2ml/parallel.hpp"

namespace d2ml {

/// Square boolean matrix; pattern[i][j] marks a link that row i's regression
/// places on series j (the concentration-matrix orientation).
using Pattern = std::vector<std::vector<bool>>;

inline Pattern empty_pattern(std::size_t n) { return Pattern(n, std::vector<bool>(n, false)); }

/// Post-LASSO coefficients, one regression per row, zero diagonal.
struct BetaMatrix {
  std::vector<SeriesId> ids;
  DenseMatrix values;
  Vector row_sigma2;
  std::vector<std::size_t> row_active_counts;
  std::vector<bool> target_rows;
  std::vector<char> capped_rows;  // active set truncated to floor(T/2) before refit

  std::size_t size() const noexcept { return ids.size(); }
  bool exact_fit(std::size_t i) const { return row_sigma2[i] <= tol::exact_fit_sigma2; }
};

struct ConcentrationMatrix {
  std::vector<SeriesId> ids;
  DenseMatrix kappa;
  BetaMatrix beta;
  Vector diag_share;                    // |k_jj| / sum_i |k_ij|
  std::vector<std::size_t> connections; // off-diagonal nonzeros per column
  double nonzero_threshold = 0.0;       // |k_ij| > threshold counts as a link

  std::size_t size() const noexcept { return ids.size(); }
  bool linked(std::size_t i, std::size_t j) const {
    return i != j && std::abs(kappa(i, j)) > nonzero_threshold;
  }
};

inline Pattern link_pattern(const ConcentrationMatrix& k) {
  Pattern out = empty_pattern(k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) out[i][j] = k.linked(i, j);
  return out;
}

namespace detail {

inline Error annotate(const Error& e, const SeriesId& id) {
  return Error(e.kind(), "nss_network", "regression for '" + id.label() + "': " + e.what());
}

inline DenseMatrix drop_column(const DenseMatrix& data, std::size_t skip) {
  DenseMatrix x(data.rows(), data.cols() - 1);
  for (std::size_t t = 0; t < data.rows(); ++t) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < data.cols(); ++j)
      if (j != skip) x(t, c++) = data(t, j);
  }
  return x;
}

/// Keeps the `cap` largest-|beta| entries of the active set (ties by index).
inline bool cap_active_set(LassoFit& fit, std::size_t cap) {
  if (fit.active.size() <= cap) return false;
  std::vector<std::size_t> order = fit.active;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(fit.beta[a]) > std::abs(fit.beta[b]);
  });
  order.resize(cap);
  std::sort(order.begin(), order.end());
  for (std::size_t j = 0; j < fit.beta.size(); ++j)
    if (!std::binary_search(order.begin(), order.end(), j)) fit.beta[j] = 0.0;
  fit.active = std::move(order);
  return true;
}

inline BetaMatrix blank_beta(const Panel& p) {
  const std::size_t m = p.series();
  BetaMatrix b;
  b.ids = p.ids();
  b.values = DenseMatrix(m, m);
  b.row_sigma2.assign(m, 0.0);
  b.row_active_counts.assign(m, 0);
  b.target_rows.assign(m, false);
  b.capped_rows.assign(m, false);
  return b;
}

inline double null_model_sigma2(const Panel& p, std::size_t i) {
  const Vector y = p.column(i);
  return dot(y, y) / static_cast<double>(p.periods());
}

}  // namespace detail

/// One penalized regression per target series on all other series, refit by
/// post-LASSO OLS. Rows outside `targets` are zero with the null-model variance.
inline BetaMatrix nodewise_select(const Panel& p, const PenaltyConfig& cfg,
                                  const std::optional<std::vector<std::size_t>>& targets = std::nullopt,
                                  unsigned workers = 1) {
  cfg.validate();
  const std::size_t m = p.series();
  const std::size_t t = p.periods();
  if (m < 2) throw DimensionError("nss_network", "node-wise selection needs at least two series");
  BetaMatrix b = detail::blank_beta(p);
  if (targets) {
    for (std::size_t i : *targets) {
      if (i >= m) throw DimensionError("nss_network", "target index out of range");
      b.target_rows[i] = true;
    }
  } else {
    std::fill(b.target_rows.begin(), b.target_rows.end(), true);
  }

  parallel_for(m, workers, [&](std::size_t i) {
    if (!b.target_rows[i]) {
      b.row_sigma2[i] = detail::null_model_sigma2(p, i);
      return;
    }
    try {
      const DenseMatrix x = detail::drop_column(p.data(), i);
      const Vector y = p.column(i);
      LassoFit fit = fit_lasso(y, x, cfg);
      if (detail::cap_active_set(fit, t / 2)) {
        fit = post_lasso_ols(std::move(fit), y, x);
        b.capped_rows[i] = true;
      }
      std::size_t c = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) continue;
        b.values(i, j) = fit.post_beta[c++];
      }
      b.row_sigma2[i] = fit.sigma2;
      b.row_active_counts[i] = fit.active.size();
    } catch (const Error& e) {
      throw detail::annotate(e, p.ids()[i]);
    }
  });
  return b;
}

/// OLS of each row on exactly the series marked in pattern[i] (oracle refit).
inline BetaMatrix refit_on_pattern(const Panel& p, const Pattern& pattern) {
  const std::size_t m = p.series();
  if (pattern.size() != m) throw DimensionError("nss_network", "pattern size differs from panel");
  BetaMatrix b = detail::blank_beta(p);
  for (std::size_t i = 0; i < m; ++i) {
    b.target_rows[i] = true;
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i && pattern[i][j]) cols.push_back(j);
    const Vector y = p.column(i);
    if (cols.empty()) {
      b.row_sigma2[i] = dot(y, y) / static_cast<double>(p.periods());
      continue;
    }
    try {
      const OlsResult r = ols(detail::columns_of(p.data(), cols), y);
      for (std::size_t a = 0; a < cols.size(); ++a) b.values(i, cols[a]) = r.beta[a];
      b.row_sigma2[i] = r.sigma2;
      b.row_active_counts[i] = cols.size();
    } catch (const Error& e) {
      throw detail::annotate(e, p.ids()[i]);
    }
  }
  return b;
}

namespace detail {

inline void fill_column_stats(ConcentrationMatrix& k) {
  const std::size_t m = k.size();
  k.diag_share.assign(m, 0.0);
  k.connections.assign(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      abs_sum += std::abs(k.kappa(i, j));
      if (k.linked(i, j)) ++k.connections[j];
    }
    k.diag_share[j] = abs_sum > 0.0 ? std::abs(k.kappa(j, j)) / abs_sum : 0.0;
  }
}

}  // namespace detail

/// kappa = diag(1 / sigma_i^2) (I - beta).
inline ConcentrationMatrix build_concentration(const BetaMatrix& b) {
  const std::size_t m = b.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (b.exact_fit(i))
      throw ExactFitError("nss_network", "row '" + b.ids[i].label() +
                                             "' is an exact fit (sigma2 = " +
                                             io::format_double(b.row_sigma2[i]) + ")");
  }
  ConcentrationMatrix k;
  k.ids = b.ids;
  k.beta = b;
  k.kappa = DenseMatrix(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const double d = 1.0 / b.row_sigma2[i];
    for (std::size_t j = 0; j < m; ++j) k.kappa(i, j) = d * ((i == j ? 1.0 : 0.0) - b.values(i, j));
  }
  detail::fill_column_stats(k);
  return k;
}

/// Keeps the coefficients of the first n_targets rows; every lower row becomes
/// the identity scaled by its null-model precision. Works for any layout with
/// the targets first, including unbalanced panels.
inline ConcentrationMatrix build_target_concentration(const BetaMatrix& b, std::size_t n_targets) {
  const std::size_t m = b.size();
  if (n_targets == 0 || n_targets > m)
    throw DimensionError("nss_network", "target block of " + std::to_string(n_targets) +
                                            " rows does not fit m=" + std::to_string(m));
  for (std::size_t i = n_targets; i < m; ++i)
    if (b.target_rows[i])
      throw DimensionError("nss_network", "row '" + b.ids[i].label() +
                                              "' lies below the target block but was fitted as a target");
  BetaMatrix c = b;
  for (std::size_t i = n_targets; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) c.values(i, j) = 0.0;
    c.row_active_counts[i] = 0;
  }
  return build_concentration(c);
}

/// Block-constrained variant for a balanced panel: n_units targets, k_vars
/// variables per unit and n_global trailing series.
inline ConcentrationMatrix build_constrained_concentration(const BetaMatrix& b, std::size_t n_units,
                                                           std::size_t k_vars, std::size_t n_global = 0) {
  const std::size_t m = b.size();
  if (n_units == 0 || k_vars == 0 || n_units * k_vars + n_global != m)
    throw DimensionError("nss_network",
                         "block structure " + std::to_string(n_units) + "x" + std::to_string(k_vars) +
                             " + " + std::to_string(n_global) + " globals does not match m=" +
                             std::to_string(m));
  return build_target_concentration(b, n_units);
}

/// Inverse sample covariance; requires M < T.
inline ConcentrationMatrix sample_concentration(const Panel& p) {
  const std::size_t m = p.series();
  if (m >= p.periods())
    throw SingularityError("nss_network",
                           "sample covariance is singular: N<T required for BM baseline (N=" +
                               std::to_string(m) + ", T=" + std::to_string(p.periods()) + ")",
                           p.periods());
  DenseMatrix inv;
  try {
    inv = invert_spd(sample_covariance(p));
  } catch (const SingularityError& e) {
    throw SingularityError("nss_network",
                           std::string("N<T required for BM baseline: ") + e.what(), e.pivot());
  }
  ConcentrationMatrix k;
  k.ids = p.ids();
  k.kappa = inv;
  k.nonzero_threshold = tol::dense_nonzero;
  // Provenance in node-wise form: beta_ij = -k_ij / k_ii, sigma_i^2 = 1 / k_ii.
  k.beta = detail::blank_beta(p);
  for (std::size_t i = 0; i < m; ++i) {
    k.beta.row_sigma2[i] = 1.0 / inv(i, i);
    k.beta.target_rows[i] = true;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) k.beta.values(i, j) = -inv(i, j) / inv(i, i);
    k.beta.row_active_counts[i] = m - 1;
  }
  detail::fill_column_stats(k);
  return k;
}

/// Dense CSV: header "series,<ids...>", one row per matrix row.
inline std::string matrix_to_csv(const DenseMatrix& mat, const std::vector<SeriesId>& ids) {
  std::string out = "series";
  for (const auto& id : ids) out += "," + id.label();
  out += "\n";
  for (std::size_t i = 0; i < mat.rows(); ++i) {
    out += ids[i].label();
    for (std::size_t j = 0; j < mat.cols(); ++j) out += "," + io::format_double(mat(i, j));
    out += "\n";
  }
  return out;
}

/// Sparse triplets; entry (i, j) is the link from series j to series i.
inline nlohmann::json matrix_to_triplets(const DenseMatrix& mat, const std::vector<SeriesId>& ids,
                                         double threshold, bool include_diagonal) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < mat.rows(); ++i)
    for (std::size_t j = 0; j < mat.cols(); ++j) {
      if (i == j && !include_diagonal) continue;
      if (std::abs(mat(i, j)) <= threshold) continue;
      arr.push_back({{"from", ids[j].label()}, {"to", ids[i].label()}, {"value", mat(i, j)}});
    }
  return arr;
}

inline std::string to_csv(const ConcentrationMatrix& k) { return matrix_to_csv(k.kappa, k.ids); }
inline std::string to_csv(const BetaMatrix& b) { return matrix_to_csv(b.values, b.ids); }

inline nlohmann::json to_json(const ConcentrationMatrix& k) {
  return {{"kind", "concentration"},
          {"size", k.size()},
          {"entries", matrix_to_triplets(k.kappa, k.ids, k.nonzero_threshold, true)}};
}

inline nlohmann::json to_json(const BetaMatrix& b) {
  return {{"kind", "beta"}, {"size", b.size()}, {"entries", matrix_to_triplets(b.values, b.ids, 0.0, false)}};
}

}  // namespace d2ml

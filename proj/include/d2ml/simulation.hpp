#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2ml/dds.hpp"
#include "d2ml/error.hpp"
#include "d2ml/io.hpp"
#include "d2ml/lasso.hpp"
#include "d2ml/matrix.hpp"
#include "d2ml/numerics.hpp"
#include "d2ml/nss.hpp"
#include "d2ml/panel.hpp"
#include "d2ml/parallel.hpp"
#include "d2ml/rng.hpp"

namespace d2ml {

/// A parameter that is either fixed or drawn from U(a, b).
struct Draw {
  bool random = false;
  double a = 0.0;
  double b = 0.0;

  static Draw fixed(double v) { return {false, v, v}; }
  static Draw uniform(double lo, double hi) { return {true, lo, hi}; }

  double sample(Rng& rng) const { return random ? rng.uniform(a, b) : a; }
  std::string describe() const {
    return random ? "U(" + io::format_double(a) + "," + io::format_double(b) + ")" : io::format_double(a);
  }
};

/// N_d as a fixed count or as ceil(share * N).
struct DominantCount {
  bool proportional = false;
  std::size_t count = 5;
  double share = 0.1;

  static DominantCount fixed(std::size_t n) { return {false, n, 0.0}; }
  static DominantCount of_share(double h) { return {true, 0, h}; }

  std::size_t resolve(std::size_t n) const {
    if (!proportional) return count;
    return static_cast<std::size_t>(std::ceil(share * static_cast<double>(n) - 1e-9));
  }
  std::string describe() const { return proportional ? io::format_double(share) + "N" : std::to_string(count); }
};

enum class PanelScaling { standardize, demean, none };

inline std::string to_string(PanelScaling s) {
  switch (s) {
    case PanelScaling::standardize: return "standardize";
    case PanelScaling::demean: return "demean";
    case PanelScaling::none: return "none";
  }
  return "";
}

inline PanelScaling parse_panel_scaling(const std::string& s) {
  if (s == "standardize") return PanelScaling::standardize;
  if (s == "demean") return PanelScaling::demean;
  if (s == "none") return PanelScaling::none;
  throw ConfigError("mc_simulation", "unknown panel scaling '" + s + "' (expected standardize, demean or none)");
}

struct SimSpec {
  int id = 1;
  std::size_t n = 50;
  std::size_t t = 100;
  DominantCount n_dominant = DominantCount::fixed(5);
  double alpha = 1.0;
  Draw rho_d = Draw::fixed(0.0);
  double rho_nd = 0.0;
  Draw rho_i = Draw::fixed(0.0);
  std::size_t n_factors = 0;
  std::uint64_t seed = 1;
  bool gaussian_centering_literal = true;
  std::size_t burn_in = 50;
  PanelScaling scaling = PanelScaling::demean;

  std::size_t nd() const { return n_dominant.resolve(n); }

  void validate() const {
    const std::size_t d = nd();
    if (d < 1 || d >= n) throw ConfigError("mc_simulation", "need 1 <= N_d < N");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("mc_simulation", "alpha must lie in (0, 1]");
    if (!(rho_nd >= 0.0 && rho_nd < 1.0)) throw ConfigError("mc_simulation", "rho_nd must lie in [0, 1)");
    if (t < 3) throw ConfigError("mc_simulation", "T must be >= 3");
  }

  /// Rows (1)-(5) of the specification table. `share` sets N_d = ceil(share N) for row 5.
  static SimSpec preset(int spec, std::size_t n, std::size_t t, std::size_t factors, std::uint64_t seed,
                        double share = 0.1) {
    SimSpec s;
    s.id = spec;
    s.n = n;
    s.t = t;
    s.n_factors = factors;
    s.seed = seed;
    switch (spec) {
      case 1: break;
      case 2: s.alpha = 0.5; break;
      case 3: s.rho_i = Draw::uniform(0.2, 0.5); break;
      case 4:
        s.rho_d = Draw::uniform(0.2, 0.5);
        s.rho_nd = 0.5;
        break;
      case 5: s.n_dominant = DominantCount::of_share(share); break;
      default: throw ConfigError("mc_simulation", "unknown specification " + std::to_string(spec));
    }
    return s;
  }
};

inline nlohmann::json to_json(const SimSpec& s) {
  return {{"spec", s.id},
          {"n", s.n},
          {"t", s.t},
          {"n_dominant", s.n_dominant.describe()},
          {"n_dominant_resolved", s.nd()},
          {"alpha", s.alpha},
          {"rho_d", s.rho_d.describe()},
          {"rho_nd", s.rho_nd},
          {"rho_i", s.rho_i.describe()},
          {"n_factors", s.n_factors},
          {"seed", s.seed},
          {"gaussian_centering_literal", s.gaussian_centering_literal},
          {"burn_in", s.burn_in},
          {"scaling", to_string(s.scaling)}};
}

/// Number of non-dominant units a dominant driver reaches: floor((N - N_d)^alpha).
inline std::size_t affected_count(std::size_t n, std::size_t nd, double alpha) {
  return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n - nd), alpha) + 1e-9));
}

/// N_d x N_nd loadings of non-dominant units on the dominant drivers. Draws
/// U(0,1) dominant-major for the first floor((N-N_d)^alpha) non-dominant units.
inline DenseMatrix generate_beta(const SimSpec& spec, Rng& rng) {
  const std::size_t nd = spec.nd();
  const std::size_t nnd = spec.n - nd;
  const std::size_t hit = affected_count(spec.n, nd, spec.alpha);
  DenseMatrix beta(nd, nnd);
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t i = 0; i < hit; ++i) beta(d, i) = rng.uniform();
  return beta;
}

struct FactorDraw {
  DenseMatrix factors;  // T x m_k
  double rho_g = 0.0;
};

inline DenseMatrix equicorrelation(std::size_t n, double rho) {
  DenseMatrix r(n, n, rho);
  for (std::size_t i = 0; i < n; ++i) r(i, i) = 1.0;
  return r;
}

inline DenseMatrix toeplitz_power(std::size_t n, double rho) {
  DenseMatrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      r(i, j) = std::pow(rho, static_cast<double>(i > j ? i - j : j - i));
  return r;
}

/// g_t = R_g^{1/2} (chi2(2) draws - 2) / 2 with R_g equicorrelated in rho_g ~ U(0.2, 0.8).
inline FactorDraw generate_factors(std::size_t t, std::size_t m_k, Rng& rng) {
  FactorDraw out;
  out.factors = DenseMatrix(t, m_k);
  if (m_k == 0) return out;
  out.rho_g = rng.uniform(0.2, 0.8);
  const DenseMatrix l = cholesky(equicorrelation(m_k, out.rho_g));
  Vector z(m_k);
  for (std::size_t r = 0; r < t; ++r) {
    for (auto& v : z) v = (rng.chi2_2() - 2.0) / 2.0;
    for (std::size_t i = 0; i < m_k; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
      out.factors(r, i) = s;
    }
  }
  return out;
}

struct NoiseDraw {
  DenseMatrix u_d;   // T x N_d
  DenseMatrix u_nd;  // T x N_nd
  Vector rho_i;      // per unit, dominant units first
  double rho_d = 0.0;
  Vector sigma;      // non-dominant innovation variances
};

namespace detail {

inline DenseMatrix sqrt_factor(const DenseMatrix& r, const std::string& what) {
  try {
    return cholesky(r);
  } catch (const NotPositiveDefiniteError& e) {
    throw NotPositiveDefiniteError("mc_simulation", what + ": " + e.what(), e.leading_minor());
  }
}

inline void lower_apply(const DenseMatrix& l, const Vector& z, Vector& out) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z[k];
    out[i] = s;
  }
}

}  // namespace detail

/// Dominant: u_t = (1 - rho_i) R_d^{1/2} (u*_t - 2) / 2 + rho_i u_{t-1}, u* ~ N(0,1)
/// (centering dropped when gaussian_centering_literal is false).
/// Non-dominant: u_t = rho_i u_{t-1} + sqrt(1 - rho_i^2) Sigma^{1/2} R_nd^{1/2} xi_t.
/// Draw order: rho_i (N values when random), rho_d, sigma_ii, then per period
/// N_d dominant normals followed by N_nd non-dominant normals. Recursions start
/// at zero and discard `burn_in` periods.
inline NoiseDraw generate_noise(const SimSpec& spec, Rng& rng) {
  const std::size_t nd = spec.nd();
  const std::size_t nnd = spec.n - nd;
  NoiseDraw out;
  out.rho_i.resize(spec.n);
  for (auto& r : out.rho_i) r = spec.rho_i.sample(rng);
  out.rho_d = spec.rho_d.sample(rng);
  out.sigma.resize(nnd);
  for (auto& s : out.sigma) s = rng.chi2_2() / 4.0 + 0.5;

  const DenseMatrix ld = detail::sqrt_factor(equicorrelation(nd, out.rho_d),
                                             "R_d with rho_d=" + io::format_double(out.rho_d));
  const bool toeplitz = spec.rho_nd != 0.0;
  const DenseMatrix lnd = toeplitz ? detail::sqrt_factor(toeplitz_power(nnd, spec.rho_nd),
                                                         "R_nd with rho_nd=" + io::format_double(spec.rho_nd))
                                   : DenseMatrix();

  out.u_d = DenseMatrix(spec.t, nd);
  out.u_nd = DenseMatrix(spec.t, nnd);
  Vector prev_d(nd, 0.0), prev_nd(nnd, 0.0), z(std::max(nd, nnd)), zd(nd), znd(nnd), mixd(nd), mixnd(nnd);
  const std::size_t total = spec.burn_in + spec.t;
  for (std::size_t step = 0; step < total; ++step) {
    for (std::size_t d = 0; d < nd; ++d) {
      const double draw = rng.normal();
      zd[d] = spec.gaussian_centering_literal ? (draw - 2.0) / 2.0 : draw;
    }
    for (auto& v : znd) v = rng.normal();
    detail::lower_apply(ld, zd, mixd);
    if (toeplitz) detail::lower_apply(lnd, znd, mixnd);
    else mixnd = znd;
    for (std::size_t d = 0; d < nd; ++d) {
      const double r = out.rho_i[d];
      prev_d[d] = (1.0 - r) * mixd[d] + r * prev_d[d];
    }
    for (std::size_t i = 0; i < nnd; ++i) {
      const double r = out.rho_i[nd + i];
      prev_nd[i] = r * prev_nd[i] + std::sqrt(1.0 - r * r) * std::sqrt(out.sigma[i]) * mixnd[i];
    }
    if (step >= spec.burn_in) {
      const std::size_t row = step - spec.burn_in;
      for (std::size_t d = 0; d < nd; ++d) out.u_d(row, d) = prev_d[d];
      for (std::size_t i = 0; i < nnd; ++i) out.u_nd(row, i) = prev_nd[i];
    }
  }
  return out;
}

struct GeneratedPanel {
  Panel panel;                            // scaled per spec.scaling
  std::vector<std::size_t> true_dominant; // columns 0 .. N_d - 1
  Pattern true_pattern;
  DenseMatrix factors;
  DenseMatrix loadings;                   // N x m_k
  DenseMatrix beta;                       // N_d x N_nd
  Vector mu;
  NoiseDraw noise;
  double rho_g = 0.0;
  std::size_t affected = 0;
};

/// Truth in concentration orientation: every dominant row links to the other
/// dominant drivers, each affected non-dominant row links to the drivers that load on it.
inline Pattern true_link_pattern(const DenseMatrix& beta) {
  const std::size_t nd = beta.rows();
  const std::size_t n = nd + beta.cols();
  Pattern p = empty_pattern(n);
  for (std::size_t a = 0; a < nd; ++a)
    for (std::size_t b = 0; b < nd; ++b) p[a][b] = a != b;
  for (std::size_t i = 0; i < beta.cols(); ++i)
    for (std::size_t d = 0; d < nd; ++d) p[nd + i][d] = beta(d, i) != 0.0;
  return p;
}

/// Draw order: mu_d, mu_nd, gamma (unit-major), rho_g and factors, beta, noise.
inline GeneratedPanel generate_dataset(const SimSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n;
  const std::size_t nd = spec.nd();
  const std::size_t nnd = n - nd;
  const std::size_t mk = spec.n_factors;

  GeneratedPanel g;
  g.mu.resize(n);
  for (auto& v : g.mu) v = rng.uniform();
  g.loadings = DenseMatrix(n, mk);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < mk; ++k) g.loadings(i, k) = rng.uniform();
  FactorDraw f = generate_factors(spec.t, mk, rng);
  g.factors = std::move(f.factors);
  g.rho_g = f.rho_g;
  g.beta = generate_beta(spec, rng);
  g.affected = affected_count(n, nd, spec.alpha);
  g.noise = generate_noise(spec, rng);

  DenseMatrix y(spec.t, n);
  for (std::size_t t = 0; t < spec.t; ++t) {
    for (std::size_t d = 0; d < nd; ++d) {
      double v = g.mu[d] + g.noise.u_d(t, d);
      for (std::size_t k = 0; k < mk; ++k) v += g.loadings(d, k) * g.factors(t, k);
      y(t, d) = v;
    }
    for (std::size_t i = 0; i < nnd; ++i) {
      const std::size_t col = nd + i;
      double v = g.mu[col] + g.noise.u_nd(t, i);
      for (std::size_t d = 0; d < nd; ++d) v += g.beta(d, i) * y(t, d);
      for (std::size_t k = 0; k < mk; ++k) v += g.loadings(col, k) * g.factors(t, k);
      y(t, col) = v;
    }
  }
  std::vector<SeriesId> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "u%03u", static_cast<unsigned>(i + 1));
    ids.push_back({buf, "y"});
  }
  Panel raw(std::move(y), std::move(ids));
  switch (spec.scaling) {
    case PanelScaling::standardize: g.panel = standardize(raw); break;
    case PanelScaling::demean: g.panel = demean(raw); break;
    case PanelScaling::none: g.panel = std::move(raw); break;
  }
  for (std::size_t d = 0; d < nd; ++d) g.true_dominant.push_back(d);
  g.true_pattern = true_link_pattern(g.beta);
  return g;
}

struct SelectionMetrics {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> fdr;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t positives = 0;  // |true|
  std::size_t negatives = 0;  // |true^c|
};

namespace detail {

inline SelectionMetrics rates(std::size_t tp, std::size_t fp, std::size_t pos, std::size_t neg) {
  SelectionMetrics m;
  m.true_positives = tp;
  m.false_positives = fp;
  m.positives = pos;
  m.negatives = neg;
  if (pos > 0) {
    m.tpr = 100.0 * static_cast<double>(tp) / static_cast<double>(pos);
    m.fdr = 100.0 * static_cast<double>(fp) / static_cast<double>(pos);
  }
  if (neg > 0) m.fpr = 100.0 * static_cast<double>(fp) / static_cast<double>(neg);
  return m;
}

}  // namespace detail

/// TPR / FPR / FDR over off-diagonal entries; FDR divides by the number of true links.
inline SelectionMetrics metrics(const Pattern& estimated, const Pattern& truth) {
  const std::size_t n = truth.size();
  if (estimated.size() != n) throw DimensionError("mc_simulation", "pattern shapes differ");
  std::size_t tp = 0, fp = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (estimated[i].size() != n || truth[i].size() != n)
      throw DimensionError("mc_simulation", "patterns must be square");
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (truth[i][j]) {
        ++pos;
        if (estimated[i][j]) ++tp;
      } else {
        ++neg;
        if (estimated[i][j]) ++fp;
      }
    }
  }
  return detail::rates(tp, fp, pos, neg);
}

/// Same rates on 0/1 unit indicators (dominant-driver scoring).
inline SelectionMetrics indicator_metrics(const std::vector<bool>& estimated, const std::vector<bool>& truth) {
  if (estimated.size() != truth.size()) throw DimensionError("mc_simulation", "indicator lengths differ");
  std::size_t tp = 0, fp = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) {
      ++pos;
      if (estimated[i]) ++tp;
    } else {
      ++neg;
      if (estimated[i]) ++fp;
    }
  }
  return detail::rates(tp, fp, pos, neg);
}

/// Mean number of off-diagonal links per column.
inline double mean_links_per_column(const ConcentrationMatrix& k) {
  std::size_t links = 0;
  for (std::size_t c : k.connections) links += c;
  return static_cast<double>(links) / static_cast<double>(k.size());
}

enum class MethodKind { rigorous, adaptive, bm_baseline, oracle_ols };

inline std::string to_string(MethodKind m) {
  switch (m) {
    case MethodKind::rigorous: return "rigorous";
    case MethodKind::adaptive: return "adaptive";
    case MethodKind::bm_baseline: return "bm_baseline";
    case MethodKind::oracle_ols: return "oracle_ols";
  }
  return "rigorous";
}

inline MethodKind parse_method(const std::string& s) {
  if (s == "rigorous") return MethodKind::rigorous;
  if (s == "adaptive") return MethodKind::adaptive;
  if (s == "bm_baseline") return MethodKind::bm_baseline;
  if (s == "oracle_ols") return MethodKind::oracle_ols;
  throw ConfigError("mc_simulation", "unknown method '" + s + "'");
}

struct MethodConfig {
  MethodKind kind = MethodKind::rigorous;
  PenaltyConfig penalty;
  SelectOptions select;

  /// All methods use the plain ratio criterion; the modified-BM filters stay
  /// available through `select`.
  static MethodConfig defaults(MethodKind kind, InformationCriterion ic = InformationCriterion::bic) {
    MethodConfig m;
    m.kind = kind;
    m.penalty.ic = ic;
    m.penalty.kind = kind == MethodKind::adaptive ? PenaltyKind::adaptive : PenaltyKind::rigorous;
    return m;
  }

  std::string estimator_label() const {
    switch (kind) {
      case MethodKind::rigorous: return "rigorous";
      case MethodKind::adaptive: return "adaptive";
      case MethodKind::bm_baseline: return "sample_cov";
      case MethodKind::oracle_ols: return "ols";
    }
    return "";
  }

  std::string ic_label() const { return kind == MethodKind::adaptive ? to_string(penalty.ic) : "-"; }
};

inline nlohmann::json to_json(const MethodConfig& m) {
  nlohmann::json j = {{"method", to_string(m.kind)},
                      {"estimator", m.estimator_label()},
                      {"ic", m.ic_label()},
                      {"restrict_most_connected", m.select.restrict_most_connected},
                      {"include_diagonal_in_norm", m.select.include_diagonal_in_norm},
                      {"norm", to_string(m.select.norm)}};
  j["max_diag_share"] = m.select.max_diag_share ? nlohmann::json(*m.select.max_diag_share) : nlohmann::json(nullptr);
  if (m.kind == MethodKind::rigorous || m.kind == MethodKind::adaptive) {
    j["c"] = m.penalty.c;
    j["hac_bandwidth"] = m.penalty.hac_bandwidth;
    j["max_loading_iter"] = m.penalty.max_loading_iter;
    j["grid_size"] = m.penalty.grid_size;
    j["first_stage"] = to_string(m.penalty.first_stage);
  }
  return j;
}

struct RepOutcome {
  bool ok = false;
  std::string error;
  double s_hat = 0.0;
  SelectionMetrics nss;
  std::size_t n_hat_d = 0;
  SelectionMetrics dds;
  std::vector<std::size_t> dominant;
};

/// Runs one method on one generated panel.
inline RepOutcome evaluate_method(const GeneratedPanel& g, const MethodConfig& method) {
  RepOutcome out;
  ConcentrationMatrix k;
  switch (method.kind) {
    case MethodKind::rigorous:
    case MethodKind::adaptive:
      k = build_concentration(nodewise_select(g.panel, method.penalty));
      break;
    case MethodKind::bm_baseline:
      k = sample_concentration(g.panel);
      break;
    case MethodKind::oracle_ols:
      k = build_concentration(refit_on_pattern(g.panel, g.true_pattern));
      break;
  }
  out.s_hat = mean_links_per_column(k);
  out.nss = metrics(link_pattern(k), g.true_pattern);
  const DominanceResult dr = select_dominant(k, method.select);
  out.n_hat_d = dr.n_dominant;
  out.dominant = dr.dominant;
  std::vector<bool> est(k.size(), false), truth(k.size(), false);
  for (std::size_t j : dr.dominant) est[j] = true;
  for (std::size_t j : g.true_dominant) truth[j] = true;
  out.dds = indicator_metrics(est, truth);
  out.ok = true;
  return out;
}

struct MonteCarloRow {
  int spec = 1;
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t factors = 0;
  std::size_t n_dominant = 0;
  std::string method;
  std::string estimator;
  std::string ic;
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::string first_error;
  std::optional<double> s_hat, nss_tpr, nss_fpr, nss_fdr;
  std::optional<double> n_hat_d, dds_tpr, dds_fpr, dds_fdr;
  std::vector<RepOutcome> outcomes;
};

namespace detail {

template <typename Get>
std::optional<double> mean_of(const std::vector<RepOutcome>& xs, Get get) {
  double s = 0.0;
  std::size_t c = 0;
  for (const auto& x : xs) {
    if (!x.ok) continue;
    const std::optional<double> v = get(x);
    if (!v) continue;
    s += *v;
    ++c;
  }
  if (c == 0) return std::nullopt;
  return s / static_cast<double>(c);
}

}  // namespace detail

/// Repetition r uses seed spec.seed + r; failed repetitions are counted and
/// excluded from every mean. Output is independent of `workers`.
inline MonteCarloRow run_monte_carlo(const SimSpec& spec, std::size_t reps, const MethodConfig& method,
                                     unsigned workers = 1) {
  if (reps < 1) throw ConfigError("mc_simulation", "reps must be >= 1");
  spec.validate();
  MonteCarloRow row;
  row.spec = spec.id;
  row.n = spec.n;
  row.t = spec.t;
  row.factors = spec.n_factors;
  row.n_dominant = spec.nd();
  row.method = to_string(method.kind);
  row.estimator = method.estimator_label();
  row.ic = method.ic_label();
  row.reps = reps;
  row.outcomes.resize(reps);

  parallel_for(reps, workers, [&](std::size_t r) {
    SimSpec s = spec;
    s.seed = spec.seed + r;
    try {
      row.outcomes[r] = evaluate_method(generate_dataset(s), method);
    } catch (const Error& e) {
      row.outcomes[r].ok = false;
      row.outcomes[r].error = e.what();
    }
  });

  for (const auto& o : row.outcomes)
    if (!o.ok) {
      if (row.failures == 0) row.first_error = o.error;
      ++row.failures;
    }
  using O = RepOutcome;
  row.s_hat = detail::mean_of(row.outcomes, [](const O& o) -> std::optional<double> { return o.s_hat; });
  row.nss_tpr = detail::mean_of(row.outcomes, [](const O& o) { return o.nss.tpr; });
  row.nss_fpr = detail::mean_of(row.outcomes, [](const O& o) { return o.nss.fpr; });
  row.nss_fdr = detail::mean_of(row.outcomes, [](const O& o) { return o.nss.fdr; });
  row.n_hat_d = detail::mean_of(row.outcomes,
                                [](const O& o) -> std::optional<double> { return static_cast<double>(o.n_hat_d); });
  row.dds_tpr = detail::mean_of(row.outcomes, [](const O& o) { return o.dds.tpr; });
  row.dds_fpr = detail::mean_of(row.outcomes, [](const O& o) { return o.dds.fpr; });
  row.dds_fdr = detail::mean_of(row.outcomes, [](const O& o) { return o.dds.fdr; });
  return row;
}

inline std::string table_key_header() { return "spec,n,t,factors,n_dominant,method,estimator,ic,reps,failures"; }

inline std::string table_key(const MonteCarloRow& r) {
  return std::to_string(r.spec) + "," + std::to_string(r.n) + "," + std::to_string(r.t) + "," +
         std::to_string(r.factors) + "," + std::to_string(r.n_dominant) + "," + r.method + "," + r.estimator +
         "," + r.ic + "," + std::to_string(r.reps) + "," + std::to_string(r.failures);
}

/// Network-selection table: s_hat, TPR, FPR, FDR per row.
inline std::string nss_table_csv(const std::vector<MonteCarloRow>& rows) {
  std::string out = table_key_header() + ",s_hat,tpr,fpr,fdr\n";
  for (const auto& r : rows)
    out += table_key(r) + "," + io::format_optional(r.s_hat) + "," + io::format_optional(r.nss_tpr) + "," +
           io::format_optional(r.nss_fpr) + "," + io::format_optional(r.nss_fdr) + "\n";
  return out;
}

/// Dominant-driver table: mean N_d estimate, TPR, FPR, FDR per row.
inline std::string dds_table_csv(const std::vector<MonteCarloRow>& rows) {
  std::string out = table_key_header() + ",n_hat_d,tpr,fpr,fdr\n";
  for (const auto& r : rows)
    out += table_key(r) + "," + io::format_optional(r.n_hat_d) + "," + io::format_optional(r.dds_tpr) + "," +
           io::format_optional(r.dds_fpr) + "," + io::format_optional(r.dds_fdr) + "\n";
  return out;
}

}  // namespace d2ml

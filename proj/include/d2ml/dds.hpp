#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "d2ml/error.hpp"
#include "d2ml/io.hpp"
#include "d2ml/numerics.hpp"
#include "d2ml/nss.hpp"

namespace d2ml {

/// r_s = norms[s] / norms[s+1]; a zero denominator gives +inf.
inline Vector bm_ratios(std::span<const double> norms) {
  if (norms.size() < 2) throw DimensionError("dds_selection", "ratio criterion needs at least two norms");
  Vector r(norms.size() - 1);
  for (std::size_t s = 0; s + 1 < norms.size(); ++s) {
    if (norms[s] < 0.0 || norms[s + 1] < 0.0) throw DataError("dds_selection", "norms must be non-negative");
    if (norms[s] < norms[s + 1]) throw DataError("dds_selection", "norms must be sorted in descending order");
    r[s] = norms[s + 1] == 0.0 ? std::numeric_limits<double>::infinity() : norms[s] / norms[s + 1];
  }
  return r;
}

/// Number of dominant drivers: argmax of consecutive norm ratios (ties go to
/// the smallest s). When the maximum sits at the last ratio and another ratio
/// exists, the argmax over all but the last ratio is used instead.
inline std::size_t bm_criterion(std::span<const double> norms) {
  const Vector r = bm_ratios(norms);
  auto argmax = [&](std::size_t count) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < count; ++s)
      if (r[s] > r[best]) best = s;
    return best;
  };
  std::size_t best = argmax(r.size());
  if (best + 1 == r.size() && r.size() >= 2) best = argmax(r.size() - 1);
  return best + 1;
}

struct SelectOptions {
  bool restrict_most_connected = false;
  std::optional<double> max_diag_share;
  bool include_diagonal_in_norm = true;
  NormKind norm = NormKind::l2;
};

/// What the eligibility filters did, kept for reproducibility.
struct FilterRecord {
  bool restrict_most_connected = false;
  std::size_t connection_cutoff = 0;   // minimum connections kept by the most-connected filter
  std::size_t after_connection_filter = 0;
  std::optional<double> max_diag_share;
  std::size_t dropped_by_diag_share = 0;
  std::size_t eligible = 0;
};

struct DominanceResult {
  std::vector<std::size_t> order;   // eligible series, descending norm
  Vector ordered_norms;
  std::vector<SeriesId> ordered_ids;
  Vector ratios;
  std::size_t n_dominant = 0;
  std::vector<std::size_t> dominant;  // series indices, descending norm
  std::vector<SeriesId> dominant_ids;
  Vector norms;          // ratio-test norm of every series
  Vector offdiag_norms;  // norm without the diagonal
  Vector norm_shares;    // offdiag_norms / sum(offdiag_norms)
  std::vector<bool> eligible;
  FilterRecord filters;

  bool is_dominant(std::size_t j) const {
    return std::find(dominant.begin(), dominant.end(), j) != dominant.end();
  }
};

inline DominanceResult select_dominant(const ConcentrationMatrix& k, const SelectOptions& opts = {}) {
  const std::size_t m = k.size();
  if (m < 2) throw DimensionError("dds_selection", "dominant selection needs m >= 2");

  DominanceResult res;
  res.norms = column_norms(k.kappa, opts.include_diagonal_in_norm, opts.norm);
  res.offdiag_norms = column_norms(k.kappa, false, opts.norm);
  const double total = std::accumulate(res.offdiag_norms.begin(), res.offdiag_norms.end(), 0.0);
  res.norm_shares.assign(m, 0.0);
  if (total > 0.0)
    for (std::size_t j = 0; j < m; ++j) res.norm_shares[j] = res.offdiag_norms[j] / total;

  res.eligible.assign(m, true);
  res.filters.restrict_most_connected = opts.restrict_most_connected;
  res.filters.max_diag_share = opts.max_diag_share;
  if (opts.restrict_most_connected) {
    std::vector<std::size_t> counts = k.connections;
    std::sort(counts.begin(), counts.end(), std::greater<>());
    const std::size_t keep = (m + 1) / 2;
    const std::size_t cutoff = counts[keep - 1];
    res.filters.connection_cutoff = cutoff;
    for (std::size_t j = 0; j < m; ++j)
      if (k.connections[j] < cutoff) res.eligible[j] = false;
  }
  res.filters.after_connection_filter =
      static_cast<std::size_t>(std::count(res.eligible.begin(), res.eligible.end(), true));
  if (res.filters.after_connection_filter < 2)
    throw FilterExhaustedError("dds_selection", "most-connected filter left fewer than 2 eligible series");

  if (opts.max_diag_share) {
    for (std::size_t j = 0; j < m; ++j)
      if (res.eligible[j] && k.diag_share[j] > *opts.max_diag_share) {
        res.eligible[j] = false;
        ++res.filters.dropped_by_diag_share;
      }
  }
  res.filters.eligible = static_cast<std::size_t>(std::count(res.eligible.begin(), res.eligible.end(), true));
  if (res.filters.eligible < 2)
    throw FilterExhaustedError("dds_selection", "diagonal-share filter (max " +
                                                    io::format_double(*opts.max_diag_share) +
                                                    ") left fewer than 2 eligible series");

  for (std::size_t j = 0; j < m; ++j)
    if (res.eligible[j]) res.order.push_back(j);
  std::stable_sort(res.order.begin(), res.order.end(),
                   [&](std::size_t a, std::size_t b) { return res.norms[a] > res.norms[b]; });
  for (std::size_t j : res.order) {
    res.ordered_norms.push_back(res.norms[j]);
    res.ordered_ids.push_back(k.ids[j]);
  }
  res.ratios = bm_ratios(res.ordered_norms);
  res.n_dominant = bm_criterion(res.ordered_norms);
  res.dominant.assign(res.order.begin(), res.order.begin() + static_cast<std::ptrdiff_t>(res.n_dominant));
  for (std::size_t j : res.dominant) res.dominant_ids.push_back(k.ids[j]);
  return res;
}

struct Edge {
  std::size_t from = 0;  // driver column j
  std::size_t to = 0;    // influenced row i
  SeriesId from_id;
  SeriesId to_id;
  double weight = 0.0;   // kappa(to, from)
  bool dominant_origin = false;
};

/// Directed edges j -> i for every off-diagonal link, largest |weight| first.
inline std::vector<Edge> edge_list(const ConcentrationMatrix& k, const std::vector<std::size_t>& dominant) {
  const std::set<std::size_t> dom(dominant.begin(), dominant.end());
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!k.linked(i, j)) continue;
      edges.push_back({j, i, k.ids[j], k.ids[i], k.kappa(i, j), dom.count(j) > 0});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    const double wa = std::abs(a.weight);
    const double wb = std::abs(b.weight);
    if (wa != wb) return wa > wb;
    if (a.from_id != b.from_id) return a.from_id < b.from_id;
    return a.to_id < b.to_id;
  });
  return edges;
}

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

/// Subgraph of edges leaving dominant series. Dominant nodes are double circles.
inline std::string to_dot(const std::vector<SeriesId>& dominant_ids, const std::vector<Edge>& edges) {
  std::vector<std::string> nodes;
  auto add = [&](const std::string& n) {
    if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
  };
  std::set<std::string> dom;
  for (const auto& id : dominant_ids) {
    dom.insert(id.label());
    add(id.label());
  }
  std::vector<const Edge*> kept;
  for (const auto& e : edges) {
    if (!dom.count(e.from_id.label())) continue;
    kept.push_back(&e);
    add(e.to_id.label());
  }
  std::string out = "digraph dominant_drivers {\n  rankdir=LR;\n";
  for (const auto& n : nodes)
    out += "  " + dot_quote(n) + " [shape=" + (dom.count(n) ? "doublecircle" : "circle") + "];\n";
  for (const Edge* e : kept)
    out += "  " + dot_quote(e->from_id.label()) + " -> " + dot_quote(e->to_id.label()) +
           " [weight=" + io::format_double(std::abs(e->weight)) + ", label=" + dot_quote(io::format_double(e->weight)) +
           "];\n";
  out += "}\n";
  return out;
}

/// One row per series, descending ratio-test norm.
inline std::string norms_csv(const ConcentrationMatrix& k, const DominanceResult& r) {
  std::vector<std::size_t> idx(k.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.norms[a] > r.norms[b]; });
  std::string out = "rank,series,norm,offdiag_norm,share,connections,diag_share,eligible,dominant\n";
  std::size_t rank = 1;
  for (std::size_t j : idx) {
    out += std::to_string(rank++) + "," + k.ids[j].label() + "," + io::format_double(r.norms[j]) + "," +
           io::format_double(r.offdiag_norms[j]) + "," + io::format_double(r.norm_shares[j]) + "," +
           std::to_string(k.connections[j]) + "," + io::format_double(k.diag_share[j]) + "," +
           (r.eligible[j] ? "1" : "0") + "," + (r.is_dominant(j) ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace d2ml

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "d2ml/error.hpp"
#include "d2ml/io.hpp"
#include "d2ml/matrix.hpp"
#include "d2ml/numerics.hpp"

namespace d2ml {

inline const std::string kGlobalUnit = "GLOBAL";

struct SeriesId {
  std::string unit;
  std::string variable;

  bool is_global() const { return unit == kGlobalUnit; }

  /// Header form: "unit:variable", or the bare variable for global series.
  std::string label() const { return is_global() ? variable : unit + ":" + variable; }

  static SeriesId parse(const std::string& header) {
    const auto pos = header.find(':');
    if (pos == std::string::npos) return {kGlobalUnit, header};
    return {header.substr(0, pos), header.substr(pos + 1)};
  }

  friend auto operator<=>(const SeriesId&, const SeriesId&) = default;
};

/// T x M observations with one SeriesId per column. Immutable by convention:
/// every transform returns a new Panel and appends to the preprocessing log.
class Panel {
 public:
  Panel() = default;
  Panel(DenseMatrix data, std::vector<SeriesId> ids, std::vector<std::string> t_labels = {},
        std::vector<std::string> log = {})
      : data_(std::move(data)), ids_(std::move(ids)), t_labels_(std::move(t_labels)),
        log_(std::move(log)) {
    if (ids_.size() != data_.cols())
      throw DimensionError("panel", "number of ids differs from number of columns");
    if (t_labels_.empty())
      for (std::size_t t = 0; t < data_.rows(); ++t) t_labels_.push_back(std::to_string(t + 1));
    if (t_labels_.size() != data_.rows())
      throw DimensionError("panel", "number of time labels differs from number of rows");
    std::set<SeriesId> seen;
    for (const auto& id : ids_)
      if (!seen.insert(id).second)
        throw DataError("panel", "duplicate series '" + id.label() + "'");
    if (!data_.all_finite()) throw DataError("panel", "panel contains non-finite values");
  }

  const DenseMatrix& data() const noexcept { return data_; }
  const std::vector<SeriesId>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& t_labels() const noexcept { return t_labels_; }
  const std::vector<std::string>& preprocessing_log() const noexcept { return log_; }

  std::size_t periods() const noexcept { return data_.rows(); }
  std::size_t series() const noexcept { return data_.cols(); }

  Vector column(std::size_t j) const { return data_.col(j); }

  std::optional<std::size_t> find(const SeriesId& id) const {
    for (std::size_t j = 0; j < ids_.size(); ++j)
      if (ids_[j] == id) return j;
    return std::nullopt;
  }

  /// Looks a series up by its header label ("usa:dp" or "poil").
  std::optional<std::size_t> find(const std::string& label) const {
    return find(SeriesId::parse(label));
  }

  friend bool operator==(const Panel&, const Panel&) = default;

 private:
  DenseMatrix data_;
  std::vector<SeriesId> ids_;
  std::vector<std::string> t_labels_;
  std::vector<std::string> log_;
};

/// Parses "time,unit:variable,..." CSV text.
inline Panel parse_panel_csv(const std::string& text) {
  const io::CsvTable table = io::parse_csv(text);
  if (table.header.size() < 2) throw DataError("panel", "CSV header needs a time column and at least one series");
  std::vector<SeriesId> ids;
  std::set<std::string> headers;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const std::string& h = table.header[c];
    if (h.empty()) throw DataError("panel", "empty header in column " + std::to_string(c + 1));
    if (!headers.insert(h).second) throw DataError("panel", "duplicate header '" + h + "'");
    ids.push_back(SeriesId::parse(h));
  }
  const std::size_t m = ids.size();
  DenseMatrix data(table.rows.size(), m);
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string t = row.empty() ? std::string{} : io::trim(row[0]);
    if (row.size() > m + 1)
      throw DataError("panel", "row t=" + t + " has " + std::to_string(row.size()) +
                                   " cells, header has " + std::to_string(m + 1));
    labels.push_back(t);
    for (std::size_t c = 0; c < m; ++c) {
      const std::string cell = c + 1 < row.size() ? io::trim(row[c + 1]) : std::string{};
      if (cell.empty())
        throw DataError("panel", "missing value at (t=" + t + ", " + table.header[c + 1] + ")");
      const auto v = io::parse_double(cell);
      if (!v || !std::isfinite(*v))
        throw DataError("panel", "cannot parse '" + cell + "' at (t=" + t + ", " +
                                     table.header[c + 1] + ")");
      data(r, c) = *v;
    }
  }
  if (data.rows() < 3 || m < 2)
    throw DimensionError("panel", "panel needs T >= 3 and M >= 2 (got T=" +
                                      std::to_string(data.rows()) + ", M=" + std::to_string(m) + ")");
  return Panel(std::move(data), std::move(ids), std::move(labels));
}

inline Panel load_csv(const std::string& path) { return parse_panel_csv(io::read_file(path)); }

inline std::string write_csv(const Panel& p) {
  std::string out = "time";
  for (const auto& id : p.ids()) out += "," + id.label();
  out += "\n";
  for (std::size_t t = 0; t < p.periods(); ++t) {
    out += p.t_labels()[t];
    for (std::size_t j = 0; j < p.series(); ++j) out += "," + io::format_double(p.data()(t, j));
    out += "\n";
  }
  return out;
}

inline void save_csv(const Panel& p, const std::string& path) { io::write_file(path, write_csv(p)); }

inline Panel first_difference(const Panel& p) {
  const std::size_t t = p.periods();
  if (t < 2) throw DimensionError("panel", "first_difference needs T >= 2");
  DenseMatrix out(t - 1, p.series());
  for (std::size_t r = 0; r + 1 < t; ++r)
    for (std::size_t j = 0; j < p.series(); ++j) out(r, j) = p.data()(r + 1, j) - p.data()(r, j);
  std::vector<std::string> labels(p.t_labels().begin() + 1, p.t_labels().end());
  auto log = p.preprocessing_log();
  log.push_back("diff");
  return Panel(std::move(out), p.ids(), std::move(labels), std::move(log));
}

/// Demeans and scales each column to unit sample variance (divisor T - 1).
inline Panel standardize(const Panel& p) {
  const std::size_t t = p.periods();
  if (t < 2) throw DimensionError("panel", "standardize needs T >= 2");
  DenseMatrix out(t, p.series());
  for (std::size_t j = 0; j < p.series(); ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += p.data()(r, j);
    mean /= static_cast<double>(t);
    double ss = 0.0;
    for (std::size_t r = 0; r < t; ++r) ss += (p.data()(r, j) - mean) * (p.data()(r, j) - mean);
    const double var = ss / static_cast<double>(t - 1);
    if (!(var > 0.0))
      throw DegenerateSeriesError("panel", "series '" + p.ids()[j].label() + "' has zero variance");
    const double sd = std::sqrt(var);
    for (std::size_t r = 0; r < t; ++r) out(r, j) = (p.data()(r, j) - mean) / sd;
  }
  auto log = p.preprocessing_log();
  log.push_back("std");
  return Panel(std::move(out), p.ids(), p.t_labels(), std::move(log));
}

/// Subtracts each column's sample mean.
inline Panel demean(const Panel& p) {
  const std::size_t t = p.periods();
  DenseMatrix out = p.data();
  for (std::size_t j = 0; j < p.series(); ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += out(r, j);
    mean /= static_cast<double>(t);
    for (std::size_t r = 0; r < t; ++r) out(r, j) -= mean;
  }
  auto log = p.preprocessing_log();
  log.push_back("demean");
  return Panel(std::move(out), p.ids(), p.t_labels(), std::move(log));
}

/// Appends columns to a panel; `tag` goes to the preprocessing log.
inline Panel append_series(const Panel& p, const DenseMatrix& cols, const std::vector<SeriesId>& ids,
                           const std::string& tag) {
  if (cols.rows() != p.periods() || cols.cols() != ids.size())
    throw DimensionError("panel", "appended block does not match panel shape");
  DenseMatrix out(p.periods(), p.series() + cols.cols());
  for (std::size_t t = 0; t < p.periods(); ++t) {
    for (std::size_t j = 0; j < p.series(); ++j) out(t, j) = p.data()(t, j);
    for (std::size_t j = 0; j < cols.cols(); ++j) out(t, p.series() + j) = cols(t, j);
  }
  auto all_ids = p.ids();
  all_ids.insert(all_ids.end(), ids.begin(), ids.end());
  auto log = p.preprocessing_log();
  log.push_back(tag);
  return Panel(std::move(out), std::move(all_ids), p.t_labels(), std::move(log));
}

/// Keeps the listed columns in the listed order.
inline Panel select_series(const Panel& p, const std::vector<std::size_t>& columns) {
  DenseMatrix out(p.periods(), columns.size());
  std::vector<SeriesId> ids;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] >= p.series()) throw DimensionError("panel", "column index out of range");
    ids.push_back(p.ids()[columns[c]]);
    for (std::size_t t = 0; t < p.periods(); ++t) out(t, c) = p.data()(t, columns[c]);
  }
  return Panel(std::move(out), std::move(ids), p.t_labels(), p.preprocessing_log());
}

/// Appends (GLOBAL, "csa_<v>") = equal-weight mean over the units of each
/// non-global variable v, in order of first appearance.
inline Panel cross_section_averages(const Panel& p) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t j = 0; j < p.series(); ++j) {
    const auto& id = p.ids()[j];
    if (id.is_global()) continue;
    if (!members.count(id.variable)) order.push_back(id.variable);
    members[id.variable].push_back(j);
  }
  DenseMatrix block(p.periods(), order.size());
  std::vector<SeriesId> ids;
  for (std::size_t v = 0; v < order.size(); ++v) {
    const auto& cols = members[order[v]];
    for (std::size_t t = 0; t < p.periods(); ++t) {
      double s = 0.0;
      for (std::size_t j : cols) s += p.data()(t, j);
      block(t, v) = s / static_cast<double>(cols.size());
    }
    ids.push_back({kGlobalUnit, "csa_" + order[v]});
  }
  return append_series(p, block, ids, "csa");
}

/// Appends the first k principal component scores of the non-global series
/// as (GLOBAL, "pc1".."pck").
inline Panel append_principal_components(const Panel& p, std::size_t k) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < p.series(); ++j)
    if (!p.ids()[j].is_global()) cols.push_back(j);
  const Panel base = select_series(p, cols);
  const PrincipalComponents pcs = principal_components(base.data(), k);
  std::vector<SeriesId> ids;
  for (std::size_t c = 0; c < k; ++c) ids.push_back({kGlobalUnit, "pc" + std::to_string(c + 1)});
  return append_series(p, pcs.scores, ids, "pca:" + std::to_string(k));
}

/// Sample covariance matrix of the panel's columns.
inline DenseMatrix sample_covariance(const Panel& p) { return sample_covariance(p.data()); }

}  // namespace d2ml

#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "d2ml/dds.hpp"
#include "support.hpp"

using namespace d2ml;

namespace {

ConcentrationMatrix from_kappa(const DenseMatrix& kappa, double threshold = 0.0) {
  ConcentrationMatrix k;
  for (std::size_t i = 0; i < kappa.rows(); ++i) k.ids.push_back({"s" + std::to_string(i), "x"});
  k.kappa = kappa;
  k.nonzero_threshold = threshold;
  detail::fill_column_stats(k);
  return k;
}

// Independent argmax-of-ratios with the last-position rule, written from the definition.
std::size_t reference_bm(const Vector& norms) {
  const std::size_t m = norms.size();
  auto ratio = [&](std::size_t s) {
    return norms[s + 1] == 0.0 ? std::numeric_limits<double>::infinity() : norms[s] / norms[s + 1];
  };
  auto best_in = [&](std::size_t count) {
    std::size_t best = 0;
    double val = ratio(0);
    for (std::size_t s = 1; s < count; ++s)
      if (ratio(s) > val) {
        val = ratio(s);
        best = s;
      }
    return best;
  };
  std::size_t best = best_in(m - 1);
  if (best == m - 2 && m - 1 >= 2) best = best_in(m - 2);
  return best + 1;
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(BmCriterion, DirectRatio) {
  const Vector norms{10, 8, 2, 1.9, 1.8};
  const Vector r = bm_ratios(norms);
  EXPECT_NEAR(r[0], 1.25, 1e-15);
  EXPECT_NEAR(r[1], 4.0, 1e-15);
  EXPECT_NEAR(r[2], 2.0 / 1.9, 1e-15);
  EXPECT_NEAR(r[3], 1.9 / 1.8, 1e-15);
  EXPECT_EQ(bm_criterion(norms), 2u);
}

TEST(BmCriterion, TieGoesToSmallest) { EXPECT_EQ(bm_criterion(Vector{9, 3, 1}), 1u); }

TEST(BmCriterion, LastPositionCorrection) {
  const Vector norms{4, 2, 1, 0};
  const Vector r = bm_ratios(norms);
  EXPECT_TRUE(std::isinf(r[2]));
  EXPECT_EQ(bm_criterion(norms), 1u);
  // Ratios [1.25, 1.33, 3]: the maximum sits last, so the earlier ratios decide.
  EXPECT_EQ(bm_criterion(Vector{5, 4, 3, 1}), 2u);
  EXPECT_EQ(bm_criterion(Vector{5, 4, 3, 1}), reference_bm(Vector{5, 4, 3, 1}));
}

TEST(BmCriterion, TwoNormsAndAllEqual) {
  EXPECT_EQ(bm_criterion(Vector{3, 1}), 1u);
  EXPECT_EQ(bm_criterion(Vector{0, 0}), 1u);
  EXPECT_EQ(bm_criterion(Vector{2, 2, 2, 2}), 1u);
}

TEST(BmCriterion, Errors) {
  EXPECT_THROW(bm_criterion(Vector{1}), DimensionError);
  EXPECT_THROW(bm_criterion(Vector{1, 2}), DataError);
  EXPECT_THROW(bm_criterion(Vector{1, -1}), DataError);
}

TEST(BmCriterion, MatchesReferenceOnRandomVectors) {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + rng.next() % 20;
    Vector v(m);
    for (double& x : v) x = std::floor(rng.uniform(0, 6)) * (rng.uniform() < 0.5 ? 1.0 : rng.uniform());
    std::sort(v.begin(), v.end(), std::greater<>());
    ASSERT_EQ(bm_criterion(v), reference_bm(v));
    const std::size_t n = bm_criterion(v);
    ASSERT_GE(n, 1u);
    ASSERT_LE(n, m - 1);
  }
}

TEST(BmCriterion, ScaleInvariance) {
  Rng rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 3 + rng.next() % 15;
    Vector v(m);
    for (double& x : v) x = rng.uniform(0.1, 10.0);
    std::sort(v.begin(), v.end(), std::greater<>());
    for (double c : {0.5, 2.0, 1024.0, 3.0e-5}) {
      Vector w = v;
      for (double& x : w) x *= c;
      EXPECT_EQ(bm_criterion(w), bm_criterion(v));
    }
  }
}

TEST(BmCriterion, AppendingASmallNormKeepsTheSelection) {
  // Argmax ratio at s=2 (10/2 = 5); appended norms create ratios below 5.
  const Vector base{20, 10, 2, 1.8, 1.7};
  ASSERT_EQ(bm_criterion(base), 2u);
  for (double tail : {1.6, 1.0, 0.5}) {
    Vector v = base;
    v.push_back(tail);
    EXPECT_EQ(bm_criterion(v), 2u) << tail;
  }
  // A new overall maximum at the last position is ignored by the correction.
  Vector v = base;
  v.push_back(0.1);
  EXPECT_EQ(bm_criterion(v), 2u);
  // Once another norm follows, the same ratio is interior and wins.
  v.push_back(0.09);
  EXPECT_EQ(bm_criterion(v), 5u);
}

TEST(SelectDominant, SingleDriver) {
  DenseMatrix kappa = DenseMatrix::identity(6);
  for (std::size_t i = 1; i < 6; ++i) kappa(i, 0) = -0.8;
  const DominanceResult r = select_dominant(from_kappa(kappa));
  EXPECT_EQ(r.n_dominant, 1u);
  EXPECT_EQ(r.dominant, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.dominant_ids[0].label(), "s0:x");
  EXPECT_NEAR(r.norms[0], std::sqrt(1.0 + 5 * 0.64), 1e-14);
  EXPECT_NEAR(r.norm_shares[0], 1.0, 1e-15);
}

TEST(SelectDominant, ConnectionFilterDropsIsolatedGiant) {
  const std::size_t m = 8;
  DenseMatrix kappa = DenseMatrix::identity(m);
  kappa(7, 7) = 100.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i != 0) kappa(i, 0) = -1.0;
    if (i != 1) kappa(i, 1) = -0.9;
    if (i != 2 && i < 5) kappa(i, 2) = -0.3;
    if (i != 3 && i < 4) kappa(i, 3) = -0.2;
  }
  const ConcentrationMatrix k = from_kappa(kappa);
  const DominanceResult plain = select_dominant(k);
  EXPECT_EQ(plain.dominant, (std::vector<std::size_t>{7}));

  SelectOptions o;
  o.restrict_most_connected = true;
  const DominanceResult filtered = select_dominant(k, o);
  EXPECT_FALSE(filtered.eligible[7]);
  EXPECT_EQ(filtered.filters.after_connection_filter, 4u);
  EXPECT_EQ(filtered.dominant, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectDominant, ConnectionFilterKeepsTies) {
  DenseMatrix kappa = DenseMatrix::identity(5);
  for (std::size_t j = 0; j < 5; ++j) kappa((j + 1) % 5, j) = -0.5;
  SelectOptions o;
  o.restrict_most_connected = true;
  const DominanceResult r = select_dominant(from_kappa(kappa), o);
  EXPECT_EQ(r.filters.eligible, 5u);
  EXPECT_EQ(r.filters.connection_cutoff, 1u);
}

TEST(SelectDominant, DiagonalShareCap) {
  DenseMatrix kappa = DenseMatrix::identity(4);
  kappa(1, 0) = -0.1;  // column 0: share 1/1.1
  kappa(0, 1) = -2.0;
  kappa(2, 1) = -2.0;  // column 1: share 1/5
  kappa(0, 2) = -1.5;  // column 2: share 1/2.5
  kappa(1, 3) = -0.5;
  kappa(2, 3) = -0.6;  // column 3: share 1/2.1
  SelectOptions o;
  o.max_diag_share = 0.5;
  const DominanceResult r = select_dominant(from_kappa(kappa), o);
  EXPECT_FALSE(r.eligible[0]);
  EXPECT_TRUE(r.eligible[3]);
  EXPECT_EQ(r.filters.dropped_by_diag_share, 1u);
  EXPECT_EQ(r.filters.eligible, 3u);
  EXPECT_EQ(r.dominant.front(), 1u);
}

TEST(SelectDominant, FilterExhausted) {
  SelectOptions o;
  o.max_diag_share = 0.5;
  try {
    select_dominant(from_kappa(DenseMatrix::identity(3)), o);
    FAIL();
  } catch (const FilterExhaustedError& e) {
    EXPECT_NE(std::string(e.what()).find("diagonal-share"), std::string::npos);
  }
  DenseMatrix kappa = DenseMatrix::identity(2);
  kappa(1, 0) = -1.0;
  SelectOptions c;
  c.restrict_most_connected = true;
  try {
    select_dominant(from_kappa(kappa), c);
    FAIL();
  } catch (const FilterExhaustedError& e) {
    EXPECT_NE(std::string(e.what()).find("most-connected"), std::string::npos);
  }
}

TEST(SelectDominant, SymmetricBaselineEqualsRawCriterion) {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 3 + rng.next() % 10;
    const DenseMatrix s = d2ml::testing::random_spd(m, rng, 0.5);
    const ConcentrationMatrix k = from_kappa(invert_spd(s), 1e-10);
    const DominanceResult r = select_dominant(k);
    Vector norms = column_norms(k.kappa, true);
    std::sort(norms.begin(), norms.end(), std::greater<>());
    EXPECT_EQ(r.n_dominant, bm_criterion(norms));
    EXPECT_EQ(r.ordered_norms, norms);
    // Symmetric matrix: row norms give the same answer.
    Vector rows = row_norms(k.kappa, true);
    std::sort(rows.begin(), rows.end(), std::greater<>());
    EXPECT_EQ(bm_criterion(rows), r.n_dominant);
  }
}

TEST(SelectDominant, ScalingKappaKeepsDominantSet) {
  Rng rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 4 + rng.next() % 10;
    DenseMatrix kappa = DenseMatrix::identity(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j && rng.uniform() < 0.4) kappa(i, j) = rng.normal();
    DenseMatrix scaled = kappa;
    for (double& v : scaled.values()) v *= 7.5;
    const DominanceResult a = select_dominant(from_kappa(kappa));
    const DominanceResult b = select_dominant(from_kappa(scaled));
    EXPECT_EQ(a.dominant, b.dominant);
  }
}

TEST(SelectDominant, NormOptions) {
  DenseMatrix kappa = DenseMatrix::identity(3);
  kappa(1, 0) = -3.0;
  kappa(2, 0) = -4.0;
  SelectOptions o;
  o.include_diagonal_in_norm = false;
  o.norm = NormKind::l1;
  const DominanceResult r = select_dominant(from_kappa(kappa), o);
  EXPECT_EQ(r.norms[0], 7.0);
  EXPECT_EQ(r.offdiag_norms[0], 7.0);
}

TEST(EdgeList, IdentityHasNoEdges) {
  EXPECT_TRUE(edge_list(from_kappa(DenseMatrix::identity(4)), {0}).empty());
}

TEST(EdgeList, BivariateInverse) {
  const ConcentrationMatrix k = from_kappa(invert_spd(DenseMatrix{{1, 0.5}, {0.5, 1.25}}), 1e-10);
  const auto edges = edge_list(k, {0});
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_NEAR(edges[0].weight, -0.5, 1e-14);
  EXPECT_NEAR(edges[1].weight, -0.5, 1e-14);
  EXPECT_EQ(edges[0].from, 0u);
  EXPECT_EQ(edges[0].to, 1u);
  EXPECT_TRUE(edges[0].dominant_origin);
  EXPECT_FALSE(edges[1].dominant_origin);
}

TEST(EdgeList, CountsReconcile) {
  Rng rng(35);
  DenseMatrix kappa = DenseMatrix::identity(10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      if (i != j && rng.uniform() < 0.3) kappa(i, j) = rng.normal();
  const ConcentrationMatrix k = from_kappa(kappa);
  const DominanceResult r = select_dominant(k);
  const auto edges = edge_list(k, r.dominant);
  std::size_t total = 0, from_dominant = 0;
  for (std::size_t c : k.connections) total += c;
  for (std::size_t j : r.dominant) from_dominant += k.connections[j];
  EXPECT_EQ(edges.size(), total);
  EXPECT_EQ(static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(),
                                                   [](const Edge& e) { return e.dominant_origin; })),
            from_dominant);
  EXPECT_LE(from_dominant, total);
  for (std::size_t e = 1; e < edges.size(); ++e) EXPECT_GE(std::abs(edges[e - 1].weight), std::abs(edges[e].weight));
}

TEST(Dot, DoubleCirclesAndEscaping) {
  DenseMatrix kappa = DenseMatrix::identity(4);
  kappa(2, 0) = -1.0;
  kappa(3, 1) = 0.5;
  ConcentrationMatrix k = from_kappa(kappa);
  k.ids[1] = {"we\"ird", "x"};
  const auto edges = edge_list(k, {0, 1});
  const std::string dot = to_dot({k.ids[0], k.ids[1]}, edges);
  EXPECT_EQ(count_of(dot, "doublecircle"), 2u);
  EXPECT_EQ(count_of(dot, "->"), 2u);
  EXPECT_NE(dot.find("\"we\\\"ird:x\""), std::string::npos);
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_EQ(dot.back(), '\n');
}

TEST(Dot, NoEdgesStillValid) {
  const std::string dot = to_dot({SeriesId{"a", "x"}}, {});
  EXPECT_EQ(dot, "digraph dominant_drivers {\n  rankdir=LR;\n  \"a:x\" [shape=doublecircle];\n}\n");
}

TEST(NormsCsv, OneRowPerSeriesDescending) {
  DenseMatrix kappa = DenseMatrix::identity(5);
  for (std::size_t i = 1; i < 5; ++i) kappa(i, 2) = -0.7;
  const ConcentrationMatrix k = from_kappa(kappa);
  const DominanceResult r = select_dominant(k);
  const io::CsvTable t = io::parse_csv(norms_csv(k, r));
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[0][1], "s2:x");
  EXPECT_EQ(t.rows[0][8], "1");
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& row : t.rows) {
    const double v = *io::parse_double(row[2]);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

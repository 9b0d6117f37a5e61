#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "doctest.h"
#include "qcspharm/error.hpp"
#include "qcspharm/features.hpp"
#include "qcspharm/serialize.hpp"
#include "support.hpp"

using namespace qcs;

namespace {

// Two-sided Student tail by direct integration of the density.
double oracle_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  auto stats = [](const std::vector<double>& x, long double& mean, long double& ss) {
    mean = 0.0L;
    for (double v : x) mean += v;
    mean /= x.size();
    ss = 0.0L;
    for (double v : x) ss += (v - mean) * (v - mean);
  };
  long double ma, sa, mb, sb;
  stats(a, ma, sa);
  stats(b, mb, sb);
  const double nu = static_cast<double>(a.size() + b.size() - 2);
  const long double s2 = (sa + sb) / nu;
  const double t = static_cast<double>((ma - mb) / std::sqrt(s2 * (1.0L / a.size() + 1.0L / b.size())));
  const double logc = std::lgamma(0.5 * (nu + 1)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  auto density = [&](double x) { return std::exp(logc - 0.5 * (nu + 1) * std::log1p(x * x / nu)); };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double at = std::abs(t);
  const double tail = integrator.integrate([&](double u) { return density(at + u); }, 0.0,
                                           std::numeric_limits<double>::infinity(), 1e-15);
  return 2.0 * tail;
}

std::vector<double> draw(std::mt19937_64& rng, int n, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("t-test p-values agree with numeric integration of the t density") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> size(3, 50);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  for (int k = 0; k < 200; ++k) {
    const auto a = draw(rng, size(rng), 0.0, 1.0);
    const auto b = draw(rng, size(rng), shift(rng), 1.3);
    const auto r = two_sample_ttest(a, b);
    CHECK_FALSE(r.degenerate);
    CHECK(std::abs(r.p - oracle_pvalue(a, b)) <= 1e-10);
  }
}

TEST_CASE("t statistic matches a textbook example") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{3, 4, 5, 6, 7};
  const auto r = two_sample_ttest(a, b);
  // means differ by 2, pooled variance 2.5, se = 1
  CHECK(r.t == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(r.p == doctest::Approx(oracle_pvalue(a, b)).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.0805).epsilon(1e-3));
}

TEST_CASE("swapping groups leaves p unchanged and negates t") {
  std::mt19937_64 rng(52);
  const auto a = draw(rng, 7, 0.0, 1.0), b = draw(rng, 11, 0.5, 1.0);
  const auto ab = two_sample_ttest(a, b), ba = two_sample_ttest(b, a);
  CHECK(ab.p == ba.p);
  CHECK(ab.t == -ba.t);
}

TEST_CASE("zero pooled variance is flagged degenerate") {
  const std::vector<double> a{2, 2, 2}, b{2, 2, 2, 2}, c{3, 3, 3};
  const auto same = two_sample_ttest(a, b);
  CHECK(same.degenerate);
  CHECK(same.p == 1.0);
  const auto diff = two_sample_ttest(a, c);
  CHECK(diff.degenerate);
  CHECK(diff.p == 0.0);
  CHECK_THROWS_AS(two_sample_ttest(std::vector<double>{1.0}, c), Error);
}

TEST_CASE("bagged p equals brute-force leave-one-out recomputation exactly") {
  std::mt19937_64 rng(53);
  const std::vector<int> labels{1, -1, 1, -1, 1, -1};
  Eigen::MatrixXd data(6, 5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 5; ++j) data(i, j) = n(rng) + (labels[i] == 1 ? 0.4 * j : 0.0);
  }
  data.col(4).setConstant(7.0);  // zero variance everywhere
  const auto loo = leave_one_out_pvalues(data, labels);
  CHECK(loo.rows() == 6);
  const auto p = bagged_ttest(data, labels);
  for (int j = 0; j < 5; ++j) {
    double best = 1.0;
    for (int r = 0; r < 6; ++r) {
      std::vector<double> a, b;
      for (int i = 0; i < 6; ++i) {
        if (i != r) (labels[i] == 1 ? a : b).push_back(data(i, j));
      }
      const auto t = two_sample_ttest(a, b);
      const double pr = t.degenerate ? 1.0 : t.p;
      CHECK(loo(r, j) == pr);
      best = std::min(best, pr);
    }
    CHECK(p[j] == best);
  }
  CHECK(p[4] == 1.0);
}

TEST_CASE("bagged p is never above any leave-one-out p") {
  std::mt19937_64 rng(54);
  std::vector<int> labels;
  Eigen::MatrixXd data(20, 30);
  std::normal_distribution<double> n;
  for (int i = 0; i < 20; ++i) {
    labels.push_back(i < 10 ? 1 : -1);
    for (int j = 0; j < 30; ++j) data(i, j) = n(rng) + (i < 10 ? 0.05 * j : 0.0);
  }
  const auto loo = leave_one_out_pvalues(data, labels);
  const auto p = bagged_ttest(data, labels);
  for (int j = 0; j < 30; ++j) {
    for (int r = 0; r < 20; ++r) CHECK(p[j] <= loo(r, j));
    CHECK(p[j] >= 0.0);
    CHECK(p[j] <= 1.0);
  }
  // deterministic
  CHECK(bagged_ttest(data, labels) == p);
}

TEST_CASE("leave-one-out needs three rows per class and valid labels") {
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(5, 2);
  CHECK_THROWS_AS(leave_one_out_pvalues(data, {1, 1, 1, -1, -1}), Error);
  CHECK_THROWS_AS(leave_one_out_pvalues(data, {1, 1, 1, -1, 0}), Error);
  CHECK_THROWS_AS(leave_one_out_pvalues(data, {1, 1, 1, -1}), Error);
}

TEST_CASE("selection keeps columns at or below the cut and grows with it") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(200);
  for (auto& x : p) x = u(rng);
  p[3] = 0.05;
  const auto s = select_features(p, 0.05);
  for (int j : s.omega) CHECK(p[static_cast<size_t>(j)] <= 0.05);
  CHECK(std::find(s.omega.begin(), s.omega.end(), 3) != s.omega.end());
  size_t expected = 0;
  for (double x : p) expected += x <= 0.05;
  CHECK(s.omega.size() == expected);
  CHECK(select_features({0.0005, 0.02, 0.3}, 0.001).omega == std::vector<int>{0});
  CHECK(select_features({0.0005, 0.02, 0.3}, 0.5).omega == std::vector<int>{0, 1, 2});
  CHECK(std::is_sorted(s.omega.begin(), s.omega.end()));
  size_t prev = 0;
  for (double cut : {0.001, 0.01, 0.1, 0.5, 0.9}) {
    const auto sel = select_features(p, cut);
    CHECK(sel.omega.size() >= prev);
    prev = sel.omega.size();
  }
  CHECK_THROWS_AS(select_features(p, 0.0), Error);
  CHECK_THROWS_AS(select_features(p, 1.0), Error);
}

TEST_CASE("schema widths, tags and block boundaries") {
  const FeatureSchema full{8000, 30};
  CHECK(full.spharm_count() == 5766);
  CHECK(full.width() == 13767);
  CHECK(full.volume_column() == 13766);
  CHECK(schema_from_tag(full.tag()) == full);
  CHECK_THROWS_AS(schema_from_tag("qcs-features/v2;N=1;L=1"), Error);
  CHECK_THROWS_AS(schema_from_tag("qcs-features/v1;N=1;L=1junk"), Error);

  const FeatureSchema s{10, 2};
  CHECK(s.width() == 10 + 54 + 1);
  CHECK(block_of(s, 0) == FeatureBlock::Shape);
  CHECK(block_of(s, 9) == FeatureBlock::Shape);
  CHECK(block_of(s, 10) == FeatureBlock::Spharm);
  CHECK(block_of(s, 63) == FeatureBlock::Spharm);
  CHECK(block_of(s, 64) == FeatureBlock::Volume);
  CHECK_THROWS_AS(block_of(s, 65), Error);
  const auto names = s.column_names();
  CHECK(names.size() == 65);
  CHECK(names.front() == "e0");
  CHECK(names[10] == "r0");
  CHECK(names.back() == "vol");

  const auto c = block_counts(s, {0, 3, 10, 11, 64});
  CHECK(c.shape == 2);
  CHECK(c.spharm == 2);
  CHECK(c.volume == 1);
  CHECK(c.total() == 5);
}

TEST_CASE("SPHARM block order is l-major, x y z, real then imaginary") {
  std::mt19937_64 rng(56);
  const auto coeffs = test::random_coeffs(3, rng);
  const auto v = spharm_block(coeffs);
  REQUIRE(v.size() == 6 * 16);
  for (int l = 0; l <= 3; ++l) {
    for (int m = -l; m <= l; ++m) {
      const int base = 6 * coeff_index(l, m);
      for (int k = 0; k < 3; ++k) {
        CHECK(v[base + 2 * k] == coeffs(l, m)[k].real());
        CHECK(v[base + 2 * k + 1] == coeffs(l, m)[k].imag());
      }
    }
  }
  const FeatureSchema schema{4, 3};
  const auto row = assemble_feature_vector({1, 2, 3, 4}, coeffs, -0.03, schema);
  CHECK(row.size() == schema.width());
  CHECK(row[2] == 3.0);
  CHECK(row.segment(4, 96) == v);
  CHECK(row[schema.volume_column()] == -0.03);
  CHECK_THROWS_AS(assemble_feature_vector({1, 2, 3}, coeffs, 0.0, schema), Error);
}

TEST_CASE("restriction keeps rows, labels and ids") {
  FeatureMatrix m;
  m.schema = FeatureSchema{2, 0};
  m.data = Eigen::MatrixXd::Random(3, m.schema.width());
  m.labels = {1, -1, 1};
  m.ids = {"a", "b", "c"};
  const auto r = restrict(m, {0, 8});
  CHECK(r.cols() == 2);
  CHECK(r.rows() == 3);
  CHECK(r.ids == m.ids);
  CHECK(r.labels == m.labels);
  CHECK(r.data.col(1) == m.data.col(8));
  CHECK_THROWS_AS(restrict_columns(m.data, {9}), Error);
}

TEST_CASE("permuting shape values permutes only the shape block") {
  std::mt19937_64 rng(57);
  const auto coeffs = test::random_coeffs(2, rng);
  const FeatureSchema schema{3, 2};
  const auto a = assemble_feature_vector({1, 2, 3}, coeffs, 0.1, schema);
  const auto b = assemble_feature_vector({3, 1, 2}, coeffs, 0.1, schema);
  CHECK(a.tail(schema.width() - 3) == b.tail(schema.width() - 3));
  CHECK(b[0] == a[2]);
}

TEST_CASE("feature matrix CSV round trip is exact") {
  FeatureMatrix m;
  m.schema = FeatureSchema{3, 1};
  m.data = Eigen::MatrixXd::Random(4, m.schema.width()) * 1e3;
  m.data(0, 0) = 1.0 / 3.0;
  m.labels = {1, 1, -1, -1};
  m.ids = {"nc_000", "nc_001", "ad_000", "ad_001"};
  const auto back = feature_matrix_from_csv(feature_matrix_to_csv(m));
  CHECK(back.schema == m.schema);
  CHECK(back.data == m.data);
  CHECK(back.labels == m.labels);
  CHECK(back.ids == m.ids);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

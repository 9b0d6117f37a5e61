#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "qcspharm/error.hpp"
#include "qcspharm/features.hpp"

namespace qcs {

namespace {

void moments(const double* x, int n, double& mean, double& ss) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i];
  mean = s / n;
  ss = 0.0;
  for (int i = 0; i < n; ++i) ss += (x[i] - mean) * (x[i] - mean);
}

}  // namespace

TTestResult two_sample_ttest(const double* a, int na, const double* b, int nb) {
  require(na >= 2 && nb >= 2, ErrorCode::TooFewSubjects, "t-test needs at least 2 values per group");
  double ma, ssa, mb, ssb;
  moments(a, na, ma, ssa);
  moments(b, nb, mb, ssb);
  const double dof = na + nb - 2;
  const double pooled = (ssa + ssb) / dof;
  const double scale = std::max(std::abs(ma), std::abs(mb));
  TTestResult r;
  if (pooled == 0.0 || std::sqrt(pooled) <= 1e-12 * scale) {
    r.degenerate = true;
    r.p = std::abs(ma - mb) <= 1e-12 * scale ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p = boost::math::ibeta(0.5 * dof, 0.5, dof / (dof + r.t * r.t));
  return r;
}

TTestResult two_sample_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  return two_sample_ttest(a.data(), static_cast<int>(a.size()), b.data(), static_cast<int>(b.size()));
}

Eigen::MatrixXd leave_one_out_pvalues(const Eigen::MatrixXd& data, const std::vector<int>& labels) {
  const int m = static_cast<int>(data.rows());
  require(static_cast<int>(labels.size()) == m, ErrorCode::LengthMismatch, "one label per row required");
  int pos = 0, neg = 0;
  for (int y : labels) {
    require(y == 1 || y == -1, ErrorCode::InvalidParameter, "labels must be +1 or -1");
    (y == 1 ? pos : neg)++;
  }
  require(pos >= 3 && neg >= 3, ErrorCode::TooFewSubjects, "bagged t-test needs at least 3 rows per class");

  Eigen::MatrixXd out(m, data.cols());
  std::vector<double> ga, gb;
  ga.reserve(static_cast<size_t>(pos));
  gb.reserve(static_cast<size_t>(neg));
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    for (int r = 0; r < m; ++r) {
      ga.clear();
      gb.clear();
      for (int i = 0; i < m; ++i) {
        if (i == r) continue;
        (labels[i] == 1 ? ga : gb).push_back(data(i, j));
      }
      const auto t = two_sample_ttest(ga, gb);
      out(r, j) = t.degenerate ? 1.0 : t.p;
    }
  }
  return out;
}

std::vector<double> bagged_ttest(const Eigen::MatrixXd& data, const std::vector<int>& labels) {
  const Eigen::MatrixXd loo = leave_one_out_pvalues(data, labels);
  std::vector<double> p(static_cast<size_t>(data.cols()));
  for (Eigen::Index j = 0; j < data.cols(); ++j) p[j] = loo.col(j).minCoeff();
  return p;
}

}  // namespace qcs

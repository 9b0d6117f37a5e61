#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcspharm/spharm.hpp"

namespace qcs {

/// Column layout: shape block (one per template vertex) | SPHARM block | volume.
struct FeatureSchema {
  int shape_count = 0;
  int degree_cap = 0;

  int spharm_count() const { return 6 * coeff_count(degree_cap); }
  int volume_column() const { return shape_count + spharm_count(); }
  int width() const { return volume_column() + 1; }
  std::string tag() const;
  std::vector<std::string> column_names() const;

  bool operator==(const FeatureSchema&) const = default;
};

FeatureSchema schema_from_tag(const std::string& tag);

enum class FeatureBlock { Shape, Spharm, Volume };
FeatureBlock block_of(const FeatureSchema& schema, int column);

struct FeatureMatrix {
  FeatureSchema schema;
  Eigen::MatrixXd data;       // rows = subjects
  std::vector<int> labels;    // +1 control / stable, -1 disease / converter
  std::vector<std::string> ids;

  int rows() const { return static_cast<int>(data.rows()); }
  int cols() const { return static_cast<int>(data.cols()); }
};

/// SPHARM block: l-major, m ascending, coordinates x, y, z, real then imaginary.
Eigen::VectorXd spharm_block(const SpharmCoefficients& coeffs);

Eigen::VectorXd assemble_feature_vector(const std::vector<double>& shape_index, const SpharmCoefficients& coeffs,
                                        double volume, const FeatureSchema& schema);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero pooled variance
};

/// Two-sided pooled-variance Student t-test. With zero pooled variance p is 1
/// for equal means and 0 otherwise, flagged degenerate.
TTestResult two_sample_ttest(const double* a, int na, const double* b, int nb);
TTestResult two_sample_ttest(const std::vector<double>& a, const std::vector<double>& b);

/// Row r of the result holds the per-column p-values with row r left out.
/// Degenerate (zero-variance) columns get p = 1.
Eigen::MatrixXd leave_one_out_pvalues(const Eigen::MatrixXd& data, const std::vector<int>& labels);

/// Column-wise minimum of the leave-one-out p-values.
std::vector<double> bagged_ttest(const Eigen::MatrixXd& data, const std::vector<int>& labels);
inline std::vector<double> bagged_ttest(const FeatureMatrix& m) { return bagged_ttest(m.data, m.labels); }

struct SelectionResult {
  std::vector<double> p;
  std::vector<int> omega;
  double p_cut = 0.0;
};

SelectionResult select_features(std::vector<double> p, double p_cut);

/// Column slice of the matrix preserving row order, labels and ids.
FeatureMatrix restrict(const FeatureMatrix& matrix, const std::vector<int>& omega);
Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& data, const std::vector<int>& omega);

struct BlockCounts {
  int shape = 0;
  int spharm = 0;
  int volume = 0;
  int total() const { return shape + spharm + volume; }
};

BlockCounts block_counts(const FeatureSchema& schema, const std::vector<int>& omega);

}  // namespace qcs

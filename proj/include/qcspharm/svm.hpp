#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qcs {

/// Per-column z-scoring learned from training rows; zero-std columns keep std 1.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const;
};

Scaler fit_scaler(const Eigen::MatrixXd& rows);

double rbf_kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double eta);

/// How the configured eta relates to the kernel actually used.
enum class KernelScale {
  None,       // exp(-eta |u - v|^2)
  Dimension,  // exp(-(eta / d) |u - v|^2) for d standardized columns
};

struct SvmOptions {
  double eta = 1.0;
  double C = 1.0;
  double tolerance = 1e-4;
  long max_iterations = 1000000;
  KernelScale kernel_scale = KernelScale::Dimension;
};

struct SvmModel {
  Eigen::MatrixXd support;      // standardized support rows
  Eigen::VectorXd dual_coeffs;  // alpha_i * y_i
  double bias = 0.0;
  double eta = 1.0;  // effective kernel width
  double C = 1.0;
  Scaler scaler;
  std::vector<int> omega;
  std::string schema_tag;
  bool converged = false;
  long iterations = 0;

  /// f(x) for a row already restricted to omega and standardized.
  double decision(const Eigen::VectorXd& standardized) const;
};

struct Prediction {
  int label = 1;
  double decision = 0.0;
};

/// Dual SMO with maximal-violating-pair selection on rows used as given; the
/// returned model has an identity scaler and omega = all columns.
SvmModel train_svm(const Eigen::MatrixXd& rows, const std::vector<int>& labels, double eta, double C,
                   double tolerance = 1e-4, long max_iterations = 1000000);

/// Restricts to omega, standardizes with training statistics and trains.
SvmModel train_classifier(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                          const std::vector<int>& omega, const SvmOptions& options);

/// Full-width feature row in; omega restriction and scaling applied here.
Prediction predict(const SvmModel& model, const Eigen::VectorXd& features);

inline int sign_label(double decision) { return decision >= 0.0 ? 1 : -1; }

std::string model_to_json(const SvmModel& model);
SvmModel model_from_json(const std::string& text);

}  // namespace qcs

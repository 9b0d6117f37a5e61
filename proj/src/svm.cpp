#include "qcspharm/svm.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "qcspharm/error.hpp"
#include "qcspharm/features.hpp"

namespace qcs {

Scaler fit_scaler(const Eigen::MatrixXd& rows) {
  require(rows.rows() >= 2, ErrorCode::TooFewSubjects, "scaler needs at least 2 rows");
  Scaler s;
  s.mean = rows.colwise().mean().transpose();
  s.std.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean[j]).square().mean();
    const double sd = std::sqrt(var);
    s.std[j] = (sd == 0.0 || sd <= 1e-12 * std::abs(s.mean[j])) ? 1.0 : sd;
  }
  return s;
}

Eigen::MatrixXd Scaler::apply(const Eigen::MatrixXd& rows) const {
  require(rows.cols() == mean.size(), ErrorCode::SchemaMismatch, "scaler width mismatch");
  return (rows.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

Eigen::VectorXd Scaler::apply_row(const Eigen::VectorXd& row) const {
  require(row.size() == mean.size(), ErrorCode::SchemaMismatch, "scaler width mismatch");
  return (row - mean).array() / std.array();
}

double rbf_kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double eta) {
  require(u.size() == v.size(), ErrorCode::LengthMismatch, "kernel arguments differ in length");
  return std::exp(-eta * (u - v).squaredNorm());
}

double SvmModel::decision(const Eigen::VectorXd& x) const {
  require(x.size() == support.cols(), ErrorCode::SchemaMismatch, "decision input width mismatch");
  double f = bias;
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    f += dual_coeffs[i] * std::exp(-eta * (support.row(i).transpose() - x).squaredNorm());
  }
  return f;
}

SvmModel train_svm(const Eigen::MatrixXd& rows, const std::vector<int>& labels, double eta, double C,
                   double tolerance, long max_iterations) {
  const Eigen::Index n = rows.rows();
  require(static_cast<Eigen::Index>(labels.size()) == n, ErrorCode::LengthMismatch, "one label per row required");
  require(eta > 0 && C > 0 && tolerance > 0, ErrorCode::InvalidParameter, "eta, C and tolerance must be positive");
  require(rows.cols() > 0, ErrorCode::DegenerateData, "no feature columns to train on");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    require(y == 1 || y == -1, ErrorCode::InvalidParameter, "labels must be +1 or -1");
    (y == 1 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, ErrorCode::DegenerateData, "both classes must be present");

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i];
  const Eigen::VectorXd sq = rows.rowwise().squaredNorm();
  Eigen::MatrixXd Q = rows * rows.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Q(i, j) = y[i] * y[j] * std::exp(-eta * std::max(0.0, sq[i] + sq[j] - 2.0 * Q(i, j)));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) Q(i, i) = 1.0;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);
  auto in_up = [&](Eigen::Index t) { return y[t] > 0 ? alpha[t] < C : alpha[t] > 0; };
  auto in_low = [&](Eigen::Index t) { return y[t] > 0 ? alpha[t] > 0 : alpha[t] < C; };
  constexpr double tau = 1e-12;

  SvmModel model;
  long iter = 0;
  for (; iter < max_iterations; ++iter) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i < 0 || j < 0 || gmax - gmin < tolerance) {
      model.converged = true;
      break;
    }
    const double ai = alpha[i], aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - ai, dj = alpha[j] - aj;
    G += Q.col(i) * di + Q.col(j) * dj;
  }
  model.iterations = iter;

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / free : 0.5 * (ub + lb);
  model.bias = -rho;

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 0) sv.push_back(t);
  }
  model.support.resize(static_cast<Eigen::Index>(sv.size()), rows.cols());
  model.dual_coeffs.resize(static_cast<Eigen::Index>(sv.size()));
  for (size_t k = 0; k < sv.size(); ++k) {
    model.support.row(static_cast<Eigen::Index>(k)) = rows.row(sv[k]);
    model.dual_coeffs[static_cast<Eigen::Index>(k)] = alpha[sv[k]] * y[sv[k]];
  }
  model.eta = eta;
  model.C = C;
  model.scaler.mean = Eigen::VectorXd::Zero(rows.cols());
  model.scaler.std = Eigen::VectorXd::Ones(rows.cols());
  model.omega.resize(static_cast<size_t>(rows.cols()));
  for (int k = 0; k < rows.cols(); ++k) model.omega[k] = k;
  return model;
}

SvmModel train_classifier(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                          const std::vector<int>& omega, const SvmOptions& options) {
  require(!omega.empty(), ErrorCode::DegenerateData, "no selected features to train on");
  const Eigen::MatrixXd x = restrict_columns(features, omega);
  const Scaler scaler = fit_scaler(x);
  const double eta = options.kernel_scale == KernelScale::Dimension
                         ? options.eta / static_cast<double>(omega.size())
                         : options.eta;
  SvmModel model = train_svm(scaler.apply(x), labels, eta, options.C, options.tolerance, options.max_iterations);
  model.scaler = scaler;
  model.omega = omega;
  return model;
}

Prediction predict(const SvmModel& model, const Eigen::VectorXd& features) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(model.omega.size()));
  for (size_t k = 0; k < model.omega.size(); ++k) {
    require(model.omega[k] >= 0 && model.omega[k] < features.size(), ErrorCode::SchemaMismatch,
            "feature vector too short for the model's selected columns");
    x[static_cast<Eigen::Index>(k)] = features[model.omega[k]];
  }
  Prediction p;
  p.decision = model.decision(model.scaler.apply_row(x));
  p.label = sign_label(p.decision);
  return p;
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string model_to_json(const SvmModel& m) {
  nlohmann::json j;
  j["eta"] = m.eta;
  j["C"] = m.C;
  j["bias"] = m.bias;
  j["scaler"] = {{"means", to_vec(m.scaler.mean)}, {"stds", to_vec(m.scaler.std)}};
  j["omega"] = m.omega;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.support.rows(); ++i) rows.push_back(to_vec(m.support.row(i).transpose()));
  j["support_rows"] = rows;
  j["dual_coeffs"] = to_vec(m.dual_coeffs);
  j["schema_tag"] = m.schema_tag;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  return j.dump(1);
}

SvmModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SvmModel m;
    m.eta = j.at("eta").get<double>();
    m.C = j.at("C").get<double>();
    m.bias = j.at("bias").get<double>();
    m.scaler.mean = from_vec(j.at("scaler").at("means").get<std::vector<double>>());
    m.scaler.std = from_vec(j.at("scaler").at("stds").get<std::vector<double>>());
    m.omega = j.at("omega").get<std::vector<int>>();
    const auto rows = j.at("support_rows");
    m.dual_coeffs = from_vec(j.at("dual_coeffs").get<std::vector<double>>());
    const Eigen::Index width = static_cast<Eigen::Index>(m.omega.size());
    m.support.resize(static_cast<Eigen::Index>(rows.size()), width);
    for (size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i].get<std::vector<double>>();
      require(static_cast<Eigen::Index>(r.size()) == width, ErrorCode::SchemaMismatch, "support row width mismatch");
      m.support.row(static_cast<Eigen::Index>(i)) = from_vec(r).transpose();
    }
    require(m.dual_coeffs.size() == m.support.rows(), ErrorCode::SchemaMismatch, "dual coefficient count mismatch");
    require(m.scaler.mean.size() == width && m.scaler.std.size() == width, ErrorCode::SchemaMismatch,
            "scaler width mismatch");
    m.schema_tag = j.value("schema_tag", "");
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", 0L);
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace qcs

#include "qcspharm/spharm.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "qcspharm/error.hpp"

namespace qcs {

namespace {

// Normalized associated Legendre values P^m_l(cos theta) * sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!),
// Condon-Shortley phase included, for 0 <= m <= l <= L. Packed as l(l+1)/2 + m.
void normalized_legendre(double z, double s, int L, std::vector<double>& p) {
  p.assign(static_cast<size_t>((L + 1) * (L + 2) / 2), 0.0);
  auto at = [](int l, int m) { return static_cast<size_t>(l * (l + 1) / 2 + m); };
  p[0] = 1.0 / std::sqrt(4.0 * M_PI);
  for (int m = 1; m <= L; ++m) {
    p[at(m, m)] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * p[at(m - 1, m - 1)];
  }
  for (int m = 0; m < L; ++m) p[at(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * z * p[at(m, m)];
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      double a_prev = std::sqrt((4.0 * (l - 1) * (l - 1) - 1.0) /
                                (static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m));
      p[at(l, m)] = a * (z * p[at(l - 1, m)] - p[at(l - 2, m)] / a_prev);
    }
  }
}

struct Trig {
  double z, s, cphi, sphi;
};

Trig trig_from_unit(const Vec3& v) {
  Vec3 u = v.normalized();
  double s = std::hypot(u.x(), u.y());
  Trig t{u.z(), s, 1.0, 0.0};
  if (s > 0.0) {
    t.cphi = u.x() / s;
    t.sphi = u.y() / s;
  }
  return t;
}

void complex_basis(const Trig& t, int L, Complex* out) {
  thread_local std::vector<double> p;
  normalized_legendre(t.z, t.s, L, p);
  const Complex step(t.cphi, t.sphi);
  Complex phase(1.0, 0.0);
  for (int m = 0; m <= L; ++m) {
    for (int l = m; l <= L; ++l) {
      Complex y = p[static_cast<size_t>(l * (l + 1) / 2 + m)] * phase;
      out[coeff_index(l, m)] = y;
      if (m > 0) out[coeff_index(l, -m)] = ((m & 1) ? -1.0 : 1.0) * std::conj(y);
    }
    phase *= step;
  }
}

void real_basis(const Trig& t, int L, double* out) {
  thread_local std::vector<double> p;
  normalized_legendre(t.z, t.s, L, p);
  const Complex step(t.cphi, t.sphi);
  Complex phase(1.0, 0.0);
  for (int m = 0; m <= L; ++m) {
    const double sign = (m & 1) ? -std::sqrt(2.0) : std::sqrt(2.0);
    for (int l = m; l <= L; ++l) {
      double pl = p[static_cast<size_t>(l * (l + 1) / 2 + m)];
      if (m == 0) {
        out[coeff_index(l, 0)] = pl;
      } else {
        out[coeff_index(l, m)] = sign * pl * phase.real();
        out[coeff_index(l, -m)] = sign * pl * phase.imag();
      }
    }
    phase *= step;
  }
}

// sqrt(lambda_max / lambda_min) of R^T R by power iteration; R upper triangular.
double condition_estimate(const Eigen::MatrixXd& r) {
  const Eigen::Index n = r.cols();
  if (n == 0) return 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i, i) == 0.0) return std::numeric_limits<double>::infinity();
  }
  const Eigen::MatrixXd upper = r.triangularView<Eigen::Upper>();
  const Eigen::MatrixXd lower = upper.transpose();
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
  double big = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd w = upper.transpose() * (upper * v);
    big = w.norm();
    v = w / big;
  }
  v = Eigen::VectorXd::LinSpaced(n, 2.0, 1.0).normalized();
  double inv_small = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(v);
    Eigen::VectorXd w = upper.triangularView<Eigen::Upper>().solve(y);
    inv_small = w.norm();
    if (!std::isfinite(inv_small)) return std::numeric_limits<double>::infinity();
    v = w / inv_small;
  }
  return std::sqrt(big * inv_small);
}

}  // namespace

SpharmCoefficients::SpharmCoefficients(int degree_cap)
    : degree_cap_(degree_cap), data_(static_cast<size_t>(coeff_count(degree_cap)), CVec3::Zero()) {
  require(degree_cap >= 0, ErrorCode::InvalidParameter, "degree cap must be non-negative");
}

SpharmCoefficients::SpharmCoefficients(int degree_cap, std::vector<CVec3> data)
    : degree_cap_(degree_cap), data_(std::move(data)) {
  require(degree_cap >= 0, ErrorCode::InvalidParameter, "degree cap must be non-negative");
  require(data_.size() == static_cast<size_t>(coeff_count(degree_cap)), ErrorCode::SchemaMismatch,
          "coefficient count does not match degree cap");
}

Eigen::MatrixX3d SpharmCoefficients::real_form() const {
  Eigen::MatrixX3d a(size(), 3);
  const double r2 = std::sqrt(2.0);
  for (int l = 0; l <= degree_cap_; ++l) {
    for (int k = 0; k < 3; ++k) a(coeff_index(l, 0), k) = (*this)(l, 0)[k].real();
    for (int m = 1; m <= l; ++m) {
      const double sign = (m & 1) ? -1.0 : 1.0;
      for (int k = 0; k < 3; ++k) {
        Complex v = 0.5 * ((*this)(l, -m)[k] + sign * std::conj((*this)(l, m)[k]));
        a(coeff_index(l, m), k) = r2 * v.real();
        a(coeff_index(l, -m), k) = r2 * v.imag();
      }
    }
  }
  return a;
}

SpharmCoefficients SpharmCoefficients::from_real_form(int degree_cap, const Eigen::MatrixX3d& a) {
  require(a.rows() == coeff_count(degree_cap), ErrorCode::SchemaMismatch,
          "real coefficient count does not match degree cap");
  SpharmCoefficients c(degree_cap);
  const double inv_r2 = 1.0 / std::sqrt(2.0);
  for (int l = 0; l <= degree_cap; ++l) {
    for (int k = 0; k < 3; ++k) c(l, 0)[k] = a(coeff_index(l, 0), k);
    for (int m = 1; m <= l; ++m) {
      const double sign = (m & 1) ? -1.0 : 1.0;
      for (int k = 0; k < 3; ++k) {
        double ap = a(coeff_index(l, m), k), am = a(coeff_index(l, -m), k);
        c(l, m)[k] = sign * Complex(ap, -am) * inv_r2;
        c(l, -m)[k] = Complex(ap, am) * inv_r2;
      }
    }
  }
  return c;
}

double SpharmCoefficients::reality_defect() const {
  double worst = 0.0;
  for (int l = 0; l <= degree_cap_; ++l) {
    for (int m = 0; m <= l; ++m) {
      const double sign = (m & 1) ? -1.0 : 1.0;
      for (int k = 0; k < 3; ++k) {
        worst = std::max(worst, std::abs((*this)(l, -m)[k] - sign * std::conj((*this)(l, m)[k])));
      }
    }
  }
  return worst;
}

SpharmCoefficients SpharmCoefficients::rotated(const Mat3& rotation) const {
  SpharmCoefficients out = *this;
  const Eigen::Matrix3cd r = rotation.cast<Complex>();
  for (auto& c : out.data_) c = r * c;
  return out;
}

SpharmCoefficients SpharmCoefficients::translated(const Vec3& offset) const {
  SpharmCoefficients out = *this;
  out.data_[0] += (offset * std::sqrt(4.0 * M_PI)).cast<Complex>();
  return out;
}

Vec3 SpharmCoefficients::center() const { return data_.at(0).real() / std::sqrt(4.0 * M_PI); }

SpharmCoefficients operator+(const SpharmCoefficients& a, const SpharmCoefficients& b) {
  require(a.degree_cap_ == b.degree_cap_, ErrorCode::SchemaMismatch, "degree caps differ");
  SpharmCoefficients out = a;
  for (size_t i = 0; i < out.data_.size(); ++i) out.data_[i] += b.data_[i];
  return out;
}

SpharmCoefficients operator-(const SpharmCoefficients& a, const SpharmCoefficients& b) {
  require(a.degree_cap_ == b.degree_cap_, ErrorCode::SchemaMismatch, "degree caps differ");
  SpharmCoefficients out = a;
  for (size_t i = 0; i < out.data_.size(); ++i) out.data_[i] -= b.data_[i];
  return out;
}

SpharmCoefficients operator*(double s, const SpharmCoefficients& a) {
  SpharmCoefficients out = a;
  for (auto& c : out.data_) c *= s;
  return out;
}

double SpharmCoefficients::norm() const {
  double acc = 0.0;
  for (const auto& c : data_) acc += c.squaredNorm();
  return std::sqrt(acc);
}

BasisRow eval_basis(double theta, double phi, int degree_cap) {
  require(degree_cap >= 0, ErrorCode::InvalidParameter, "degree cap must be non-negative");
  require(theta >= 0.0 && theta <= M_PI, ErrorCode::InvalidParameter, "theta outside [0, pi]");
  require(phi >= 0.0 && phi < 2.0 * M_PI, ErrorCode::InvalidParameter, "phi outside [0, 2 pi)");
  BasisRow row(static_cast<size_t>(coeff_count(degree_cap)));
  complex_basis({std::cos(theta), std::sin(theta), std::cos(phi), std::sin(phi)}, degree_cap, row.data());
  return row;
}

void eval_basis(const Vec3& unit, int degree_cap, Complex* out) {
  complex_basis(trig_from_unit(unit), degree_cap, out);
}

void eval_real_basis(const Vec3& unit, int degree_cap, double* out) {
  real_basis(trig_from_unit(unit), degree_cap, out);
}

Eigen::MatrixXd real_basis_matrix(const std::vector<Vec3>& points, int degree_cap) {
  const int n = coeff_count(degree_cap);
  // Row-major fill, then transpose into the column-major result.
  Eigen::MatrixXd bt(n, static_cast<Eigen::Index>(points.size()));
  for (size_t i = 0; i < points.size(); ++i) eval_real_basis(points[i], degree_cap, bt.col(static_cast<Eigen::Index>(i)).data());
  return bt.transpose();
}

FitResult fit_positions(const std::vector<Vec3>& positions, const std::vector<Vec3>& directions, int degree_cap,
                        double max_condition) {
  require(positions.size() == directions.size(), ErrorCode::LengthMismatch,
          "one parameter point per vertex required");
  const int n = coeff_count(degree_cap);
  require(static_cast<int>(positions.size()) >= n, ErrorCode::InvalidParameter,
          "fit needs at least (L+1)^2 = " + std::to_string(n) + " samples, got " +
              std::to_string(positions.size()));
  Eigen::MatrixXd basis = real_basis_matrix(directions, degree_cap);
  Eigen::MatrixX3d rhs(static_cast<Eigen::Index>(positions.size()), 3);
  for (size_t i = 0; i < positions.size(); ++i) rhs.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  FitResult result;
  Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  result.condition_estimate = condition_estimate(r);
  if (!(result.condition_estimate <= max_condition)) {
    fail(ErrorCode::IllConditioned, "basis condition estimate " + std::to_string(result.condition_estimate) +
                                        " exceeds " + std::to_string(max_condition));
  }
  Eigen::MatrixX3d solution = qr.solve(rhs);
  Eigen::MatrixX3d residual = basis * solution - rhs;
  result.residual_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(positions.size()));
  result.coeffs = SpharmCoefficients::from_real_form(degree_cap, solution);
  return result;
}

FitResult fit_coefficients(const TriangleMesh& mesh, const SphericalParam& param, int degree_cap,
                           double max_condition) {
  return fit_positions(mesh.vertices(), param.points, degree_cap, max_condition);
}

std::vector<Vec3> evaluate_surface(const SpharmCoefficients& coeffs, const std::vector<Vec3>& directions,
                                   double imag_tolerance) {
  const int L = coeffs.degree_cap();
  std::vector<Complex> row(static_cast<size_t>(coeff_count(L)));
  std::vector<Vec3> out(directions.size());
  double max_imag = 0.0, max_real = 0.0;
  for (size_t j = 0; j < directions.size(); ++j) {
    eval_basis(directions[j], L, row.data());
    CVec3 acc = CVec3::Zero();
    for (size_t i = 0; i < row.size(); ++i) acc += coeffs.data()[i] * row[i];
    out[j] = acc.real();
    max_imag = std::max(max_imag, acc.imag().cwiseAbs().maxCoeff());
    max_real = std::max(max_real, out[j].cwiseAbs().maxCoeff());
  }
  if (max_imag > imag_tolerance * (1.0 + max_real)) {
    fail(ErrorCode::RealityViolation, "reconstruction has imaginary residue " + std::to_string(max_imag));
  }
  return out;
}

TriangleMesh reconstruct(const SpharmCoefficients& coeffs, const std::vector<Vec3>& directions,
                         std::shared_ptr<const FaceList> faces, double imag_tolerance) {
  return TriangleMesh(evaluate_surface(coeffs, directions, imag_tolerance), std::move(faces));
}

SpharmFitter::SpharmFitter(const std::vector<Vec3>& directions, int degree_cap)
    : degree_cap_(degree_cap), basis_(real_basis_matrix(directions, degree_cap)) {
  require(basis_.rows() >= basis_.cols(), ErrorCode::InvalidParameter,
          "refit point set has fewer samples than coefficients");
  qr_.compute(basis_);
}

SpharmCoefficients SpharmFitter::fit(const Eigen::MatrixX3d& positions) const {
  require(positions.rows() == basis_.rows(), ErrorCode::LengthMismatch, "refit sample count mismatch");
  return SpharmCoefficients::from_real_form(degree_cap_, qr_.solve(positions));
}

std::string coefficients_to_json(const SpharmCoefficients& coeffs) {
  nlohmann::json j;
  j["L"] = coeffs.degree_cap();
  j["ordering"] = "l-major";
  j["ordering_version"] = 1;
  auto& data = j["data"] = nlohmann::json::array();
  for (const auto& c : coeffs.data()) {
    data.push_back({c[0].real(), c[0].imag(), c[1].real(), c[1].imag(), c[2].real(), c[2].imag()});
  }
  return j.dump();
}

SpharmCoefficients coefficients_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("ordering").get<std::string>() != "l-major") {
      fail(ErrorCode::SchemaMismatch, "unsupported coefficient ordering");
    }
    int L = j.at("L").get<int>();
    std::vector<CVec3> data;
    for (const auto& row : j.at("data")) {
      CVec3 c;
      for (int k = 0; k < 3; ++k) c[k] = Complex(row.at(2 * k).get<double>(), row.at(2 * k + 1).get<double>());
      data.push_back(c);
    }
    return SpharmCoefficients(L, std::move(data));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("invalid coefficient JSON: ") + e.what());
  }
}

}  // namespace qcs

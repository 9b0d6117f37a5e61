#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qcspharm/mesh.hpp"
#include "qcspharm/sphere_param.hpp"

namespace qcs {

using Complex = std::complex<double>;
using CVec3 = Eigen::Vector3cd;

constexpr int coeff_count(int degree_cap) { return (degree_cap + 1) * (degree_cap + 1); }
/// l-major ordering, m ascending from -l to l.
constexpr int coeff_index(int l, int m) { return l * l + l + m; }

/// Complex 3-vector coefficients r^m_l for l <= L, stored in l-major order.
class SpharmCoefficients {
 public:
  SpharmCoefficients() = default;
  explicit SpharmCoefficients(int degree_cap);
  SpharmCoefficients(int degree_cap, std::vector<CVec3> data);

  int degree_cap() const { return degree_cap_; }
  int size() const { return static_cast<int>(data_.size()); }
  const std::vector<CVec3>& data() const { return data_; }

  const CVec3& operator()(int l, int m) const { return data_[static_cast<size_t>(coeff_index(l, m))]; }
  CVec3& operator()(int l, int m) { return data_[static_cast<size_t>(coeff_index(l, m))]; }

  /// Coefficients in the real orthonormal basis, one column per coordinate.
  Eigen::MatrixX3d real_form() const;
  static SpharmCoefficients from_real_form(int degree_cap, const Eigen::MatrixX3d& real);

  /// Largest violation of r^{-m}_l = (-1)^m conj(r^m_l).
  double reality_defect() const;

  /// Object-space transform: every coefficient 3-vector multiplied by `rotation`.
  SpharmCoefficients rotated(const Mat3& rotation) const;
  /// Adds `offset` to the surface (degree-0 term only).
  SpharmCoefficients translated(const Vec3& offset) const;
  /// Surface position carried by the degree-0 term (the sphere-average point).
  Vec3 center() const;

  friend SpharmCoefficients operator+(const SpharmCoefficients& a, const SpharmCoefficients& b);
  friend SpharmCoefficients operator-(const SpharmCoefficients& a, const SpharmCoefficients& b);
  friend SpharmCoefficients operator*(double s, const SpharmCoefficients& a);

  /// sqrt(sum |r|^2) over all coefficients and coordinates.
  double norm() const;

 private:
  int degree_cap_ = -1;
  std::vector<CVec3> data_;
};

using BasisRow = std::vector<Complex>;

/// Orthonormal complex spherical harmonics (4 pi normalization, Condon-Shortley
/// phase) for all (l, m) with l <= L. Throws InvalidParameter for angles
/// outside theta in [0, pi], phi in [0, 2 pi).
BasisRow eval_basis(double theta, double phi, int degree_cap);

/// Same basis evaluated from a unit direction, written into `out` (size (L+1)^2).
void eval_basis(const Vec3& unit, int degree_cap, Complex* out);
/// Real orthonormal basis S^m_l with the same ordering.
void eval_real_basis(const Vec3& unit, int degree_cap, double* out);
Eigen::MatrixXd real_basis_matrix(const std::vector<Vec3>& points, int degree_cap);

struct FitResult {
  SpharmCoefficients coeffs;
  double residual_rms = 0.0;
  double condition_estimate = 0.0;
};

/// Least-squares fit of vertex positions against the basis sampled at the
/// parametrization. Throws InvalidParameter when underdetermined and
/// IllConditioned when the condition estimate exceeds `max_condition`.
FitResult fit_coefficients(const TriangleMesh& mesh, const SphericalParam& param, int degree_cap,
                           double max_condition = 1e8);
FitResult fit_positions(const std::vector<Vec3>& positions, const std::vector<Vec3>& directions,
                        int degree_cap, double max_condition = 1e8);

/// Evaluates the expansion at each sample direction. Throws RealityViolation
/// when the discarded imaginary part exceeds `imag_tolerance` relative to the
/// surface scale.
std::vector<Vec3> evaluate_surface(const SpharmCoefficients& coeffs, const std::vector<Vec3>& directions,
                                   double imag_tolerance = 1e-8);
TriangleMesh reconstruct(const SpharmCoefficients& coeffs, const std::vector<Vec3>& directions,
                         std::shared_ptr<const FaceList> faces, double imag_tolerance = 1e-8);

/// Repeated refits against one fixed point set share a single QR factorization.
class SpharmFitter {
 public:
  SpharmFitter(const std::vector<Vec3>& directions, int degree_cap);
  int degree_cap() const { return degree_cap_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  SpharmCoefficients fit(const Eigen::MatrixX3d& positions) const;

 private:
  int degree_cap_;
  Eigen::MatrixXd basis_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

std::string coefficients_to_json(const SpharmCoefficients& coeffs);
SpharmCoefficients coefficients_from_json(const std::string& text);

}  // namespace qcs

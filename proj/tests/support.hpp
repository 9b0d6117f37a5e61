#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qcspharm/mesh.hpp"
#include "qcspharm/spharm.hpp"
#include "qcspharm/sphere_sampling.hpp"

namespace qcs::test {

inline TriangleMesh ellipsoid(double a, double b, double c, int level) {
  const TriangleMesh s = make_icosphere(level);
  std::vector<Vec3> v;
  for (const auto& p : s.vertices()) v.emplace_back(a * p.x(), b * p.y(), c * p.z());
  return TriangleMesh(std::move(v), s.shared_faces());
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

// Ellipsoid (1.6, 1.0, 0.7) plus decaying random real-form perturbations.
inline SpharmCoefficients random_coeffs(int degree_cap, std::mt19937_64& rng, double scale = 0.1) {
  const auto dirs = fibonacci_sphere(coeff_count(degree_cap) * 3);
  std::vector<Vec3> pos;
  for (const auto& u : dirs) pos.emplace_back(1.6 * u.x(), 1.0 * u.y(), 0.7 * u.z());
  Eigen::MatrixX3d real = fit_positions(pos, dirs, degree_cap).coeffs.real_form();
  std::normal_distribution<double> n;
  for (int l = 0; l <= degree_cap; ++l) {
    for (int m = -l; m <= l; ++m) {
      for (int k = 0; k < 3; ++k) real(coeff_index(l, m), k) += scale * n(rng) / (l + 1);
    }
  }
  return SpharmCoefficients::from_real_form(degree_cap, real);
}

inline double max_abs_diff(const SpharmCoefficients& a, const SpharmCoefficients& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, (a.data()[i] - b.data()[i]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace qcs::test

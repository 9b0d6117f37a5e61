#include "qcspharm/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "qcspharm/error.hpp"
#include "qcspharm/spharm.hpp"
#include "qcspharm/sphere_sampling.hpp"

namespace qcs {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

double bump_profile(const CohortSpec& spec, const Vec3& unit) {
  const double angle = std::acos(std::clamp(unit.dot(spec.bump_center.normalized()), -1.0, 1.0));
  if (angle >= spec.bump_radius) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * angle / spec.bump_radius));
}

}  // namespace

void CohortSpec::validate() const {
  require(subjects_per_class >= 3, ErrorCode::InvalidParameter, "subjects_per_class must be >= 3");
  require(axes.minCoeff() > 0, ErrorCode::InvalidParameter, "ellipsoid axes must be positive");
  require(bump_center.norm() > 0, ErrorCode::InvalidParameter, "bump center must be nonzero");
  require(bump_radius > 0 && bump_radius < std::numbers::pi, ErrorCode::InvalidParameter,
          "bump radius must lie in (0, pi)");
  require(amplitude >= 0 && amplitude < 1, ErrorCode::InvalidParameter, "amplitude must lie in [0, 1)");
  require(volume_scale > 0, ErrorCode::InvalidParameter, "volume scale must be positive");
  require(noise_std >= 0, ErrorCode::InvalidParameter, "noise std must be >= 0");
  require(noise_degree >= 0, ErrorCode::InvalidParameter, "noise degree must be >= 0");
  require(vertex_count >= 12, ErrorCode::InvalidParameter, "vertex count must be >= 12");
}

double synthetic_radius(const CohortSpec& spec, int label, const Vec3& unit) {
  const double base = 1.0 / std::sqrt((unit.array() / spec.axes.array()).square().sum());
  if (label == 1) return base;
  return std::cbrt(spec.volume_scale) * base * (1.0 - spec.amplitude * bump_profile(spec, unit));
}

std::uint64_t subject_seed(std::uint64_t master, int index) {
  return splitmix64(splitmix64(master) + static_cast<std::uint64_t>(index));
}

SyntheticSubject generate_subject(const CohortSpec& spec, int label, std::uint64_t seed) {
  spec.validate();
  require(label == 1 || label == -1, ErrorCode::InvalidParameter, "label must be +1 or -1");
  std::mt19937_64 rng(seed);

  // Band-limited radial noise with a red spectrum, RMS noise_std over the sphere.
  const int cap = spec.noise_degree;
  std::vector<double> noise(static_cast<size_t>(coeff_count(cap)), 0.0);
  if (spec.noise_std > 0) {
    double total = 0.0;
    for (int l = 0; l <= cap; ++l) total += (2 * l + 1) / double((l + 1) * (l + 1));
    std::normal_distribution<double> g;
    for (int l = 0; l <= cap; ++l) {
      const double sigma = spec.noise_std / (l + 1) / std::sqrt(total);
      for (int m = -l; m <= l; ++m) noise[coeff_index(l, m)] = sigma * g(rng);
    }
  }

  const Mat3 sampling = random_rotation(rng);
  std::vector<Vec3> dirs = fibonacci_sphere(spec.vertex_count);
  for (auto& d : dirs) d = (sampling * d).normalized();
  FaceList faces = sphere_hull(dirs);

  SyntheticSubject s;
  s.label = label;
  s.seed = seed;
  s.rotation = random_rotation(rng);
  std::vector<double> basis(noise.size());
  std::vector<Vec3> verts(dirs.size());
  for (size_t i = 0; i < dirs.size(); ++i) {
    double n = 0.0;
    if (spec.noise_std > 0) {
      eval_real_basis(dirs[i], cap, basis.data());
      for (size_t k = 0; k < basis.size(); ++k) n += noise[k] * basis[k];
    }
    verts[i] = s.rotation * (synthetic_radius(spec, label, dirs[i]) * (1.0 + n) * dirs[i]);
  }
  s.mesh = TriangleMesh(std::move(verts), std::move(faces));
  return s;
}

std::vector<int> cap_mask(const std::vector<Vec3>& directions, const Vec3& center, double radius) {
  const Vec3 c = center.normalized();
  std::vector<int> out;
  for (size_t i = 0; i < directions.size(); ++i) {
    const double angle = std::acos(std::clamp(directions[i].normalized().dot(c), -1.0, 1.0));
    if (angle < radius) out.push_back(static_cast<int>(i));
  }
  return out;
}

Cohort generate_cohort(const CohortSpec& spec, const std::vector<Vec3>& template_points) {
  spec.validate();
  Cohort c;
  int index = 0;
  for (int label : {1, -1}) {
    for (int k = 0; k < spec.subjects_per_class; ++k, ++index) {
      auto s = generate_subject(spec, label, subject_seed(spec.seed, index));
      char id[32];
      std::snprintf(id, sizeof id, "%s_%03d", label == 1 ? "nc" : "ad", k);
      s.id = id;
      c.subjects.push_back(std::move(s));
    }
  }
  c.truth.bump_center = spec.bump_center.normalized();
  c.truth.bump_radius = spec.bump_radius;
  c.truth.amplitude = spec.amplitude;
  c.truth.volume_ratio = spec.volume_scale;
  if (spec.amplitude > 0) c.truth.mask = cap_mask(template_points, spec.bump_center, spec.bump_radius);
  return c;
}

}  // namespace qcs

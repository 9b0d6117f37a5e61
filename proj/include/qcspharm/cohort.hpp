#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcspharm/mesh.hpp"

namespace qcs {

struct CohortSpec {
  int subjects_per_class = 30;
  Vec3 axes{1.6, 1.0, 0.75};  // ellipsoid semi-axes
  Vec3 bump_center{0.0, 0.6, 0.8};
  double bump_radius = 0.5;    // angular radius, radians
  double amplitude = 0.15;     // inward bump depth as a fraction of the local radius
  double volume_scale = 0.97;  // class -1 volume relative to class +1
  double noise_std = 0.03;     // relative radial noise, RMS over the sphere
  int noise_degree = 10;
  int vertex_count = 2562;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticSubject {
  std::string id;
  int label = 1;
  std::uint64_t seed = 0;
  TriangleMesh mesh;
  Mat3 rotation = Mat3::Identity();  // object rotation applied after generation
};

struct GroundTruth {
  Vec3 bump_center = Vec3::UnitZ();
  double bump_radius = 0.0;
  double amplitude = 0.0;
  double volume_ratio = 1.0;  // class -1 over class +1, noise excluded
  std::vector<int> mask;      // template-sphere vertices inside the bump (class -1 only)
};

/// Radial function of the noise-free class shape in generation coordinates.
double synthetic_radius(const CohortSpec& spec, int label, const Vec3& unit);

/// Deterministic in (spec, label, subject_seed).
SyntheticSubject generate_subject(const CohortSpec& spec, int label, std::uint64_t subject_seed);

/// Per-subject seed derived from the master seed and the subject's position.
std::uint64_t subject_seed(std::uint64_t master, int index);

struct Cohort {
  std::vector<SyntheticSubject> subjects;  // class +1 first, then class -1
  GroundTruth truth;
};

/// `template_points` receives the ground-truth mask (directions in generation
/// coordinates); may be empty.
Cohort generate_cohort(const CohortSpec& spec, const std::vector<Vec3>& template_points = {});

/// Indices of `directions` within `radius` radians of `center`.
std::vector<int> cap_mask(const std::vector<Vec3>& directions, const Vec3& center, double radius);

}  // namespace qcs

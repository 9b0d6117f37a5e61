#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qcspharm/mesh.hpp"

namespace qcs {

/// Per-vertex unit vectors on S^2. Angles follow theta = arccos(z) in
/// [0, pi] and phi = atan2(y, x) wrapped to [0, 2 pi), with phi = 0 at poles.
struct SphericalParam {
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
  double theta(int i) const;
  double phi(int i) const;
};

std::pair<double, double> spherical_angles(const Vec3& unit);
Vec3 unit_from_angles(double theta, double phi);

struct ParamResult {
  SphericalParam param;
  int iterations = 0;           // area-relaxation iterations performed
  int unfold_iterations = 0;    // Laplacian iterations needed to remove folds
  bool converged = false;       // displacement fell below tolerance
  std::vector<double> distortion_history;  // area distortion after init and each accepted step
};

/// Centroid-centred radial projection followed by tangential relaxation on the
/// sphere. Folds left by the projection are removed with uniform Laplacian
/// steps; the remaining iterations reduce area distortion under a fold guard,
/// halving the step whenever a trial step would fold a triangle or fail to
/// reduce the distortion. Throws ParamFailure if no fold-free state is reached.
ParamResult parametrize_sphere(const TriangleMesh& mesh, int max_iterations, double tolerance);

/// Number of faces whose spherical triangle is not positively oriented.
int check_bijectivity(const std::vector<Vec3>& points, const FaceList& faces);
inline int check_bijectivity(const SphericalParam& param, const FaceList& faces) {
  return check_bijectivity(param.points, faces);
}

/// Sum of signed spherical-triangle areas; 4 pi for a one-to-one embedding.
double total_spherical_area(const std::vector<Vec3>& points, const FaceList& faces);

/// Area-weighted RMS deviation of the (normalized) parameter-to-mesh area
/// ratio from 1, using flat parameter triangles.
double area_distortion(const TriangleMesh& mesh, const std::vector<Vec3>& points);

std::string param_to_json(const SphericalParam& param);
SphericalParam param_from_json(const std::string& text);

}  // namespace qcs

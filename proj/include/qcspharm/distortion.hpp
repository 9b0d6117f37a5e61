#pragma once

#include <vector>

#include "qcspharm/mesh.hpp"

namespace qcs {

struct ShapeIndexWeights {
  double alpha = 0.1;  // mean-curvature difference
  double beta = 0.1;   // Gaussian-curvature difference
  double gamma = 1.0;  // conformality distortion
};

struct Curvatures {
  std::vector<double> mean;   // H, positive on convex regions
  std::vector<double> gauss;  // K
  std::vector<double> vertex_area;
};

/// Mixed Voronoi vertex areas: circumcentric cells in non-obtuse triangles,
/// half / quarter splits of obtuse ones. They partition the surface area.
std::vector<double> vertex_areas(const TriangleMesh& mesh);

/// |mu| of the piecewise-affine map between two meshes on one connectivity, per face.
std::vector<double> face_beltrami_magnitude(const TriangleMesh& source, const TriangleMesh& target);
/// Face values averaged onto vertices with incident-face-area weights (source areas).
std::vector<double> beltrami_magnitude(const TriangleMesh& source, const TriangleMesh& target);

/// Angle-deficit K and cotangent-Laplacian H over mixed Voronoi vertex areas.
Curvatures curvatures(const TriangleMesh& mesh);

struct DistortionField {
  std::vector<double> mu_abs;
  std::vector<double> mean_curvature;
  std::vector<double> gauss_curvature;
  std::vector<double> shape_index;
};

/// E = gamma |mu| + alpha |H0 - Hi| + beta |K0 - Ki| per vertex.
DistortionField shape_index(const TriangleMesh& reference, const TriangleMesh& subject,
                            const ShapeIndexWeights& weights = {});
/// Same combination given precomputed reference curvatures.
DistortionField shape_index(const TriangleMesh& reference, const Curvatures& reference_curvatures,
                            const TriangleMesh& subject, const ShapeIndexWeights& weights = {});

/// (V_subject - V_reference) / V_reference; ZeroVolume when V_reference <= 0.
double volume_distortion(const TriangleMesh& reference, const TriangleMesh& subject);

}  // namespace qcs

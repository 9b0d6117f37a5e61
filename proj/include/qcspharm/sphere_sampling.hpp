#pragma once

#include <vector>

#include "qcspharm/mesh.hpp"

namespace qcs {

/// Fibonacci-lattice point set of exactly `n` unit vectors.
std::vector<Vec3> fibonacci_sphere(int n);

/// Triangulates points lying on a sphere around the origin by their convex
/// hull. Faces are oriented outward. Throws TopologyError if any point fails
/// to appear on the hull (duplicates or points inside the hull).
FaceList sphere_hull(const std::vector<Vec3>& points);

/// Rotation matrix from an axis (any nonzero length) and an angle in radians.
Mat3 axis_angle(const Vec3& axis, double angle);

}  // namespace qcs

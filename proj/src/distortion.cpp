#include "qcspharm/distortion.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "qcspharm/error.hpp"

namespace qcs {

namespace {

void require_same_connectivity(const TriangleMesh& a, const TriangleMesh& b) {
  require(a.vertex_count() == b.vertex_count(), ErrorCode::LengthMismatch, "meshes differ in vertex count");
  if (a.shared_faces() == b.shared_faces()) return;
  require(a.faces() == b.faces(), ErrorCode::LengthMismatch, "meshes do not share connectivity");
}

// Triangle edges p1 - p0, p2 - p0 expressed in an orthonormal frame of its own plane.
Eigen::Matrix2d flat_chart(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  const Vec3 u = p1 - p0, w = p2 - p0;
  const double lu = u.norm();
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  if (lu == 0.0) {
    m(0, 1) = w.norm();
    return m;
  }
  const Vec3 e1 = u / lu;
  const Vec3 n = u.cross(w);
  const double ln = n.norm();
  m(0, 0) = lu;
  m(0, 1) = w.dot(e1);
  m(1, 1) = ln > 0.0 ? w.dot(n.cross(e1) / ln) : 0.0;
  return m;
}

double cot(const Vec3& a, const Vec3& b) {
  const double s = a.cross(b).norm();
  if (s == 0.0) fail(ErrorCode::DegenerateTriangle, "zero-area triangle in cotangent weights");
  return a.dot(b) / s;
}

}  // namespace

std::vector<double> vertex_areas(const TriangleMesh& mesh) {
  std::vector<double> area(static_cast<size_t>(mesh.vertex_count()), 0.0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces()[f];
    const Vec3 p[3] = {mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])};
    const double a = face_area(mesh, f);
    int obtuse = -1;
    for (int k = 0; k < 3; ++k) {
      if ((p[(k + 1) % 3] - p[k]).dot(p[(k + 2) % 3] - p[k]) < 0.0) obtuse = k;
    }
    for (int k = 0; k < 3; ++k) {
      if (obtuse >= 0) {
        area[t[k]] += obtuse == k ? 0.5 * a : 0.25 * a;
        continue;
      }
      const Vec3 e1 = p[(k + 1) % 3] - p[k], e2 = p[(k + 2) % 3] - p[k];
      area[t[k]] += (e1.squaredNorm() * cot(p[k] - p[(k + 2) % 3], p[(k + 1) % 3] - p[(k + 2) % 3]) +
                     e2.squaredNorm() * cot(p[k] - p[(k + 1) % 3], p[(k + 2) % 3] - p[(k + 1) % 3])) /
                    8.0;
    }
  }
  return area;
}

std::vector<double> face_beltrami_magnitude(const TriangleMesh& source, const TriangleMesh& target) {
  require_same_connectivity(source, target);
  std::vector<double> out(static_cast<size_t>(source.face_count()));
  for (int f = 0; f < source.face_count(); ++f) {
    const auto& t = source.faces()[f];
    const Eigen::Matrix2d s = flat_chart(source.vertex(t[0]), source.vertex(t[1]), source.vertex(t[2]));
    if (!(std::abs(s.determinant()) > 0.0)) {
      fail(ErrorCode::DegenerateTriangle, "zero-area source face " + std::to_string(f));
    }
    const Eigen::Matrix2d d = flat_chart(target.vertex(t[0]), target.vertex(t[1]), target.vertex(t[2]));
    const Eigen::Matrix2d j = d * s.inverse();
    const std::complex<double> fz(0.5 * (j(0, 0) + j(1, 1)), 0.5 * (j(1, 0) - j(0, 1)));
    const std::complex<double> fzbar(0.5 * (j(0, 0) - j(1, 1)), 0.5 * (j(1, 0) + j(0, 1)));
    const double num = std::abs(fzbar), den = std::abs(fz);
    out[f] = den > 0.0 ? num / den : 1.0;
  }
  return out;
}

std::vector<double> beltrami_magnitude(const TriangleMesh& source, const TriangleMesh& target) {
  const auto per_face = face_beltrami_magnitude(source, target);
  std::vector<double> sum(static_cast<size_t>(source.vertex_count()), 0.0);
  std::vector<double> weight(sum.size(), 0.0);
  for (int f = 0; f < source.face_count(); ++f) {
    const double a = face_area(source, f);
    for (int k : source.faces()[f]) {
      sum[k] += a * per_face[f];
      weight[k] += a;
    }
  }
  for (size_t i = 0; i < sum.size(); ++i) sum[i] = weight[i] > 0.0 ? sum[i] / weight[i] : 0.0;
  return sum;
}

Curvatures curvatures(const TriangleMesh& mesh) {
  const size_t n = static_cast<size_t>(mesh.vertex_count());
  Curvatures out;
  out.vertex_area = vertex_areas(mesh);
  std::vector<double> angle_sum(n, 0.0);
  std::vector<Vec3> lap(n, Vec3::Zero());
  std::vector<Vec3> normal(n, Vec3::Zero());
  for (const auto& t : mesh.faces()) {
    const Vec3 p[3] = {mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])};
    const Vec3 fn = (p[1] - p[0]).cross(p[2] - p[0]);
    for (int k = 0; k < 3; ++k) {
      const int i = t[k], j = t[(k + 1) % 3], o = t[(k + 2) % 3];
      const Vec3 a = p[(k + 1) % 3] - p[(k + 2) % 3];
      const Vec3 b = p[k] - p[(k + 2) % 3];
      const double c = cot(a, b);  // angle at o, opposite edge (i, j)
      lap[i] += c * (mesh.vertex(j) - mesh.vertex(i));
      lap[j] += c * (mesh.vertex(i) - mesh.vertex(j));
      angle_sum[o] += std::atan2(a.cross(b).norm(), a.dot(b));
      normal[i] += fn;
    }
  }
  out.mean.resize(n);
  out.gauss.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double area = out.vertex_area[i];
    if (!(area > 0.0)) fail(ErrorCode::DegenerateTriangle, "vertex " + std::to_string(i) + " has zero area");
    out.gauss[i] = (2.0 * std::numbers::pi - angle_sum[i]) / area;
    const Vec3 delta = lap[i] / (2.0 * area);
    const double h = 0.5 * delta.norm();
    out.mean[i] = delta.dot(normal[i]) > 0.0 ? -h : h;
  }
  return out;
}

DistortionField shape_index(const TriangleMesh& reference, const Curvatures& reference_curvatures,
                            const TriangleMesh& subject, const ShapeIndexWeights& weights) {
  require(weights.alpha > 0 && weights.beta > 0 && weights.gamma > 0, ErrorCode::InvalidParameter,
          "shape index weights must be positive");
  DistortionField out;
  out.mu_abs = beltrami_magnitude(reference, subject);
  const auto c = curvatures(subject);
  out.mean_curvature = c.mean;
  out.gauss_curvature = c.gauss;
  out.shape_index.resize(out.mu_abs.size());
  for (size_t i = 0; i < out.mu_abs.size(); ++i) {
    out.shape_index[i] = weights.gamma * out.mu_abs[i] +
                         weights.alpha * std::abs(reference_curvatures.mean[i] - c.mean[i]) +
                         weights.beta * std::abs(reference_curvatures.gauss[i] - c.gauss[i]);
  }
  return out;
}

DistortionField shape_index(const TriangleMesh& reference, const TriangleMesh& subject,
                            const ShapeIndexWeights& weights) {
  return shape_index(reference, curvatures(reference), subject, weights);
}

double volume_distortion(const TriangleMesh& reference, const TriangleMesh& subject) {
  const double v0 = signed_volume(reference);
  if (!(v0 > 0.0)) fail(ErrorCode::ZeroVolume, "reference volume must be positive");
  return (signed_volume(subject) - v0) / v0;
}

}  // namespace qcs

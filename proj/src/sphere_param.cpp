#include "qcspharm/sphere_param.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "qcspharm/error.hpp"

namespace qcs {

namespace {

double signed_flat_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  double s = n.dot(a + b + c) >= 0.0 ? 1.0 : -1.0;
  return 0.5 * s * n.norm();
}

std::vector<double> param_areas(const std::vector<Vec3>& u, const FaceList& faces) {
  std::vector<double> out(faces.size());
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    out[f] = signed_flat_area(u[t[0]], u[t[1]], u[t[2]]);
  }
  return out;
}

double distortion_from(const std::vector<double>& mesh_area, double mesh_total,
                       const std::vector<double>& par_area) {
  double par_total = 0.0;
  for (double a : par_area) par_total += a;
  double acc = 0.0;
  for (size_t f = 0; f < mesh_area.size(); ++f) {
    double w = mesh_area[f] / mesh_total;
    if (w <= 0.0) continue;
    double r = (par_area[f] / par_total) / w;
    acc += w * (r - 1.0) * (r - 1.0);
  }
  return std::sqrt(acc);
}

}  // namespace

std::pair<double, double> spherical_angles(const Vec3& u) {
  double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
  double phi = 0.0;
  if (u.x() != 0.0 || u.y() != 0.0) {
    phi = std::atan2(u.y(), u.x());
    if (phi < 0.0) phi += 2.0 * M_PI;
    if (phi >= 2.0 * M_PI) phi = 0.0;
  }
  return {theta, phi};
}

Vec3 unit_from_angles(double theta, double phi) {
  return Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
}

double SphericalParam::theta(int i) const { return spherical_angles(points[static_cast<size_t>(i)]).first; }
double SphericalParam::phi(int i) const { return spherical_angles(points[static_cast<size_t>(i)]).second; }

int check_bijectivity(const std::vector<Vec3>& points, const FaceList& faces) {
  int folds = 0;
  for (const auto& t : faces) {
    if (points[t[0]].dot(points[t[1]].cross(points[t[2]])) <= 0.0) ++folds;
  }
  return folds;
}

double total_spherical_area(const std::vector<Vec3>& points, const FaceList& faces) {
  double total = 0.0;
  for (const auto& t : faces) {
    const Vec3& a = points[t[0]];
    const Vec3& b = points[t[1]];
    const Vec3& c = points[t[2]];
    double num = a.dot(b.cross(c));
    double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    total += 2.0 * std::atan2(num, den);
  }
  return total;
}

double area_distortion(const TriangleMesh& mesh, const std::vector<Vec3>& points) {
  std::vector<double> mesh_area(static_cast<size_t>(mesh.face_count()));
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) total += (mesh_area[f] = face_area(mesh, f));
  return distortion_from(mesh_area, total, param_areas(points, mesh.faces()));
}

ParamResult parametrize_sphere(const TriangleMesh& mesh, int max_iterations, double tolerance) {
  require(max_iterations >= 0, ErrorCode::InvalidParameter, "max_iterations must be non-negative");
  require(tolerance > 0.0, ErrorCode::InvalidParameter, "tolerance must be positive");
  const auto& faces = mesh.faces();
  const size_t nv = mesh.vertices().size();

  ParamResult result;
  std::vector<Vec3> u(nv);
  const Vec3 c = vertex_centroid(mesh);
  for (size_t i = 0; i < nv; ++i) {
    Vec3 d = mesh.vertices()[i] - c;
    double len = d.norm();
    if (!(len > 0.0)) fail(ErrorCode::ParamFailure, "vertex coincides with the centroid");
    u[i] = d / len;
  }

  const auto nbrs = vertex_neighbors(mesh);
  int folds = check_bijectivity(u, faces);
  const int unfold_cap = std::max(100, 5 * max_iterations);
  while (folds > 0 && result.unfold_iterations < unfold_cap) {
    std::vector<Vec3> next(nv);
    for (size_t i = 0; i < nv; ++i) {
      Vec3 avg = Vec3::Zero();
      for (int j : nbrs[i]) avg += u[j];
      next[i] = avg.norm() > 0.0 ? Vec3(avg.normalized()) : u[i];
    }
    u.swap(next);
    ++result.unfold_iterations;
    folds = check_bijectivity(u, faces);
  }
  if (folds > 0) {
    fail(ErrorCode::ParamFailure,
         "spherical embedding still has " + std::to_string(folds) + " folded triangles");
  }

  std::vector<double> mesh_area(faces.size());
  double mesh_total = 0.0;
  for (size_t f = 0; f < faces.size(); ++f) mesh_total += (mesh_area[f] = face_area(mesh, static_cast<int>(f)));
  require(mesh_total > 0.0, ErrorCode::DegenerateTriangle, "mesh has zero surface area");

  std::vector<int> valence(nv, 0);
  for (const auto& t : faces) {
    for (int k : t) ++valence[k];
  }

  auto par = param_areas(u, faces);
  double current = distortion_from(mesh_area, mesh_total, par);
  result.distortion_history.push_back(current);
  double step = 1.0;
  std::vector<Vec3> dir(nv), trial(nv);
  for (int it = 0; it < max_iterations; ++it) {
    double par_total = 0.0;
    for (double a : par) par_total += a;
    std::fill(dir.begin(), dir.end(), Vec3::Zero());
    for (size_t f = 0; f < faces.size(); ++f) {
      const auto& t = faces[f];
      double w = mesh_area[f] / mesh_total;
      if (w <= 0.0) continue;
      double excess = std::clamp((par[f] / par_total) / w - 1.0, -1.0, 1.0);
      const Vec3& a = u[t[0]];
      const Vec3& b = u[t[1]];
      const Vec3& cc = u[t[2]];
      Vec3 n = (b - a).cross(cc - a).normalized();
      // Gradient of the flat triangle area with respect to each corner.
      dir[t[0]] -= excess * 0.5 * n.cross(cc - b);
      dir[t[1]] -= excess * 0.5 * n.cross(a - cc);
      dir[t[2]] -= excess * 0.5 * n.cross(b - a);
    }
    for (size_t i = 0; i < nv; ++i) {
      Vec3 d = dir[i] / std::max(1, valence[i]);
      dir[i] = d - d.dot(u[i]) * u[i];
    }

    bool accepted = false;
    double moved = 0.0;
    step = std::min(1.0, 2.0 * step);
    for (int halving = 0; halving < 20; ++halving, step *= 0.5) {
      moved = 0.0;
      for (size_t i = 0; i < nv; ++i) {
        trial[i] = (u[i] + step * dir[i]).normalized();
        moved = std::max(moved, (trial[i] - u[i]).norm());
      }
      if (moved < tolerance) break;
      if (check_bijectivity(trial, faces) != 0) continue;
      auto trial_par = param_areas(trial, faces);
      double d = distortion_from(mesh_area, mesh_total, trial_par);
      if (d < current) {
        u.swap(trial);
        par.swap(trial_par);
        current = d;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.converged = true;
      break;
    }
    ++result.iterations;
    result.distortion_history.push_back(current);
    if (moved < tolerance) {
      result.converged = true;
      break;
    }
  }

  double total = total_spherical_area(u, faces);
  if (std::abs(total - 4.0 * M_PI) > 1e-6) {
    fail(ErrorCode::ParamFailure, "spherical embedding covers the sphere " +
                                      std::to_string(total / (4.0 * M_PI)) + " times");
  }
  result.param.points = std::move(u);
  return result;
}

std::string param_to_json(const SphericalParam& param) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : param.points) j.push_back({p.x(), p.y(), p.z()});
  return j.dump();
}

SphericalParam param_from_json(const std::string& text) {
  SphericalParam out;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& p : j) {
      Vec3 v(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      out.points.push_back(v);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("invalid parametrization JSON: ") + e.what());
  }
  return out;
}

}  // namespace qcs

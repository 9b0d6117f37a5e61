#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "qcspharm/error.hpp"
#include "qcspharm/sphere_sampling.hpp"

namespace qcs {

namespace {

constexpr double kVisibleEps = 1e-13;

// Quickhull over a point set that is entirely extreme (all points on a sphere).
class Quickhull {
 public:
  explicit Quickhull(const std::vector<Vec3>& pts) : pts_(pts) {}

  FaceList run() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) fail(ErrorCode::InvalidParameter, "hull needs at least 4 points");
    auto simplex = initial_simplex();
    const auto& [a, b, c, d] = simplex;
    // Orient so that d lies below (a, b, c).
    Face base = {a, b, c};
    if ((pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]).dot(pts_[d] - pts_[a]) > 0.0) base = {a, c, b};
    int f0 = add_face(base[0], base[1], base[2]);
    int f1 = add_face(base[0], base[2], d);
    int f2 = add_face(base[2], base[1], d);
    int f3 = add_face(base[1], base[0], d);
    link_all({f0, f1, f2, f3});

    std::vector<int> all;
    for (int i = 0; i < n; ++i) {
      if (i != a && i != b && i != c && i != d) all.push_back(i);
    }
    assign(all, {f0, f1, f2, f3});

    std::vector<int> stack = {f0, f1, f2, f3};
    while (!stack.empty()) {
      int f = stack.back();
      stack.pop_back();
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      auto created = add_point(f);
      for (int nf : created) {
        if (!faces_[nf].outside.empty()) stack.push_back(nf);
      }
    }

    FaceList out;
    std::vector<bool> used(pts_.size(), false);
    for (const auto& face : faces_) {
      if (!face.alive) continue;
      out.push_back(face.v);
      for (int k : face.v) used[k] = true;
    }
    int missing = static_cast<int>(std::count(used.begin(), used.end(), false));
    if (missing > 0) {
      fail(ErrorCode::TopologyError, std::to_string(missing) + " points are not on the convex hull");
    }
    return out;
  }

 private:
  struct HullFace {
    Face v;
    std::array<int, 3> nbr{-1, -1, -1};
    Vec3 normal;
    double offset = 0.0;
    bool alive = true;
    std::vector<int> outside;
  };

  double distance(const HullFace& f, int p) const { return f.normal.dot(pts_[p]) - f.offset; }

  int add_face(int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    f.normal = n.normalized();
    f.offset = f.normal.dot(pts_[a]);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  static std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

  // Sets neighbor pointers among `ids` by matching opposite directed edges.
  void link_all(const std::vector<int>& ids) {
    std::unordered_map<std::uint64_t, std::pair<int, int>> edge_owner;
    for (int id : ids) {
      for (int k = 0; k < 3; ++k) {
        edge_owner[key(faces_[id].v[k], faces_[id].v[(k + 1) % 3])] = {id, k};
      }
    }
    for (int id : ids) {
      for (int k = 0; k < 3; ++k) {
        auto it = edge_owner.find(key(faces_[id].v[(k + 1) % 3], faces_[id].v[k]));
        if (it != edge_owner.end()) faces_[id].nbr[k] = it->second.first;
      }
    }
  }

  std::array<int, 4> initial_simplex() const {
    const int n = static_cast<int>(pts_.size());
    int a = 0, b = 0;
    double best = -1.0;
    for (int i = 1; i < n; ++i) {
      double d = (pts_[i] - pts_[a]).squaredNorm();
      if (d > best) best = d, b = i;
    }
    int c = -1;
    best = -1.0;
    Vec3 dir = (pts_[b] - pts_[a]).normalized();
    for (int i = 0; i < n; ++i) {
      Vec3 w = pts_[i] - pts_[a];
      double d = (w - w.dot(dir) * dir).squaredNorm();
      if (d > best) best = d, c = i;
    }
    Vec3 normal = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]).normalized();
    int d = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
      double dist = std::abs(normal.dot(pts_[i] - pts_[a]));
      if (dist > best) best = dist, d = i;
    }
    if (best < 1e-12) fail(ErrorCode::InvalidParameter, "hull points are coplanar");
    return {a, b, c, d};
  }

  void assign(const std::vector<int>& points, const std::vector<int>& candidates) {
    for (int p : points) {
      int best_face = -1;
      double best = kVisibleEps;
      for (int f : candidates) {
        double d = distance(faces_[f], p);
        if (d > best) best = d, best_face = f;
      }
      if (best_face >= 0) faces_[best_face].outside.push_back(p);
    }
  }

  std::vector<int> add_point(int seed) {
    // Furthest outside point of the seed face.
    int apex = faces_[seed].outside.front();
    double far = distance(faces_[seed], apex);
    for (int p : faces_[seed].outside) {
      double d = distance(faces_[seed], p);
      if (d > far) far = d, apex = p;
    }

    std::vector<int> visible = {seed};
    std::vector<char> mark(faces_.size(), 0);  // 1 visible, 2 not visible
    mark[seed] = 1;
    for (size_t i = 0; i < visible.size(); ++i) {
      const int f = visible[i];
      for (int nb : faces_[f].nbr) {
        if (mark[nb]) continue;
        if (distance(faces_[nb], apex) > kVisibleEps) {
          mark[nb] = 1;
          visible.push_back(nb);
        } else {
          mark[nb] = 2;
        }
      }
    }

    std::vector<int> orphans;
    std::vector<int> created;
    for (int f : visible) {
      for (int k = 0; k < 3; ++k) {
        int nb = faces_[f].nbr[k];
        if (mark[nb] == 1) continue;
        int a = faces_[f].v[k], b = faces_[f].v[(k + 1) % 3];
        int nf = add_face(a, b, apex);
        faces_[nf].nbr[0] = nb;
        auto& other = faces_[nb];
        for (int j = 0; j < 3; ++j) {
          if (other.v[j] == b && other.v[(j + 1) % 3] == a) other.nbr[j] = nf;
        }
        created.push_back(nf);
      }
    }
    for (int f : visible) {
      faces_[f].alive = false;
      for (int p : faces_[f].outside) {
        if (p != apex) orphans.push_back(p);
      }
      faces_[f].outside.clear();
      faces_[f].outside.shrink_to_fit();
    }
    // Stitch the cone faces to each other along the edges through the apex.
    std::unordered_map<std::uint64_t, int> by_edge;
    for (int nf : created) by_edge[key(faces_[nf].v[1], apex)] = nf;
    for (int nf : created) {
      const int a = faces_[nf].v[0];
      auto it = by_edge.find(key(a, apex));
      if (it == by_edge.end()) fail(ErrorCode::TopologyError, "hull horizon is not a closed loop");
      faces_[nf].nbr[2] = it->second;
      faces_[it->second].nbr[1] = nf;
    }
    assign(orphans, created);
    return created;
  }

  const std::vector<Vec3>& pts_;
  std::vector<HullFace> faces_;
};

}  // namespace

std::vector<Vec3> fibonacci_sphere(int n) {
  require(n >= 1, ErrorCode::InvalidParameter, "point count must be positive");
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    pts[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z).normalized();
  }
  return pts;
}

FaceList sphere_hull(const std::vector<Vec3>& points) { return Quickhull(points).run(); }

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace qcs

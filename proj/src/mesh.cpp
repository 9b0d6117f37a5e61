#include "qcspharm/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "qcspharm/error.hpp"

namespace qcs {

namespace {

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

void check_faces(const FaceList& faces, size_t vertex_count) {
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    for (int idx : t) {
      if (idx < 0 || static_cast<size_t>(idx) >= vertex_count) {
        fail(ErrorCode::InvalidParameter,
             "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                 " outside [0, " + std::to_string(vertex_count) + ")");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      fail(ErrorCode::InvalidParameter, "face " + std::to_string(f) + " repeats a vertex index");
    }
  }
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, FaceList faces)
    : TriangleMesh(std::move(vertices), std::make_shared<const FaceList>(std::move(faces))) {}

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::shared_ptr<const FaceList> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  require(faces_ != nullptr, ErrorCode::InvalidParameter, "null face list");
  check_faces(*faces_, vertices_.size());
}

std::vector<std::array<int, 2>> unique_edges(const FaceList& faces) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(faces.size() * 3 / 2 + 3);
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> nbrs(static_cast<size_t>(mesh.vertex_count()));
  for (const auto& e : unique_edges(mesh.faces())) {
    nbrs[e[0]].push_back(e[1]);
    nbrs[e[1]].push_back(e[0]);
  }
  return nbrs;
}

MeshQualityReport validate_genus0(const TriangleMesh& mesh) {
  MeshQualityReport r;
  const auto& faces = mesh.faces();
  const auto& verts = mesh.vertices();
  r.vertex_count = mesh.vertex_count();
  r.face_count = mesh.face_count();

  const auto edges = unique_edges(faces);
  r.edge_count = static_cast<int>(edges.size());
  r.euler_characteristic = r.vertex_count - r.edge_count + r.face_count;

  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(faces.size() * 3);
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) ++directed[edge_key(t[k], t[(k + 1) % 3])];
  }
  r.edge_manifold = true;
  r.consistently_oriented = true;
  for (const auto& e : edges) {
    int ab = 0, ba = 0;
    if (auto it = directed.find(edge_key(e[0], e[1])); it != directed.end()) ab = it->second;
    if (auto it = directed.find(edge_key(e[1], e[0])); it != directed.end()) ba = it->second;
    if (ab + ba != 2) {
      if (r.edge_manifold) {
        r.issues.push_back("edge (" + std::to_string(e[0]) + "," + std::to_string(e[1]) +
                           ") has " + std::to_string(ab + ba) + " incident faces");
      }
      r.edge_manifold = false;
    } else if (ab != 1) {
      if (r.consistently_oriented) {
        r.issues.push_back("edge (" + std::to_string(e[0]) + "," + std::to_string(e[1]) +
                           ") is traversed twice in the same direction");
      }
      r.consistently_oriented = false;
    }
  }
  if (!r.edge_manifold) r.consistently_oriented = false;

  // One-ring fans: with a manifold, oriented edge set, each face (v, a, b)
  // links a -> b around v; the fan is a disk iff these links form one cycle.
  std::vector<std::vector<std::pair<int, int>>> fans(verts.size());
  for (const auto& t : faces) {
    for (int k = 0; k < 3; ++k) fans[t[k]].push_back({t[(k + 1) % 3], t[(k + 2) % 3]});
  }
  r.vertex_manifold = r.edge_manifold;
  for (size_t v = 0; v < verts.size(); ++v) {
    const auto& fan = fans[v];
    if (fan.empty()) {
      ++r.unreferenced_vertices;
      continue;
    }
    if (!r.edge_manifold || !r.consistently_oriented) continue;
    std::unordered_map<int, int> next;
    for (const auto& [a, b] : fan) next[a] = b;
    int start = fan.front().first, cur = start;
    size_t steps = 0;
    do {
      auto it = next.find(cur);
      if (it == next.end()) break;
      cur = it->second;
      ++steps;
    } while (cur != start && steps <= fan.size());
    if (cur != start || steps != fan.size()) {
      if (r.vertex_manifold) {
        r.issues.push_back("vertex " + std::to_string(v) + " is non-manifold");
      }
      r.vertex_manifold = false;
    }
  }
  if (r.unreferenced_vertices > 0) {
    r.issues.push_back(std::to_string(r.unreferenced_vertices) + " unreferenced vertices");
  }

  std::vector<int> parent(verts.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto& t : faces) {
    int a = find_root(parent, t[0]);
    parent[find_root(parent, t[1])] = a;
    parent[find_root(parent, t[2])] = a;
  }
  for (size_t v = 0; v < verts.size(); ++v) {
    if (!fans[v].empty() && find_root(parent, static_cast<int>(v)) == static_cast<int>(v)) {
      ++r.components;
    }
  }
  if (r.components != 1) r.issues.push_back(std::to_string(r.components) + " connected components");
  if (r.euler_characteristic != 2) {
    r.issues.push_back("Euler characteristic " + std::to_string(r.euler_characteristic) + " != 2");
  }

  if (!edges.empty()) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& e : edges) {
      double len = (verts[e[0]] - verts[e[1]]).norm();
      sum += len;
      sum_sq += len * len;
    }
    double n = static_cast<double>(edges.size());
    double mean = sum / n;
    double var = std::max(0.0, sum_sq / n - mean * mean);
    r.edge_length_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    // Round-off in the one-pass variance is far below anything meaningful.
    if (r.edge_length_cv < 1e-7) r.edge_length_cv = 0.0;
  }
  r.min_face_area = faces.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (int f = 0; f < mesh.face_count(); ++f) r.min_face_area = std::min(r.min_face_area, face_area(mesh, f));
  return r;
}

std::string to_json(const MeshQualityReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"vertex_count\":" << r.vertex_count << ",\"edge_count\":" << r.edge_count
     << ",\"face_count\":" << r.face_count << ",\"euler_characteristic\":" << r.euler_characteristic
     << ",\"edge_length_cv\":" << r.edge_length_cv << ",\"min_face_area\":" << r.min_face_area
     << ",\"genus0\":" << (r.genus0() ? "true" : "false") << ",\"issues\":[";
  for (size_t i = 0; i < r.issues.size(); ++i) os << (i ? "," : "") << '"' << r.issues[i] << '"';
  os << "]}";
  return os.str();
}

void require_genus0(const TriangleMesh& mesh) {
  auto report = validate_genus0(mesh);
  if (!report.genus0()) {
    std::string msg = "mesh is not a closed genus-0 manifold";
    for (const auto& issue : report.issues) msg += "; " + issue;
    fail(ErrorCode::TopologyError, msg);
  }
}

double face_area(const TriangleMesh& mesh, int f) {
  const auto& t = mesh.faces()[f];
  return 0.5 * (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0])).norm();
}

Vec3 face_normal(const TriangleMesh& mesh, int f) {
  const auto& t = mesh.faces()[f];
  Vec3 n = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
  double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

double signed_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& t : mesh.faces()) {
    vol += mesh.vertex(t[0]).dot(mesh.vertex(t[1]).cross(mesh.vertex(t[2])));
  }
  return vol / 6.0;
}

double surface_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) a += face_area(mesh, f);
  return a;
}

Vec3 vertex_centroid(const TriangleMesh& mesh) {
  Vec3 c = Vec3::Zero();
  for (const auto& v : mesh.vertices()) c += v;
  return mesh.vertex_count() > 0 ? Vec3(c / mesh.vertex_count()) : c;
}

TriangleMesh scaled(const TriangleMesh& mesh, double s) {
  auto verts = mesh.vertices();
  for (auto& v : verts) v *= s;
  return TriangleMesh(std::move(verts), mesh.shared_faces());
}

TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation) {
  auto verts = mesh.vertices();
  for (auto& v : verts) v = rotation * v + translation;
  return TriangleMesh(std::move(verts), mesh.shared_faces());
}

TriangleMesh with_flipped_orientation(const TriangleMesh& mesh) {
  FaceList faces = mesh.faces();
  for (auto& t : faces) std::swap(t[1], t[2]);
  return TriangleMesh(mesh.vertices(), std::move(faces));
}

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations, double step) {
  require(iterations > 0, ErrorCode::InvalidParameter, "smoothing iterations must be positive");
  require(step > 0.0 && step <= 1.0, ErrorCode::InvalidParameter, "smoothing step must lie in (0, 1]");
  const auto nbrs = vertex_neighbors(mesh);
  std::vector<Vec3> cur = mesh.vertices();
  std::vector<Vec3> next(cur.size());
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 0; i < cur.size(); ++i) {
      if (nbrs[i].empty()) {
        next[i] = cur[i];
        continue;
      }
      Vec3 avg = Vec3::Zero();
      for (int j : nbrs[i]) avg += cur[j];
      avg /= static_cast<double>(nbrs[i].size());
      next[i] = cur[i] + step * (avg - cur[i]);
    }
    std::swap(cur, next);
  }
  return TriangleMesh(std::move(cur), mesh.shared_faces());
}

TriangleMesh refine(const TriangleMesh& mesh) {
  std::vector<Vec3> verts = mesh.vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(mesh.faces().size() * 2);
  auto mid = [&](int a, int b) {
    auto key = edge_key(std::min(a, b), std::max(a, b));
    auto [it, inserted] = midpoint.try_emplace(key, static_cast<int>(verts.size()));
    if (inserted) verts.push_back(0.5 * (verts[a] + verts[b]));
    return it->second;
  };
  FaceList faces;
  faces.reserve(mesh.faces().size() * 4);
  for (const auto& t : mesh.faces()) {
    int a = mid(t[0], t[1]), b = mid(t[1], t[2]), c = mid(t[2], t[0]);
    faces.push_back({t[0], a, c});
    faces.push_back({a, t[1], b});
    faces.push_back({c, b, t[2]});
    faces.push_back({a, b, c});
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

TriangleMesh improve_mesh(const TriangleMesh& mesh, const ImproveOptions& options) {
  TriangleMesh out = mesh;
  if (options.smooth_iterations > 0) {
    out = laplacian_smooth(out, options.smooth_iterations, options.smooth_step);
  }
  if (options.simplify_target > 0 && out.vertex_count() > options.simplify_target) {
    out = simplify(out, options.simplify_target);
  }
  for (int i = 0; i < options.refine_passes; ++i) out = refine(out);
  return out;
}

TriangleMesh make_tetrahedron() {
  std::vector<Vec3> v = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  FaceList f = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh make_cube() {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                         {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  FaceList f = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh make_icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  FaceList f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return TriangleMesh(std::move(v), std::move(f));
}

TriangleMesh make_icosphere(int level) {
  require(level >= 0, ErrorCode::InvalidParameter, "icosphere level must be non-negative");
  TriangleMesh m = make_icosahedron();
  for (int i = 0; i < level; ++i) {
    TriangleMesh r = refine(m);
    auto verts = r.vertices();
    for (auto& p : verts) p.normalize();
    m = TriangleMesh(std::move(verts), r.shared_faces());
  }
  return m;
}

TriangleMesh make_torus(double major_radius, double minor_radius, int nu, int nv) {
  require(nu >= 3 && nv >= 3, ErrorCode::InvalidParameter, "torus needs at least 3x3 samples");
  std::vector<Vec3> v;
  v.reserve(static_cast<size_t>(nu * nv));
  for (int i = 0; i < nu; ++i) {
    double u = 2.0 * M_PI * i / nu;
    for (int j = 0; j < nv; ++j) {
      double w = 2.0 * M_PI * j / nv;
      v.emplace_back((major_radius + minor_radius * std::cos(w)) * std::cos(u),
                     (major_radius + minor_radius * std::cos(w)) * std::sin(u),
                     minor_radius * std::sin(w));
    }
  }
  FaceList f;
  auto id = [&](int i, int j) { return ((i + nu) % nu) * nv + (j + nv) % nv; };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriangleMesh(std::move(v), std::move(f));
}

}  // namespace qcs

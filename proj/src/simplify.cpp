#include <algorithm>
#include <queue>

#include "qcspharm/error.hpp"
#include "qcspharm/mesh.hpp"

namespace qcs {

namespace {

struct Candidate {
  double length;
  int u, v;
  unsigned stamp_u, stamp_v;
  bool operator>(const Candidate& o) const {
    if (length != o.length) return length > o.length;
    if (u != o.u) return u > o.u;
    return v > o.v;
  }
};

// Edge-collapse state. Faces are never physically removed until compaction;
// per-vertex face lists are filtered against `face_alive` on access.
class Decimator {
 public:
  explicit Decimator(const TriangleMesh& mesh)
      : pos_(mesh.vertices()),
        faces_(mesh.faces()),
        face_alive_(faces_.size(), true),
        vertex_alive_(pos_.size(), true),
        vertex_faces_(pos_.size()),
        stamp_(pos_.size(), 0),
        alive_count_(static_cast<int>(pos_.size())) {
    for (size_t f = 0; f < faces_.size(); ++f) {
      for (int k : faces_[f]) vertex_faces_[k].push_back(static_cast<int>(f));
    }
  }

  int alive_count() const { return alive_count_; }

  void push_all_edges() {
    heap_ = {};
    for (size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const auto& t = faces_[f];
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        if (a < b) push(a, b);
      }
    }
  }

  // Returns true when a collapse was performed.
  bool step() {
    while (!heap_.empty()) {
      Candidate c = heap_.top();
      heap_.pop();
      if (!vertex_alive_[c.u] || !vertex_alive_[c.v]) continue;
      if (stamp_[c.u] != c.stamp_u || stamp_[c.v] != c.stamp_v) continue;
      if (try_collapse(c.u, c.v)) return true;
    }
    return false;
  }

  TriangleMesh compact() const {
    std::vector<int> remap(pos_.size(), -1);
    std::vector<Vec3> verts;
    for (size_t i = 0; i < pos_.size(); ++i) {
      if (vertex_alive_[i]) {
        remap[i] = static_cast<int>(verts.size());
        verts.push_back(pos_[i]);
      }
    }
    FaceList faces;
    for (size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const auto& t = faces_[f];
      faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }
    return TriangleMesh(std::move(verts), std::move(faces));
  }

 private:
  void push(int a, int b) {
    heap_.push({(pos_[a] - pos_[b]).norm(), a, b, stamp_[a], stamp_[b]});
  }

  std::vector<int> live_faces(int v) {
    auto& list = vertex_faces_[v];
    list.erase(std::remove_if(list.begin(), list.end(), [&](int f) { return !face_alive_[f]; }), list.end());
    return list;
  }

  std::vector<int> neighbors(int v) {
    std::vector<int> out;
    for (int f : live_faces(v)) {
      for (int k : faces_[f]) {
        if (k != v) out.push_back(k);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  static bool contains(const Face& t, int v) { return t[0] == v || t[1] == v || t[2] == v; }

  bool try_collapse(int u, int v) {
    const auto fu = live_faces(u);
    const auto fv = live_faces(v);
    std::vector<int> shared;
    for (int f : fu) {
      if (contains(faces_[f], v)) shared.push_back(f);
    }
    if (shared.size() != 2) return false;

    std::vector<int> opposite;
    for (int f : shared) {
      for (int k : faces_[f]) {
        if (k != u && k != v) opposite.push_back(k);
      }
    }
    std::sort(opposite.begin(), opposite.end());
    const auto nu = neighbors(u);
    const auto nv = neighbors(v);
    std::vector<int> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common != opposite) return false;  // link condition
    if (alive_count_ <= 4) return false;

    const Vec3 target = 0.5 * (pos_[u] + pos_[v]);
    auto guard = [&](int f, int moved) {
      const auto& t = faces_[f];
      Vec3 p[3], q[3];
      for (int k = 0; k < 3; ++k) {
        p[k] = pos_[t[k]];
        q[k] = (t[k] == moved) ? target : pos_[t[k]];
      }
      Vec3 before = (p[1] - p[0]).cross(p[2] - p[0]);
      Vec3 after = (q[1] - q[0]).cross(q[2] - q[0]);
      double na = after.norm(), nb = before.norm();
      if (!(na > 1e-12 * std::max(nb, 1e-300))) return false;
      return after.dot(before) > 0.2 * na * nb;
    };
    for (int f : fu) {
      if (!contains(faces_[f], v) && !guard(f, u)) return false;
    }
    for (int f : fv) {
      if (!contains(faces_[f], u) && !guard(f, v)) return false;
    }

    for (int f : shared) face_alive_[f] = false;
    for (int f : fv) {
      if (!face_alive_[f]) continue;
      for (auto& k : faces_[f]) {
        if (k == v) k = u;
      }
      vertex_faces_[u].push_back(f);
    }
    vertex_alive_[v] = false;
    vertex_faces_[v].clear();
    pos_[u] = target;
    ++stamp_[u];
    --alive_count_;
    for (int w : neighbors(u)) push(std::min(u, w), std::max(u, w));
    return true;
  }

  std::vector<Vec3> pos_;
  FaceList faces_;
  std::vector<bool> face_alive_;
  std::vector<bool> vertex_alive_;
  std::vector<std::vector<int>> vertex_faces_;
  std::vector<unsigned> stamp_;
  int alive_count_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

}  // namespace

TriangleMesh simplify(const TriangleMesh& mesh, int target_vertex_count) {
  require(target_vertex_count >= 4, ErrorCode::InvalidParameter, "simplification target must be >= 4");
  require(target_vertex_count <= mesh.vertex_count(), ErrorCode::InvalidParameter,
          "simplification target exceeds current vertex count");
  if (target_vertex_count == mesh.vertex_count()) return mesh;

  Decimator dec(mesh);
  dec.push_all_edges();
  bool progressed_since_rebuild = false;
  while (dec.alive_count() > target_vertex_count) {
    if (dec.step()) {
      progressed_since_rebuild = true;
      continue;
    }
    // Edges skipped earlier may have become legal after nearby collapses.
    if (!progressed_since_rebuild) {
      fail(ErrorCode::SimplificationError,
           "no legal collapse remains at " + std::to_string(dec.alive_count()) + " vertices");
    }
    progressed_since_rebuild = false;
    dec.push_all_edges();
  }
  return dec.compact();
}

}  // namespace qcs

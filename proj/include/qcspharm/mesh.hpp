#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qcs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;
using FaceList = std::vector<Face>;

/// Indexed triangle surface. Immutable after construction; the face list is
/// held by shared pointer so that meshes built on a common triangulation
/// (registered subjects, the mean template) literally share it.
class TriangleMesh {
 public:
  TriangleMesh() : faces_(std::make_shared<const FaceList>()) {}
  /// Throws InvalidParameter for out-of-range or repeated face indices.
  TriangleMesh(std::vector<Vec3> vertices, FaceList faces);
  TriangleMesh(std::vector<Vec3> vertices, std::shared_ptr<const FaceList> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const FaceList& faces() const { return *faces_; }
  const std::shared_ptr<const FaceList>& shared_faces() const { return faces_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int face_count() const { return static_cast<int>(faces_->size()); }
  const Vec3& vertex(int i) const { return vertices_[static_cast<size_t>(i)]; }

 private:
  std::vector<Vec3> vertices_;
  std::shared_ptr<const FaceList> faces_;
};

struct MeshQualityReport {
  int vertex_count = 0;
  int edge_count = 0;
  int face_count = 0;
  int euler_characteristic = 0;
  double edge_length_cv = 0.0;
  double min_face_area = 0.0;
  bool edge_manifold = false;
  bool vertex_manifold = false;
  bool consistently_oriented = false;
  int components = 0;
  int unreferenced_vertices = 0;
  std::vector<std::string> issues;

  bool genus0() const {
    return edge_manifold && vertex_manifold && consistently_oriented && components == 1 &&
           unreferenced_vertices == 0 && euler_characteristic == 2;
  }
};

enum class MeshFormat { Off, Ply, Obj };

MeshFormat format_from_path(const std::filesystem::path& path);

/// Reads, validates as closed genus-0 and orients outward.
TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Parsers without topology validation.
TriangleMesh read_off(std::istream& in);
TriangleMesh read_ply(std::istream& in);
TriangleMesh read_obj(std::istream& in);

/// Shortest round-trip decimal representation; reading back is exact.
void write_off(std::ostream& out, const TriangleMesh& mesh);
void save_off(const TriangleMesh& mesh, const std::filesystem::path& path);

/// ASCII PLY with per-vertex RGB.
void save_colored_ply(const TriangleMesh& mesh,
                      const std::vector<std::array<unsigned char, 3>>& colors,
                      const std::filesystem::path& path);

MeshQualityReport validate_genus0(const TriangleMesh& mesh);
std::string to_json(const MeshQualityReport& report);

/// Throws TopologyError unless the mesh is a closed, consistently oriented,
/// connected genus-0 manifold.
void require_genus0(const TriangleMesh& mesh);

std::vector<std::array<int, 2>> unique_edges(const FaceList& faces);
std::vector<std::vector<int>> vertex_neighbors(const TriangleMesh& mesh);

double face_area(const TriangleMesh& mesh, int f);
Vec3 face_normal(const TriangleMesh& mesh, int f);
double signed_volume(const TriangleMesh& mesh);
double surface_area(const TriangleMesh& mesh);
Vec3 vertex_centroid(const TriangleMesh& mesh);

TriangleMesh scaled(const TriangleMesh& mesh, double s);
TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation);
TriangleMesh with_flipped_orientation(const TriangleMesh& mesh);

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, int iterations, double step);
TriangleMesh simplify(const TriangleMesh& mesh, int target_vertex_count);
TriangleMesh refine(const TriangleMesh& mesh);

struct ImproveOptions {
  int smooth_iterations = 10;
  double smooth_step = 0.5;
  int simplify_target = 2000;
  int refine_passes = 1;
};

/// Smoothing, then decimation (skipped when the mesh is already at or below
/// the target), then midpoint refinement.
TriangleMesh improve_mesh(const TriangleMesh& mesh, const ImproveOptions& options);

TriangleMesh make_tetrahedron();
TriangleMesh make_cube();
TriangleMesh make_icosahedron();
/// Unit icosphere: icosahedron refined `level` times with vertices projected
/// back to the sphere. V = 10 * 4^level + 2.
TriangleMesh make_icosphere(int level);
TriangleMesh make_torus(double major_radius, double minor_radius, int nu, int nv);

}  // namespace qcs

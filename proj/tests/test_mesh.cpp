#include <filesystem>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "qcspharm/error.hpp"
#include "qcspharm/mesh.hpp"
#include "qcspharm/sphere_sampling.hpp"
#include "support.hpp"

using namespace qcs;

TEST_CASE("primitive solids are closed genus-0 surfaces") {
  for (const auto& m : {make_tetrahedron(), make_cube(), make_icosahedron(), make_icosphere(2)}) {
    const auto r = validate_genus0(m);
    CHECK(r.genus0());
    CHECK(r.euler_characteristic == 2);
    CHECK(r.vertex_count - r.edge_count + r.face_count == 2);
    CHECK(signed_volume(m) > 0.0);
  }
}

TEST_CASE("icosphere vertex count follows 10 * 4^level + 2") {
  for (int level = 0; level <= 4; ++level) {
    const auto m = make_icosphere(level);
    CHECK(m.vertex_count() == 10 * (1 << (2 * level)) + 2);
    for (const auto& v : m.vertices()) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("torus is rejected as not genus-0") {
  const auto t = make_torus(2.0, 0.5, 16, 8);
  const auto r = validate_genus0(t);
  CHECK(r.euler_characteristic == 0);
  CHECK_FALSE(r.genus0());
  CHECK_THROWS_AS(require_genus0(t), Error);
  try {
    require_genus0(t);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TopologyError);
  }
}

TEST_CASE("unit cube volume and area") {
  const auto c = make_cube();
  CHECK(signed_volume(c) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(surface_area(c) == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(signed_volume(with_flipped_orientation(c)) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("volume scales cubically and is rigid invariant") {
  std::mt19937_64 rng(3);
  const auto e = test::ellipsoid(1.3, 0.9, 0.6, 3);
  const double v = signed_volume(e);
  CHECK(signed_volume(scaled(e, 2.0)) == doctest::Approx(8.0 * v).epsilon(1e-12));
  const Mat3 r = test::random_rotation(rng);
  CHECK(signed_volume(transformed(e, r, Vec3(3, -1, 2))) == doctest::Approx(v).epsilon(1e-12));
  // icosphere volume converges to 4 pi / 3 from below
  CHECK(signed_volume(make_icosphere(5)) < 4.0 * std::numbers::pi / 3.0);
  CHECK(signed_volume(make_icosphere(5)) == doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(2e-3));
}

TEST_CASE("OFF round trip is exact") {
  std::mt19937_64 rng(5);
  const auto m = transformed(test::ellipsoid(1.1, 0.7, 0.3, 2), test::random_rotation(rng), Vec3(0.1, 0.2, 1e-7));
  std::stringstream ss;
  write_off(ss, m);
  const auto back = read_off(ss);
  REQUIRE(back.vertex_count() == m.vertex_count());
  CHECK(back.faces() == m.faces());
  for (int i = 0; i < m.vertex_count(); ++i) CHECK(back.vertex(i) == m.vertex(i));
}

TEST_CASE("loading orients inward-facing meshes outward") {
  const auto dir = std::filesystem::temp_directory_path() / "qcs_mesh_io_test";
  std::filesystem::create_directories(dir);
  save_off(with_flipped_orientation(make_icosphere(1)), dir / "flipped.off");
  const auto m = load_mesh(dir / "flipped.off");
  CHECK(signed_volume(m) > 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed input is a parse error") {
  std::stringstream ss("OFF\n3 1 0\n0 0 0\n1 0 0\n");
  CHECK_THROWS_AS(read_off(ss), Error);
  std::stringstream bad_index("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
  CHECK_THROWS_AS(read_off(bad_index), Error);
}

TEST_CASE("midpoint refinement adds one vertex per edge and quadruples faces") {
  const auto m = make_icosphere(2);
  const auto edges = unique_edges(m.faces()).size();
  const auto r = refine(m);
  CHECK(r.vertex_count() == m.vertex_count() + static_cast<int>(edges));
  CHECK(r.face_count() == 4 * m.face_count());
  CHECK(validate_genus0(r).genus0());
  CHECK(signed_volume(r) == doctest::Approx(signed_volume(m)).epsilon(1e-12));
}

TEST_CASE("decimation reaches the target and keeps genus 0") {
  const auto m = test::ellipsoid(1.5, 1.0, 0.8, 4);
  const auto s = simplify(m, 500);
  CHECK(s.vertex_count() <= 500);
  CHECK(s.vertex_count() >= 450);
  CHECK(validate_genus0(s).genus0());
  CHECK(signed_volume(s) == doctest::Approx(signed_volume(m)).epsilon(0.05));
}

TEST_CASE("quality improvement keeps genus 0 and moderates edge lengths") {
  const auto m = test::ellipsoid(1.5, 1.0, 0.8, 4);
  ImproveOptions o;
  o.simplify_target = 800;
  const auto out = improve_mesh(m, o);
  const auto r = validate_genus0(out);
  CHECK(r.genus0());
  CHECK(r.edge_length_cv < 0.5);
}

TEST_CASE("Laplacian smoothing shrinks a convex surface and rejects nonpositive iterations") {
  const auto m = test::ellipsoid(1.5, 1.0, 0.8, 2);
  CHECK_THROWS_AS(laplacian_smooth(m, 0, 0.5), Error);
  const auto s = laplacian_smooth(m, 5, 0.5);
  CHECK(s.faces() == m.faces());
  CHECK(signed_volume(s) < signed_volume(m));
  CHECK(validate_genus0(s).genus0());
}

TEST_CASE("spherical hull of a Fibonacci lattice is a genus-0 outward mesh") {
  for (int n : {12, 100, 2000}) {
    const auto pts = fibonacci_sphere(n);
    REQUIRE(static_cast<int>(pts.size()) == n);
    const TriangleMesh m(pts, sphere_hull(pts));
    CHECK(validate_genus0(m).genus0());
    CHECK(m.face_count() == 2 * n - 4);
    CHECK(signed_volume(m) > 0.0);
  }
}

TEST_CASE("axis-angle rotation is orthonormal and fixes its axis") {
  const Vec3 axis(1, 2, 3);
  const Mat3 r = axis_angle(axis, 0.7);
  CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-14);
  CHECK(r.determinant() == doctest::Approx(1.0));
  CHECK((r * axis - axis).norm() < 1e-13);
  CHECK((axis_angle(Vec3::UnitZ(), std::numbers::pi / 2) * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
}

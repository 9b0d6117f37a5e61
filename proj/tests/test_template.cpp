#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qcspharm/error.hpp"
#include "qcspharm/mean_template.hpp"
#include "support.hpp"

using namespace qcs;

namespace {

// x'(u) = x(q u), refit on the given directions
SpharmCoefficients reparametrized(const SpharmCoefficients& c, const Mat3& q, const std::vector<Vec3>& dirs) {
  std::vector<Vec3> rotated;
  for (const auto& u : dirs) rotated.push_back(q * u);
  return fit_positions(evaluate_surface(c, rotated), dirs, c.degree_cap()).coeffs;
}

Eigen::MatrixX3d sample(const SpharmCoefficients& c, const std::vector<Vec3>& dirs) {
  const auto p = evaluate_surface(c, dirs);
  Eigen::MatrixX3d m(p.size(), 3);
  for (size_t i = 0; i < p.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
  return m;
}

struct Fixture {
  int L = 6;
  TemplateSphere sphere = build_template_sphere(400);
  AlignmentWorkspace ws{L, fibonacci_sphere(300), sphere.points};
};

}  // namespace

TEST_CASE("template sphere at production size is a near-uniform genus-0 mesh") {
  const auto s = build_template_sphere(8000);
  CHECK(s.size() == 8000);
  const auto m = s.mesh();
  const auto r = validate_genus0(m);
  CHECK(r.genus0());
  CHECK(r.euler_characteristic == 2);
  CHECK(vertex_area_ratio(s) < 3.0);
  for (const auto& p : s.points) CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(validate_genus0(build_template_sphere(12).mesh()).genus0());
  const auto ico = icosphere_template(3);
  CHECK(ico.size() == 642);
  CHECK(validate_genus0(ico.mesh()).genus0());
}

TEST_CASE("first-order ellipsoid normalization matches a principal-axis oracle") {
  const auto dirs = fibonacci_sphere(2000);
  const Mat3 rz = axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  const Vec3 shift(0.3, -1.0, 2.0);
  std::vector<Vec3> pos;
  for (const auto& u : dirs) pos.push_back(rz * Vec3(2.0 * u.x(), 1.0 * u.y(), 0.5 * u.z()) + shift);
  const auto c = fit_positions(pos, dirs, 4).coeffs;
  const auto foe = foe_normalize(c);
  CHECK_FALSE(foe.degenerate);
  CHECK(foe.axis_lengths[0] / foe.axis_lengths[2] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(foe.axis_lengths[1] / foe.axis_lengths[2] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK((foe.center - shift).norm() < 1e-10);
  CHECK((foe.rotation.transpose() * foe.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(foe.rotation.determinant() == doctest::Approx(1.0));

  // brute-force PCA of the normalized surface: centred, axes ordered x > y > z
  const auto p = sample(foe.coeffs, dirs);
  const Eigen::RowVector3d mean = p.colwise().mean();
  CHECK(mean.norm() < 1e-3);
  const Eigen::MatrixX3d q = p.rowwise() - mean;
  const Mat3 cov = q.transpose() * q / static_cast<double>(p.rows());
  CHECK(std::abs(cov(0, 1)) < 1e-3 * cov(0, 0));
  CHECK(std::abs(cov(0, 2)) < 1e-3 * cov(0, 0));
  CHECK(std::abs(cov(1, 2)) < 1e-3 * cov(0, 0));
  CHECK(cov(0, 0) > cov(1, 1));
  CHECK(cov(1, 1) > cov(2, 2));
  // variance of a uniform ellipsoid surface sample along an axis of length a scales with a^2
  CHECK(cov(0, 0) / cov(2, 2) == doctest::Approx(16.0).epsilon(0.02));

  // normalized = R (x - center) pointwise
  const auto raw = evaluate_surface(c, dirs);
  const auto norm = evaluate_surface(foe.coeffs, dirs);
  for (size_t i = 0; i < dirs.size(); i += 97) CHECK((norm[i] - foe.rotation * (raw[i] - foe.center)).norm() < 1e-10);

  const Mat3 a = degree1_matrix(foe.coeffs);
  CHECK(std::abs(a(0, 1)) + std::abs(a(1, 0)) + std::abs(a(0, 2)) + std::abs(a(2, 0)) < 1e-9);
  CHECK(a(0, 0) > a(1, 1));
  CHECK(a(1, 1) > a(2, 2));
  CHECK(a(2, 2) > 0.0);
}

TEST_CASE("a sphere has no distinct principal axes") {
  const auto dirs = fibonacci_sphere(200);
  const auto c = fit_positions(dirs, dirs, 3).coeffs;
  const auto foe = foe_normalize(c);
  CHECK(foe.degenerate);
  CHECK((foe.rotation - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("Procrustes recovers a known rigid motion") {
  std::mt19937_64 rng(21);
  Eigen::MatrixX3d a = Eigen::MatrixX3d::Random(50, 3);
  const Mat3 r = test::random_rotation(rng);
  const Vec3 t(1, 2, 3);
  Eigen::MatrixX3d b = (a * r.transpose()).rowwise() + t.transpose();
  Mat3 rr;
  Vec3 tt;
  CHECK(procrustes(a, b, &rr, &tt) < 1e-12);
  CHECK((rr - r).norm() < 1e-12);
  CHECK((tt - t).norm() < 1e-12);
}

TEST_CASE("base rotation grid holds 72 distinct proper rotations") {
  const auto grid = base_rotation_grid();
  REQUIRE(grid.size() == 72);
  for (size_t i = 0; i < grid.size(); ++i) {
    CHECK((grid[i].transpose() * grid[i] - Mat3::Identity()).norm() < 1e-12);
    CHECK(grid[i].determinant() == doctest::Approx(1.0));
    for (size_t j = 0; j < i; ++j) CHECK((grid[i] - grid[j]).norm() > 1e-3);
  }
}

TEST_CASE("alignment to itself and to rigid copies is exact") {
  Fixture f;
  std::mt19937_64 rng(22);
  const auto c = test::random_coeffs(f.L, rng, 0.05);
  const auto self = align_to_reference(c, c, 3, f.ws);
  CHECK(self.rmsd < 1e-9);
  const Mat3 r = test::random_rotation(rng);
  const Vec3 t(0.5, 0.1, -2.0);
  const auto ref = c.rotated(r).translated(t);
  const auto a = align_to_reference(c, ref, 3, f.ws);
  CHECK(a.rmsd < 1e-6);
  CHECK(test::max_abs_diff(a.coeffs, ref) < 1e-6 * ref.norm());
}

TEST_CASE("alignment undoes a parameter rotation") {
  Fixture f;
  std::mt19937_64 rng(23);
  const auto c = test::random_coeffs(f.L, rng, 0.05);
  const Mat3 q = test::random_rotation(rng);
  const auto moved = reparametrized(c, q, f.sphere.points);
  const auto a = align_to_reference(moved, c, 5, f.ws);
  CHECK(a.rmsd < 0.05 * (c.norm() / std::sqrt(4 * std::numbers::pi)));
  CHECK(a.rmsd < rotation_rmsd(moved, c, Mat3::Identity(), f.ws));
  // reported result is reproducible from its own parameter rotation
  CHECK(rotation_rmsd(moved, c, a.param_rotation, f.ws) == doctest::Approx(a.rmsd).epsilon(1e-9));
}

TEST_CASE("depth-0 search is at least as good as an exhaustive scan of the base grid") {
  Fixture f;
  std::mt19937_64 rng(24);
  const auto c = test::random_coeffs(f.L, rng, 0.1);
  const auto ref = test::random_coeffs(f.L, rng, 0.1);
  double best = rotation_rmsd(c, ref, Mat3::Identity(), f.ws);
  for (const auto& g : base_rotation_grid()) best = std::min(best, rotation_rmsd(c, ref, g, f.ws));
  const auto a = align_to_reference(c, ref, 0, f.ws);
  CHECK(a.rmsd <= best + 1e-12);
  CHECK(a.evaluations >= 73);
}

TEST_CASE("refinement never worsens the depth-0 result") {
  Fixture f;
  std::mt19937_64 rng(25);
  const auto c = test::random_coeffs(f.L, rng, 0.1);
  const auto ref = test::random_coeffs(f.L, rng, 0.1);
  double prev = align_to_reference(c, ref, 0, f.ws).rmsd;
  for (int depth = 1; depth <= 4; ++depth) {
    const double cur = align_to_reference(c, ref, depth, f.ws).rmsd;
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("mean of a single subject is that subject") {
  Fixture f;
  std::mt19937_64 rng(26);
  const auto c = test::random_coeffs(f.L, rng, 0.05);
  const auto m = build_mean_surface({c}, f.sphere, f.ws);
  CHECK(m.converged);
  CHECK(test::max_abs_diff(m.mean, c) < 1e-9 * c.norm());
  CHECK(m.mesh.shared_faces() == f.sphere.faces);
}

TEST_CASE("mean of identical subjects is that subject") {
  Fixture f;
  std::mt19937_64 rng(27);
  const auto c = test::random_coeffs(f.L, rng, 0.05);
  const Mat3 r = test::random_rotation(rng);
  const auto m = build_mean_surface({c, c.rotated(r).translated(Vec3(1, 1, 1)), c}, f.sphere, f.ws);
  CHECK(test::max_abs_diff(m.mean, c) < 1e-6 * c.norm());
  for (const auto& a : m.alignments) CHECK(a.rmsd < 1e-6);
}

TEST_CASE("mean of concentric spheres of radius 1 and 3 has radius 2") {
  Fixture f;
  const auto dirs = fibonacci_sphere(200);
  std::vector<Vec3> big;
  for (const auto& u : dirs) big.push_back(3.0 * u + Vec3(5, 0, 0));
  const auto s1 = fit_positions(dirs, dirs, f.L).coeffs;
  const auto s3 = fit_positions(big, dirs, f.L).coeffs;
  const auto m = build_mean_surface({s1, s3}, f.sphere, f.ws);
  CHECK(m.alignments[0].degenerate_foe);
  const Vec3 c = m.mean.center();
  for (const auto& p : evaluate_surface(m.mean, dirs)) CHECK((p - c).norm() == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("recorded composite transforms reproduce the aligned surfaces") {
  Fixture f;
  std::mt19937_64 rng(28);
  std::vector<SpharmCoefficients> raw;
  for (int i = 0; i < 4; ++i) {
    raw.push_back(reparametrized(test::random_coeffs(f.L, rng, 0.08), test::random_rotation(rng), f.sphere.points)
                      .rotated(test::random_rotation(rng))
                      .translated(Vec3(i, -i, 0.5)));
  }
  const auto m = build_mean_surface(raw, f.sphere, f.ws);
  const auto dirs = fibonacci_sphere(60);
  for (size_t i = 0; i < raw.size(); ++i) {
    const auto& rec = m.alignments[i];
    const auto aligned = evaluate_surface(m.aligned[i], dirs);
    std::vector<Vec3> q;
    for (const auto& u : dirs) q.push_back(rec.param_rotation * u);
    const auto source = evaluate_surface(raw[i], q);
    for (size_t k = 0; k < dirs.size(); ++k) {
      CHECK((aligned[k] - (rec.object_rotation * source[k] + rec.translation)).norm() < 1e-8);
    }
  }
}

TEST_CASE("mean does not depend on subject order") {
  Fixture f;
  std::mt19937_64 rng(29);
  std::vector<SpharmCoefficients> raw;
  for (int i = 0; i < 3; ++i) raw.push_back(test::random_coeffs(f.L, rng, 0.05).rotated(test::random_rotation(rng)));
  const auto a = build_mean_surface(raw, f.sphere, f.ws);
  const std::vector<int> order{2, 0, 1};
  std::vector<SpharmCoefficients> perm;
  for (int k : order) perm.push_back(raw[static_cast<size_t>(k)]);
  const auto b = build_mean_surface(perm, f.sphere, f.ws);
  CHECK(order[static_cast<size_t>(b.reference)] == a.reference);
  CHECK(test::max_abs_diff(a.mean, b.mean) < 1e-9 * a.mean.norm());
  for (size_t k = 0; k < order.size(); ++k) {
    CHECK(b.alignments[k].rmsd == doctest::Approx(a.alignments[static_cast<size_t>(order[k])].rmsd).epsilon(1e-9));
  }
}

TEST_CASE("realigning an aligned subject leaves its rmsd unchanged") {
  Fixture f;
  std::mt19937_64 rng(32);
  std::vector<SpharmCoefficients> raw;
  for (int i = 0; i < 3; ++i) raw.push_back(test::random_coeffs(f.L, rng, 0.05).rotated(test::random_rotation(rng)));
  const auto m = build_mean_surface(raw, f.sphere, f.ws);
  for (size_t i = 0; i < raw.size(); ++i) {
    const auto again = align_to_reference(m.aligned[i], m.mean, 5, f.ws);
    CHECK(again.rmsd <= m.alignments[i].rmsd + 1e-6);
    CHECK(again.rmsd >= m.alignments[i].rmsd - 1e-3 * m.alignments[i].rmsd - 1e-6);
  }
}

TEST_CASE("mean of a surface and its rotated copy is closer to it than the copy was") {
  Fixture f;
  const auto dirs = fibonacci_sphere(500);
  std::vector<Vec3> pos;
  for (const auto& u : dirs) pos.emplace_back(2.0 * u.x(), 1.0 * u.y(), 0.5 * u.z());
  const auto m0 = fit_positions(pos, dirs, f.L).coeffs;
  const auto m1 = reparametrized(m0, axis_angle(Vec3(1, 1, 0), 0.8), f.sphere.points)
                      .rotated(axis_angle(Vec3(0, 1, 2), 1.1));
  const double before = rotation_rmsd(m1, m0, Mat3::Identity(), f.ws);
  CHECK(before > 0.1);
  const auto mean = build_mean_surface({m0, m1}, f.sphere, f.ws);
  const double after = align_to_reference(mean.mean, m0, 3, f.ws).rmsd;
  CHECK(after < before);
  CHECK(after < 1e-3);
}

TEST_CASE("registered surfaces share the template triangulation and combine linearly") {
  Fixture f;
  std::mt19937_64 rng(30);
  const auto a = test::random_coeffs(f.L, rng);
  const auto b = test::random_coeffs(f.L, rng);
  const auto ra = register_subject(a, f.sphere);
  const auto rb = register_subject(b, f.sphere);
  const auto rc = register_subject(0.3 * a + 0.7 * b, f.sphere);
  CHECK(ra.shared_faces() == f.sphere.faces);
  CHECK(rb.shared_faces() == rc.shared_faces());
  for (int i = 0; i < rc.vertex_count(); ++i) {
    CHECK((rc.vertex(i) - (0.3 * ra.vertex(i) + 0.7 * rb.vertex(i))).norm() < 1e-12);
  }
}

TEST_CASE("mean surface refuses empty and mixed-degree cohorts") {
  Fixture f;
  std::mt19937_64 rng(31);
  CHECK_THROWS_AS(build_mean_surface({}, f.sphere, f.ws), Error);
  CHECK_THROWS_AS(build_mean_surface({test::random_coeffs(f.L, rng), test::random_coeffs(3, rng)}, f.sphere, f.ws),
                  Error);
}

#include "qcspharm/mean_template.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qcspharm/error.hpp"
#include "qcspharm/sphere_sampling.hpp"

namespace qcs {

namespace {

TemplateSphere from_points(std::vector<Vec3> points) {
  TemplateSphere s;
  s.faces = std::make_shared<const FaceList>(sphere_hull(points));
  s.points = std::move(points);
  return s;
}

std::vector<Vec3> rotated_points(const std::vector<Vec3>& pts, const Mat3& q) {
  std::vector<Vec3> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) out[i] = (q * pts[i]).normalized();
  return out;
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

struct Candidate {
  Mat3 q;
  double rmsd;
};

// Evaluates parameter rotations against one fixed reference.
class Scorer {
 public:
  Scorer(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference, const AlignmentWorkspace& ws)
      : ws_(ws), real_(coeffs.real_form()) {
    require(coeffs.degree_cap() == ws.degree_cap() && reference.degree_cap() == ws.degree_cap(),
            ErrorCode::SchemaMismatch, "coefficient degree differs from alignment workspace");
    fixed_ = ws.sample_basis() * reference.real_form();
  }

  Eigen::MatrixX3d positions(const Mat3& q) const {
    if (q.isIdentity(0.0)) return ws_.sample_basis() * real_;
    return real_basis_matrix(rotated_points(ws_.sample_points(), q), ws_.degree_cap()) * real_;
  }

  double score(const Mat3& q, Mat3* r = nullptr, Vec3* t = nullptr) {
    ++evaluations;
    Mat3 rr;
    Vec3 tt;
    double d = procrustes(positions(q), fixed_, &rr, &tt);
    if (r) *r = rr;
    if (t) *t = tt;
    return d;
  }

  int evaluations = 0;

 private:
  const AlignmentWorkspace& ws_;
  Eigen::MatrixX3d real_;
  Eigen::MatrixX3d fixed_;
};

constexpr double kBaseStep = 25.0 * std::numbers::pi / 180.0;
constexpr double kFinestStep = 1e-4;

// Greedy descent over +-x, +-y, +-z perturbations, halving the angle per level.
// Any refinement at all continues past `levels` down to kFinestStep.
Candidate refine(Scorer& scorer, Candidate start, double first_step, int levels) {
  double step = first_step;
  for (int level = 0; level < levels || (levels > 0 && step >= kFinestStep); ++level, step *= 0.5) {
    for (int moves = 0; moves < 6; ++moves) {
      Candidate best = start;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
          Mat3 q = orthonormalize(start.q * axis_angle(Vec3::Unit(axis), sign * step));
          double d = scorer.score(q);
          if (d < best.rmsd) best = {q, d};
        }
      }
      if (best.rmsd >= start.rmsd) break;
      start = best;
    }
  }
  return start;
}

// Parameter rotations that map the first-order ellipsoid of one surface onto
// another's under the four proper sign choices.
std::vector<Mat3> ellipsoid_candidates(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference) {
  Eigen::JacobiSVD<Mat3> s(degree1_matrix(coeffs), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::JacobiSVD<Mat3> r(degree1_matrix(reference), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 vs = s.matrixV(), vr = r.matrixV();
  const double target = vs.determinant() * vr.determinant();
  std::vector<Mat3> out;
  for (int mask = 0; mask < 8; ++mask) {
    Vec3 d(mask & 1 ? -1.0 : 1.0, mask & 2 ? -1.0 : 1.0, mask & 4 ? -1.0 : 1.0);
    if (d.prod() * target < 0) continue;
    out.push_back(orthonormalize(vs * d.asDiagonal() * vr.transpose()));
  }
  return out;
}

// Per-degree power for l >= 1; unchanged by rotations in either space and by translation.
Eigen::VectorXd degree_power(const SpharmCoefficients& c) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(c.degree_cap());
  for (int l = 1; l <= c.degree_cap(); ++l) {
    for (int m = -l; m <= l; ++m) p[l - 1] += c(l, m).squaredNorm();
  }
  return p;
}

// Subject whose power spectrum is closest to the cohort average.
size_t reference_subject(const std::vector<SpharmCoefficients>& cohort) {
  std::vector<Eigen::VectorXd> power;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(cohort.front().degree_cap());
  for (const auto& c : cohort) {
    power.push_back(degree_power(c));
    avg += power.back();
  }
  avg /= static_cast<double>(cohort.size());
  size_t best = 0;
  for (size_t i = 1; i < cohort.size(); ++i) {
    const double di = (power[i] - avg).squaredNorm(), db = (power[best] - avg).squaredNorm();
    if (di < db || (di == db && std::lexicographical_compare(power[i].begin(), power[i].end(),
                                                             power[best].begin(), power[best].end()))) {
      best = i;
    }
  }
  return best;
}

}  // namespace

TemplateSphere build_template_sphere(int n) {
  require(n >= 4, ErrorCode::InvalidParameter, "template sphere needs at least 4 points");
  return from_points(fibonacci_sphere(n));
}

TemplateSphere icosphere_template(int level) {
  auto mesh = make_icosphere(level);
  TemplateSphere s;
  s.points = mesh.vertices();
  s.faces = mesh.shared_faces();
  return s;
}

double vertex_area_ratio(const TemplateSphere& sphere) {
  std::vector<double> area(sphere.points.size(), 0.0);
  for (const auto& t : *sphere.faces) {
    const Vec3& a = sphere.points[t[0]];
    double fa = 0.5 * (sphere.points[t[1]] - a).cross(sphere.points[t[2]] - a).norm();
    for (int k : t) area[k] += fa / 3.0;
  }
  auto [lo, hi] = std::minmax_element(area.begin(), area.end());
  return *hi / *lo;
}

Mat3 degree1_matrix(const SpharmCoefficients& coeffs) {
  require(coeffs.degree_cap() >= 1, ErrorCode::InvalidParameter, "degree-1 terms required");
  Mat3 a;
  Complex basis[4];
  for (int k = 0; k < 3; ++k) {
    eval_basis(Vec3::Unit(k), 1, basis);
    Vec3 col = Vec3::Zero();
    for (int m = -1; m <= 1; ++m) col += (coeffs(1, m) * basis[coeff_index(1, m)]).real();
    a.col(k) = col;
  }
  return a;
}

FoeResult foe_normalize(const SpharmCoefficients& coeffs, double distinct_tolerance) {
  FoeResult out;
  out.center = coeffs.center();
  const auto centred = coeffs.translated(-out.center);
  Eigen::JacobiSVD<Mat3> svd(degree1_matrix(centred), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  out.axis_lengths = sv;
  const double scale = std::max(sv[0], 1e-300);
  if (sv[0] - sv[1] < distinct_tolerance * scale || sv[1] - sv[2] < distinct_tolerance * scale) {
    out.degenerate = true;
    out.coeffs = centred;
    return out;
  }
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  for (int k = 0; k < 3; ++k) {
    Eigen::Index big;
    v.col(k).cwiseAbs().maxCoeff(&big);
    if (v(big, k) < 0) u.col(k) *= -1.0;
  }
  if (u.determinant() < 0) u.col(2) *= -1.0;
  out.rotation = u.transpose();
  out.coeffs = centred.rotated(out.rotation);
  return out;
}

AlignmentWorkspace::AlignmentWorkspace(int degree_cap, std::vector<Vec3> sample_points,
                                       const std::vector<Vec3>& refit_points)
    : degree_cap_(degree_cap),
      samples_(std::move(sample_points)),
      sample_basis_(real_basis_matrix(samples_, degree_cap)),
      refit_points_(refit_points),
      fitter_(refit_points, degree_cap) {
  require(samples_.size() >= 3, ErrorCode::InvalidParameter, "alignment needs at least 3 sample points");
}

std::vector<Mat3> base_rotation_grid() {
  // Super-Fibonacci spiral on the unit quaternions.
  constexpr int n = 72;
  const double phi = std::sqrt(2.0);
  const double psi = 1.533751168755204288118041;
  std::vector<Mat3> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = i + 0.5;
    const double r = std::sqrt(s / n), R = std::sqrt(1.0 - s / n);
    const double alpha = 2.0 * std::numbers::pi * s / phi;
    const double beta = 2.0 * std::numbers::pi * s / psi;
    Eigen::Quaterniond q(R * std::cos(beta), r * std::sin(alpha), r * std::cos(alpha), R * std::sin(beta));
    out.push_back(q.normalized().toRotationMatrix());
  }
  return out;
}

double procrustes(const Eigen::MatrixX3d& moving, const Eigen::MatrixX3d& fixed, Mat3* rotation,
                  Vec3* translation) {
  require(moving.rows() == fixed.rows() && moving.rows() > 0, ErrorCode::LengthMismatch,
          "procrustes needs equally sized nonempty point sets");
  const Eigen::RowVector3d mx = moving.colwise().mean(), my = fixed.colwise().mean();
  const Eigen::MatrixX3d x = moving.rowwise() - mx, y = fixed.rowwise() - my;
  const Mat3 h = x.transpose() * y;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d(1.0, 1.0, (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0);
  const Mat3 r = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
  const Vec3 t = my.transpose() - r * mx.transpose();
  const double ss = ((x * r.transpose()) - y).squaredNorm();
  if (rotation) *rotation = r;
  if (translation) *translation = t;
  return std::sqrt(ss / static_cast<double>(moving.rows()));
}

double rotation_rmsd(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference,
                     const Mat3& param_rotation, const AlignmentWorkspace& workspace) {
  Scorer scorer(coeffs, reference, workspace);
  return scorer.score(param_rotation);
}

AlignResult align_to_reference(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference,
                               int search_depth, const AlignmentWorkspace& workspace, bool global_search) {
  require(search_depth >= 0, ErrorCode::InvalidParameter, "search depth must be >= 0");
  Scorer scorer(coeffs, reference, workspace);

  Candidate best{Mat3::Identity(), scorer.score(Mat3::Identity())};
  if (global_search) {
    std::vector<Candidate> pool{best};
    for (const auto& q : base_rotation_grid()) pool.push_back({q, scorer.score(q)});
    for (const auto& q : ellipsoid_candidates(coeffs, reference)) pool.push_back({q, scorer.score(q)});
    std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.rmsd < b.rmsd; });
    const size_t seeds = std::min<size_t>(2, pool.size());
    best = pool.front();
    for (size_t k = 0; k < seeds; ++k) {
      Candidate c = refine(scorer, pool[k], kBaseStep, search_depth);
      if (c.rmsd < best.rmsd) best = c;
    }
  } else {
    // Already close: skip the coarsest levels.
    const int skip = std::min(2, search_depth);
    best = refine(scorer, best, kBaseStep / std::pow(2.0, skip), search_depth - skip + 1);
  }

  AlignResult out;
  out.param_rotation = best.q;
  out.rmsd = scorer.score(best.q, &out.object_rotation, &out.translation);
  out.evaluations = scorer.evaluations;
  if (best.q.isIdentity(0.0)) {
    out.coeffs = coeffs.rotated(out.object_rotation).translated(out.translation);
  } else {
    const auto& refit = workspace.refit_points();
    Eigen::MatrixX3d pos = real_basis_matrix(rotated_points(refit, best.q), workspace.degree_cap()) * coeffs.real_form();
    pos = (pos * out.object_rotation.transpose()).rowwise() + out.translation.transpose();
    out.coeffs = workspace.fitter().fit(pos);
  }
  return out;
}

MeanTemplate build_mean_surface(const std::vector<SpharmCoefficients>& cohort, const TemplateSphere& sphere,
                                const AlignmentWorkspace& workspace, const MeanOptions& options) {
  require(!cohort.empty(), ErrorCode::TooFewSubjects, "mean surface needs at least one subject");
  require(options.iterations >= 1, ErrorCode::InvalidParameter, "iteration count must be >= 1");
  const int L = cohort.front().degree_cap();
  for (const auto& c : cohort) {
    require(c.degree_cap() == L, ErrorCode::SchemaMismatch, "cohort mixes degree caps");
  }
  const size_t n = cohort.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double norm_scale = std::sqrt(4.0 * std::numbers::pi);

  MeanTemplate out;
  out.aligned.resize(n);
  out.alignments.resize(n);
  std::vector<FoeResult> foe(n);
  for (size_t i = 0; i < n; ++i) {
    foe[i] = foe_normalize(cohort[i]);
    out.alignments[i].degenerate_foe = foe[i].degenerate;
  }

  out.reference = static_cast<int>(reference_subject(cohort));
  SpharmCoefficients mean = cohort[static_cast<size_t>(out.reference)];
  for (int it = 1; it <= options.iterations; ++it) {
    SpharmCoefficients sum(L);
    for (size_t i = 0; i < n; ++i) {
      auto& record = out.alignments[i];
      AlignResult a;
      if (it == 1) {
        a = align_to_reference(foe[i].coeffs, mean, options.search_depth, workspace, true);
        record.object_rotation = a.object_rotation * foe[i].rotation;
        record.param_rotation = a.param_rotation;
        record.translation = a.translation - a.object_rotation * foe[i].rotation * foe[i].center;
      } else {
        a = align_to_reference(out.aligned[i], mean, options.search_depth, workspace, false);
        record.translation = a.object_rotation * record.translation + a.translation;
        record.object_rotation = a.object_rotation * record.object_rotation;
        record.param_rotation = record.param_rotation * a.param_rotation;
      }
      record.rmsd = a.rmsd;
      out.aligned[i] = std::move(a.coeffs);
      sum = sum + out.aligned[i];
    }
    SpharmCoefficients next = inv_n * sum;
    const double movement = (next - mean).norm() / norm_scale;
    mean = std::move(next);
    out.iterations = it;
    if (movement < options.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.mean = mean;
  out.mesh = reconstruct(mean, sphere.points, sphere.faces);
  return out;
}

AlignResult align_subject(const SpharmCoefficients& coeffs, const MeanTemplate& mean_template, int search_depth,
                          const AlignmentWorkspace& workspace) {
  const auto foe = foe_normalize(coeffs);
  AlignResult a = align_to_reference(foe.coeffs, mean_template.mean, search_depth, workspace, true);
  a.translation -= a.object_rotation * foe.rotation * foe.center;
  a.object_rotation = a.object_rotation * foe.rotation;
  return a;
}

TriangleMesh register_subject(const SpharmCoefficients& aligned, const TemplateSphere& sphere) {
  return reconstruct(aligned, sphere.points, sphere.faces);
}

}  // namespace qcs

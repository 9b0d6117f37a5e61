#pragma once

#include <memory>
#include <vector>

#include "qcspharm/mesh.hpp"
#include "qcspharm/spharm.hpp"

namespace qcs {

/// Unit-vector vertex set with a closed triangulation shared by every surface
/// registered onto it.
struct TemplateSphere {
  std::vector<Vec3> points;
  std::shared_ptr<const FaceList> faces;

  int size() const { return static_cast<int>(points.size()); }
  TriangleMesh mesh() const { return TriangleMesh(points, faces); }
};

/// Fibonacci lattice of exactly `n` points triangulated by its convex hull.
TemplateSphere build_template_sphere(int n);
TemplateSphere icosphere_template(int level);

/// max / min barycentric vertex area of the flat triangulation.
double vertex_area_ratio(const TemplateSphere& sphere);

/// Linear map A with (degree-1 part of the surface)(u) = A u.
Mat3 degree1_matrix(const SpharmCoefficients& coeffs);

struct FoeResult {
  SpharmCoefficients coeffs;
  Mat3 rotation = Mat3::Identity();  // normalized = rotation * (x - center)
  Vec3 center = Vec3::Zero();
  Vec3 axis_lengths = Vec3::Zero();  // singular values of the degree-1 map, descending
  bool degenerate = false;           // axes not distinct; rotation fell back to identity
};

/// Moves the degree-0 term to the origin and rotates the first-order
/// ellipsoid's principal axes onto x > y > z.
FoeResult foe_normalize(const SpharmCoefficients& coeffs, double distinct_tolerance = 1e-4);

/// Sample and refit point sets shared by every alignment at one degree cap.
class AlignmentWorkspace {
 public:
  /// `sample_points` drive the RMSD evaluation; `refit_points` (at least
  /// (L+1)^2 of them) carry parameter rotations back into coefficients.
  AlignmentWorkspace(int degree_cap, std::vector<Vec3> sample_points, const std::vector<Vec3>& refit_points);

  int degree_cap() const { return degree_cap_; }
  const std::vector<Vec3>& sample_points() const { return samples_; }
  const Eigen::MatrixXd& sample_basis() const { return sample_basis_; }
  const SpharmFitter& fitter() const { return fitter_; }
  const std::vector<Vec3>& refit_points() const { return refit_points_; }

 private:
  int degree_cap_;
  std::vector<Vec3> samples_;
  Eigen::MatrixXd sample_basis_;
  std::vector<Vec3> refit_points_;
  SpharmFitter fitter_;
};

struct AlignResult {
  SpharmCoefficients coeffs;  // aligned(u) = object_rotation * x(param_rotation * u) + translation
  double rmsd = 0.0;
  Mat3 param_rotation = Mat3::Identity();
  Mat3 object_rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int evaluations = 0;
};

/// The 72 base parameter-space rotations of the hierarchical search.
std::vector<Mat3> base_rotation_grid();

/// Best rigid (rotation + translation) fit of `moving` onto `fixed`, rows are
/// corresponding points. Returns the RMSD after alignment.
double procrustes(const Eigen::MatrixX3d& moving, const Eigen::MatrixX3d& fixed, Mat3* rotation,
                  Vec3* translation);

/// RMSD between the reference and the subject re-sampled through a fixed
/// parameter rotation, after the closed-form object-space fit.
double rotation_rmsd(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference,
                     const Mat3& param_rotation, const AlignmentWorkspace& workspace);

/// Hierarchical search over parameter rotations (base grid plus first-order
/// ellipsoid candidates, then `search_depth` levels of local refinement), with
/// the object rotation solved in closed form for every candidate. With
/// `global_search` false only the local refinement around the identity runs.
AlignResult align_to_reference(const SpharmCoefficients& coeffs, const SpharmCoefficients& reference,
                               int search_depth, const AlignmentWorkspace& workspace,
                               bool global_search = true);

struct SubjectAlignment {
  Mat3 object_rotation = Mat3::Identity();
  Mat3 param_rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double rmsd = 0.0;
  bool degenerate_foe = false;
};

struct MeanTemplate {
  SpharmCoefficients mean;
  TriangleMesh mesh;  // mean reconstructed on the template sphere
  std::vector<SpharmCoefficients> aligned;
  std::vector<SubjectAlignment> alignments;
  int reference = 0;  // subject whose pose and parametrization the mean inherits
  int iterations = 0;
  bool converged = false;
};

struct MeanOptions {
  int iterations = 20;
  int search_depth = 5;
  double tolerance = 1e-6;  // RMSD change of the mean between iterations
};

/// Iterates { align every subject to the current mean; average } starting
/// from the subject with the most typical power spectrum, which makes the
/// result independent of cohort order. The mean stays in that subject's pose.
MeanTemplate build_mean_surface(const std::vector<SpharmCoefficients>& cohort, const TemplateSphere& sphere,
                                const AlignmentWorkspace& workspace, const MeanOptions& options = {});

/// First-order normalization followed by a global alignment to the mean.
AlignResult align_subject(const SpharmCoefficients& coeffs, const MeanTemplate& mean_template, int search_depth,
                          const AlignmentWorkspace& workspace);

/// Evaluates aligned coefficients on the template sphere; faces are F0 itself.
TriangleMesh register_subject(const SpharmCoefficients& aligned, const TemplateSphere& sphere);

}  // namespace qcs

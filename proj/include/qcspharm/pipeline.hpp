#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qcspharm/cohort.hpp"
#include "qcspharm/distortion.hpp"
#include "qcspharm/evaluation.hpp"
#include "qcspharm/features.hpp"
#include "qcspharm/mean_template.hpp"
#include "qcspharm/sphere_param.hpp"
#include "qcspharm/spharm.hpp"
#include "qcspharm/svm.hpp"

namespace qcs {

struct PipelineConfig {
  int L = 30;
  int N = 8000;

  std::string template_kind = "fibonacci";  // or "icosphere"
  int icosphere_level = 5;
  MeanOptions mean;
  int align_samples = 1000;

  bool improve_enabled = true;
  ImproveOptions improve;

  int param_iterations = 300;
  double param_tolerance = 1e-6;
  double max_condition = 1e8;

  ShapeIndexWeights weights;
  SvmOptions svm;

  double p_cut = 0.01;
  std::vector<double> p_cut_grid = default_pcut_grid();
  int train_per_class = 15;
  int test_per_class = 5;
  int repetitions = 100;
  Method method = Method::QcSpharm;
  std::uint64_t seed = 1;
  int export_repetition = 0;

  CohortSpec synth;

  EvalOptions eval_options() const;
  void validate() const;
};

nlohmann::json config_to_json(const PipelineConfig& c);
/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
/// `overrides` are "dotted.key=value" with value parsed as JSON when possible.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
PipelineConfig apply_overrides(const PipelineConfig& base, const std::vector<std::string>& overrides);

struct SubjectInput {
  std::string id;
  int label = 1;
  TriangleMesh mesh;
};

struct PreparedSubject {
  std::string id;
  int label = 1;
  TriangleMesh mesh;  // after quality improvement
  ParamResult param;
  FitResult fit;
};

TriangleMesh improve_stage(const TriangleMesh& mesh, const PipelineConfig& config);
/// Quality improvement, spherical parametrization and SPHARM fit of one subject.
PreparedSubject prepare_subject(const SubjectInput& input, const PipelineConfig& config);

TemplateSphere make_template_sphere(const PipelineConfig& config);
AlignmentWorkspace make_workspace(const PipelineConfig& config, const TemplateSphere& sphere);

struct MeasuredSubject {
  AlignResult alignment;
  TriangleMesh registered;
  DistortionField field;
  double volume = 0.0;
  Eigen::VectorXd features;
};

MeasuredSubject measure_subject(const SpharmCoefficients& coeffs, const MeanTemplate& mean,
                                const Curvatures& mean_curvatures, const TemplateSphere& sphere,
                                const AlignmentWorkspace& workspace, const PipelineConfig& config);

struct CohortRun {
  TemplateSphere sphere;
  MeanTemplate mean;
  FeatureMatrix matrix;
  std::vector<PreparedSubject> subjects;
  std::vector<SubjectAlignment> alignments;  // registration to the template, per subject
  std::vector<TriangleMesh> registered;
};

/// Whole pipeline in memory: the template is built from class +1 subjects only.
CohortRun run_pipeline(const std::vector<SubjectInput>& inputs, const PipelineConfig& config);

/// Template vertices that fall inside the ground-truth bump for at least half
/// of the given subjects. Each registered vertex is carried back through its
/// subject's alignment and generation rotation before the cap test.
std::vector<int> template_truth_mask(const std::vector<TriangleMesh>& registered,
                                     const std::vector<SubjectAlignment>& alignments,
                                     const std::vector<Mat3>& generation_rotations, const GroundTruth& truth);

// On-disk stages. A cohort directory holds one mesh per subject plus
// manifest.json; a run directory holds every later artifact and a provenance
// manifest of content hashes.
void write_cohort(const Cohort& cohort, const CohortSpec& spec, const std::filesystem::path& dir);
std::vector<SubjectInput> read_cohort(const std::filesystem::path& manifest);

void stage_synth(const PipelineConfig& config, const std::filesystem::path& out_dir);
void stage_improve(const PipelineConfig& config, const std::filesystem::path& run,
                   const std::filesystem::path& cohort_manifest);
void stage_parametrize(const PipelineConfig& config, const std::filesystem::path& run);
void stage_fit(const PipelineConfig& config, const std::filesystem::path& run);
void stage_template(const PipelineConfig& config, const std::filesystem::path& run);
void stage_register(const PipelineConfig& config, const std::filesystem::path& run);
void stage_distort(const PipelineConfig& config, const std::filesystem::path& run);
void stage_features(const PipelineConfig& config, const std::filesystem::path& run);
void stage_train(const PipelineConfig& config, const std::filesystem::path& run);
nlohmann::json stage_predict(const std::filesystem::path& model, const std::filesystem::path& features);
void stage_evaluate(const PipelineConfig& config, const std::filesystem::path& run);
void stage_sweep(const PipelineConfig& config, const std::filesystem::path& run);
void stage_export_map(const PipelineConfig& config, const std::filesystem::path& run,
                      const std::filesystem::path& selection);

}  // namespace qcs

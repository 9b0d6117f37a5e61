#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qcspharm/features.hpp"
#include "qcspharm/mesh.hpp"
#include "qcspharm/svm.hpp"

namespace qcs {

enum class Method { QcSpharm, Qc, Spharm, Volume };

Method parse_method(const std::string& name);
std::string method_name(Method m);

/// Columns a method may draw features from.
std::vector<int> method_columns(const FeatureSchema& schema, Method m);

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

/// Per-class random draw of disjoint train and test rows, seeded by (seed, repetition).
Split stratified_split(const std::vector<int>& labels, int train_per_class, int test_per_class, std::uint64_t seed,
                       int repetition);

/// Bagged p-values for the method's columns computed from `rows` only; entry k
/// belongs to method_columns(schema, m)[k]. Empty for the volume method.
std::vector<double> training_pvalues(const FeatureMatrix& matrix, const std::vector<int>& rows, Method m);

struct EvalOptions {
  Method method = Method::QcSpharm;
  int train_per_class = 15;
  int test_per_class = 5;
  int repetitions = 100;
  std::uint64_t seed = 1;
  SvmOptions svm;
};

struct RepetitionResult {
  int repetition = 0;
  double sensitivity = 0.0;  // recall on class -1
  double specificity = 0.0;  // recall on class +1
  double accuracy = 0.0;
  int positives = 0;  // class -1 test rows
  int negatives = 0;  // class +1 test rows
  BlockCounts blocks;
  std::vector<int> omega;
  bool empty_omega = false;  // nothing selected; every test row labelled +1
  std::vector<int> train;
  std::vector<int> test;
};

struct EvaluationReport {
  Method method = Method::QcSpharm;
  double p_cut = 0.0;
  std::vector<RepetitionResult> repetitions;
  double mean_sensitivity = 0.0;
  double mean_specificity = 0.0;
  double mean_accuracy = 0.0;
  double mean_shape = 0.0, mean_spharm = 0.0, mean_volume = 0.0;
  int empty_omega_count = 0;
};

/// One report per grid value; every grid value sees the same splits.
std::vector<EvaluationReport> sweep_pcut(const FeatureMatrix& matrix, const std::vector<double>& grid,
                                         const EvalOptions& options);
EvaluationReport evaluate(const FeatureMatrix& matrix, double p_cut, const EvalOptions& options);

/// Default grid: `count` log-spaced values over [0.0001, 0.5].
std::vector<double> default_pcut_grid(int count = 12);

/// Index of the highest mean accuracy (first on ties).
size_t best_grid_index(const std::vector<EvaluationReport>& sweep);

nlohmann::json report_to_json(const EvaluationReport& r, bool per_repetition = true);
std::string sweep_to_csv(const std::vector<EvaluationReport>& sweep);
/// Rows per method: mean sensitivity, specificity, accuracy and block counts.
std::string comparison_table(const std::vector<EvaluationReport>& reports);

/// Selected vertices red, the rest gray; returns the sidecar describing
/// non-vertex selections by block.
nlohmann::json export_significance_map(const SelectionResult& selection, const FeatureSchema& schema,
                                       const TriangleMesh& template_mesh, const std::filesystem::path& out);

/// Fraction of `truth` indices present among the selected shape-block columns.
double shape_recall(const std::vector<int>& omega, const FeatureSchema& schema, const std::vector<int>& truth);

}  // namespace qcs

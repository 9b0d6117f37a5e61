#include "qcspharm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qcspharm/cohort.hpp"
#include "qcspharm/error.hpp"
#include "qcspharm/serialize.hpp"

namespace qcs {

Method parse_method(const std::string& name) {
  if (name == "qc-spharm") return Method::QcSpharm;
  if (name == "qc") return Method::Qc;
  if (name == "spharm") return Method::Spharm;
  if (name == "volume") return Method::Volume;
  fail(ErrorCode::InvalidParameter, "unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::QcSpharm: return "qc-spharm";
    case Method::Qc: return "qc";
    case Method::Spharm: return "spharm";
    case Method::Volume: return "volume";
  }
  return "";
}

std::vector<int> method_columns(const FeatureSchema& schema, Method m) {
  std::vector<int> cols;
  auto add = [&](int from, int to) {
    for (int j = from; j < to; ++j) cols.push_back(j);
  };
  switch (m) {
    case Method::QcSpharm: add(0, schema.width()); break;
    case Method::Qc: add(0, schema.shape_count); break;
    case Method::Spharm: add(schema.shape_count, schema.volume_column()); break;
    case Method::Volume: add(schema.volume_column(), schema.width()); break;
  }
  return cols;
}

Split stratified_split(const std::vector<int>& labels, int train_per_class, int test_per_class, std::uint64_t seed,
                       int repetition) {
  require(train_per_class >= 3 && test_per_class >= 1, ErrorCode::InvalidParameter,
          "need >= 3 training and >= 1 test rows per class");
  std::mt19937_64 rng(subject_seed(seed, repetition));
  Split s;
  for (int label : {1, -1}) {
    std::vector<int> rows;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) rows.push_back(static_cast<int>(i));
    }
    require(static_cast<int>(rows.size()) >= train_per_class + test_per_class, ErrorCode::TooFewSubjects,
            "class " + std::to_string(label) + " has " + std::to_string(rows.size()) + " rows, split needs " +
                std::to_string(train_per_class + test_per_class));
    std::shuffle(rows.begin(), rows.end(), rng);
    s.train.insert(s.train.end(), rows.begin(), rows.begin() + train_per_class);
    s.test.insert(s.test.end(), rows.begin() + train_per_class, rows.begin() + train_per_class + test_per_class);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<double> training_pvalues(const FeatureMatrix& matrix, const std::vector<int>& rows, Method m) {
  if (m == Method::Volume) return {};
  const auto cols = method_columns(matrix.schema, m);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  std::vector<int> y(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t k = 0; k < cols.size(); ++k) x(i, k) = matrix.data(rows[i], cols[k]);
    y[i] = matrix.labels[rows[i]];
  }
  return bagged_ttest(x, y);
}

std::vector<EvaluationReport> sweep_pcut(const FeatureMatrix& matrix, const std::vector<double>& grid,
                                         const EvalOptions& options) {
  require(!grid.empty(), ErrorCode::InvalidParameter, "p_cut grid is empty");
  require(options.repetitions >= 1, ErrorCode::InvalidParameter, "repetitions must be >= 1");
  require(matrix.cols() == matrix.schema.width(), ErrorCode::SchemaMismatch, "matrix width does not match schema");
  const auto cols = method_columns(matrix.schema, options.method);

  std::vector<EvaluationReport> reports(grid.size());
  for (size_t g = 0; g < grid.size(); ++g) {
    require(grid[g] > 0 && grid[g] < 1, ErrorCode::InvalidParameter, "p_cut must lie in (0, 1)");
    reports[g].method = options.method;
    reports[g].p_cut = grid[g];
  }

  for (int rep = 0; rep < options.repetitions; ++rep) {
    const Split split = stratified_split(matrix.labels, options.train_per_class, options.test_per_class,
                                         options.seed, rep);
    const Eigen::MatrixXd xtr = matrix.data(split.train, Eigen::all);
    std::vector<int> ytr;
    for (int i : split.train) ytr.push_back(matrix.labels[i]);
    const auto p = training_pvalues(matrix, split.train, options.method);

    for (size_t g = 0; g < grid.size(); ++g) {
      RepetitionResult r;
      r.repetition = rep;
      r.train = split.train;
      r.test = split.test;
      if (options.method == Method::Volume) {
        r.omega = cols;
      } else {
        for (size_t k = 0; k < cols.size(); ++k) {
          if (p[k] <= grid[g]) r.omega.push_back(cols[k]);
        }
      }
      r.blocks = block_counts(matrix.schema, r.omega);

      std::vector<int> predicted(split.test.size(), 1);
      if (r.omega.empty()) {
        r.empty_omega = true;
      } else {
        const SvmModel model = train_classifier(xtr, ytr, r.omega, options.svm);
        for (size_t t = 0; t < split.test.size(); ++t) {
          predicted[t] = predict(model, matrix.data.row(split.test[t]).transpose()).label;
        }
      }
      int tp = 0, tn = 0;
      for (size_t t = 0; t < split.test.size(); ++t) {
        const int truth = matrix.labels[split.test[t]];
        if (truth == -1) {
          ++r.positives;
          tp += predicted[t] == -1;
        } else {
          ++r.negatives;
          tn += predicted[t] == 1;
        }
      }
      r.sensitivity = static_cast<double>(tp) / r.positives;
      r.specificity = static_cast<double>(tn) / r.negatives;
      r.accuracy = static_cast<double>(tp + tn) / (r.positives + r.negatives);
      reports[g].repetitions.push_back(std::move(r));
    }
  }

  for (auto& rep : reports) {
    const double n = static_cast<double>(rep.repetitions.size());
    for (const auto& r : rep.repetitions) {
      rep.mean_sensitivity += r.sensitivity / n;
      rep.mean_specificity += r.specificity / n;
      rep.mean_accuracy += r.accuracy / n;
      rep.mean_shape += r.blocks.shape / n;
      rep.mean_spharm += r.blocks.spharm / n;
      rep.mean_volume += r.blocks.volume / n;
      rep.empty_omega_count += r.empty_omega;
    }
  }
  return reports;
}

EvaluationReport evaluate(const FeatureMatrix& matrix, double p_cut, const EvalOptions& options) {
  return sweep_pcut(matrix, {p_cut}, options).front();
}

std::vector<double> default_pcut_grid(int count) {
  require(count >= 2, ErrorCode::InvalidParameter, "grid needs at least 2 points");
  std::vector<double> grid(static_cast<size_t>(count));
  const double lo = std::log(1e-4), hi = std::log(0.5);
  for (int i = 0; i < count; ++i) grid[i] = std::exp(lo + (hi - lo) * i / (count - 1));
  grid.front() = 1e-4;
  grid.back() = 0.5;
  return grid;
}

size_t best_grid_index(const std::vector<EvaluationReport>& sweep) {
  require(!sweep.empty(), ErrorCode::InvalidParameter, "empty sweep");
  size_t best = 0;
  for (size_t g = 1; g < sweep.size(); ++g) {
    if (sweep[g].mean_accuracy > sweep[best].mean_accuracy) best = g;
  }
  return best;
}

nlohmann::json report_to_json(const EvaluationReport& r, bool per_repetition) {
  nlohmann::json j;
  j["method"] = method_name(r.method);
  j["p_cut"] = r.p_cut;
  j["repetitions"] = r.repetitions.size();
  j["mean_accuracy"] = r.mean_accuracy;
  j["mean_sensitivity"] = r.mean_sensitivity;
  j["mean_specificity"] = r.mean_specificity;
  j["mean_features"] = {{"shape", r.mean_shape}, {"spharm", r.mean_spharm}, {"volume", r.mean_volume},
                        {"total", r.mean_shape + r.mean_spharm + r.mean_volume}};
  j["empty_omega_count"] = r.empty_omega_count;
  if (per_repetition) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& x : r.repetitions) {
      reps.push_back({{"repetition", x.repetition},
                      {"sensitivity", x.sensitivity},
                      {"specificity", x.specificity},
                      {"accuracy", x.accuracy},
                      {"test_positives", x.positives},
                      {"test_negatives", x.negatives},
                      {"features", {{"shape", x.blocks.shape}, {"spharm", x.blocks.spharm},
                                    {"volume", x.blocks.volume}, {"total", x.blocks.total()}}},
                      {"empty_omega", x.empty_omega},
                      {"omega", x.omega},
                      {"train", x.train},
                      {"test", x.test}});
    }
    j["per_repetition"] = reps;
  }
  return j;
}

std::string sweep_to_csv(const std::vector<EvaluationReport>& sweep) {
  std::string s = "p_cut,mean_accuracy,mean_sensitivity,mean_specificity,mean_shape,mean_spharm,mean_volume,empty_omega\n";
  for (const auto& r : sweep) {
    s += format_double(r.p_cut) + "," + format_double(r.mean_accuracy) + "," + format_double(r.mean_sensitivity) +
         "," + format_double(r.mean_specificity) + "," + format_double(r.mean_shape) + "," +
         format_double(r.mean_spharm) + "," + format_double(r.mean_volume) + "," +
         std::to_string(r.empty_omega_count) + "\n";
  }
  return s;
}

std::string comparison_table(const std::vector<EvaluationReport>& reports) {
  std::ostringstream out;
  out << "method,p_cut,sensitivity,specificity,accuracy,shape,spharm,volume\n";
  for (const auto& r : reports) {
    out << method_name(r.method) << ',' << format_double(r.p_cut) << ',' << format_double(r.mean_sensitivity) << ','
        << format_double(r.mean_specificity) << ',' << format_double(r.mean_accuracy) << ','
        << format_double(r.mean_shape) << ',' << format_double(r.mean_spharm) << ','
        << format_double(r.mean_volume) << '\n';
  }
  return out.str();
}

nlohmann::json export_significance_map(const SelectionResult& selection, const FeatureSchema& schema,
                                       const TriangleMesh& template_mesh, const std::filesystem::path& out) {
  require(template_mesh.vertex_count() == schema.shape_count, ErrorCode::SchemaMismatch,
          "template vertex count does not match the shape block");
  std::vector<std::array<unsigned char, 3>> colors(static_cast<size_t>(template_mesh.vertex_count()),
                                                   {160, 160, 160});
  nlohmann::json spharm = nlohmann::json::array();
  std::vector<int> vertices;
  bool volume = false;
  static const char* coord[] = {"x", "y", "z"};
  for (int j : selection.omega) {
    switch (block_of(schema, j)) {
      case FeatureBlock::Shape:
        colors[static_cast<size_t>(j)] = {220, 30, 30};
        vertices.push_back(j);
        break;
      case FeatureBlock::Spharm: {
        const int k = j - schema.shape_count;
        const int idx = k / 6;
        const int l = static_cast<int>(std::sqrt(static_cast<double>(idx)));
        spharm.push_back({{"column", j}, {"l", l}, {"m", idx - l * l - l}, {"coordinate", coord[(k % 6) / 2]},
                          {"part", k % 2 == 0 ? "re" : "im"}});
        break;
      }
      case FeatureBlock::Volume: volume = true; break;
    }
  }
  save_colored_ply(template_mesh, colors, out);
  const auto counts = block_counts(schema, selection.omega);
  nlohmann::json side;
  side["p_cut"] = selection.p_cut;
  side["features"] = {{"shape", counts.shape}, {"spharm", counts.spharm}, {"volume", counts.volume},
                      {"total", counts.total()}};
  side["shape_vertices"] = vertices;
  side["spharm_columns"] = spharm;
  side["volume_selected"] = volume;
  return side;
}

double shape_recall(const std::vector<int>& omega, const FeatureSchema& schema, const std::vector<int>& truth) {
  if (truth.empty()) return 0.0;
  std::vector<int> selected;
  for (int j : omega) {
    if (j < schema.shape_count) selected.push_back(j);
  }
  std::vector<int> t = truth;
  std::sort(t.begin(), t.end());
  std::sort(selected.begin(), selected.end());
  std::vector<int> hit;
  std::set_intersection(selected.begin(), selected.end(), t.begin(), t.end(), std::back_inserter(hit));
  return static_cast<double>(hit.size()) / static_cast<double>(t.size());
}

}  // namespace qcs

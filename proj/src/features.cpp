#include "qcspharm/features.hpp"

#include <algorithm>
#include <cstdio>

#include "qcspharm/error.hpp"

namespace qcs {

std::string FeatureSchema::tag() const {
  return "qcs-features/v1;N=" + std::to_string(shape_count) + ";L=" + std::to_string(degree_cap);
}

FeatureSchema schema_from_tag(const std::string& tag) {
  FeatureSchema s;
  if (std::sscanf(tag.c_str(), "qcs-features/v1;N=%d;L=%d", &s.shape_count, &s.degree_cap) != 2 ||
      s.shape_count < 0 || s.degree_cap < 0 || s.tag() != tag) {
    fail(ErrorCode::SchemaMismatch, "unrecognized feature schema tag '" + tag + "'");
  }
  return s;
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(width()));
  for (int i = 0; i < shape_count; ++i) names.push_back("e" + std::to_string(i));
  for (int k = 0; k < spharm_count(); ++k) names.push_back("r" + std::to_string(k));
  names.push_back("vol");
  return names;
}

FeatureBlock block_of(const FeatureSchema& schema, int column) {
  require(column >= 0 && column < schema.width(), ErrorCode::IndexOutOfRange,
          "column " + std::to_string(column) + " outside schema");
  if (column < schema.shape_count) return FeatureBlock::Shape;
  if (column < schema.volume_column()) return FeatureBlock::Spharm;
  return FeatureBlock::Volume;
}

Eigen::VectorXd spharm_block(const SpharmCoefficients& coeffs) {
  Eigen::VectorXd out(6 * coeffs.size());
  Eigen::Index k = 0;
  for (const auto& c : coeffs.data()) {
    for (int d = 0; d < 3; ++d) {
      out[k++] = c[d].real();
      out[k++] = c[d].imag();
    }
  }
  return out;
}

Eigen::VectorXd assemble_feature_vector(const std::vector<double>& shape_index, const SpharmCoefficients& coeffs,
                                        double volume, const FeatureSchema& schema) {
  require(static_cast<int>(shape_index.size()) == schema.shape_count, ErrorCode::SchemaMismatch,
          "shape-index length " + std::to_string(shape_index.size()) + " does not match schema");
  require(coeffs.degree_cap() == schema.degree_cap, ErrorCode::SchemaMismatch,
          "coefficient degree cap does not match schema");
  Eigen::VectorXd v(schema.width());
  v.head(schema.shape_count) = Eigen::Map<const Eigen::VectorXd>(shape_index.data(), schema.shape_count);
  v.segment(schema.shape_count, schema.spharm_count()) = spharm_block(coeffs);
  v[schema.volume_column()] = volume;
  return v;
}

SelectionResult select_features(std::vector<double> p, double p_cut) {
  require(p_cut > 0.0 && p_cut < 1.0, ErrorCode::InvalidParameter, "p_cut must lie in (0, 1)");
  SelectionResult s;
  s.p_cut = p_cut;
  for (size_t j = 0; j < p.size(); ++j) {
    require(p[j] >= 0.0 && p[j] <= 1.0, ErrorCode::InvalidParameter, "p-values must lie in [0, 1]");
    if (p[j] <= p_cut) s.omega.push_back(static_cast<int>(j));
  }
  s.p = std::move(p);
  return s;
}

Eigen::MatrixXd restrict_columns(const Eigen::MatrixXd& data, const std::vector<int>& omega) {
  Eigen::MatrixXd out(data.rows(), static_cast<Eigen::Index>(omega.size()));
  for (size_t k = 0; k < omega.size(); ++k) {
    require(omega[k] >= 0 && omega[k] < data.cols(), ErrorCode::IndexOutOfRange,
            "column " + std::to_string(omega[k]) + " out of range");
    out.col(static_cast<Eigen::Index>(k)) = data.col(omega[k]);
  }
  return out;
}

FeatureMatrix restrict(const FeatureMatrix& matrix, const std::vector<int>& omega) {
  FeatureMatrix out;
  out.schema = matrix.schema;
  out.data = restrict_columns(matrix.data, omega);
  out.labels = matrix.labels;
  out.ids = matrix.ids;
  return out;
}

BlockCounts block_counts(const FeatureSchema& schema, const std::vector<int>& omega) {
  BlockCounts c;
  for (int j : omega) {
    switch (block_of(schema, j)) {
      case FeatureBlock::Shape: ++c.shape; break;
      case FeatureBlock::Spharm: ++c.spharm; break;
      case FeatureBlock::Volume: ++c.volume; break;
    }
  }
  return c;
}

}  // namespace qcs

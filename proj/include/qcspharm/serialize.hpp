#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qcspharm/distortion.hpp"
#include "qcspharm/features.hpp"

namespace qcs {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories; throws IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

/// Header: id, e0..e{N-1}, r0..r{K-1}, vol, label.
std::string feature_matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix feature_matrix_from_csv(const std::string& text);

/// vertex_id, mu_abs, H, K, E
std::string distortion_to_csv(const DistortionField& field);

nlohmann::json selection_to_json(const SelectionResult& s);
SelectionResult selection_from_json(const nlohmann::json& j);

}  // namespace qcs

#include "qcspharm/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "qcspharm/error.hpp"

namespace qcs {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoError, "SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingArtifact, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const auto text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(1) + "\n"); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string feature_matrix_to_csv(const FeatureMatrix& m) {
  require(m.cols() == m.schema.width(), ErrorCode::SchemaMismatch, "matrix width does not match its schema");
  require(static_cast<int>(m.labels.size()) == m.rows() && static_cast<int>(m.ids.size()) == m.rows(),
          ErrorCode::LengthMismatch, "one id and label per row required");
  std::string s = "id";
  for (const auto& name : m.schema.column_names()) s += "," + name;
  s += ",label\n";
  for (int i = 0; i < m.rows(); ++i) {
    s += m.ids[i];
    for (int j = 0; j < m.cols(); ++j) {
      s += ',';
      s += format_double(m.data(i, j));
    }
    s += "," + std::to_string(m.labels[i]) + "\n";
  }
  return s;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

FeatureMatrix feature_matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty feature CSV");
  const auto header = split(line);
  require(header.size() >= 3 && header.front() == "id" && header.back() == "label", ErrorCode::SchemaMismatch,
          "feature CSV header must start with id and end with label");
  FeatureMatrix m;
  int n_shape = 0, n_spharm = 0;
  for (size_t k = 1; k + 1 < header.size(); ++k) {
    const auto& h = header[k];
    if (h == "vol") continue;
    (h[0] == 'e' ? n_shape : n_spharm)++;
  }
  require(n_spharm % 6 == 0, ErrorCode::SchemaMismatch, "SPHARM block width not a multiple of 6");
  const int lp1 = static_cast<int>(std::lround(std::sqrt(n_spharm / 6)));
  require(lp1 >= 1 && lp1 * lp1 * 6 == n_spharm, ErrorCode::SchemaMismatch, "SPHARM block width is not 6 (L+1)^2");
  m.schema = {n_shape, lp1 - 1};
  const auto expected = m.schema.column_names();
  require(expected.size() + 2 == header.size() && std::equal(expected.begin(), expected.end(), header.begin() + 1),
          ErrorCode::SchemaMismatch, "feature CSV columns do not follow the schema order");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    require(cells.size() == header.size(), ErrorCode::ParseError, "feature CSV row has the wrong cell count");
    std::vector<double> row(cells.size() - 2);
    for (size_t k = 0; k < row.size(); ++k) {
      const auto& c = cells[k + 1];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), row[k]);
      if (ec != std::errc() || ptr != c.data() + c.size()) fail(ErrorCode::ParseError, "malformed number '" + c + "'");
    }
    m.ids.push_back(cells.front());
    const auto& lab = cells.back();
    require(lab == "1" || lab == "-1", ErrorCode::ParseError, "label must be 1 or -1");
    m.labels.push_back(lab == "1" ? 1 : -1);
    rows.push_back(std::move(row));
  }
  m.data.resize(static_cast<Eigen::Index>(rows.size()), m.schema.width());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < m.schema.width(); ++j) m.data(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  return m;
}

std::string distortion_to_csv(const DistortionField& f) {
  std::string s = "vertex_id,mu_abs,H,K,E\n";
  for (size_t i = 0; i < f.shape_index.size(); ++i) {
    s += std::to_string(i) + "," + format_double(f.mu_abs[i]) + "," + format_double(f.mean_curvature[i]) + "," +
         format_double(f.gauss_curvature[i]) + "," + format_double(f.shape_index[i]) + "\n";
  }
  return s;
}

nlohmann::json selection_to_json(const SelectionResult& s) {
  return {{"p", s.p}, {"omega", s.omega}, {"p_cut", s.p_cut}};
}

SelectionResult selection_from_json(const nlohmann::json& j) {
  try {
    SelectionResult s;
    s.p = j.at("p").get<std::vector<double>>();
    s.omega = j.at("omega").get<std::vector<int>>();
    s.p_cut = j.at("p_cut").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed selection JSON: ") + e.what());
  }
}

}  // namespace qcs

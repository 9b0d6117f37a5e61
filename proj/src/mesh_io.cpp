#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "qcspharm/error.hpp"
#include "qcspharm/mesh.hpp"

namespace qcs {

namespace {

// Whitespace tokenizer over the whole stream with '#' comments stripped.
class Tokens {
 public:
  explicit Tokens(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back(std::move(tok));
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }

  const std::string& next(const char* what) {
    if (done()) fail(ErrorCode::ParseError, std::string("unexpected end of input reading ") + what);
    return tokens_[pos_++];
  }

  double next_double(const char* what) {
    const auto& tok = next(what);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(ErrorCode::ParseError, "malformed number '" + tok + "' reading " + what);
    }
    return value;
  }

  long next_int(const char* what) {
    const auto& tok = next(what);
    long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(ErrorCode::ParseError, "malformed integer '" + tok + "' reading " + what);
    }
    return value;
  }

 private:
  std::vector<std::string> tokens_;
  size_t pos_ = 0;
};

void append_polygon(FaceList& faces, const std::vector<long>& poly, size_t vertex_count) {
  if (poly.size() < 3) fail(ErrorCode::ParseError, "polygon with fewer than 3 vertices");
  for (long idx : poly) {
    if (idx < 0 || static_cast<size_t>(idx) >= vertex_count) {
      fail(ErrorCode::ParseError, "face index " + std::to_string(idx) + " out of range");
    }
  }
  for (size_t k = 1; k + 1 < poly.size(); ++k) {
    faces.push_back({static_cast<int>(poly[0]), static_cast<int>(poly[k]), static_cast<int>(poly[k + 1])});
  }
}

TriangleMesh build(std::vector<Vec3> verts, FaceList faces) {
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      fail(ErrorCode::ParseError, "degenerate face " + std::to_string(f));
    }
  }
  return TriangleMesh(std::move(verts), std::move(faces));
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void make_parent(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".off") return MeshFormat::Off;
  if (ext == ".ply") return MeshFormat::Ply;
  if (ext == ".obj") return MeshFormat::Obj;
  fail(ErrorCode::ParseError, "unrecognized mesh extension '" + ext + "'");
}

TriangleMesh read_off(std::istream& in) {
  Tokens tok(in);
  const auto& header = tok.next("OFF header");
  if (header != "OFF") fail(ErrorCode::ParseError, "missing OFF header");
  long nv = tok.next_int("vertex count");
  long nf = tok.next_int("face count");
  tok.next_int("edge count");
  if (nv < 0 || nf < 0) fail(ErrorCode::ParseError, "negative element count");
  std::vector<Vec3> verts(static_cast<size_t>(nv));
  for (auto& v : verts) {
    for (int k = 0; k < 3; ++k) v[k] = tok.next_double("vertex coordinate");
  }
  FaceList faces;
  faces.reserve(static_cast<size_t>(nf));
  std::vector<long> poly;
  for (long f = 0; f < nf; ++f) {
    long n = tok.next_int("face size");
    poly.assign(static_cast<size_t>(std::max(0L, n)), 0);
    for (auto& idx : poly) idx = tok.next_int("face index");
    append_polygon(faces, poly, verts.size());
  }
  return build(std::move(verts), std::move(faces));
}

TriangleMesh read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) fail(ErrorCode::ParseError, "missing ply magic");
  long nv = -1, nf = -1;
  std::vector<std::string> vertex_props;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (kw == "element") {
      long count = 0;
      ls >> current >> count;
      if (current == "vertex") nv = count;
      if (current == "face") nf = count;
    } else if (kw == "property" && current == "vertex") {
      std::string type, name;
      ls >> type >> name;
      vertex_props.push_back(name);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!ascii) fail(ErrorCode::ParseError, "only ASCII PLY is supported");
  if (nv < 0 || nf < 0) fail(ErrorCode::ParseError, "PLY header lacks vertex or face element");
  int ix = -1, iy = -1, iz = -1;
  for (size_t k = 0; k < vertex_props.size(); ++k) {
    if (vertex_props[k] == "x") ix = static_cast<int>(k);
    if (vertex_props[k] == "y") iy = static_cast<int>(k);
    if (vertex_props[k] == "z") iz = static_cast<int>(k);
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorCode::ParseError, "PLY vertex element lacks x/y/z");

  Tokens tok(in);
  std::vector<Vec3> verts(static_cast<size_t>(nv));
  std::vector<double> row(vertex_props.size());
  for (auto& v : verts) {
    for (auto& x : row) x = tok.next_double("vertex property");
    v = Vec3(row[ix], row[iy], row[iz]);
  }
  FaceList faces;
  std::vector<long> poly;
  for (long f = 0; f < nf; ++f) {
    long n = tok.next_int("face size");
    poly.assign(static_cast<size_t>(std::max(0L, n)), 0);
    for (auto& idx : poly) idx = tok.next_int("face index");
    append_polygon(faces, poly, verts.size());
  }
  return build(std::move(verts), std::move(faces));
}

TriangleMesh read_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<std::vector<long>> polys;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    if (kw == "v") {
      Vec3 p;
      std::string s;
      for (int k = 0; k < 3; ++k) {
        if (!(ls >> s)) fail(ErrorCode::ParseError, "OBJ vertex with fewer than 3 coordinates");
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), p[k]);
        if (ec != std::errc()) fail(ErrorCode::ParseError, "malformed OBJ coordinate '" + s + "'");
      }
      verts.push_back(p);
    } else if (kw == "f") {
      std::vector<long> poly;
      std::string s;
      while (ls >> s) {
        long idx = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
        if (ec != std::errc() || idx == 0) fail(ErrorCode::ParseError, "malformed OBJ face index '" + s + "'");
        poly.push_back(idx);
      }
      polys.push_back(std::move(poly));
    }
  }
  FaceList faces;
  const long nv = static_cast<long>(verts.size());
  for (auto& poly : polys) {
    for (auto& idx : poly) idx = idx > 0 ? idx - 1 : nv + idx;
    append_polygon(faces, poly, verts.size());
  }
  return build(std::move(verts), std::move(faces));
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open mesh file " + path.string());
  TriangleMesh mesh;
  switch (format) {
    case MeshFormat::Off: mesh = read_off(in); break;
    case MeshFormat::Ply: mesh = read_ply(in); break;
    case MeshFormat::Obj: mesh = read_obj(in); break;
  }
  require_genus0(mesh);
  if (signed_volume(mesh) < 0.0) mesh = with_flipped_orientation(mesh);
  return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) { return load_mesh(path, format_from_path(path)); }

void write_off(std::ostream& out, const TriangleMesh& mesh) {
  std::string s = "OFF\n";
  s += std::to_string(mesh.vertex_count()) + " " + std::to_string(mesh.face_count()) + " 0\n";
  for (const auto& v : mesh.vertices()) {
    append_double(s, v[0]);
    s += ' ';
    append_double(s, v[1]);
    s += ' ';
    append_double(s, v[2]);
    s += '\n';
  }
  for (const auto& t : mesh.faces()) {
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  }
  out << s;
}

void save_off(const TriangleMesh& mesh, const std::filesystem::path& path) {
  make_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  write_off(out, mesh);
}

void save_colored_ply(const TriangleMesh& mesh, const std::vector<std::array<unsigned char, 3>>& colors,
                      const std::filesystem::path& path) {
  require(colors.size() == mesh.vertices().size(), ErrorCode::LengthMismatch,
          "one color per vertex required");
  make_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  std::string s = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(mesh.vertex_count()) +
                  "\nproperty double x\nproperty double y\nproperty double z\n"
                  "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                  "element face " + std::to_string(mesh.face_count()) +
                  "\nproperty list uchar int vertex_indices\nend_header\n";
  for (size_t i = 0; i < colors.size(); ++i) {
    const auto& v = mesh.vertices()[i];
    for (int k = 0; k < 3; ++k) {
      append_double(s, v[k]);
      s += ' ';
    }
    s += std::to_string(colors[i][0]) + " " + std::to_string(colors[i][1]) + " " + std::to_string(colors[i][2]) + "\n";
  }
  for (const auto& t : mesh.faces()) {
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  }
  out << s;
}

}  // namespace qcs

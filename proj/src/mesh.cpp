#include "pixbrush/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pixbrush {

namespace {

struct CornerRef {
  int v = 0;   // 1-based OBJ indices, 0 = absent
  int vt = 0;
  int vn = 0;
};

CornerRef parse_corner(const std::string& token, const std::string& origin) {
  CornerRef ref;
  int fields[3] = {0, 0, 0};
  size_t start = 0;
  for (int f = 0; f < 3; ++f) {
    size_t slash = token.find('/', start);
    std::string part = token.substr(start, slash == std::string::npos ? slash : slash - start);
    if (!part.empty()) {
      try {
        fields[f] = std::stoi(part);
      } catch (const std::exception&) {
        throw std::runtime_error(origin + ": malformed face corner '" + token + "'");
      }
    }
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  ref.v = fields[0];
  ref.vt = fields[1];
  ref.vn = fields[2];
  return ref;
}

int resolve_index(int idx, size_t count, const std::string& what, const std::string& origin) {
  // OBJ indices are 1-based; negative values count back from the end.
  int resolved = idx > 0 ? idx - 1 : static_cast<int>(count) + idx;
  if (resolved < 0 || resolved >= static_cast<int>(count)) {
    throw std::runtime_error(origin + ": " + what + " index out of range");
  }
  return resolved;
}

bool finite3(Vec3 v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

}  // namespace

Mesh parse_obj(const std::string& text, const std::string& origin) {
  std::vector<Vec3> positions;
  std::vector<Vec2> uvs;
  std::vector<Vec3> normals;

  struct FaceRec {
    std::vector<CornerRef> corners;
  };
  std::vector<FaceRec> face_recs;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw std::runtime_error(origin + ": malformed vertex line");
      positions.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ls >> t.x >> t.y)) throw std::runtime_error(origin + ": malformed vt line");
      uvs.push_back(t);
    } else if (tag == "vn") {
      Vec3 n;
      if (!(ls >> n.x >> n.y >> n.z)) throw std::runtime_error(origin + ": malformed vn line");
      normals.push_back(n);
    } else if (tag == "f") {
      FaceRec rec;
      std::string token;
      while (ls >> token) rec.corners.push_back(parse_corner(token, origin));
      if (rec.corners.size() < 3 || rec.corners.size() > 4) {
        throw std::runtime_error(origin + ": only triangle and quad faces supported");
      }
      face_recs.push_back(std::move(rec));
    }
    // Other tags (o, g, s, usemtl, mtllib, #) are ignored.
  }

  if (positions.empty()) throw std::runtime_error(origin + ": no vertices");
  if (face_recs.empty()) throw std::runtime_error(origin + ": no faces");

  Mesh mesh;
  mesh.vertices = positions;
  for (const Vec3& p : mesh.vertices) {
    if (!finite3(p)) throw std::runtime_error(origin + ": non-finite vertex coordinates");
  }

  bool any_normals = false;
  std::vector<Vec3> per_vertex_normal(positions.size(), Vec3{0, 0, 0});

  auto emit_triangle = [&](const CornerRef& a, const CornerRef& b, const CornerRef& c) {
    std::array<int, 3> face{};
    std::array<Vec2, 3> uv{};
    const CornerRef corners[3] = {a, b, c};
    for (int k = 0; k < 3; ++k) {
      const CornerRef& ref = corners[k];
      face[k] = resolve_index(ref.v, positions.size(), "vertex", origin);
      if (ref.vt == 0) throw std::runtime_error("mesh has no UV parametrization");
      int ti = resolve_index(ref.vt, uvs.size(), "texture", origin);
      Vec2 t = uvs[ti];
      if (!std::isfinite(t.x) || !std::isfinite(t.y)) {
        throw std::runtime_error(origin + ": non-finite UV coordinates");
      }
      if (t.x < -1e-6 || t.x > 1.0 + 1e-6 || t.y < -1e-6 || t.y > 1.0 + 1e-6) {
        throw std::runtime_error(origin + ": UV coordinates outside [0,1]");
      }
      uv[k] = {std::clamp(t.x, 0.0, 1.0), std::clamp(t.y, 0.0, 1.0)};
      if (ref.vn != 0) {
        int ni = resolve_index(ref.vn, normals.size(), "normal", origin);
        Vec3 n = normals[ni];
        if (!finite3(n)) throw std::runtime_error(origin + ": non-finite normal");
        per_vertex_normal[face[k]] = n;
        any_normals = true;
      }
    }
    mesh.faces.push_back(face);
    mesh.corner_uvs.push_back(uv);
  };

  for (const FaceRec& rec : face_recs) {
    emit_triangle(rec.corners[0], rec.corners[1], rec.corners[2]);
    if (rec.corners.size() == 4) {
      // Fan triangulation at corner 0; the two triangles share the (v0,v2) diagonal.
      emit_triangle(rec.corners[0], rec.corners[2], rec.corners[3]);
    }
  }

  if (any_normals) {
    for (Vec3& n : per_vertex_normal) n = normalized(n);
    mesh.vertex_normals = std::move(per_vertex_normal);
  }
  validate_mesh(mesh);
  return mesh;
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_obj(buf.str(), path);
}

void validate_mesh(const Mesh& mesh) {
  if (mesh.faces.size() != mesh.corner_uvs.size()) {
    throw std::runtime_error("mesh: face/uv count mismatch");
  }
  for (const auto& f : mesh.faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= static_cast<int>(mesh.vertices.size())) {
        throw std::runtime_error("mesh: face index out of range");
      }
    }
  }
  for (const auto& uv : mesh.corner_uvs) {
    for (const Vec2& t : uv) {
      if (t.x < 0.0 || t.x > 1.0 || t.y < 0.0 || t.y > 1.0) {
        throw std::runtime_error("mesh: UV outside [0,1]");
      }
    }
  }
  if (!mesh.vertex_normals.empty() && mesh.vertex_normals.size() != mesh.vertices.size()) {
    throw std::runtime_error("mesh: normal count mismatch");
  }
}

Mesh normalize_unit(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw std::runtime_error("normalize_unit: empty mesh");
  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max()};
  Vec3 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
          -std::numeric_limits<double>::max()};
  for (const Vec3& v : mesh.vertices) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  Vec3 center = 0.5 * (lo + hi);
  double max_norm = 0.0;
  for (const Vec3& v : mesh.vertices) max_norm = std::max(max_norm, norm(v - center));
  if (max_norm <= 0.0) throw std::runtime_error("degenerate extent");

  Mesh out = mesh;
  for (Vec3& v : out.vertices) v = (v - center) / max_norm;
  return out;
}

}  // namespace pixbrush

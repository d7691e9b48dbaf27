#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pixbrush/vec.hpp"

namespace pixbrush {

// Triangle mesh with a mandatory per-corner UV atlas. Quads are fan
// triangulated at load time; all faces here are triangles. UVs live in
// [0,1]^2 and index the texture plane with texel (i,j) centered at
// ((i+0.5)/R, (j+0.5)/R).
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;           // 0-based vertex indices
  std::vector<std::array<Vec2, 3>> corner_uvs;     // one entry per face
  std::vector<Vec3> vertex_normals;                // empty when absent

  size_t face_count() const { return faces.size(); }
  size_t vertex_count() const { return vertices.size(); }
  bool has_normals() const { return !vertex_normals.empty(); }
};

// Loads a Wavefront OBJ (v/vt/vn, 1-based f indexing, triangles or quads).
// Every face corner must reference a vt; quads are split (v0,v1,v2) +
// (v0,v2,v3). Throws std::runtime_error with a specific message on missing
// file, missing UVs, unsupported polygons, bad indices, or non-finite
// coordinates.
Mesh load_mesh(const std::string& path);

// Parses OBJ text from memory; load_mesh is a file wrapper around this.
Mesh parse_obj(const std::string& text, const std::string& origin);

// Translates the bounding-box center to the origin and scales so the
// farthest vertex has norm 1. Faces, UVs and normals are unchanged.
// Throws on zero spatial extent ("degenerate extent").
Mesh normalize_unit(const Mesh& mesh);

// Structural validity: index bounds, UV range, finiteness.
// Throws std::runtime_error describing the first violation.
void validate_mesh(const Mesh& mesh);

}  // namespace pixbrush

#include "pixbrush/uv_inversion.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pixbrush {

namespace {

constexpr double kEdgeEps = 1e-9;  // edge-inclusive containment slack

// Barycentric coordinates of p w.r.t. the UV triangle (a,b,c). Returns
// false for degenerate (zero-area) triangles.
bool uv_barycentric(Vec2 a, Vec2 b, Vec2 c, Vec2 p, double out[3]) {
  double d = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  if (std::abs(d) < 1e-14) return false;
  double b1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / d;
  double b2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / d;
  out[0] = 1.0 - b1 - b2;
  out[1] = b1;
  out[2] = b2;
  return true;
}

Vec3 face_normal(const Mesh& mesh, int f) {
  const auto& face = mesh.faces[f];
  Vec3 n = cross(mesh.vertices[face[1]] - mesh.vertices[face[0]],
                 mesh.vertices[face[2]] - mesh.vertices[face[0]]);
  return normalized(n);
}

}  // namespace

SurfaceSampleSet invert_uv(const Mesh& mesh, int resolution) {
  if (resolution < 1) throw std::runtime_error("invert_uv: resolution must be >= 1");
  validate_mesh(mesh);

  const int R = resolution;
  const int nf = static_cast<int>(mesh.face_count());

  // Per-face UV bounding boxes in texel units, to skip far-away texels.
  struct FaceBox {
    int i0, i1, j0, j1;
  };
  std::vector<FaceBox> boxes(nf);
  for (int f = 0; f < nf; ++f) {
    const auto& uv = mesh.corner_uvs[f];
    double ulo = std::min({uv[0].x, uv[1].x, uv[2].x});
    double uhi = std::max({uv[0].x, uv[1].x, uv[2].x});
    double vlo = std::min({uv[0].y, uv[1].y, uv[2].y});
    double vhi = std::max({uv[0].y, uv[1].y, uv[2].y});
    // Texel i covers centers (i+0.5)/R; invert with a one-texel margin.
    boxes[f].i0 = std::max(0, static_cast<int>(std::floor(ulo * R - 1.0)));
    boxes[f].i1 = std::min(R - 1, static_cast<int>(std::ceil(uhi * R)));
    boxes[f].j0 = std::max(0, static_cast<int>(std::floor(vlo * R - 1.0)));
    boxes[f].j1 = std::min(R - 1, static_cast<int>(std::ceil(vhi * R)));
  }

  // Candidate faces per texel row.
  std::vector<std::vector<int>> row_faces(R);
  for (int f = 0; f < nf; ++f) {
    for (int j = boxes[f].j0; j <= boxes[f].j1; ++j) row_faces[j].push_back(f);
  }

  SurfaceSampleSet set;
  set.resolution = R;
  set.coverage_mask.assign(static_cast<size_t>(R) * R, 0);
  set.sample_index.assign(static_cast<size_t>(R) * R, -1);

  long overlap_count = 0;

  for (int j = 0; j < R; ++j) {
    double v = (j + 0.5) / R;
    for (int i = 0; i < R; ++i) {
      double u = (i + 0.5) / R;
      int hit_face = -1;
      double hit_bary[3] = {0, 0, 0};
      int strict_hits = 0;
      for (int f : row_faces[j]) {
        if (i < boxes[f].i0 || i > boxes[f].i1) continue;
        double b[3];
        const auto& uv = mesh.corner_uvs[f];
        if (!uv_barycentric(uv[0], uv[1], uv[2], {u, v}, b)) continue;
        if (b[0] >= -kEdgeEps && b[1] >= -kEdgeEps && b[2] >= -kEdgeEps) {
          if (b[0] > kEdgeEps && b[1] > kEdgeEps && b[2] > kEdgeEps) ++strict_hits;
          if (hit_face < 0) {
            hit_face = f;
            hit_bary[0] = b[0];
            hit_bary[1] = b[1];
            hit_bary[2] = b[2];
          }
        }
      }
      if (hit_face < 0) continue;
      if (strict_hits > 1) ++overlap_count;

      // Clamp edge-tolerance negatives and renormalize to sum 1.
      double sum = 0.0;
      for (double& b : hit_bary) {
        if (b < 0.0) b = 0.0;
        sum += b;
      }
      for (double& b : hit_bary) b /= sum;

      SurfaceSample s;
      s.i = i;
      s.j = j;
      s.face = hit_face;
      const auto& face = mesh.faces[hit_face];
      Vec3 p{0, 0, 0};
      Vec3 n{0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        s.bary[k] = hit_bary[k];
        p += hit_bary[k] * mesh.vertices[face[k]];
        if (mesh.has_normals()) n += hit_bary[k] * mesh.vertex_normals[face[k]];
      }
      s.point = p;
      s.normal = mesh.has_normals() ? normalized(n) : face_normal(mesh, hit_face);
      size_t texel = static_cast<size_t>(j) * R + i;
      set.coverage_mask[texel] = 1;
      set.sample_index[texel] = static_cast<int32_t>(set.samples.size());
      set.samples.push_back(s);
    }
  }

  if (overlap_count > 0) {
    std::fprintf(stderr, "warn: invert_uv: %ld texel(s) claimed by overlapping UV charts, first face kept\n",
                 overlap_count);
  }
  return set;
}

}  // namespace pixbrush

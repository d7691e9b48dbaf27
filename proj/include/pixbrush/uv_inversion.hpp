#pragma once

#include <cstdint>
#include <vector>

#include "pixbrush/mesh.hpp"

namespace pixbrush {

// One texel-center-to-surface correspondence. The barycentric coordinates
// are w.r.t. the face's UV corners; point and normal are interpolated from
// the face's 3D data with the same weights.
struct SurfaceSample {
  int i = 0;  // texel column (u direction)
  int j = 0;  // texel row (v direction)
  int face = -1;
  double bary[3] = {0.0, 0.0, 0.0};
  Vec3 point;
  Vec3 normal;
};

struct SurfaceSampleSet {
  int resolution = 0;
  std::vector<SurfaceSample> samples;   // row-major: j ascending, then i
  std::vector<uint8_t> coverage_mask;   // resolution^2, index j*R + i
  std::vector<int32_t> sample_index;    // texel -> index into samples, -1 if uncovered

  bool covered(int i, int j) const {
    return coverage_mask[static_cast<size_t>(j) * resolution + i] != 0;
  }
};

// Inverts the UV parametrization: tests every texel center against the UV
// triangles and emits one sample per covered texel. Containment is
// edge-inclusive (barycentric >= -1e-9) so seam texels are kept; when
// several triangles claim a texel the first face in file order wins.
// Strictly-interior multi-claims (genuine chart overlap) are counted and
// reported once on stderr.
SurfaceSampleSet invert_uv(const Mesh& mesh, int resolution);

}  // namespace pixbrush

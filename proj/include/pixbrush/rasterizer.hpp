#pragma once

#include <cstdint>
#include <vector>

#include "pixbrush/camera.hpp"
#include "pixbrush/image.hpp"
#include "pixbrush/mesh.hpp"
#include "pixbrush/vec.hpp"

namespace pixbrush {

// One bilinear tap into a texture-space map. texel indexes row-major
// (j * resolution + i); weights for a covered pixel sum to 1.
struct PixelTap {
  int32_t texel = 0;
  double weight = 0.0;
};

// Visibility and interpolation record for one rendered view. Pixel p
// owns the tap slice [tap_offset[p], tap_offset[p + 1]). Rendering a
// map through these buffers is linear in the texel values, so the
// buffers alone suffice to pull gradients back to texture space.
struct RenderBuffers {
  int height = 0;
  int width = 0;
  int tex_resolution = 0;
  CameraBasis basis;

  std::vector<int32_t> face_id;   // per pixel; -1 where background shows
  std::vector<double> depth;      // eye-space distance along the view axis
  std::vector<Vec2> uv;           // perspective-correct, clamped to [0,1]
  std::vector<double> ndotv;      // |normal . dir_to_eye| at the surface
  std::vector<int32_t> tap_offset;
  std::vector<PixelTap> taps;

  bool covered(int y, int x) const { return face_id[y * width + x] >= 0; }
};

// Rasterizes the mesh with a z-buffer at the given image size, recording
// face ids, perspective-correct UVs, and bilinear texel taps against a
// tex_resolution x tex_resolution texture grid. Triangles are clipped
// against the near plane (0.1) before projection. Geometry-only: no
// texture values are consumed here.
RenderBuffers rasterize(const Mesh& mesh, const CameraPose& pose, int height,
                        int width, int tex_resolution);

// Projects a 1-channel probability map to the image; background pixels
// take background_value exactly.
Image render_probability(const RenderBuffers& buffers,
                         const Image& probability_map,
                         double background_value);

// Adjoint of render_probability: scatters an upstream image gradient
// back to texture space. Background pixels contribute nothing.
Image render_probability_backward(const RenderBuffers& buffers,
                                  const Image& upstream);

// Base appearance under an edit layer: an existing texture sampled with
// the same taps, or a flat color when no texture is present.
struct BaseAppearance {
  Vec3 flat_color{0.5, 0.5, 0.5};
  const Image* texture = nullptr;  // optional, tex_resolution^2 x 3
  bool shaded = false;             // apply the headlight term to the base
};

// Forward record for the localized texture render; kept so the backward
// pass can reuse the per-pixel blend operands instead of recomputing.
struct LocalTextureRender {
  Image image;                    // height x width x 3
  std::vector<double> p_hat;      // rendered probability per pixel
  std::vector<double> t_hat;      // rendered texture color per pixel (3ch)
  std::vector<double> base;       // base color per pixel, post-shading (3ch)
};

// Renders the localized texture: per covered pixel
//   c = p_hat * t_hat + (1 - p_hat) * base
// where p_hat and t_hat are bilinear lookups of the probability and
// texture maps. Background pixels take background_color exactly.
LocalTextureRender render_local_texture(const RenderBuffers& buffers,
                                        const Image& probability_map,
                                        const Image& rgb_map,
                                        const BaseAppearance& base_appearance,
                                        const Vec3& background_color);

struct TextureRenderGrads {
  Image probability;  // tex_resolution^2 x 1
  Image rgb;          // tex_resolution^2 x 3
};

// Exact adjoint of render_local_texture with respect to both texture-
// space maps; this is the path that lets image-guidance gradients reach
// the localization. The base appearance is treated as fixed.
TextureRenderGrads render_backward(const RenderBuffers& buffers,
                                   const LocalTextureRender& fwd,
                                   const Image& upstream);

}  // namespace pixbrush

#include "pixbrush/rasterizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pixbrush {

namespace {

constexpr double kNearPlane = 0.1;
constexpr double kPi = 3.14159265358979323846;

// A clip-space vertex: eye-space position split into (x, y) and the
// positive distance d along the view axis, plus barycentric weights with
// respect to the original (unclipped) triangle so corner attributes stay
// interpolatable after clipping.
struct ClipVertex {
  double x = 0.0;
  double y = 0.0;
  double d = 0.0;
  std::array<double, 3> bary{0.0, 0.0, 0.0};
};

ClipVertex lerp_vertex(const ClipVertex& a, const ClipVertex& b, double t) {
  ClipVertex out;
  out.x = a.x + (b.x - a.x) * t;
  out.y = a.y + (b.y - a.y) * t;
  out.d = a.d + (b.d - a.d) * t;
  for (int k = 0; k < 3; ++k) {
    out.bary[k] = a.bary[k] + (b.bary[k] - a.bary[k]) * t;
  }
  return out;
}

// Sutherland-Hodgman against the near plane d > kNearPlane. A triangle
// yields at most a quad.
int clip_near(const std::array<ClipVertex, 3>& in, ClipVertex out[4]) {
  int count = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& cur = in[i];
    const ClipVertex& nxt = in[(i + 1) % 3];
    const bool cur_in = cur.d > kNearPlane;
    const bool nxt_in = nxt.d > kNearPlane;
    if (cur_in) {
      out[count++] = cur;
    }
    if (cur_in != nxt_in) {
      const double t = (kNearPlane - cur.d) / (nxt.d - cur.d);
      out[count++] = lerp_vertex(cur, nxt, t);
    }
  }
  return count;
}

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

RenderBuffers rasterize(const Mesh& mesh, const CameraPose& pose, int height,
                        int width, int tex_resolution) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("render size must be positive");
  }
  if (tex_resolution <= 0) {
    throw std::invalid_argument("texture resolution must be positive");
  }

  RenderBuffers buffers;
  buffers.height = height;
  buffers.width = width;
  buffers.tex_resolution = tex_resolution;
  buffers.basis = camera_basis(pose);

  const int pixel_count = height * width;
  buffers.face_id.assign(pixel_count, -1);
  buffers.depth.assign(pixel_count, std::numeric_limits<double>::infinity());
  buffers.uv.assign(pixel_count, Vec2{0.0, 0.0});
  buffers.ndotv.assign(pixel_count, 0.0);

  const CameraBasis& basis = buffers.basis;
  const double focal = 1.0 / std::tan(pose.fov_deg * kPi / 360.0);

  // Visibility pass: nearest face and its original-triangle barycentrics
  // per pixel.
  std::vector<std::array<double, 3>> pixel_bary(
      static_cast<size_t>(pixel_count), {0.0, 0.0, 0.0});

  auto to_screen = [&](const ClipVertex& v, double& sx, double& sy) {
    const double ndc_x = focal * v.x / v.d;
    const double ndc_y = focal * v.y / v.d;
    sx = (ndc_x * 0.5 + 0.5) * width;
    sy = (0.5 - ndc_y * 0.5) * height;
  };

  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    std::array<ClipVertex, 3> tri;
    for (int c = 0; c < 3; ++c) {
      const Vec3 rel = mesh.vertices[mesh.faces[f][c]] - basis.eye;
      tri[c].x = dot(basis.right, rel);
      tri[c].y = dot(basis.up, rel);
      tri[c].d = dot(basis.forward, rel);
      tri[c].bary[c] = 1.0;
    }

    ClipVertex poly[4];
    const int n = clip_near(tri, poly);
    if (n < 3) {
      continue;
    }

    // Fan triangulation of the clipped polygon.
    for (int t = 1; t + 1 < n; ++t) {
      const ClipVertex* v0 = &poly[0];
      const ClipVertex* v1 = &poly[t];
      const ClipVertex* v2 = &poly[t + 1];

      double sx0, sy0, sx1, sy1, sx2, sy2;
      to_screen(*v0, sx0, sy0);
      to_screen(*v1, sx1, sy1);
      to_screen(*v2, sx2, sy2);

      const double area = edge(sx0, sy0, sx1, sy1, sx2, sy2);
      if (std::abs(area) < 1e-12) {
        continue;
      }

      const int min_x = std::max(
          0, static_cast<int>(std::floor(std::min({sx0, sx1, sx2}))));
      const int max_x = std::min(
          width - 1, static_cast<int>(std::ceil(std::max({sx0, sx1, sx2}))));
      const int min_y = std::max(
          0, static_cast<int>(std::floor(std::min({sy0, sy1, sy2}))));
      const int max_y = std::min(
          height - 1, static_cast<int>(std::ceil(std::max({sy0, sy1, sy2}))));
      if (min_x > max_x || min_y > max_y) {
        continue;
      }

      const double inv_d0 = 1.0 / v0->d;
      const double inv_d1 = 1.0 / v1->d;
      const double inv_d2 = 1.0 / v2->d;

      for (int y = min_y; y <= max_y; ++y) {
        const double py = y + 0.5;
        for (int x = min_x; x <= max_x; ++x) {
          const double px = x + 0.5;
          // Normalizing by the signed area makes the inside test
          // winding-independent.
          const double a = edge(sx1, sy1, sx2, sy2, px, py) / area;
          const double b = edge(sx2, sy2, sx0, sy0, px, py) / area;
          const double c = edge(sx0, sy0, sx1, sy1, px, py) / area;
          if (a < -1e-12 || b < -1e-12 || c < -1e-12) {
            continue;
          }
          // Perspective-correct interpolation: attributes are linear in
          // screen space only after division by eye-space distance.
          const double denom = a * inv_d0 + b * inv_d1 + c * inv_d2;
          const double depth = 1.0 / denom;
          const int p = y * width + x;
          if (depth >= buffers.depth[p]) {
            continue;
          }
          buffers.depth[p] = depth;
          buffers.face_id[p] = static_cast<int32_t>(f);
          for (int k = 0; k < 3; ++k) {
            const double num = a * inv_d0 * v0->bary[k] +
                               b * inv_d1 * v1->bary[k] +
                               c * inv_d2 * v2->bary[k];
            pixel_bary[p][k] = num / denom;
          }
        }
      }
    }
  }

  // Attribute pass in row-major pixel order so the tap layout is
  // canonical regardless of face traversal order above.
  buffers.tap_offset.assign(pixel_count + 1, 0);
  buffers.taps.clear();
  buffers.taps.reserve(static_cast<size_t>(pixel_count) * 4);

  const int res = tex_resolution;
  for (int p = 0; p < pixel_count; ++p) {
    buffers.tap_offset[p] = static_cast<int32_t>(buffers.taps.size());
    const int face = buffers.face_id[p];
    if (face < 0) {
      continue;
    }

    std::array<double, 3> bary = pixel_bary[p];
    double bsum = 0.0;
    for (int k = 0; k < 3; ++k) {
      bary[k] = std::max(0.0, bary[k]);
      bsum += bary[k];
    }
    if (bsum <= 0.0) {
      bary = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    } else {
      for (int k = 0; k < 3; ++k) {
        bary[k] /= bsum;
      }
    }

    Vec2 uv{0.0, 0.0};
    Vec3 pos{0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      uv = uv + mesh.corner_uvs[face][k] * bary[k];
      pos = pos + mesh.vertices[mesh.faces[face][k]] * bary[k];
    }
    uv.x = std::min(1.0, std::max(0.0, uv.x));
    uv.y = std::min(1.0, std::max(0.0, uv.y));
    buffers.uv[p] = uv;

    Vec3 normal{0.0, 0.0, 0.0};
    if (mesh.has_normals()) {
      for (int k = 0; k < 3; ++k) {
        normal = normal + mesh.vertex_normals[mesh.faces[face][k]] * bary[k];
      }
    }
    if (norm(normal) < 1e-12) {
      const Vec3& a = mesh.vertices[mesh.faces[face][0]];
      const Vec3& b = mesh.vertices[mesh.faces[face][1]];
      const Vec3& c = mesh.vertices[mesh.faces[face][2]];
      normal = cross(b - a, c - a);
    }
    if (norm(normal) > 1e-12) {
      normal = normalized(normal);
      Vec3 to_eye = basis.eye - pos;
      if (norm(to_eye) > 1e-12) {
        to_eye = normalized(to_eye);
        // Double-sided: back-facing interpolated normals still shade.
        buffers.ndotv[p] = std::abs(dot(normal, to_eye));
      }
    }

    // Bilinear taps against texel centers ((i+0.5)/R, (j+0.5)/R), edges
    // clamped. Duplicates from clamping merge; zero weights drop, so a
    // UV exactly on a texel center yields a single unit tap.
    const double tx = uv.x * res - 0.5;
    const double ty = uv.y * res - 0.5;
    const double fx = tx - std::floor(tx);
    const double fy = ty - std::floor(ty);
    const int i0 = std::min(res - 1, std::max(0, static_cast<int>(std::floor(tx))));
    const int i1 = std::min(res - 1, std::max(0, static_cast<int>(std::floor(tx)) + 1));
    const int j0 = std::min(res - 1, std::max(0, static_cast<int>(std::floor(ty))));
    const int j1 = std::min(res - 1, std::max(0, static_cast<int>(std::floor(ty)) + 1));

    const std::array<std::pair<int32_t, double>, 4> candidates{{
        {static_cast<int32_t>(j0 * res + i0), (1.0 - fx) * (1.0 - fy)},
        {static_cast<int32_t>(j0 * res + i1), fx * (1.0 - fy)},
        {static_cast<int32_t>(j1 * res + i0), (1.0 - fx) * fy},
        {static_cast<int32_t>(j1 * res + i1), fx * fy},
    }};
    const size_t first = buffers.taps.size();
    for (const auto& [texel, weight] : candidates) {
      bool merged = false;
      for (size_t q = first; q < buffers.taps.size(); ++q) {
        if (buffers.taps[q].texel == texel) {
          buffers.taps[q].weight += weight;
          merged = true;
          break;
        }
      }
      if (!merged && weight > 0.0) {
        buffers.taps.push_back(PixelTap{texel, weight});
      }
    }
  }
  buffers.tap_offset[pixel_count] = static_cast<int32_t>(buffers.taps.size());
  return buffers;
}

Image render_probability(const RenderBuffers& buffers,
                         const Image& probability_map,
                         double background_value) {
  const int res = buffers.tex_resolution;
  if (probability_map.height != res || probability_map.width != res ||
      probability_map.channels != 1) {
    throw std::invalid_argument("map shape does not match render buffers");
  }
  Image out(buffers.height, buffers.width, 1);
  const int pixel_count = buffers.height * buffers.width;
  for (int p = 0; p < pixel_count; ++p) {
    if (buffers.face_id[p] < 0) {
      out.data[p] = background_value;
      continue;
    }
    double acc = 0.0;
    for (int32_t q = buffers.tap_offset[p]; q < buffers.tap_offset[p + 1];
         ++q) {
      acc += buffers.taps[q].weight * probability_map.data[buffers.taps[q].texel];
    }
    out.data[p] = acc;
  }
  return out;
}

Image render_probability_backward(const RenderBuffers& buffers,
                                  const Image& upstream) {
  if (upstream.height != buffers.height || upstream.width != buffers.width ||
      upstream.channels != 1) {
    throw std::invalid_argument("upstream shape does not match render buffers");
  }
  Image grad(buffers.tex_resolution, buffers.tex_resolution, 1);
  const int pixel_count = buffers.height * buffers.width;
  for (int p = 0; p < pixel_count; ++p) {
    if (buffers.face_id[p] < 0) {
      continue;
    }
    const double up = upstream.data[p];
    for (int32_t q = buffers.tap_offset[p]; q < buffers.tap_offset[p + 1];
         ++q) {
      grad.data[buffers.taps[q].texel] += buffers.taps[q].weight * up;
    }
  }
  return grad;
}

LocalTextureRender render_local_texture(const RenderBuffers& buffers,
                                        const Image& probability_map,
                                        const Image& rgb_map,
                                        const BaseAppearance& base_appearance,
                                        const Vec3& background_color) {
  const int res = buffers.tex_resolution;
  if (probability_map.height != res || probability_map.width != res ||
      probability_map.channels != 1) {
    throw std::invalid_argument("probability map shape mismatch");
  }
  if (rgb_map.height != res || rgb_map.width != res || rgb_map.channels != 3) {
    throw std::invalid_argument("rgb map shape mismatch");
  }
  if (base_appearance.texture != nullptr) {
    const Image& bt = *base_appearance.texture;
    if (bt.height != res || bt.width != res || bt.channels != 3) {
      throw std::invalid_argument("base texture shape mismatch");
    }
  }

  const int pixel_count = buffers.height * buffers.width;
  LocalTextureRender out;
  out.image = Image(buffers.height, buffers.width, 3);
  out.p_hat.assign(pixel_count, 0.0);
  out.t_hat.assign(static_cast<size_t>(pixel_count) * 3, 0.0);
  out.base.assign(static_cast<size_t>(pixel_count) * 3, 0.0);

  const double bg[3] = {background_color.x, background_color.y,
                        background_color.z};
  for (int p = 0; p < pixel_count; ++p) {
    if (buffers.face_id[p] < 0) {
      for (int ch = 0; ch < 3; ++ch) {
        out.image.data[p * 3 + ch] = bg[ch];
      }
      continue;
    }
    double p_hat = 0.0;
    double t_hat[3] = {0.0, 0.0, 0.0};
    double base[3] = {base_appearance.flat_color.x,
                      base_appearance.flat_color.y,
                      base_appearance.flat_color.z};
    if (base_appearance.texture != nullptr) {
      base[0] = base[1] = base[2] = 0.0;
    }
    for (int32_t q = buffers.tap_offset[p]; q < buffers.tap_offset[p + 1];
         ++q) {
      const double w = buffers.taps[q].weight;
      const int32_t texel = buffers.taps[q].texel;
      p_hat += w * probability_map.data[texel];
      for (int ch = 0; ch < 3; ++ch) {
        t_hat[ch] += w * rgb_map.data[texel * 3 + ch];
      }
      if (base_appearance.texture != nullptr) {
        for (int ch = 0; ch < 3; ++ch) {
          base[ch] += w * base_appearance.texture->data[texel * 3 + ch];
        }
      }
    }
    if (base_appearance.shaded) {
      // Headlight term on the base only; the synthesized layer stays
      // unshaded so its gradients are unchanged by this switch.
      const double s = 0.25 + 0.75 * buffers.ndotv[p];
      for (int ch = 0; ch < 3; ++ch) {
        base[ch] *= s;
      }
    }
    out.p_hat[p] = p_hat;
    for (int ch = 0; ch < 3; ++ch) {
      out.t_hat[p * 3 + ch] = t_hat[ch];
      out.base[p * 3 + ch] = base[ch];
      out.image.data[p * 3 + ch] =
          p_hat * t_hat[ch] + (1.0 - p_hat) * base[ch];
    }
  }
  return out;
}

TextureRenderGrads render_backward(const RenderBuffers& buffers,
                                   const LocalTextureRender& fwd,
                                   const Image& upstream) {
  if (upstream.height != buffers.height || upstream.width != buffers.width ||
      upstream.channels != 3) {
    throw std::invalid_argument("upstream shape does not match render buffers");
  }
  TextureRenderGrads grads;
  grads.probability = Image(buffers.tex_resolution, buffers.tex_resolution, 1);
  grads.rgb = Image(buffers.tex_resolution, buffers.tex_resolution, 3);

  const int pixel_count = buffers.height * buffers.width;
  for (int p = 0; p < pixel_count; ++p) {
    if (buffers.face_id[p] < 0) {
      continue;
    }
    // c = p_hat * t_hat + (1 - p_hat) * base, so
    //   dc/dp_hat = t_hat - base  and  dc/dt_hat = p_hat.
    double d_p_hat = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      d_p_hat += upstream.data[p * 3 + ch] *
                 (fwd.t_hat[p * 3 + ch] - fwd.base[p * 3 + ch]);
    }
    const double p_hat = fwd.p_hat[p];
    for (int32_t q = buffers.tap_offset[p]; q < buffers.tap_offset[p + 1];
         ++q) {
      const double w = buffers.taps[q].weight;
      const int32_t texel = buffers.taps[q].texel;
      grads.probability.data[texel] += w * d_p_hat;
      for (int ch = 0; ch < 3; ++ch) {
        grads.rgb.data[texel * 3 + ch] +=
            w * upstream.data[p * 3 + ch] * p_hat;
      }
    }
  }
  return grads;
}

}  // namespace pixbrush

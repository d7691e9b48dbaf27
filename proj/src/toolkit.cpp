#include "pixbrush/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pixbrush/external_backend.hpp"
#include "pixbrush/png_io.hpp"
#include "pixbrush/rasterizer.hpp"

namespace pixbrush {

namespace {

namespace fs = std::filesystem;

void check_layer(const Image& base, const EditLayer& layer) {
  if (layer.probability.height != base.height ||
      layer.probability.width != base.width ||
      layer.probability.channels != 1) {
    throw std::invalid_argument("layer probability resolution mismatch");
  }
  if (layer.rgb.height != base.height || layer.rgb.width != base.width ||
      layer.rgb.channels != 3) {
    throw std::invalid_argument("layer color resolution mismatch");
  }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("embedder dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 0.0 ? dot / denom : 0.0;
}

void check_metric_inputs(const std::vector<Image>& results,
                         const std::vector<Image>& references) {
  if (results.size() != references.size()) {
    throw std::invalid_argument("result and reference counts differ");
  }
  if (results.size() < 2) {
    throw std::invalid_argument("retrieval metrics need at least 2 pairs");
  }
}

}  // namespace

Image composite_layers(const Image& base_texture,
                       const std::vector<EditLayer>& layers) {
  if (base_texture.channels != 3) {
    throw std::invalid_argument("base texture must have 3 channels");
  }
  Image out = base_texture;
  for (const EditLayer& layer : layers) {
    check_layer(base_texture, layer);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        const double p = layer.probability.at(y, x, 0);
        if (p == 0.0) {
          continue;  // keep the texel bit-identical
        }
        for (int c = 0; c < 3; ++c) {
          out.at(y, x, c) =
              p * layer.rgb.at(y, x, c) + (1.0 - p) * out.at(y, x, c);
        }
      }
    }
  }
  return out;
}

Image overlay_on_existing(const Image& existing_texture,
                          const EditLayer& layer) {
  return composite_layers(existing_texture, {layer});
}

std::vector<double> HistogramEmbedder::embed(const Image& image) const {
  if (image.height <= 0 || image.width <= 0) {
    throw std::invalid_argument("cannot embed an empty image");
  }
  const Image rgb = ensure_channels(image, 3);
  std::vector<double> hist(64, 0.0);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      int idx = 0;
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(rgb.at(y, x, c), 0.0, 1.0);
        const int bin = std::min(3, static_cast<int>(v * 4.0));
        idx = idx * 4 + bin;
      }
      hist[idx] += 1.0;
    }
  }
  double norm = 0.0;
  for (double v : hist) {
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : hist) {
    v /= norm;
  }
  return hist;
}

double r_precision(const std::vector<Image>& result_renders,
                   const std::vector<Image>& reference_images,
                   const Embedder& embedder) {
  check_metric_inputs(result_renders, reference_images);
  const size_t n = result_renders.size();
  std::vector<std::vector<double>> ref_emb(n);
  for (size_t j = 0; j < n; ++j) {
    ref_emb[j] = embedder.embed(reference_images[j]);
    if (ref_emb[j].size() != static_cast<size_t>(embedder.dim())) {
      throw std::invalid_argument("embedder dimension mismatch");
    }
  }
  int successes = 0;
  for (size_t i = 0; i < n; ++i) {
    const std::vector<double> emb = embedder.embed(result_renders[i]);
    const double own = cosine(emb, ref_emb[i]);
    bool win = true;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      // Conservative: a tie with any other reference is a failure.
      if (cosine(emb, ref_emb[j]) >= own) {
        win = false;
        break;
      }
    }
    if (win) {
      ++successes;
    }
  }
  return 100.0 * successes / static_cast<double>(n);
}

double mean_similarity(const std::vector<Image>& result_renders,
                       const std::vector<Image>& reference_images,
                       const Embedder& embedder) {
  check_metric_inputs(result_renders, reference_images);
  double acc = 0.0;
  for (size_t i = 0; i < result_renders.size(); ++i) {
    acc += cosine(embedder.embed(result_renders[i]),
                  embedder.embed(reference_images[i]));
  }
  return acc / static_cast<double>(result_renders.size());
}

namespace {

// Blits src into dst with its top-left corner at (y0, x0).
void blit(Image& dst, const Image& src, int y0, int x0) {
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < src.channels; ++c) {
        dst.at(y0 + y, x0 + x, c) = src.at(y, x, c);
      }
    }
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw std::runtime_error("cannot write file: " + path);
    }
    os << content;
    os.flush();
    if (!os) {
      throw std::runtime_error("cannot write file: " + path);
    }
  }
  fs::rename(tmp, path);
}

std::string obj_text(const Mesh& mesh) {
  std::ostringstream os;
  os << "mtllib mesh.mtl\n";
  os.precision(17);
  for (const Vec3& v : mesh.vertices) {
    os << "v " << v.x << " " << v.y << " " << v.z << "\n";
  }
  for (const auto& uvs : mesh.corner_uvs) {
    for (const Vec2& uv : uvs) {
      os << "vt " << uv.x << " " << uv.y << "\n";
    }
  }
  const bool normals = mesh.has_normals();
  if (normals) {
    for (const Vec3& vn : mesh.vertex_normals) {
      os << "vn " << vn.x << " " << vn.y << " " << vn.z << "\n";
    }
  }
  os << "usemtl material0\n";
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    os << "f";
    for (int c = 0; c < 3; ++c) {
      const int vi = mesh.faces[f][c] + 1;
      const size_t ti = f * 3 + c + 1;
      os << " " << vi << "/" << ti;
      if (normals) {
        os << "/" << vi;
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

void export_assets(const TrainState& state, const Mesh& mesh,
                   const TrainConfig& config, const std::string& out_dir) {
  if (state.config_digest != config_digest(config)) {
    throw std::runtime_error(
        "state was produced by a different configuration");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw std::runtime_error("cannot create output directory: " + out_dir);
  }

  const SurfaceSampleSet samples =
      invert_uv(mesh, config.texture_resolution);
  const TextureMaps maps =
      extract_maps(state.loc_params, state.tex_params, samples);
  const int depth = config.export_16bit ? 16 : 8;

  write_png(out_dir + "/texture.png", maps.rgb, depth);
  write_png(out_dir + "/probability.png", maps.probability, depth);

  Image binary(maps.probability.height, maps.probability.width, 1);
  for (size_t i = 0; i < binary.data.size(); ++i) {
    binary.data[i] =
        maps.probability.data[i] >= config.mask_threshold ? 1.0 : 0.0;
  }
  write_png(out_dir + "/mask.png", binary, 8);

  write_text_atomic(out_dir + "/mesh.obj", obj_text(mesh));
  write_text_atomic(out_dir + "/mesh.mtl",
                    "newmtl material0\nKd 1 1 1\nmap_Kd texture.png\n");

  // Turntable: 8 azimuths, 45 degrees apart, in a 4x2 grid.
  std::optional<Image> base_texture;
  if (!config.base_texture.empty()) {
    base_texture = ensure_channels(read_png(config.base_texture), 3);
  }
  BaseAppearance base;
  base.flat_color = config.base_color;
  base.texture = base_texture.has_value() ? &*base_texture : nullptr;
  base.shaded = config.base_shaded;
  const Vec3 bg{config.background_value, config.background_value,
                config.background_value};
  const int view = config.render_resolution;
  Image grid(view * 2, view * 4, 3);
  for (int k = 0; k < 8; ++k) {
    CameraPose pose;
    pose.elevation_deg = 30.0;
    pose.azimuth_deg = 45.0 * k;
    pose.radius = 1.25;
    pose.fov_deg = config.view.fov_deg;
    const RenderBuffers buffers =
        rasterize(mesh, pose, view, view, config.texture_resolution);
    const LocalTextureRender render = render_local_texture(
        buffers, maps.probability, maps.rgb, base, bg);
    blit(grid, render.image, (k / 4) * view, (k % 4) * view);
  }
  write_png(out_dir + "/turntable.png", grid, 8);

  std::ostringstream manifest;
  manifest << "config_digest = " << state.config_digest << "\n";
  manifest << "iteration = " << state.iteration << "\n";
  manifest << "phase = "
           << (state.phase == Phase::Warmup
                   ? "warmup"
                   : state.phase == Phase::Joint ? "joint" : "done")
           << "\n";
  manifest << "texture_resolution = " << config.texture_resolution << "\n";
  manifest << "files = texture.png probability.png mask.png mesh.obj "
              "mesh.mtl turntable.png run_config.txt\n";
  write_text_atomic(out_dir + "/manifest.txt", manifest.str());
  write_text_atomic(out_dir + "/run_config.txt", canonical_config(config));
}

EditLayer load_layer(const std::string& dir) {
  EditLayer layer;
  layer.probability = ensure_channels(read_png(dir + "/probability.png"), 1);
  layer.rgb = ensure_channels(read_png(dir + "/texture.png"), 3);
  if (layer.probability.height != layer.rgb.height ||
      layer.probability.width != layer.rgb.width) {
    throw std::runtime_error("layer maps in " + dir +
                             " have mismatched resolutions");
  }
  const std::string manifest_path = dir + "/manifest.txt";
  std::ifstream manifest(manifest_path);
  if (manifest) {
    std::string line;
    while (std::getline(manifest, line)) {
      const std::string prefix = "config_digest = ";
      if (line.rfind(prefix, 0) == 0) {
        layer.provenance = line.substr(prefix.size());
        break;
      }
    }
  }
  return layer;
}

std::shared_ptr<GuidanceBackend> make_backend(const TrainConfig& config,
                                              ToyTargets toy_targets) {
  if (config.backend == BackendKind::Toy) {
    return std::make_shared<ToyBackend>(
        make_schedule(config.schedule_timesteps, config.beta_lo,
                      config.beta_hi),
        std::move(toy_targets));
  }
  return std::make_shared<ExternalBackend>(config.external_url);
}

}  // namespace pixbrush

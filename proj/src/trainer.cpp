#include "pixbrush/trainer.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "pixbrush/png_io.hpp"
#include "pixbrush/rasterizer.hpp"

namespace pixbrush {

namespace {

constexpr char kMagic[4] = {'P', 'X', 'B', 'C'};
constexpr char kTrailer[4] = {'C', 'B', 'X', 'P'};
constexpr uint32_t kVersion = 1;

[[noreturn]] void corrupt() {
  throw std::runtime_error("checkpoint file is truncated or corrupt");
}

void put_bytes(std::ostream& os, const void* data, size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* data, size_t n) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) {
    corrupt();
  }
}

template <typename T>
void put_pod(std::ostream& os, T v) {
  put_bytes(os, &v, sizeof(T));
}

template <typename T>
T get_pod(std::istream& is) {
  T v;
  get_bytes(is, &v, sizeof(T));
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_pod<uint64_t>(os, s.size());
  put_bytes(os, s.data(), s.size());
}

std::string get_string(std::istream& is) {
  const uint64_t n = get_pod<uint64_t>(is);
  if (n > (1ull << 32)) {
    corrupt();
  }
  std::string s(n, '\0');
  get_bytes(is, s.data(), n);
  return s;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  put_pod<uint64_t>(os, v.size());
  put_bytes(os, v.data(), v.size() * sizeof(double));
}

std::vector<double> get_doubles(std::istream& is) {
  const uint64_t n = get_pod<uint64_t>(is);
  if (n > (1ull << 32)) {
    corrupt();
  }
  std::vector<double> v(n);
  get_bytes(is, v.data(), n * sizeof(double));
  return v;
}

void put_field(std::ostream& os, const FieldParams& f) {
  put_pod<int32_t>(os, f.encoding.num_frequencies);
  put_pod<double>(os, f.encoding.frequency_scale);
  put_pod<uint64_t>(os, f.encoding.seed);
  put_pod<int32_t>(os, static_cast<int32_t>(f.encoding.mode));
  put_pod<int32_t>(os, static_cast<int32_t>(f.head_kind));
  put_pod<int32_t>(os, f.width);
  put_doubles(os, f.params);
  put_doubles(os, f.running_mean);
  put_doubles(os, f.running_var);
}

FieldParams get_field(std::istream& is) {
  FieldParams f;
  f.encoding.num_frequencies = get_pod<int32_t>(is);
  f.encoding.frequency_scale = get_pod<double>(is);
  f.encoding.seed = get_pod<uint64_t>(is);
  const int32_t mode = get_pod<int32_t>(is);
  if (mode < 0 || mode > 1) {
    corrupt();
  }
  f.encoding.mode = static_cast<EncodingMode>(mode);
  const int32_t head = get_pod<int32_t>(is);
  if (head < 0 || head > 1) {
    corrupt();
  }
  f.head_kind = static_cast<HeadKind>(head);
  f.width = get_pod<int32_t>(is);
  if (f.width < 1 || f.encoding.num_frequencies < 1) {
    corrupt();
  }
  f.params = get_doubles(is);
  f.running_mean = get_doubles(is);
  f.running_var = get_doubles(is);
  if (f.params.size() != f.param_count() ||
      f.running_mean.size() !=
          static_cast<size_t>(FieldParams::kNumBlocks) * f.width ||
      f.running_var.size() != f.running_mean.size()) {
    corrupt();
  }
  return f;
}

void put_adam(std::ostream& os, const AdamState& a) {
  put_pod<int64_t>(os, a.steps);
  put_doubles(os, a.m);
  put_doubles(os, a.v);
}

AdamState get_adam(std::istream& is) {
  AdamState a;
  a.steps = get_pod<int64_t>(is);
  a.m = get_doubles(is);
  a.v = get_doubles(is);
  if (a.m.size() != a.v.size()) {
    corrupt();
  }
  return a;
}

// Schedule factor sqrt(ab/(1-ab)) times w(t); dividing a toy-backend
// gradient norm by this yields the distance to the target.
double schedule_factor(const NoiseSchedule& schedule, int t, double weight) {
  const double ab = schedule.alpha_bar(t);
  return weight * std::sqrt(ab / (1.0 - ab));
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw std::runtime_error("cannot write checkpoint: " + tmp);
    }
    put_bytes(os, kMagic, 4);
    put_pod<uint32_t>(os, kVersion);
    put_string(os, state.config_digest);
    put_pod<int32_t>(os, state.iteration);
    put_pod<int32_t>(os, static_cast<int32_t>(state.phase));
    put_pod<int32_t>(os, state.consecutive_failures);
    put_string(os, state.rng.serialize());
    put_field(os, state.loc_params);
    put_field(os, state.tex_params);
    put_adam(os, state.loc_opt);
    put_adam(os, state.tex_opt);
    put_pod<uint64_t>(os, state.history.size());
    for (const StepMetrics& m : state.history) {
      put_pod<int32_t>(os, m.iteration);
      put_pod<int32_t>(os, m.phase);
      put_pod<int32_t>(os, m.timestep_loc);
      put_pod<int32_t>(os, m.timestep_img);
      put_pod<double>(os, m.loc_grad_norm);
      put_pod<double>(os, m.img_grad_norm);
      put_pod<double>(os, m.normalized_loss);
      put_pod<uint8_t>(os, m.skipped);
    }
    put_bytes(os, kTrailer, 4);
    os.flush();
    if (!os) {
      throw std::runtime_error("cannot write checkpoint: " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  char magic[4];
  get_bytes(is, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  const uint32_t version = get_pod<uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  TrainState state;
  state.config_digest = get_string(is);
  state.iteration = get_pod<int32_t>(is);
  const int32_t phase = get_pod<int32_t>(is);
  if (phase < 0 || phase > 2) {
    corrupt();
  }
  state.phase = static_cast<Phase>(phase);
  state.consecutive_failures = get_pod<int32_t>(is);
  state.rng.restore(get_string(is));
  state.loc_params = get_field(is);
  state.tex_params = get_field(is);
  state.loc_opt = get_adam(is);
  state.tex_opt = get_adam(is);
  const uint64_t hist = get_pod<uint64_t>(is);
  if (hist > (1ull << 32)) {
    corrupt();
  }
  state.history.resize(hist);
  for (StepMetrics& m : state.history) {
    m.iteration = get_pod<int32_t>(is);
    m.phase = get_pod<int32_t>(is);
    m.timestep_loc = get_pod<int32_t>(is);
    m.timestep_img = get_pod<int32_t>(is);
    m.loc_grad_norm = get_pod<double>(is);
    m.img_grad_norm = get_pod<double>(is);
    m.normalized_loss = get_pod<double>(is);
    m.skipped = get_pod<uint8_t>(is);
  }
  char trailer[4];
  get_bytes(is, trailer, 4);
  if (std::memcmp(trailer, kTrailer, 4) != 0) {
    corrupt();
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    corrupt();
  }
  return state;
}

Trainer::Trainer(const TrainConfig& config, const Mesh& mesh,
                 std::shared_ptr<GuidanceBackend> backend, TrainInputs inputs)
    : config_(config), mesh_(mesh), backend_(std::move(backend)) {
  validate_config(config_);
  if (!backend_) {
    throw std::invalid_argument("trainer requires a guidance backend");
  }
  schedule_ = make_schedule(config_.schedule_timesteps, config_.beta_lo,
                            config_.beta_hi);
  samples_ = invert_uv(mesh_, config_.texture_resolution);
  if (samples_.samples.empty()) {
    throw std::runtime_error(
        "mesh UV atlas covers no texels at this texture resolution");
  }

  if (inputs.reference_image.has_value()) {
    reference_image_ = std::move(inputs.reference_image);
  } else if (!config_.reference_image.empty()) {
    reference_image_ = ensure_channels(read_png(config_.reference_image), 3);
  }
  if (config_.joint_iters > 0 && !reference_image_.has_value()) {
    throw std::runtime_error("joint optimization requires a reference image");
  }

  if (inputs.base_texture.has_value()) {
    base_texture_ = std::move(inputs.base_texture);
  } else if (!config_.base_texture.empty()) {
    base_texture_ = ensure_channels(read_png(config_.base_texture), 3);
  }
  if (base_texture_.has_value() &&
      (base_texture_->height != config_.texture_resolution ||
       base_texture_->width != config_.texture_resolution ||
       base_texture_->channels != 3)) {
    throw std::runtime_error(
        "base texture resolution does not match texture_resolution");
  }

  warmup_target_ =
      (config_.no_warmup || config_.no_loc_loss) ? 0 : config_.warmup_iters;

  state_.config_digest = config_digest(config_);
  // Distinct deterministic streams: seed drives the training draws,
  // seed+1 and seed+2 the two field initializations. The encoding seed
  // is shared so both fields see the same frequency matrix.
  EncodingSpec enc;
  enc.num_frequencies = config_.num_frequencies;
  enc.frequency_scale = config_.frequency_scale;
  enc.seed = config_.seed;
  enc.mode = config_.encoding_mode;
  state_.loc_params = init_field_params(enc, HeadKind::Probability,
                                        config_.seed + 1, config_.field_width);
  state_.tex_params = init_field_params(enc, HeadKind::Rgb, config_.seed + 2,
                                        config_.field_width);
  state_.rng = Rng(config_.seed);
  if (warmup_target_ > 0) {
    state_.phase = Phase::Warmup;
  } else if (config_.joint_iters > 0) {
    state_.phase = Phase::Joint;
  } else {
    state_.phase = Phase::Done;
  }
}

Trainer::Trainer(const TrainConfig& config, const Mesh& mesh,
                 std::shared_ptr<GuidanceBackend> backend, TrainInputs inputs,
                 TrainState resumed)
    : Trainer(config, mesh, std::move(backend), std::move(inputs)) {
  if (resumed.config_digest != state_.config_digest) {
    throw std::runtime_error(
        "checkpoint was produced by a different configuration");
  }
  state_ = std::move(resumed);
}

StepMetrics Trainer::warmup_step() {
  if (state_.phase != Phase::Warmup) {
    throw std::logic_error("warmup_step requires the warm-up phase");
  }
  return step(false);
}

StepMetrics Trainer::joint_step() {
  if (state_.phase != Phase::Joint) {
    throw std::logic_error("joint_step requires the joint phase");
  }
  return step(true);
}

StepMetrics Trainer::step(bool joint) {
  TrainState& st = state_;
  StepMetrics metrics;
  metrics.iteration = st.iteration + 1;
  metrics.phase = static_cast<int32_t>(st.phase);

  const int hw = config_.render_resolution;
  const int res = config_.texture_resolution;
  const CameraPose pose = sample_camera(st.rng, config_.view);
  const RenderBuffers buffers = rasterize(mesh_, pose, hw, hw, res);

  // The texels this view reads, ascending; fields are evaluated only
  // there, as a batch.
  std::vector<int32_t> touched;
  touched.reserve(buffers.taps.size());
  for (const PixelTap& tap : buffers.taps) {
    if (samples_.sample_index[tap.texel] >= 0) {
      touched.push_back(tap.texel);
    }
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

  bool ok = false;
  if (!touched.empty()) {
    const size_t n = touched.size();
    std::vector<Vec3> points(n);
    for (size_t i = 0; i < n; ++i) {
      points[i] = samples_.samples[samples_.sample_index[touched[i]]].point;
    }

    const FieldForward loc_fwd =
        field_forward(st.loc_params, points, NormMode::Batch);
    Image prob_map(res, res, 1);
    for (size_t i = 0; i < n; ++i) {
      prob_map.data[touched[i]] = loc_fwd.output(static_cast<int>(i), 0);
    }
    const Image prob_render =
        render_probability(buffers, prob_map, config_.background_value);

    const bool use_loc = joint ? !config_.no_loc_loss : true;
    const double loc_scale = joint ? config_.loc_loss_weight_joint : 1.0;

    try {
      // All fallible guidance evaluations run before any parameter or
      // running-statistics update, so a skipped step leaves the state
      // exactly as it was (apart from the consumed random draws).
      Image d_prob_map(res, res, 1);
      std::optional<FieldForward> tex_fwd;
      Image d_rgb_map;
      double normalized = 0.0;

      if (use_loc) {
        Condition cond;
        cond.prompt = config_.prompt;
        cond.image_weight = config_.image_weight;
        const int t =
            st.rng.uniform_int(config_.timestep_min, config_.timestep_max);
        Image eps(hw, hw, 1);
        for (double& v : eps.data) {
          v = st.rng.normal();
        }
        GuidanceGradient g = sds_grad(*backend_, prob_render, cond, t, eps,
                                      schedule_, config_.weight_kind);
        metrics.timestep_loc = t;
        metrics.loc_grad_norm = loc_scale * g.grad_norm;
        normalized +=
            loc_scale * g.grad_norm / schedule_factor(schedule_, t, g.weight);
        for (double& v : g.grad.data) {
          v *= loc_scale;
        }
        const Image gmap = render_probability_backward(buffers, g.grad);
        for (size_t k = 0; k < d_prob_map.data.size(); ++k) {
          d_prob_map.data[k] += gmap.data[k];
        }
      }

      if (joint) {
        tex_fwd = field_forward(st.tex_params, points, NormMode::Batch);
        Image rgb_map(res, res, 3);
        for (size_t i = 0; i < n; ++i) {
          for (int c = 0; c < 3; ++c) {
            rgb_map.data[static_cast<size_t>(touched[i]) * 3 + c] =
                tex_fwd->output(static_cast<int>(i), c);
          }
        }
        BaseAppearance base;
        base.flat_color = config_.base_color;
        base.texture = base_texture_.has_value() ? &*base_texture_ : nullptr;
        base.shaded = config_.base_shaded;
        const Vec3 bg{config_.background_value, config_.background_value,
                      config_.background_value};
        const LocalTextureRender ltr =
            render_local_texture(buffers, prob_map, rgb_map, base, bg);

        Condition cond;
        cond.prompt = config_.prompt;
        cond.image_weight = config_.image_weight;
        cond.reference_image = *reference_image_;
        if (!config_.no_ca_mask) {
          // Fresh pyramid from this step's own probability render.
          cond.mask =
              build_mask_pyramid(prob_render, config_.mask_threshold,
                                 backend_->feature_layer_resolutions());
        }
        const int t =
            st.rng.uniform_int(config_.timestep_min, config_.timestep_max);
        Image eps(hw, hw, 3);
        for (double& v : eps.data) {
          v = st.rng.normal();
        }
        GuidanceGradient g = sds_grad(*backend_, ltr.image, cond, t, eps,
                                      schedule_, config_.weight_kind);
        metrics.timestep_img = t;
        metrics.img_grad_norm = g.grad_norm;
        normalized += g.grad_norm / schedule_factor(schedule_, t, g.weight);
        TextureRenderGrads tg = render_backward(buffers, ltr, g.grad);
        for (size_t k = 0; k < d_prob_map.data.size(); ++k) {
          d_prob_map.data[k] += tg.probability.data[k];
        }
        d_rgb_map = std::move(tg.rgb);
      }

      metrics.normalized_loss = normalized;

      AdamHyper hyper;
      hyper.learning_rate = config_.learning_rate;

      Eigen::MatrixXd d_loc(n, 1);
      for (size_t i = 0; i < n; ++i) {
        d_loc(static_cast<int>(i), 0) = d_prob_map.data[touched[i]];
      }
      const std::vector<double> loc_grad =
          field_backward(st.loc_params, loc_fwd, d_loc);
      adam_step(st.loc_opt, st.loc_params.params, loc_grad, hyper);
      update_running_stats(st.loc_params, loc_fwd);

      if (joint) {
        Eigen::MatrixXd d_tex(n, 3);
        for (size_t i = 0; i < n; ++i) {
          for (int c = 0; c < 3; ++c) {
            d_tex(static_cast<int>(i), c) =
                d_rgb_map.data[static_cast<size_t>(touched[i]) * 3 + c];
          }
        }
        const std::vector<double> tex_grad =
            field_backward(st.tex_params, *tex_fwd, d_tex);
        adam_step(st.tex_opt, st.tex_params.params, tex_grad, hyper);
        update_running_stats(st.tex_params, *tex_fwd);
      }
      ok = true;
    } catch (const std::runtime_error&) {
      // Backend failure or a non-finite gradient: skip the update.
      ok = false;
    }
  }

  if (ok) {
    st.consecutive_failures = 0;
  } else {
    metrics.skipped = 1;
    st.consecutive_failures += 1;
  }

  st.iteration += 1;
  if (st.phase == Phase::Warmup && st.iteration >= warmup_target_) {
    st.phase = config_.joint_iters > 0 ? Phase::Joint : Phase::Done;
  } else if (st.phase == Phase::Joint &&
             st.iteration >= warmup_target_ + config_.joint_iters) {
    st.phase = Phase::Done;
  }
  st.history.push_back(metrics);

  if (st.consecutive_failures >= config_.failure_budget) {
    throw std::runtime_error(
        "aborting after " + std::to_string(st.consecutive_failures) +
        " consecutive failed optimization steps");
  }
  return metrics;
}

void Trainer::run(const std::string& checkpoint_dir) {
  if (!checkpoint_dir.empty()) {
    std::filesystem::create_directories(checkpoint_dir);
  }
  auto maybe_checkpoint = [&] {
    if (checkpoint_dir.empty() || config_.checkpoint_every <= 0 ||
        state_.phase == Phase::Done) {
      return;
    }
    if (state_.iteration > 0 &&
        state_.iteration % config_.checkpoint_every == 0) {
      save_checkpoint(state_, checkpoint_dir + "/checkpoint_" +
                                  std::to_string(state_.iteration) + ".bin");
    }
  };
  while (state_.phase == Phase::Warmup) {
    warmup_step();
    maybe_checkpoint();
  }
  while (state_.phase == Phase::Joint) {
    joint_step();
    maybe_checkpoint();
  }
  if (!checkpoint_dir.empty()) {
    save_checkpoint(state_, checkpoint_dir + "/checkpoint_final.bin");
  }
}

TextureMaps Trainer::maps() const {
  return extract_maps(state_.loc_params, state_.tex_params, samples_);
}

}  // namespace pixbrush

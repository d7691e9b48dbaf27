#include "pixbrush/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pixbrush/rng.hpp"

namespace pixbrush {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) {
    return "";
  }
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw std::runtime_error(origin + ": " + what);
}

int parse_int(const std::string& v, const std::string& origin) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return out;
  } catch (const std::exception&) {
    fail(origin, "expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& v, const std::string& origin) {
  try {
    size_t pos = 0;
    const uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return out;
  } catch (const std::exception&) {
    fail(origin, "expected an unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& origin) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return out;
  } catch (const std::exception&) {
    fail(origin, "expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& origin) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  fail(origin, "expected true/false, got '" + v + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_entry(TrainConfig& c, const std::string& key,
                        const std::string& value, const std::string& origin) {
  if (key == "warmup_iters") {
    c.warmup_iters = parse_int(value, origin);
  } else if (key == "joint_iters") {
    c.joint_iters = parse_int(value, origin);
  } else if (key == "texture_resolution") {
    c.texture_resolution = parse_int(value, origin);
  } else if (key == "render_resolution") {
    c.render_resolution = parse_int(value, origin);
  } else if (key == "elevation_min") {
    c.view.elevation_min = parse_double(value, origin);
  } else if (key == "elevation_max") {
    c.view.elevation_max = parse_double(value, origin);
  } else if (key == "azimuth_min") {
    c.view.azimuth_min = parse_double(value, origin);
  } else if (key == "azimuth_max") {
    c.view.azimuth_max = parse_double(value, origin);
  } else if (key == "radius_min") {
    c.view.radius_min = parse_double(value, origin);
  } else if (key == "radius_max") {
    c.view.radius_max = parse_double(value, origin);
  } else if (key == "fov_deg") {
    c.view.fov_deg = parse_double(value, origin);
  } else if (key == "prompt") {
    c.prompt = value;
  } else if (key == "reference_image") {
    c.reference_image = value;
  } else if (key == "image_weight") {
    c.image_weight = parse_double(value, origin);
  } else if (key == "mask_threshold") {
    c.mask_threshold = parse_double(value, origin);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_double(value, origin);
  } else if (key == "optimizer") {
    if (value == "adam") {
      c.optimizer = OptimizerKind::Adam;
    } else {
      fail(origin, "unknown optimizer '" + value + "'");
    }
  } else if (key == "loc_loss_weight_joint") {
    c.loc_loss_weight_joint = parse_double(value, origin);
  } else if (key == "seed") {
    c.seed = parse_u64(value, origin);
  } else if (key == "no_warmup") {
    c.no_warmup = parse_bool(value, origin);
  } else if (key == "no_ca_mask") {
    c.no_ca_mask = parse_bool(value, origin);
  } else if (key == "no_loc_loss") {
    c.no_loc_loss = parse_bool(value, origin);
  } else if (key == "backend") {
    if (value == "toy") {
      c.backend = BackendKind::Toy;
    } else if (value == "external") {
      c.backend = BackendKind::External;
    } else {
      fail(origin, "unknown backend '" + value + "' (expected toy or external)");
    }
  } else if (key == "external_url") {
    c.external_url = value;
  } else if (key == "field_width") {
    c.field_width = parse_int(value, origin);
  } else if (key == "num_frequencies") {
    c.num_frequencies = parse_int(value, origin);
  } else if (key == "frequency_scale") {
    c.frequency_scale = parse_double(value, origin);
  } else if (key == "encoding_mode") {
    if (value == "axis") {
      c.encoding_mode = EncodingMode::AxisAligned;
    } else if (value == "gaussian") {
      c.encoding_mode = EncodingMode::GaussianRandom;
    } else {
      fail(origin, "unknown encoding mode '" + value + "'");
    }
  } else if (key == "weight_kind") {
    if (value == "constant") {
      c.weight_kind = WeightKind::Constant;
    } else if (value == "one_minus_alpha_bar") {
      c.weight_kind = WeightKind::OneMinusAlphaBar;
    } else {
      fail(origin, "unknown weight kind '" + value + "'");
    }
  } else if (key == "schedule_timesteps") {
    c.schedule_timesteps = parse_int(value, origin);
  } else if (key == "beta_lo") {
    c.beta_lo = parse_double(value, origin);
  } else if (key == "beta_hi") {
    c.beta_hi = parse_double(value, origin);
  } else if (key == "timestep_min") {
    c.timestep_min = parse_int(value, origin);
  } else if (key == "timestep_max") {
    c.timestep_max = parse_int(value, origin);
  } else if (key == "background_value") {
    c.background_value = parse_double(value, origin);
  } else if (key == "base_color_r") {
    c.base_color.x = parse_double(value, origin);
  } else if (key == "base_color_g") {
    c.base_color.y = parse_double(value, origin);
  } else if (key == "base_color_b") {
    c.base_color.z = parse_double(value, origin);
  } else if (key == "base_shaded") {
    c.base_shaded = parse_bool(value, origin);
  } else if (key == "base_texture") {
    c.base_texture = value;
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_int(value, origin);
  } else if (key == "failure_budget") {
    c.failure_budget = parse_int(value, origin);
  } else if (key == "export_16bit") {
    c.export_16bit = parse_bool(value, origin);
  } else {
    fail(origin, "unknown config key '" + key + "'");
  }
}

TrainConfig parse_config_text(const std::string& text,
                              const std::string& origin) {
  TrainConfig config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') {
      continue;
    }
    const size_t eq = stripped.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      fail(where, "expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      fail(where, "empty key");
    }
    apply_config_entry(config, key, value, where);
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_config(const TrainConfig& c) {
  auto check = [](bool ok, const char* what) {
    if (!ok) {
      throw std::runtime_error(std::string("invalid config: ") + what);
    }
  };
  check(c.warmup_iters >= 0, "warmup_iters must be >= 0");
  check(c.joint_iters >= 0, "joint_iters must be >= 0");
  check(c.texture_resolution >= 1, "texture_resolution must be >= 1");
  check(c.render_resolution >= 1, "render_resolution must be >= 1");
  check(c.view.elevation_min <= c.view.elevation_max,
        "elevation range is empty");
  check(c.view.azimuth_min <= c.view.azimuth_max, "azimuth range is empty");
  check(c.view.radius_min <= c.view.radius_max, "radius range is empty");
  check(c.view.radius_min > 0.0, "radius must be positive");
  check(c.view.fov_deg > 0.0 && c.view.fov_deg < 180.0,
        "fov_deg must be in (0, 180)");
  check(c.image_weight >= 0.0, "image_weight must be >= 0");
  check(c.mask_threshold > 0.0 && c.mask_threshold < 1.0,
        "mask_threshold must be in (0, 1)");
  check(c.learning_rate > 0.0, "learning_rate must be positive");
  check(c.loc_loss_weight_joint >= 0.0,
        "loc_loss_weight_joint must be >= 0");
  check(c.field_width >= 1, "field_width must be >= 1");
  check(c.num_frequencies >= 1, "num_frequencies must be >= 1");
  check(c.frequency_scale > 0.0, "frequency_scale must be positive");
  check(c.schedule_timesteps >= 1, "schedule_timesteps must be >= 1");
  check(c.beta_lo > 0.0 && c.beta_lo <= c.beta_hi && c.beta_hi < 1.0,
        "betas must satisfy 0 < lo <= hi < 1");
  check(c.timestep_min >= 1 && c.timestep_min <= c.timestep_max &&
            c.timestep_max <= c.schedule_timesteps,
        "timestep range must lie within [1, schedule_timesteps]");
  check(c.background_value >= 0.0 && c.background_value <= 1.0,
        "background_value must be in [0, 1]");
  for (double ch : {c.base_color.x, c.base_color.y, c.base_color.z}) {
    check(ch >= 0.0 && ch <= 1.0, "base color must be in [0, 1]");
  }
  check(c.checkpoint_every >= 0, "checkpoint_every must be >= 0");
  check(c.failure_budget >= 1, "failure_budget must be >= 1");
}

std::string canonical_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "azimuth_max = " << format_double(c.view.azimuth_max) << "\n";
  os << "azimuth_min = " << format_double(c.view.azimuth_min) << "\n";
  os << "backend = " << (c.backend == BackendKind::Toy ? "toy" : "external")
     << "\n";
  os << "background_value = " << format_double(c.background_value) << "\n";
  os << "base_color_b = " << format_double(c.base_color.z) << "\n";
  os << "base_color_g = " << format_double(c.base_color.y) << "\n";
  os << "base_color_r = " << format_double(c.base_color.x) << "\n";
  os << "base_shaded = " << (c.base_shaded ? "true" : "false") << "\n";
  os << "base_texture = " << c.base_texture << "\n";
  os << "beta_hi = " << format_double(c.beta_hi) << "\n";
  os << "beta_lo = " << format_double(c.beta_lo) << "\n";
  os << "checkpoint_every = " << c.checkpoint_every << "\n";
  os << "elevation_max = " << format_double(c.view.elevation_max) << "\n";
  os << "elevation_min = " << format_double(c.view.elevation_min) << "\n";
  os << "encoding_mode = "
     << (c.encoding_mode == EncodingMode::AxisAligned ? "axis" : "gaussian")
     << "\n";
  os << "export_16bit = " << (c.export_16bit ? "true" : "false") << "\n";
  os << "external_url = " << c.external_url << "\n";
  os << "failure_budget = " << c.failure_budget << "\n";
  os << "field_width = " << c.field_width << "\n";
  os << "fov_deg = " << format_double(c.view.fov_deg) << "\n";
  os << "frequency_scale = " << format_double(c.frequency_scale) << "\n";
  os << "image_weight = " << format_double(c.image_weight) << "\n";
  os << "joint_iters = " << c.joint_iters << "\n";
  os << "learning_rate = " << format_double(c.learning_rate) << "\n";
  os << "loc_loss_weight_joint = " << format_double(c.loc_loss_weight_joint)
     << "\n";
  os << "mask_threshold = " << format_double(c.mask_threshold) << "\n";
  os << "no_ca_mask = " << (c.no_ca_mask ? "true" : "false") << "\n";
  os << "no_loc_loss = " << (c.no_loc_loss ? "true" : "false") << "\n";
  os << "no_warmup = " << (c.no_warmup ? "true" : "false") << "\n";
  os << "num_frequencies = " << c.num_frequencies << "\n";
  os << "optimizer = adam\n";
  os << "prompt = " << c.prompt << "\n";
  os << "radius_max = " << format_double(c.view.radius_max) << "\n";
  os << "radius_min = " << format_double(c.view.radius_min) << "\n";
  os << "reference_image = " << c.reference_image << "\n";
  os << "render_resolution = " << c.render_resolution << "\n";
  os << "schedule_timesteps = " << c.schedule_timesteps << "\n";
  os << "seed = " << c.seed << "\n";
  os << "texture_resolution = " << c.texture_resolution << "\n";
  os << "timestep_max = " << c.timestep_max << "\n";
  os << "timestep_min = " << c.timestep_min << "\n";
  os << "warmup_iters = " << c.warmup_iters << "\n";
  os << "weight_kind = "
     << (c.weight_kind == WeightKind::Constant ? "constant"
                                               : "one_minus_alpha_bar")
     << "\n";
  return os.str();
}

std::string config_digest(const TrainConfig& c) {
  const uint64_t h = fnv1a64(canonical_config(c));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pixbrush

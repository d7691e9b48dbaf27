#include "pixbrush/external_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <stdexcept>

namespace pixbrush {

namespace {

using nlohmann::json;

json image_to_json(const Image& img) {
  json j;
  j["height"] = img.height;
  j["width"] = img.width;
  j["channels"] = img.channels;
  j["data"] = img.data;  // row-major H x W x C
  return j;
}

Image image_from_json(const json& j) {
  Image img(j.at("height").get<int>(), j.at("width").get<int>(),
            j.at("channels").get<int>());
  const auto& data = j.at("data");
  if (!data.is_array() || data.size() != img.data.size()) {
    throw std::runtime_error("backend image payload has the wrong size");
  }
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = data[i].get<double>();
  }
  return img;
}

std::string mask_bits(const Image& mask) {
  std::string bits(mask.data.size(), '0');
  for (size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i] >= 0.5) {
      bits[i] = '1';
    }
  }
  return bits;
}

json pyramid_to_json(const MaskPyramid& pyramid) {
  json j;
  j["threshold"] = pyramid.threshold;
  j["full"] = {{"height", pyramid.full.height},
               {"width", pyramid.full.width},
               {"bits", mask_bits(pyramid.full)}};
  json levels = json::object();
  for (const auto& [res, level] : pyramid.levels) {
    levels[std::to_string(res)] = mask_bits(level);
  }
  j["levels"] = levels;
  return j;
}

[[noreturn]] void request_failed(const httplib::Result& res,
                                 const std::string& what) {
  if (res) {
    throw std::runtime_error(what + ": HTTP " + std::to_string(res->status));
  }
  throw std::runtime_error(what + ": " + httplib::to_string(res.error()));
}

}  // namespace

ExternalBackend::ExternalBackend(const std::string& base_url) {
  const std::string prefix = "http://";
  if (base_url.rfind(prefix, 0) != 0) {
    throw std::invalid_argument(
        "external backend URL must start with http://");
  }
  std::string rest = base_url.substr(prefix.size());
  if (!rest.empty() && rest.back() == '/') {
    rest.pop_back();
  }
  const size_t colon = rest.find(':');
  if (colon == std::string::npos) {
    host_ = rest;
  } else {
    host_ = rest.substr(0, colon);
    try {
      port_ = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad port in external backend URL");
    }
  }
  if (host_.empty()) {
    throw std::invalid_argument("external backend URL has no host");
  }

  httplib::Client client(host_, port_);
  client.set_read_timeout(30, 0);
  auto res = client.Get("/v1/feature_layers");
  if (!res || res->status != 200) {
    request_failed(res, "feature-layer query failed");
  }
  try {
    const json j = json::parse(res->body);
    for (const auto& v : j.at("resolutions")) {
      const int r = v.get<int>();
      if (r <= 0) {
        throw std::runtime_error("non-positive resolution");
      }
      resolutions_.push_back(r);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("bad feature-layer response: ") +
                             e.what());
  }
  if (resolutions_.empty()) {
    throw std::runtime_error("backend declares no feature layers");
  }
}

std::vector<int> ExternalBackend::feature_layer_resolutions() const {
  return resolutions_;
}

Image ExternalBackend::predict_noise(const Image& z_t, int t,
                                     const Condition& cond) {
  condition_kind(cond);  // validate before shipping

  json req;
  req["timestep"] = t;
  req["z"] = image_to_json(z_t);
  json c;
  c["prompt"] = cond.prompt;
  c["image_weight"] = cond.image_weight;
  if (cond.reference_image.has_value()) {
    c["reference_image"] = image_to_json(*cond.reference_image);
  }
  if (cond.mask.has_value()) {
    c["mask_pyramid"] = pyramid_to_json(*cond.mask);
  }
  req["condition"] = c;

  httplib::Client client(host_, port_);
  // Real denoisers can be slow; be generous.
  client.set_read_timeout(300, 0);
  auto res = client.Post("/v1/predict_noise", req.dump(), "application/json");
  if (!res || res->status != 200) {
    request_failed(res, "noise prediction failed");
  }
  Image eps_hat;
  try {
    eps_hat = image_from_json(json::parse(res->body).at("epsilon"));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("bad noise prediction response: ") +
                             e.what());
  }
  if (eps_hat.height != z_t.height || eps_hat.width != z_t.width ||
      eps_hat.channels != z_t.channels) {
    throw std::runtime_error("backend returned a mismatched noise shape");
  }
  return eps_hat;
}

}  // namespace pixbrush

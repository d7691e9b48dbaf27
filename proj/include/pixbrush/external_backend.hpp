#pragma once

#include <string>
#include <vector>

#include "pixbrush/guidance.hpp"

namespace pixbrush {

// HTTP client for an external noise-prediction service speaking the JSON
// protocol in docs/adapter_protocol.md:
//   GET  /v1/feature_layers  -> {"resolutions": [..]}
//   POST /v1/predict_noise   -> {"epsilon": {image object}}
// Images travel as row-major H x W x C float arrays; pyramid levels as
// row-major 0/1 bitstrings. The feature-layer list is fetched once at
// construction, which also validates connectivity.
class ExternalBackend : public GuidanceBackend {
 public:
  // base_url: "http://host:port" (the only supported scheme).
  explicit ExternalBackend(const std::string& base_url);

  Image predict_noise(const Image& z_t, int t, const Condition& cond) override;
  std::vector<int> feature_layer_resolutions() const override;

 private:
  std::string host_;
  int port_ = 80;
  std::vector<int> resolutions_;
};

}  // namespace pixbrush

#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace pixbrush {

// Row-major H x W x C raster of doubles. Channel values are nominally in
// [0,1] for displayable images; gradient and feature images may hold any
// finite value.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Bilinear resample to (h, w). Samples at pixel centers with edge clamp;
// identity when the shape already matches.
Image resize_bilinear(const Image& src, int h, int w);

// Channel conversion between grayscale and RGB: 1 -> 3 replicates the
// channel, 3 -> 1 averages. Identity when the count already matches;
// other conversions are rejected.
Image ensure_channels(const Image& src, int channels);

bool all_finite(const Image& img);

}  // namespace pixbrush

#include "pixbrush/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pixbrush {

Image resize_bilinear(const Image& src, int h, int w) {
  if (src.height == h && src.width == w) return src;
  Image out(h, w, src.channels);
  for (int y = 0; y < h; ++y) {
    double sy = (y + 0.5) * src.height / h - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    double fy = sy - y0;
    int y1 = std::min(y0 + 1, src.height - 1);
    y0 = std::clamp(y0, 0, src.height - 1);
    for (int x = 0; x < w; ++x) {
      double sx = (x + 0.5) * src.width / w - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      double fx = sx - x0;
      int x1 = std::min(x0 + 1, src.width - 1);
      x0 = std::clamp(x0, 0, src.width - 1);
      for (int c = 0; c < src.channels; ++c) {
        double v = (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
                   fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

Image ensure_channels(const Image& src, int channels) {
  if (src.channels == channels) return src;
  if (src.channels == 1 && channels == 3) {
    Image out(src.height, src.width, 3);
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y, x, 0);
      }
    }
    return out;
  }
  if (src.channels == 3 && channels == 1) {
    Image out(src.height, src.width, 1);
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        out.at(y, x, 0) =
            (src.at(y, x, 0) + src.at(y, x, 1) + src.at(y, x, 2)) / 3.0;
      }
    }
    return out;
  }
  throw std::invalid_argument("unsupported channel conversion");
}

bool all_finite(const Image& img) {
  return std::all_of(img.data.begin(), img.data.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace pixbrush

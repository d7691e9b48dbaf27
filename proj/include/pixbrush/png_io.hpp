#pragma once

#include <string>

#include "pixbrush/image.hpp"

namespace pixbrush {

// Reads an 8- or 16-bit PNG into [0,1] doubles. Grayscale maps to 1
// channel, RGB/RGBA to 3 (alpha is dropped). Throws std::runtime_error on
// missing or malformed files.
Image read_png(const std::string& path);

// Writes a 1- or 3-channel image as grayscale/RGB PNG. Values are clamped
// to [0,1] and quantized to the requested bit depth (8 or 16). The file is
// written to a temporary path and renamed into place.
void write_png(const std::string& path, const Image& img, int bit_depth = 8);

}  // namespace pixbrush

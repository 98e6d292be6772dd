#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metalgan/tensor.hpp"

namespace metalgan {

/// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
};

RgbImage read_png(const std::string& path);
void write_png(const std::string& path, const RgbImage& image);

/// uint8 -> [-1, 1] as v / 127.5 - 1, CHW layout (3, h, w).
Tensor<float> to_tensor(const RgbImage& image);

/// CHW [-1, 1] -> uint8 with rounding and clamping.
RgbImage from_tensor(const Tensor<float>& chw);

/// Quantizes a CHW image to the 8-bit grid, i.e. the values a PNG round trip
/// would produce.
Tensor<float> quantize(const Tensor<float>& chw);

}  // namespace metalgan

#include "metalgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace metalgan {

RgbImage read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw IoError("cannot read image '" + path + "': " + img.message);
  img.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode image '" + path + "': " + msg);
  }
  return out;
}

void write_png(const std::string& path, const RgbImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    throw IoError("cannot write image '" + path + "': " + img.message);
}

Tensor<float> to_tensor(const RgbImage& image) {
  Tensor<float> t({3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) t[c * plane + p] = static_cast<float>(image.pixels[p * 3 + c]) / 127.5f - 1.0f;
  return t;
}

RgbImage from_tensor(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ConfigError("from_tensor expects (3, h, w), got " + shape_string(chw.shape()));
  RgbImage out(chw.dim(2), chw.dim(1));
  const std::size_t plane = static_cast<std::size_t>(out.width) * out.height;
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp((chw[c * plane + p] + 1.0f) * 127.5f, 0.0f, 255.0f);
      out.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
    }
  return out;
}

Tensor<float> quantize(const Tensor<float>& chw) { return to_tensor(from_tensor(chw)); }

}  // namespace metalgan

#pragma once

// Minimal raster drawing for report charts.

#include <array>
#include <string>
#include <vector>

#include "metalgan/image_io.hpp"

namespace metalgan::plot {

using Color = std::array<std::uint8_t, 3>;

inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kGray{170, 170, 170};
inline constexpr Color kBlue{40, 90, 200};
inline constexpr Color kRed{200, 50, 40};

class Canvas {
 public:
  Canvas(int width, int height, Color background = kWhite);

  void set(int x, int y, Color c);
  void fill_rect(int x0, int y0, int x1, int y1, Color c);  // inclusive corners
  void line(int x0, int y0, int x1, int y1, Color c);
  /// 3x5 pixel glyphs scaled by `scale`; characters without a glyph are
  /// drawn as blanks. Lowercase is folded to uppercase.
  void text(int x, int y, const std::string& s, Color c, int scale = 1);
  /// Nearest-neighbour blit of a CHW [-1, 1] image.
  void image(int x, int y, const Tensor<float>& chw, int scale = 1);

  static int text_width(const std::string& s, int scale = 1) { return static_cast<int>(s.size()) * 4 * scale; }

  const RgbImage& raster() const { return img_; }
  void save(const std::string& path) const { write_png(path, img_); }

 private:
  RgbImage img_;
};

struct Bar {
  std::string label;
  double value = 0;
};

/// Vertical bars with value labels, y axis from zero to the largest value.
Canvas bar_chart(const std::string& title, const std::vector<Bar>& bars);

/// Polyline over [0, 1]^2 with x = recall, y = precision.
Canvas curve_plot(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace metalgan::plot

#include "metalgan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace metalgan::plot {
namespace {

// Rows top to bottom, 3 bits each (MSB = left column).
struct Glyph {
  char ch;
  std::array<std::uint8_t, 5> rows;
};

constexpr Glyph kGlyphs[] = {
    {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
    {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
    {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'A', {2, 5, 7, 5, 5}}, {'B', {6, 5, 6, 5, 6}},
    {'C', {7, 4, 4, 4, 7}}, {'D', {6, 5, 5, 5, 6}}, {'E', {7, 4, 6, 4, 7}}, {'F', {7, 4, 6, 4, 4}},
    {'G', {7, 4, 5, 5, 7}}, {'H', {5, 5, 7, 5, 5}}, {'I', {7, 2, 2, 2, 7}}, {'J', {1, 1, 1, 5, 7}},
    {'K', {5, 5, 6, 5, 5}}, {'L', {4, 4, 4, 4, 7}}, {'M', {5, 7, 7, 5, 5}}, {'N', {6, 5, 5, 5, 5}},
    {'O', {7, 5, 5, 5, 7}}, {'P', {7, 5, 7, 4, 4}}, {'Q', {7, 5, 5, 7, 1}}, {'R', {7, 5, 6, 5, 5}},
    {'S', {7, 4, 7, 1, 7}}, {'T', {7, 2, 2, 2, 2}}, {'U', {5, 5, 5, 5, 7}}, {'V', {5, 5, 5, 5, 2}},
    {'W', {5, 5, 7, 7, 5}}, {'X', {5, 5, 2, 5, 5}}, {'Y', {5, 5, 2, 2, 2}}, {'Z', {7, 1, 2, 4, 7}},
    {'.', {0, 0, 0, 0, 2}}, {'-', {0, 0, 7, 0, 0}}, {'_', {0, 0, 0, 0, 7}}, {':', {0, 2, 0, 2, 0}},
    {'=', {0, 7, 0, 7, 0}}, {'(', {1, 2, 2, 2, 1}}, {')', {4, 2, 2, 2, 4}}, {'/', {1, 1, 2, 4, 4}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

Canvas::Canvas(int width, int height, Color background) : img_(width, height) {
  fill_rect(0, 0, width - 1, height - 1, background);
}

void Canvas::set(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
  std::copy(c.begin(), c.end(), img_.at(x, y));
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Color c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) set(x, y, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Color c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::text(int x, int y, const std::string& s, Color c, int scale) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Glyph* g = find_glyph(s[i]);
    if (!g) continue;
    const int ox = x + static_cast<int>(i) * 4 * scale;
    for (int r = 0; r < 5; ++r)
      for (int col = 0; col < 3; ++col)
        if (g->rows[r] & (4 >> col))
          fill_rect(ox + col * scale, y + r * scale, ox + (col + 1) * scale - 1, y + (r + 1) * scale - 1, c);
  }
}

void Canvas::image(int x, int y, const Tensor<float>& chw, int scale) {
  const RgbImage src = from_tensor(chw);
  for (int r = 0; r < src.height * scale; ++r)
    for (int col = 0; col < src.width * scale; ++col) {
      const std::uint8_t* p = src.at(col / scale, r / scale);
      set(x + col, y + r, {p[0], p[1], p[2]});
    }
}

Canvas bar_chart(const std::string& title, const std::vector<Bar>& bars) {
  constexpr int kBarWidth = 60, kGap = 20, kPlotHeight = 200, kMargin = 30;
  const int n = static_cast<int>(bars.size());
  int width = kMargin * 2 + std::max(1, n) * (kBarWidth + kGap);
  for (const auto& b : bars) width = std::max(width, kMargin * 2 + Canvas::text_width(b.label) * n);
  width = std::max(width, Canvas::text_width(title, 2) + 2 * kMargin);
  const int height = kPlotHeight + 3 * kMargin + 20;
  Canvas cv(width, height);
  cv.text(kMargin, 8, title, kBlack, 2);
  const int base = kMargin + 20 + kPlotHeight;
  double top = 0;
  for (const auto& b : bars) top = std::max(top, std::isfinite(b.value) ? b.value : 0.0);
  if (top <= 0) top = 1;
  cv.line(kMargin - 4, base, width - kMargin, base, kBlack);
  cv.line(kMargin - 4, base, kMargin - 4, base - kPlotHeight, kBlack);
  for (int i = 0; i < n; ++i) {
    const double v = std::isfinite(bars[i].value) ? std::max(0.0, bars[i].value) : 0.0;
    const int h = static_cast<int>(std::lround(v / top * (kPlotHeight - 12)));
    const int x0 = kMargin + i * (kBarWidth + kGap);
    if (h > 0) cv.fill_rect(x0, base - h, x0 + kBarWidth - 1, base - 1, kBlue);
    cv.text(x0, base - h - 8, format_value(bars[i].value), kBlack);
    cv.text(x0, base + 6 + (i % 2) * 8, bars[i].label, kBlack);
  }
  return cv;
}

Canvas curve_plot(const std::string& title, const std::vector<double>& xs, const std::vector<double>& ys) {
  constexpr int kSize = 240, kMargin = 30;
  Canvas cv(kSize + 2 * kMargin, kSize + 2 * kMargin + 20);
  cv.text(kMargin, 8, title, kBlack, 2);
  const int x0 = kMargin, y0 = kMargin + 20 + kSize;
  cv.line(x0, y0, x0 + kSize, y0, kBlack);
  cv.line(x0, y0, x0, y0 - kSize, kBlack);
  cv.line(x0, y0, x0 + kSize, y0 - kSize, kGray);
  cv.text(x0 + kSize - Canvas::text_width("recall"), y0 + 6, "recall", kBlack);
  cv.text(x0 + 4, y0 - kSize - 8, "precision", kBlack);
  auto px = [&](double v) { return x0 + static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * kSize)); };
  auto py = [&](double v) { return y0 - static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * kSize)); };
  for (std::size_t i = 1; i < std::min(xs.size(), ys.size()); ++i)
    cv.line(px(xs[i - 1]), py(ys[i - 1]), px(xs[i]), py(ys[i]), kRed);
  return cv;
}

}  // namespace metalgan::plot

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace smoothstyle::viz {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Fixed palette, one entry per domain (wraps after 10).
Color domain_color(std::int64_t index);

// Plain RGB raster with just enough drawing for the emitted figures.
class Canvas {
 public:
  Canvas(std::int64_t width, std::int64_t height, Color background = {255, 255, 255});

  std::int64_t width() const { return width_; }
  std::int64_t height() const { return height_; }

  void set(std::int64_t x, std::int64_t y, Color c);
  void line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Color c);
  void rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Color c);
  void fill_rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Color c);
  void disc(std::int64_t cx, std::int64_t cy, std::int64_t radius, Color c);
  // 5x7 bitmap font; digits, minus, dot, and a small set of letters.
  void text(std::int64_t x, std::int64_t y, const std::string& s, Color c, std::int64_t scale = 1);

  void save_png(const std::filesystem::path& path) const;

  // Pastes a [-1, 1] float image ([C,H,W], C in {1,3}) at (x, y).
  void paste_image(const torch::Tensor& image, std::int64_t x, std::int64_t y);

 private:
  std::int64_t width_, height_;
  std::vector<std::uint8_t> pixels_;  // row-major RGB
};

struct BoxStats {
  std::string label;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Classic box-and-whisker chart, one box per group.
Canvas boxplot(const std::vector<BoxStats>& groups, const std::string& title);

struct ScatterPoint {
  double x = 0, y = 0;
  std::int64_t cls = 0;
};

// 2-D scatter colored by class.
Canvas scatter(const std::vector<ScatterPoint>& points, const std::string& title);

// Horizontal strip of frames ([N,C,H,W] in [-1,1]), left to right.
Canvas image_row(const torch::Tensor& frames, std::int64_t upscale = 2);

}  // namespace smoothstyle::viz

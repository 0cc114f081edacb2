#include "smoothstyle/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "smoothstyle/errors.hpp"

namespace smoothstyle::viz {

namespace {

// 5x7 bitmap glyphs, one row per byte (low 5 bits used).
const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> table = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
      {'=', {0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'/', {0x01, 0x02, 0x04, 0x04, 0x08, 0x10, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
  };
  return table;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

Color domain_color(std::int64_t index) {
  static const std::array<Color, 10> palette = {{{31, 119, 180},
                                                 {255, 127, 14},
                                                 {44, 160, 44},
                                                 {214, 39, 40},
                                                 {148, 103, 189},
                                                 {140, 86, 75},
                                                 {227, 119, 194},
                                                 {127, 127, 127},
                                                 {188, 189, 34},
                                                 {23, 190, 207}}};
  return palette[static_cast<std::size_t>(((index % 10) + 10) % 10)];
}

Canvas::Canvas(std::int64_t width, std::int64_t height, Color background)
    : width_(width), height_(height), pixels_(std::size_t(width * height * 3)) {
  for (std::int64_t i = 0; i < width * height; ++i) {
    pixels_[i * 3 + 0] = background.r;
    pixels_[i * 3 + 1] = background.g;
    pixels_[i * 3 + 2] = background.b;
  }
}

void Canvas::set(std::int64_t x, std::int64_t y, Color c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const auto i = std::size_t((y * width_ + x) * 3);
  pixels_[i] = c.r;
  pixels_[i + 1] = c.g;
  pixels_[i + 2] = c.b;
}

void Canvas::line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Color c) {
  // Bresenham
  const auto dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const auto sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  auto err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const auto e2 = 2 * err;
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

void Canvas::rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, Color c) {
  line(x0, y0, x1, y0, c);
  line(x1, y0, x1, y1, c);
  line(x1, y1, x0, y1, c);
  line(x0, y1, x0, y0, c);
}

void Canvas::fill_rect(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1,
                       Color c) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (auto y = y0; y <= y1; ++y) {
    for (auto x = x0; x <= x1; ++x) set(x, y, c);
  }
}

void Canvas::disc(std::int64_t cx, std::int64_t cy, std::int64_t radius, Color c) {
  for (auto y = cy - radius; y <= cy + radius; ++y) {
    for (auto x = cx - radius; x <= cx + radius; ++x) {
      const auto dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) set(x, y, c);
    }
  }
}

void Canvas::text(std::int64_t x, std::int64_t y, const std::string& s, Color c,
                  std::int64_t scale) {
  auto cursor = x;
  for (char raw : s) {
    const char ch = raw >= 'a' && raw <= 'z' ? char(raw - 'a' + 'A') : raw;
    auto it = glyphs().find(ch);
    if (it != glyphs().end()) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (it->second[row] & (1 << (4 - col))) {
            fill_rect(cursor + col * scale, y + row * scale, cursor + col * scale + scale - 1,
                      y + row * scale + scale - 1, c);
          }
        }
      }
    }
    cursor += 6 * scale;
  }
}

void Canvas::save_png(const std::filesystem::path& path) const {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  cv::Mat rgb(int(height_), int(width_), CV_8UC3, const_cast<std::uint8_t*>(pixels_.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error("failed to write " + path.string());
  }
}

void Canvas::paste_image(const torch::Tensor& image, std::int64_t x0, std::int64_t y0) {
  TORCH_CHECK(image.dim() == 3, "paste_image expects [C,H,W]");
  auto img = image.detach().to(torch::kFloat32);
  const auto c = img.size(0), h = img.size(1), w = img.size(2);
  auto acc = img.accessor<float, 3>();
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      auto to_u8 = [&](std::int64_t ch) {
        const double v = (acc[ch][y][x] + 1.0) * 127.5;
        return std::uint8_t(std::clamp(v, 0.0, 255.0));
      };
      Color color;
      if (c == 1) {
        const auto v = to_u8(0);
        color = {v, v, v};
      } else {
        color = {to_u8(0), to_u8(1), to_u8(2)};
      }
      set(x0 + x, y0 + y, color);
    }
  }
}

Canvas boxplot(const std::vector<BoxStats>& groups, const std::string& title) {
  if (groups.empty()) throw ContractViolation("boxplot needs at least one group");
  const std::int64_t margin = 50, plot_w = std::max<std::int64_t>(90 * std::int64_t(groups.size()), 240),
                     plot_h = 260;
  Canvas canvas(plot_w + 2 * margin, plot_h + 2 * margin);
  const Color black{0, 0, 0};

  double lo = groups[0].min, hi = groups[0].max;
  for (const auto& g : groups) {
    lo = std::min(lo, g.min);
    hi = std::max(hi, g.max);
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto ypix = [&](double v) {
    return margin + std::int64_t(std::lround((hi - v) / (hi - lo) * plot_h));
  };

  canvas.text(margin, 14, title, black);
  canvas.line(margin, margin, margin, margin + plot_h, black);
  for (double frac : {0.0, 0.5, 1.0}) {
    const double v = lo + frac * (hi - lo);
    canvas.line(margin - 3, ypix(v), margin, ypix(v), black);
    canvas.text(4, ypix(v) - 3, format_value(v), black);
  }

  const auto slot = plot_w / std::int64_t(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& g = groups[k];
    const auto cx = margin + slot * std::int64_t(k) + slot / 2;
    const auto half = std::max<std::int64_t>(slot / 4, 12);
    const auto color = domain_color(std::int64_t(k));
    canvas.line(cx, ypix(g.min), cx, ypix(g.max), black);
    canvas.line(cx - half / 2, ypix(g.min), cx + half / 2, ypix(g.min), black);
    canvas.line(cx - half / 2, ypix(g.max), cx + half / 2, ypix(g.max), black);
    canvas.fill_rect(cx - half, ypix(g.q3), cx + half, ypix(g.q1),
                     Color{std::uint8_t((color.r + 510) / 3), std::uint8_t((color.g + 510) / 3),
                           std::uint8_t((color.b + 510) / 3)});
    canvas.rect(cx - half, ypix(g.q3), cx + half, ypix(g.q1), black);
    canvas.line(cx - half, ypix(g.median), cx + half, ypix(g.median), color);
    canvas.text(cx - 3 * std::int64_t(g.label.size()), margin + plot_h + 10, g.label, black);
  }
  return canvas;
}

Canvas scatter(const std::vector<ScatterPoint>& points, const std::string& title) {
  if (points.empty()) throw ContractViolation("scatter needs at least one point");
  const std::int64_t margin = 50, plot = 360;
  Canvas canvas(plot + 2 * margin, plot + 2 * margin);
  const Color black{0, 0, 0};

  double xlo = points[0].x, xhi = points[0].x, ylo = points[0].y, yhi = points[0].y;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  if (xhi <= xlo) xhi = xlo + 1.0;
  if (yhi <= ylo) yhi = ylo + 1.0;
  const double xpad = 0.05 * (xhi - xlo), ypad = 0.05 * (yhi - ylo);
  xlo -= xpad;
  xhi += xpad;
  ylo -= ypad;
  yhi += ypad;

  canvas.text(margin, 14, title, black);
  canvas.rect(margin, margin, margin + plot, margin + plot, black);
  canvas.text(margin, margin + plot + 12, format_value(xlo), black);
  canvas.text(margin + plot - 30, margin + plot + 12, format_value(xhi), black);
  canvas.text(2, margin + plot - 3, format_value(ylo), black);
  canvas.text(2, margin - 3, format_value(yhi), black);

  for (const auto& p : points) {
    const auto px = margin + std::int64_t(std::lround((p.x - xlo) / (xhi - xlo) * plot));
    const auto py = margin + std::int64_t(std::lround((yhi - p.y) / (yhi - ylo) * plot));
    canvas.disc(px, py, 2, domain_color(p.cls));
  }
  return canvas;
}

Canvas image_row(const torch::Tensor& frames, std::int64_t upscale) {
  TORCH_CHECK(frames.dim() == 4, "image_row expects [N,C,H,W]");
  const auto n = frames.size(0), h = frames.size(2), w = frames.size(3);
  const std::int64_t gap = 2;
  Canvas canvas(n * (w * upscale + gap) + gap, h * upscale + 2 * gap, Color{40, 40, 40});
  for (std::int64_t i = 0; i < n; ++i) {
    auto big = torch::nn::functional::interpolate(
                   frames[i].unsqueeze(0).to(torch::kFloat32),
                   torch::nn::functional::InterpolateFuncOptions()
                       .scale_factor(std::vector<double>{double(upscale), double(upscale)})
                       .mode(torch::kNearest))
                   .squeeze(0);
    canvas.paste_image(big, gap + i * (w * upscale + gap), gap);
  }
  return canvas;
}

}  // namespace smoothstyle::viz

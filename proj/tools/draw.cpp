#include "draw.hpp"

#include <algorithm>
#include <cmath>

namespace rct::cli {

namespace {

// 3x5 digit glyphs, one row per 3-bit group, top row in the high bits.
constexpr std::array<std::uint16_t, 10> kDigits = {
    0b111'101'101'101'111, 0b010'110'010'010'111, 0b111'001'111'100'111,
    0b111'001'111'001'111, 0b101'101'111'001'001, 0b111'100'111'001'111,
    0b111'100'111'101'111, 0b111'001'010'010'010, 0b111'101'111'101'111,
    0b111'101'111'001'111,
};
constexpr int kGlyphW = 3;
constexpr int kGlyphH = 5;

void put(RgbImage& img, int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * img.width + x) * 3;
  img.data[i] = c[0];
  img.data[i + 1] = c[1];
  img.data[i + 2] = c[2];
}

void fill(RgbImage& img, int x0, int y0, int x1, int y1, Color c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width);
  y1 = std::min(y1, img.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) put(img, x, y, c);
  }
}

}  // namespace

Color track_color(int id) {
  // Golden-ratio hue walk, full value, high saturation.
  const double hue = std::fmod(0.13 + id * 0.6180339887498949, 1.0) * 6.0;
  const int sector = static_cast<int>(hue) % 6;
  const double frac = hue - std::floor(hue);
  const double s = 0.85;
  const double p = 1.0 - s, q = 1.0 - s * frac, t = 1.0 - s * (1.0 - frac);
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = 1, g = t, b = p; break;
    case 1: r = q, g = 1, b = p; break;
    case 2: r = p, g = 1, b = t; break;
    case 3: r = p, g = q, b = 1; break;
    case 4: r = t, g = p, b = 1; break;
    default: r = 1, g = p, b = q; break;
  }
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

RgbImage to_rgb(const GrayFrame& frame) {
  RgbImage img(frame.width, frame.height);
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    const auto v =
        static_cast<std::uint8_t>(std::lround(std::clamp(frame.pixels[i], 0.0f, 1.0f) * 255.0f));
    img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = v;
  }
  return img;
}

void draw_box(RgbImage& img, const Box& box, Color color, int thickness) {
  const int x0 = static_cast<int>(std::lround(box.x));
  const int y0 = static_cast<int>(std::lround(box.y));
  const int x1 = static_cast<int>(std::lround(box.x + box.w));
  const int y1 = static_cast<int>(std::lround(box.y + box.h));
  fill(img, x0, y0, x1, y0 + thickness, color);
  fill(img, x0, y1 - thickness, x1, y1, color);
  fill(img, x0, y0, x0 + thickness, y1, color);
  fill(img, x1 - thickness, y0, x1, y1, color);
}

void draw_label(RgbImage& img, int x, int y, std::string_view text, Color background, int scale) {
  int glyphs = 0;
  for (char ch : text) glyphs += ch >= '0' && ch <= '9';
  if (glyphs == 0) return;
  const int pad = scale;
  const int w = glyphs * (kGlyphW + 1) * scale - scale + 2 * pad;
  const int h = kGlyphH * scale + 2 * pad;
  fill(img, x, y, x + w, y + h, background);
  int cx = x + pad;
  for (char ch : text) {
    if (ch < '0' || ch > '9') continue;
    const std::uint16_t bits = kDigits[ch - '0'];
    for (int row = 0; row < kGlyphH; ++row) {
      for (int col = 0; col < kGlyphW; ++col) {
        if (!(bits >> ((kGlyphH - 1 - row) * kGlyphW + (kGlyphW - 1 - col)) & 1)) continue;
        fill(img, cx + col * scale, y + pad + row * scale, cx + (col + 1) * scale,
             y + pad + (row + 1) * scale, {255, 255, 255});
      }
    }
    cx += (kGlyphW + 1) * scale;
  }
}

}  // namespace rct::cli

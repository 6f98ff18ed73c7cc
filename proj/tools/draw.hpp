#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "rct/geometry.hpp"
#include "rct/image.hpp"

namespace rct::cli {

using Color = std::array<std::uint8_t, 3>;

/// Stable colour for a track id; nearby ids get well-separated hues.
Color track_color(int id);

RgbImage to_rgb(const GrayFrame& frame);

/// Rectangle outline, clipped to the image.
void draw_box(RgbImage& img, const Box& box, Color color, int thickness = 2);

/// Digits only (other characters are skipped), 3x5 glyphs scaled by `scale`,
/// drawn on a filled background of `background` with the text in white.
void draw_label(RgbImage& img, int x, int y, std::string_view text, Color background,
                int scale = 2);

}  // namespace rct::cli

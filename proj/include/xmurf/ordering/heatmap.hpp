#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "../core/dataset.hpp"

namespace xmurf::ordering {

using Rgb = std::array<std::uint8_t, 3>;

namespace detail {
// 32 evenly spaced viridis samples, dark blue to yellow.
inline constexpr std::array<Rgb, 32> kViridisAnchors = {{
    {68, 1, 84},     {70, 12, 95},    {71, 24, 106},   {72, 34, 115},   {70, 45, 124},
    {68, 55, 129},   {65, 65, 134},   {61, 74, 137},   {57, 84, 139},   {53, 92, 140},
    {49, 100, 141},  {46, 108, 142},  {42, 117, 142},  {39, 124, 142},  {36, 132, 141},
    {34, 139, 141},  {31, 148, 139},  {30, 155, 137},  {31, 163, 134},  {36, 170, 130},
    {46, 178, 124},  {57, 185, 118},  {71, 192, 110},  {87, 198, 101},  {107, 205, 89},
    {126, 210, 78},  {146, 215, 65},  {167, 219, 51},  {191, 223, 36},  {212, 225, 26},
    {233, 228, 25},  {253, 231, 36},
}};
}  // namespace detail

/// 256-entry colormap interpolated from the anchors.
inline const std::array<Rgb, 256>& viridis_table() {
  static const std::array<Rgb, 256> table = [] {
    std::array<Rgb, 256> t{};
    constexpr double last = detail::kViridisAnchors.size() - 1;
    for (std::size_t k = 0; k < 256; ++k) {
      const double pos = static_cast<double>(k) / 255.0 * last;
      const auto lo = std::min(static_cast<std::size_t>(pos), detail::kViridisAnchors.size() - 2);
      const double f = pos - static_cast<double>(lo);
      for (std::size_t c = 0; c < 3; ++c) {
        const double a = detail::kViridisAnchors[lo][c];
        const double b = detail::kViridisAnchors[lo + 1][c];
        t[k][c] = static_cast<std::uint8_t>(std::lround(a + f * (b - a)));
      }
    }
    return t;
  }();
  return table;
}

/// Colour of a value in [0, 1]: 0 is the first table entry, 1 the last.
inline Rgb colormap(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return viridis_table()[static_cast<std::size_t>(std::lround(c * 255.0))];
}

/// Binary PPM (P6) bytes, one pixel per entry, row i is image row i.
inline std::string heatmap_ppm(const ProximityMatrix& p) {
  const std::size_t m = p.size();
  std::string out = "P6\n" + std::to_string(m) + " " + std::to_string(m) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const auto rgb = colormap(p(i, j));
      std::copy(rgb.begin(), rgb.end(), out.begin() + static_cast<std::ptrdiff_t>(header + 3 * (i * m + j)));
    }
  return out;
}

inline void render_heatmap(const ProximityMatrix& p, const std::string& path) {
  validate(p);
  xmurf::detail::write_file(path, heatmap_ppm(p));
}

}  // namespace xmurf::ordering

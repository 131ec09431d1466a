#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/ica.hpp"
#include "icascope/montage.hpp"
#include "icascope/palette.hpp"

namespace icascope {

// Electrode positions projected to the unit head disk (nose up, +y), plus a
// precomputed per-pixel interpolation table for the fixed 134x136 raster.
// Electrode geometry never changes between renders, so the expensive part is
// paid once per montage.
struct ScalpLayout {
  static constexpr int kRows = 134;
  static constexpr int kCols = 136;
  static constexpr double kHeadRadiusFraction = 0.85;  // polar pi/2 maps here

  std::vector<std::string> channels;
  std::vector<Eigen::Vector2d> positions;

  std::vector<std::uint8_t> mask;         // kRows*kCols, 1 = inside head disk
  std::vector<std::int32_t> pixel_index;  // raster -> ordinal of in-mask pixel, -1 outside
  std::vector<float> pixel_weights;       // n_mask_pixels * n_channels, rows sum to 1
  std::size_t n_mask_pixels = 0;
};

namespace detail {

inline void build_pixel_cache(ScalpLayout& layout) {
  const int rows = ScalpLayout::kRows, cols = ScalpLayout::kCols;
  const double cx = (cols - 1) / 2.0;
  const double cy = (rows - 1) / 2.0;
  const double radius_px = std::min(cx, cy);
  const std::size_t n_ch = layout.channels.size();
  layout.mask.assign(static_cast<std::size_t>(rows) * cols, 0);
  layout.pixel_index.assign(static_cast<std::size_t>(rows) * cols, -1);
  layout.pixel_weights.clear();
  std::vector<double> inv(n_ch);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x = (c - cx) / radius_px;
      const double y = (cy - r) / radius_px;
      if (x * x + y * y > 1.0) continue;
      const std::size_t flat = static_cast<std::size_t>(r) * cols + c;
      layout.mask[flat] = 1;
      layout.pixel_index[flat] = static_cast<std::int32_t>(layout.n_mask_pixels++);
      // inverse-distance weighting, power 2, over all electrodes
      double total = 0.0;
      std::ptrdiff_t exact = -1;
      for (std::size_t i = 0; i < n_ch; ++i) {
        const double dx = x - layout.positions[i].x();
        const double dy = y - layout.positions[i].y();
        const double d2 = dx * dx + dy * dy;
        if (d2 < 1e-12) {
          exact = static_cast<std::ptrdiff_t>(i);
          break;
        }
        inv[i] = 1.0 / d2;
        total += inv[i];
      }
      for (std::size_t i = 0; i < n_ch; ++i) {
        double w = exact >= 0 ? (static_cast<std::ptrdiff_t>(i) == exact ? 1.0 : 0.0)
                              : inv[i] / total;
        layout.pixel_weights.push_back(static_cast<float>(w));
      }
    }
  }
}

}  // namespace detail

// Azimuthal equidistant projection of montage coordinates: 2D radius is
// proportional to the polar angle from the vertex (pi/2 -> 0.85 of the head
// disk) and the azimuth is preserved, nose up.
inline ScalpLayout project_electrodes(const Montage& montage,
                                      const std::vector<std::string>& channels) {
  ScalpLayout layout;
  layout.channels = channels;
  layout.positions.reserve(channels.size());
  const double half_pi = 1.5707963267948966;
  for (const auto& name : channels) {
    const Eigen::Vector3d& p = montage.position(name);  // MontageError if unknown
    const double polar = std::acos(std::clamp(p.z(), -1.0, 1.0));
    const double r2 = ScalpLayout::kHeadRadiusFraction * polar / half_pi;
    if (r2 > 1.0)
      throw MontageError("electrode " + name + " projects outside the head disk");
    const double azimuth = std::atan2(p.y(), p.x());
    layout.positions.emplace_back(-r2 * std::sin(azimuth), r2 * std::cos(azimuth));
  }
  detail::build_pixel_cache(layout);
  return layout;
}

// Fixed-size color topoplot plus the scalar field it was quantized from.
struct Topoplot {
  int rows = ScalpLayout::kRows;
  int cols = ScalpLayout::kCols;
  std::vector<std::uint8_t> rgb;   // rows*cols*3, white outside the head disk
  std::vector<float> field;        // rows*cols, clamped to [-1,1], 0 outside
  std::vector<std::uint8_t> mask;  // rows*cols
};

inline Topoplot render_topoplot(const ComponentWeights& w, const ScalpLayout& layout) {
  const std::size_t n_ch = layout.channels.size();
  if (static_cast<std::size_t>(w.weights.size()) != n_ch)
    throw MontageError("weight vector does not match layout channel count");
  if (!w.channel_names.empty() && w.channel_names != layout.channels)
    throw MontageError("weight channel names do not match layout");
  if (!w.weights.allFinite()) throw NumericError("non-finite component weight");

  Topoplot t;
  const std::size_t n_px = static_cast<std::size_t>(t.rows) * t.cols;
  t.rgb.assign(n_px * 3, 255);
  t.field.assign(n_px, 0.0f);
  t.mask = layout.mask;
  const auto& table = parula64_table();
  for (std::size_t flat = 0; flat < n_px; ++flat) {
    const std::int32_t ordinal = layout.pixel_index[flat];
    if (ordinal < 0) continue;
    const float* pw = &layout.pixel_weights[static_cast<std::size_t>(ordinal) * n_ch];
    double f = 0.0;
    for (std::size_t i = 0; i < n_ch; ++i)
      f += static_cast<double>(pw[i]) * w.weights(static_cast<Eigen::Index>(i));
    f = std::clamp(f, -1.0, 1.0);
    t.field[flat] = static_cast<float>(f);
    int idx = static_cast<int>(std::floor((f + 1.0) / 2.0 * 63.0));
    if (idx > 63) idx = 63;
    const Rgb& color = table[static_cast<std::size_t>(idx)];
    t.rgb[flat * 3 + 0] = color.r;
    t.rgb[flat * 3 + 1] = color.g;
    t.rgb[flat * 3 + 2] = color.b;
  }
  return t;
}

}  // namespace icascope

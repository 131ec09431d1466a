#pragma once

#include <cmath>
#include <vector>

#include "icascope/nn/model.hpp"

namespace icascope::nn {

namespace detail {

// Bilinear upsample of a single-channel map; a 1x1 source becomes constant.
inline Tensor<float> upsample_bilinear(const float* src, int sh, int sw, int dh, int dw) {
  Tensor<float> out({dh, dw});
  for (int r = 0; r < dh; ++r) {
    const double fy = dh > 1 ? static_cast<double>(r) * (sh - 1) / (dh - 1) : 0.0;
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int c = 0; c < dw; ++c) {
      const double fx = dw > 1 ? static_cast<double>(c) * (sw - 1) / (dw - 1) : 0.0;
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * src[y0 * sw + x0] + wx * src[y0 * sw + x1]) +
                       wy * ((1 - wx) * src[y1 * sw + x0] + wx * src[y1 * sw + x1]);
      out.ptr()[r * dw + c] = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace detail

// Grad-CAM over the last feature block. The head is flatten -> linear, so the
// gradient of a logit w.r.t. those feature maps is the corresponding FC weight
// row; channel weights are its spatial means. The signed map is kept (negative
// evidence matters for these classifiers) and normalized to [-1,1].
inline Tensor<float> grad_cam(const Model& model, const Tensor<float>& image,
                              int target_class) {
  if (target_class < 0 || target_class >= model.net.spec.fc_outputs)
    throw RangeError("grad_cam: bad target class");
  Tensor<float> x = image;
  if (x.rank() == 3) x = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
  Tensor<float> features;
  model.net.forward_features(x, &features);  // [1][C][h][w]
  const int channels = features.dim(1), h = features.dim(2), w = features.dim(3);
  const float* fc_row = model.net.fc.weight.data() +
                        static_cast<std::size_t>(target_class) * model.net.fc.in_features;
  std::vector<float> cam(static_cast<std::size_t>(h) * w, 0.0f);
  for (int c = 0; c < channels; ++c) {
    double alpha = 0.0;  // spatial mean of d(logit)/d(feature map c)
    const std::size_t base = static_cast<std::size_t>(c) * h * w;
    for (int i = 0; i < h * w; ++i) alpha += fc_row[base + static_cast<std::size_t>(i)];
    alpha /= h * w;
    const float* act = features.ptr() + base;
    for (int i = 0; i < h * w; ++i) cam[static_cast<std::size_t>(i)] +=
        static_cast<float>(alpha) * act[i];
  }
  Tensor<float> map = detail::upsample_bilinear(cam.data(), h, w,
                                                model.net.spec.input_rows,
                                                model.net.spec.input_cols);
  float max_abs = 0.0f;
  for (float v : map.data) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs > 0.0f)
    for (float& v : map.data) v /= max_abs;
  return map;
}

}  // namespace icascope::nn

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icascope/nn/network.hpp"

namespace icascope::nn {

struct ModelMeta {
  std::string category;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  std::string raster = kRasterConvention;
  double val_accuracy = 0.0;
};

struct Model {
  Network<float> net;
  ModelMeta meta;
};

struct Prediction {
  bool positive = false;
  double score = 0.0;  // positive-class probability
};

// Positive-class probabilities for a [N][3][H][W] batch.
inline std::vector<double> positive_scores(const Model& m, const Tensor<float>& batch) {
  Tensor<float> probs = softmax_rows(m.net.forward_infer(batch));
  std::vector<double> out(static_cast<std::size_t>(batch.dim(0)));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(probs.ptr()[i * 2 + 1]);
  return out;
}

// Argmax decision; an exact tie is resolved toward "negative" so an
// ambiguous topoplot is never flagged as artifact.
inline Prediction predict(const Model& m, const Tensor<float>& image) {
  Tensor<float> x = image;
  if (x.rank() == 3) x = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
  Prediction p;
  p.score = positive_scores(m, x).at(0);
  p.positive = p.score > 0.5;
  return p;
}

inline Prediction predict_rgb(const Model& m, const std::uint8_t* rgb, int rows,
                              int cols) {
  return predict(m, image_to_tensor<float>(rgb, rows, cols));
}

}  // namespace icascope::nn

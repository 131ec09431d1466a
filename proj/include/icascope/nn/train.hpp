#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/nn/model.hpp"
#include "icascope/rng.hpp"

namespace icascope::nn {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 1.0;  // global L2 gradient threshold
  int max_epochs = 400;
  int batch_size = 32;
  double val_fraction = 0.3;
  int patience = 20;  // epochs without a validation-loss improvement
  std::uint64_t seed = 0;
};

// One training example: interleaved 8-bit RGB raster plus its binary label.
struct LabeledImage {
  std::vector<std::uint8_t> rgb;  // rows*cols*3
  bool positive = false;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0, train_acc = 0;
  double val_loss = 0, val_acc = 0;
};

struct TrainOutcome {
  Model model;
  std::vector<EpochStats> history;
  std::vector<double> step_grad_norms;  // global L2 norm after clipping
  int best_epoch = 0;
  double best_val_loss = 0, best_val_acc = 0;
};

namespace detail {

inline void validate_config(const TrainConfig& cfg) {
  if (!(cfg.momentum >= 0 && cfg.momentum < 1))
    throw RangeError("momentum must lie in [0,1)");
  if (!(cfg.clip_norm > 0)) throw RangeError("clip threshold must be positive");
  if (!(cfg.learning_rate > 0)) throw RangeError("learning rate must be positive");
  if (cfg.max_epochs < 1 || cfg.max_epochs > 400)
    throw RangeError("max_epochs must lie in [1,400]");
  if (cfg.batch_size < 1) throw RangeError("batch size must be positive");
  if (!(cfg.val_fraction > 0 && cfg.val_fraction < 1))
    throw RangeError("validation fraction must lie in (0,1)");
}

inline Tensor<float> assemble_batch(const std::vector<LabeledImage>& data,
                                    const std::vector<std::size_t>& order,
                                    std::size_t first, std::size_t count, int rows,
                                    int cols, std::vector<int>& targets) {
  Tensor<float> batch({static_cast<int>(count), 3, rows, cols});
  targets.resize(count);
  const std::size_t hw = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < count; ++i) {
    const LabeledImage& img = data[order[first + i]];
    if (img.rgb.size() != hw * 3) throw ShapeError("image raster has wrong size");
    float* dst = batch.ptr() + i * 3 * hw;
    for (std::size_t px = 0; px < hw; ++px)
      for (int c = 0; c < 3; ++c)
        dst[static_cast<std::size_t>(c) * hw + px] = img.rgb[px * 3 + c] / 255.0f;
    targets[i] = img.positive ? 1 : 0;
  }
  return batch;
}

struct EvalResult {
  double loss = 0, acc = 0;
};

inline EvalResult evaluate_split(Model& model, const std::vector<LabeledImage>& data,
                                 const std::vector<std::size_t>& order,
                                 std::size_t first, std::size_t count,
                                 int batch_size) {
  EvalResult r;
  std::vector<int> targets;
  std::size_t correct = 0;
  double loss_sum = 0;
  for (std::size_t at = 0; at < count; at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min<std::size_t>(batch_size, count - at);
    Tensor<float> batch =
        assemble_batch(data, order, first + at, n, model.net.spec.input_rows,
                       model.net.spec.input_cols, targets);
    Tensor<float> probs = softmax_rows(model.net.forward_infer(batch));
    loss_sum += cross_entropy(probs, targets) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool positive = probs.ptr()[i * 2 + 1] > 0.5f;
      if (positive == (targets[i] == 1)) ++correct;
    }
  }
  r.loss = loss_sum / static_cast<double>(count);
  r.acc = static_cast<double>(correct) / static_cast<double>(count);
  return r;
}

}  // namespace detail

// Minibatch SGD with momentum and global L2 gradient clipping. The returned
// model carries the parameters of the best-validation-loss epoch.
inline TrainOutcome train(const NetworkSpec& spec,
                          const std::vector<LabeledImage>& dataset,
                          const TrainConfig& cfg) {
  detail::validate_config(cfg);
  std::size_t n_pos = 0;
  for (const auto& img : dataset) n_pos += img.positive ? 1 : 0;
  if (n_pos == 0 || n_pos == dataset.size())
    throw DataError("training needs both positive and negative examples");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  const auto n_val =
      static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(order.size())));
  const std::size_t n_train = order.size() - n_val;
  if (n_train == 0 || n_val == 0) throw DataError("dataset too small to split");

  TrainOutcome out;
  out.model.net = Network<float>::build(spec, rng.next_u64());
  out.model.meta.category = spec.category;
  out.model.meta.seed = cfg.seed;
  out.model.meta.raster = spec.raster;
  Model& model = out.model;

  const auto params = model.net.parameters();
  std::vector<std::vector<float>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.size, 0.0f);
  std::vector<std::vector<float>> best_params;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  double best_val_acc = 0;

  std::vector<std::size_t> train_order(order.begin(),
                                       order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<int> targets;
  typename Network<float>::TrainCache cache;
  int epochs_run = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    epochs_run = epoch + 1;
    for (std::size_t i = train_order.size(); i > 1; --i)
      std::swap(train_order[i - 1], train_order[rng.uniform_int(i)]);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t at = 0; at < n_train; at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, n_train - at);
      Tensor<float> batch = detail::assemble_batch(
          dataset, train_order, at, n, spec.input_rows, spec.input_cols, targets);
      model.net.zero_grads();
      Tensor<float> logits = model.net.forward_train(batch, cache);
      Tensor<float> probs = softmax_rows(logits);
      loss_sum += cross_entropy(probs, targets) * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        if ((probs.ptr()[i * 2 + 1] > 0.5f) == (targets[i] == 1)) ++correct;
      model.net.backward(cache, softmax_ce_grad(probs, targets));
      // global L2 clip, then momentum step
      const auto grads = model.net.gradients();
      double sq = 0;
      for (const auto& g : grads)
        for (std::size_t j = 0; j < g.size; ++j)
          sq += static_cast<double>(g.data[j]) * static_cast<double>(g.data[j]);
      const double norm = std::sqrt(sq);
      const float scale =
          norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.0f;
      out.step_grad_norms.push_back(std::min(norm, cfg.clip_norm));
      const auto ps = model.net.parameters();
      for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        float* v = velocity[pi].data();
        float* w = ps[pi].data;
        const float* g = grads[pi].data;
        const auto mom = static_cast<float>(cfg.momentum);
        const auto lr = static_cast<float>(cfg.learning_rate);
        for (std::size_t j = 0; j < ps[pi].size; ++j) {
          v[j] = mom * v[j] - lr * scale * g[j];
          w[j] += v[j];
        }
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n_train);
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(n_train);
    const auto val = detail::evaluate_split(model, dataset, order, n_train, n_val,
                                            cfg.batch_size);
    stats.val_loss = val.loss;
    stats.val_acc = val.acc;
    out.history.push_back(stats);

    if (val.loss < best_val_loss) {
      best_val_loss = val.loss;
      best_val_acc = val.acc;
      best_epoch = epoch;
      best_params.clear();
      for (const auto& p : model.net.parameters())
        best_params.emplace_back(p.data, p.data + p.size);
      // keep the running statistics that belong to these parameters
      for (const auto& b : model.net.state_buffers())
        best_params.emplace_back(b.data, b.data + b.size);
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  // restore the best snapshot
  std::size_t bi = 0;
  for (const auto& p : model.net.parameters())
    std::copy(best_params[bi].begin(), best_params[bi].end(), p.data), ++bi;
  for (const auto& b : model.net.state_buffers())
    std::copy(best_params[bi].begin(), best_params[bi].end(), b.data), ++bi;

  out.best_epoch = best_epoch;
  out.best_val_loss = best_val_loss;
  out.best_val_acc = best_val_acc;
  model.meta.epochs_trained = epochs_run;
  model.meta.val_accuracy = best_val_acc;
  return out;
}

}  // namespace icascope::nn

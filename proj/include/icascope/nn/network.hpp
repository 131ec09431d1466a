#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/nn/layers.hpp"
#include "icascope/nn/tensor.hpp"
#include "icascope/rng.hpp"

namespace icascope::nn {

enum class Category { B_V, H_E, E_I };

inline std::string to_string(Category c) {
  switch (c) {
    case Category::B_V: return "B_V";
    case Category::H_E: return "H_E";
    case Category::E_I: return "E_I";
  }
  throw RangeError("bad category");
}

inline Category parse_category(const std::string& s) {
  if (s == "B_V") return Category::B_V;
  if (s == "H_E") return Category::H_E;
  if (s == "E_I") return Category::E_I;
  throw RangeError("unknown category: " + s);
}

constexpr int kRasterRows = 134;
constexpr int kRasterCols = 136;
inline const char* kRasterConvention = "rows=134,cols=136";

struct BlockSpec {
  int filters = 0;
  bool pool = false;  // absent on the last feature block
  int pool_window = 2;
  int pool_stride = 2;
};

// Binary classifier: feature blocks (conv 3x3 s1 p1 + batchnorm + relu +
// optional maxpool), first block applied to each RGB plane with shared
// weights and the three outputs summed, then flatten -> FC(2) -> softmax.
struct NetworkSpec {
  std::string category;
  int input_rows = kRasterRows;
  int input_cols = kRasterCols;
  int kernel = 3, conv_stride = 1, conv_pad = 1;
  double bn_eps = 1e-5, bn_momentum = 0.1;
  std::vector<BlockSpec> blocks;
  int fc_outputs = 2;
  std::string raster = kRasterConvention;

  struct Extent {
    int channels, rows, cols;
  };

  // Spatial arithmetic after each block; index 0 is the input.
  std::vector<Extent> extents() const {
    std::vector<Extent> e;
    e.push_back({1, input_rows, input_cols});  // first block runs per plane
    int r = input_rows, c = input_cols;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      r = conv_extent(r, kernel, conv_stride, conv_pad);
      c = conv_extent(c, kernel, conv_stride, conv_pad);
      if (blocks[i].pool) {
        r = conv_extent(r, blocks[i].pool_window, blocks[i].pool_stride, 0);
        c = conv_extent(c, blocks[i].pool_window, blocks[i].pool_stride, 0);
      }
      e.push_back({blocks[i].filters, r, c});
    }
    return e;
  }

  int fc_inputs() const {
    const Extent last = extents().back();
    return last.channels * last.rows * last.cols;
  }
};

// The paper's three per-class architectures.
inline NetworkSpec build_architecture(Category category) {
  NetworkSpec spec;
  spec.category = to_string(category);
  std::vector<int> filters;
  int pool_stride = 4;
  switch (category) {
    case Category::B_V:
      filters = {8, 16, 32, 64};
      pool_stride = 4;
      break;
    case Category::H_E:
      filters = {8, 16, 32, 64, 128};
      pool_stride = 4;
      break;
    case Category::E_I:
      filters = {8, 16, 32, 64, 128, 256, 256};
      pool_stride = 2;
      break;
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    BlockSpec b;
    b.filters = filters[i];
    b.pool = i + 1 < filters.size();  // no maxpool on the last block
    b.pool_window = 2;
    b.pool_stride = pool_stride;
    spec.blocks.push_back(b);
  }
  return spec;
}

template <typename T>
struct Block {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;
  bool has_pool = false;
  MaxPool2d<T> pool;
};

template <typename T>
struct Network {
  NetworkSpec spec;
  std::vector<Block<T>> blocks;
  Linear<T> fc;

  static Network build(const NetworkSpec& spec, std::uint64_t seed) {
    if (spec.blocks.empty()) throw ShapeError("network needs at least one block");
    Network net;
    net.spec = spec;
    Rng rng(seed);
    int in_ch = 1;  // first block sees one color plane at a time
    for (const auto& bs : spec.blocks) {
      Block<T> b;
      b.conv.in_ch = in_ch;
      b.conv.out_ch = bs.filters;
      b.conv.kernel = spec.kernel;
      b.conv.stride = spec.conv_stride;
      b.conv.pad = spec.conv_pad;
      b.conv.init(rng);
      b.bn.channels = bs.filters;
      b.bn.eps = static_cast<T>(spec.bn_eps);
      b.bn.momentum = static_cast<T>(spec.bn_momentum);
      b.bn.init();
      b.has_pool = bs.pool;
      b.pool.window = bs.pool_window;
      b.pool.stride = bs.pool_stride;
      net.blocks.push_back(std::move(b));
      in_ch = bs.filters;
    }
    net.fc.in_features = spec.fc_inputs();
    net.fc.out_features = spec.fc_outputs;
    net.fc.init(rng);
    return net;
  }

  struct BlockCache {
    typename Conv2d<T>::Cache conv;
    typename BatchNorm2d<T>::Cache bn;
    std::vector<std::uint8_t> relu_mask;
    typename MaxPool2d<T>::Cache pool;
  };

  struct TrainCache {
    std::vector<BlockCache> block;
    std::vector<int> plane_sum_shape;  // [3N][C][h][w] before summation
    typename Linear<T>::Cache fc;
    std::vector<int> flat_shape;
  };

  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != spec.input_rows ||
        x.dim(3) != spec.input_cols)
      throw ShapeError("network input must be [N][3][" +
                       std::to_string(spec.input_rows) + "][" +
                       std::to_string(spec.input_cols) + "]");
  }

  // x: [N][3][rows][cols], pixel values already scaled to [0,1].
  Tensor<T> forward_train(const Tensor<T>& x, TrainCache& cache,
                          bool update_running = true) {
    return forward_impl(x, true, &cache, update_running, nullptr);
  }

  Tensor<T> forward_infer(const Tensor<T>& x) const {
    // Inference never touches gradients, caches or running statistics, so the
    // const_cast below is safe: batchnorm forward in infer mode is read-only.
    return const_cast<Network*>(this)->forward_impl(x, false, nullptr, false, nullptr);
  }

  // Inference that also returns the last feature block's activations
  // [N][C][h][w]; used by Grad-CAM.
  Tensor<T> forward_features(const Tensor<T>& x, Tensor<T>* features) const {
    return const_cast<Network*>(this)->forward_impl(x, false, nullptr, false, features);
  }

  // Fills parameter gradients from a train-mode cache; returns d(loss)/d(input).
  Tensor<T> backward(TrainCache& cache, const Tensor<T>& grad_logits) {
    if (cache.block.size() != blocks.size())
      throw StateError("backward called without a matching train-mode forward");
    Tensor<T> g = fc.backward(cache.fc, grad_logits);
    g = g.reshaped(cache.flat_shape);
    for (std::size_t bi = blocks.size(); bi-- > 1;) {
      Block<T>& b = blocks[bi];
      BlockCache& bc = cache.block[bi];
      if (b.has_pool) g = b.pool.backward(bc.pool, g);
      g = relu_backward(g, bc.relu_mask);
      g = b.bn.backward(bc.bn, g);
      g = b.conv.backward(bc.conv, g);
    }
    // redistribute the plane sum to the three color planes
    const auto& ps = cache.plane_sum_shape;  // [3N][C][h][w]
    Tensor<T> gp({ps[0], ps[1], ps[2], ps[3]});
    const std::size_t plane_sz =
        static_cast<std::size_t>(ps[1]) * ps[2] * ps[3];
    const int n = ps[0] / 3;
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < 3; ++p)
        std::copy(g.ptr() + i * plane_sz, g.ptr() + (i + 1) * plane_sz,
                  gp.ptr() + (static_cast<std::size_t>(i) * 3 + p) * plane_sz);
    Block<T>& b0 = blocks[0];
    BlockCache& bc0 = cache.block[0];
    Tensor<T> g0 = gp;
    if (b0.has_pool) g0 = b0.pool.backward(bc0.pool, g0);
    g0 = relu_backward(g0, bc0.relu_mask);
    g0 = b0.bn.backward(bc0.bn, g0);
    g0 = b0.conv.backward(bc0.conv, g0);
    // [3N][1][H][W] grads are exactly the [N][3][H][W] input grads
    return g0.reshaped({g0.dim(0) / 3, 3, g0.dim(2), g0.dim(3)});
  }

  void zero_grads() {
    for (auto& b : blocks) {
      b.conv.zero_grads();
      b.bn.zero_grads();
    }
    fc.zero_grads();
  }

  struct Span {
    T* data;
    std::size_t size;
  };

  // SGD-visible parameters, in declaration order.
  std::vector<Span> parameters() {
    std::vector<Span> out;
    for (auto& b : blocks) {
      out.push_back({b.conv.weight.data(), static_cast<std::size_t>(b.conv.weight.size())});
      out.push_back({b.conv.bias.data(), static_cast<std::size_t>(b.conv.bias.size())});
      out.push_back({b.bn.gamma.data(), static_cast<std::size_t>(b.bn.gamma.size())});
      out.push_back({b.bn.beta.data(), static_cast<std::size_t>(b.bn.beta.size())});
    }
    out.push_back({fc.weight.data(), static_cast<std::size_t>(fc.weight.size())});
    out.push_back({fc.bias.data(), static_cast<std::size_t>(fc.bias.size())});
    return out;
  }

  std::vector<Span> gradients() {
    std::vector<Span> out;
    for (auto& b : blocks) {
      out.push_back({b.conv.grad_weight.data(), static_cast<std::size_t>(b.conv.grad_weight.size())});
      out.push_back({b.conv.grad_bias.data(), static_cast<std::size_t>(b.conv.grad_bias.size())});
      out.push_back({b.bn.grad_gamma.data(), static_cast<std::size_t>(b.bn.grad_gamma.size())});
      out.push_back({b.bn.grad_beta.data(), static_cast<std::size_t>(b.bn.grad_beta.size())});
    }
    out.push_back({fc.grad_weight.data(), static_cast<std::size_t>(fc.grad_weight.size())});
    out.push_back({fc.grad_bias.data(), static_cast<std::size_t>(fc.grad_bias.size())});
    return out;
  }

  // Batchnorm running statistics (serialized, not trained).
  std::vector<Span> state_buffers() {
    std::vector<Span> out;
    for (auto& b : blocks) {
      out.push_back({b.bn.running_mean.data(), static_cast<std::size_t>(b.bn.running_mean.size())});
      out.push_back({b.bn.running_var.data(), static_cast<std::size_t>(b.bn.running_var.size())});
    }
    return out;
  }

 private:
  Tensor<T> forward_impl(const Tensor<T>& x, bool train, TrainCache* cache,
                         bool update_running, Tensor<T>* features) {
    check_input(x);
    const int n = x.dim(0);
    if (cache) cache->block.assign(blocks.size(), {});
    // shared first block, one color plane at a time: [N][3][H][W] -> [3N][1][H][W]
    Tensor<T> t = x.reshaped({3 * n, 1, x.dim(2), x.dim(3)});
    {
      Block<T>& b = blocks[0];
      BlockCache* bc = cache ? &cache->block[0] : nullptr;
      t = b.conv.forward(t, bc ? &bc->conv : nullptr);
      t = b.bn.forward(t, train, bc ? &bc->bn : nullptr, update_running);
      t = relu(t, bc ? &bc->relu_mask : nullptr);
      if (b.has_pool) t = b.pool.forward(t, bc ? &bc->pool : nullptr);
    }
    if (cache) cache->plane_sum_shape = t.shape;
    // sum the three per-plane outputs
    {
      const std::size_t plane_sz =
          static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
      Tensor<T> summed({n, t.dim(1), t.dim(2), t.dim(3)});
      for (int i = 0; i < n; ++i) {
        T* dst = summed.ptr() + i * plane_sz;
        for (int p = 0; p < 3; ++p) {
          const T* src = t.ptr() + (static_cast<std::size_t>(i) * 3 + p) * plane_sz;
          for (std::size_t j = 0; j < plane_sz; ++j) dst[j] += src[j];
        }
      }
      t = std::move(summed);
    }
    for (std::size_t bi = 1; bi < blocks.size(); ++bi) {
      Block<T>& b = blocks[bi];
      BlockCache* bc = cache ? &cache->block[bi] : nullptr;
      t = b.conv.forward(t, bc ? &bc->conv : nullptr);
      t = b.bn.forward(t, train, bc ? &bc->bn : nullptr, update_running);
      t = relu(t, bc ? &bc->relu_mask : nullptr);
      if (b.has_pool) t = b.pool.forward(t, bc ? &bc->pool : nullptr);
    }
    if (features) *features = t;
    if (cache) cache->flat_shape = t.shape;
    Tensor<T> flat = t.reshaped({n, static_cast<int>(t.numel() / n)});
    return fc.forward(flat, cache ? &cache->fc : nullptr);
  }
};

// Converts an interleaved 8-bit RGB raster (PNG layout) into a [1][3][H][W]
// network input scaled to [0,1].
template <typename T = float>
Tensor<T> image_to_tensor(const std::uint8_t* rgb, int rows, int cols) {
  Tensor<T> t({1, 3, rows, cols});
  const std::size_t hw = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      t.data[static_cast<std::size_t>(c) * hw + i] =
          static_cast<T>(rgb[i * 3 + c]) / T(255);
  return t;
}

}  // namespace icascope::nn

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/nn/tensor.hpp"
#include "icascope/rng.hpp"

namespace icascope::nn {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecT = Eigen::Vector<T, Eigen::Dynamic>;

inline int conv_extent(int n, int k, int stride, int pad) {
  return (n + 2 * pad - k) / stride + 1;
}

namespace detail {

// Unpack one image [C][H][W] into columns [(C*k*k)][oh*ow].
template <typename T>
void im2col(const T* x, int channels, int h, int w, int k, int stride, int pad,
            MatR<T>& cols) {
  const int oh = conv_extent(h, k, stride, pad);
  const int ow = conv_extent(w, k, stride, pad);
  cols.resize(channels * k * k, oh * ow);
  for (int c = 0; c < channels; ++c) {
    const T* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int row = (c * k + ki) * k + kj;
        T* dst = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oi = 0; oi < oh; ++oi) {
          const int ih = oi * stride - pad + ki;
          if (ih < 0 || ih >= h) {
            for (int oj = 0; oj < ow; ++oj) dst[oi * ow + oj] = T(0);
            continue;
          }
          const T* src_row = plane + static_cast<std::size_t>(ih) * w;
          for (int oj = 0; oj < ow; ++oj) {
            const int iw = oj * stride - pad + kj;
            dst[oi * ow + oj] = (iw < 0 || iw >= w) ? T(0) : src_row[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const MatR<T>& cols, int channels, int h, int w, int k, int stride,
            int pad, T* x) {
  const int oh = conv_extent(h, k, stride, pad);
  const int ow = conv_extent(w, k, stride, pad);
  for (int c = 0; c < channels; ++c) {
    T* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int row = (c * k + ki) * k + kj;
        const T* src = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oi = 0; oi < oh; ++oi) {
          const int ih = oi * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          T* dst_row = plane + static_cast<std::size_t>(ih) * w;
          for (int oj = 0; oj < ow; ++oj) {
            const int iw = oj * stride - pad + kj;
            if (iw >= 0 && iw < w) dst_row[iw] += src[oi * ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;
  MatR<T> weight;  // out_ch x (in_ch*kernel*kernel)
  VecT<T> bias;
  MatR<T> grad_weight;
  VecT<T> grad_bias;

  struct Cache {
    Tensor<T> input;
  };

  void init(Rng& rng) {
    weight.resize(out_ch, in_ch * kernel * kernel);
    bias = VecT<T>::Zero(out_ch);
    const double stddev = std::sqrt(2.0 / (in_ch * kernel * kernel));
    for (Eigen::Index i = 0; i < weight.rows(); ++i)
      for (Eigen::Index j = 0; j < weight.cols(); ++j)
        weight(i, j) = static_cast<T>(rng.gaussian() * stddev);
    zero_grads();
  }

  void zero_grads() {
    grad_weight = MatR<T>::Zero(out_ch, in_ch * kernel * kernel);
    grad_bias = VecT<T>::Zero(out_ch);
  }

  // x: [N][in_ch][H][W]
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
    if (x.rank() != 4 || x.dim(1) != in_ch) throw ShapeError("conv2d: bad input shape");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = conv_extent(h, kernel, stride, pad);
    const int ow = conv_extent(w, kernel, stride, pad);
    Tensor<T> y({n, out_ch, oh, ow});
    MatR<T> cols;
    for (int i = 0; i < n; ++i) {
      detail::im2col(x.ptr() + static_cast<std::size_t>(i) * in_ch * h * w, in_ch, h,
                     w, kernel, stride, pad, cols);
      Eigen::Map<MatR<T>> out(y.ptr() + static_cast<std::size_t>(i) * out_ch * oh * ow,
                              out_ch, oh * ow);
      out.noalias() = weight * cols;
      out.colwise() += bias;
    }
    if (cache) cache->input = x;
    return y;
  }

  // Accumulates parameter gradients, returns gradient w.r.t. the input.
  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out) {
    const Tensor<T>& x = cache.input;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    Tensor<T> gx({n, in_ch, h, w});
    MatR<T> cols, gcols;
    for (int i = 0; i < n; ++i) {
      detail::im2col(x.ptr() + static_cast<std::size_t>(i) * in_ch * h * w, in_ch, h,
                     w, kernel, stride, pad, cols);
      Eigen::Map<const MatR<T>> gy(
          grad_out.ptr() + static_cast<std::size_t>(i) * out_ch * oh * ow, out_ch,
          oh * ow);
      grad_weight.noalias() += gy * cols.transpose();
      grad_bias += gy.rowwise().sum();
      gcols.noalias() = weight.transpose() * gy;
      detail::col2im(gcols, in_ch, h, w, kernel, stride, pad,
                     gx.ptr() + static_cast<std::size_t>(i) * in_ch * h * w);
    }
    return gx;
  }
};

template <typename T>
struct BatchNorm2d {
  int channels = 0;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
  VecT<T> gamma, beta, running_mean, running_var;
  VecT<T> grad_gamma, grad_beta;

  struct Cache {
    Tensor<T> xhat;
    VecT<T> inv_std;
  };

  void init() {
    gamma = VecT<T>::Ones(channels);
    beta = VecT<T>::Zero(channels);
    running_mean = VecT<T>::Zero(channels);
    running_var = VecT<T>::Ones(channels);
    zero_grads();
  }

  void zero_grads() {
    grad_gamma = VecT<T>::Zero(channels);
    grad_beta = VecT<T>::Zero(channels);
  }

  // x: [N][C][H][W]. Train mode normalizes with batch statistics and (unless
  // told otherwise) folds them into the running estimates; inference always
  // uses the running estimates.
  Tensor<T> forward(const Tensor<T>& x, bool train, Cache* cache,
                    bool update_running = true) {
    if (x.rank() != 4 || x.dim(1) != channels) throw ShapeError("batchnorm: bad input");
    const int n = x.dim(0), hw = x.dim(2) * x.dim(3);
    const auto m = static_cast<T>(static_cast<double>(n) * hw);
    Tensor<T> y(x.shape);
    VecT<T> mean(channels), var(channels);
    if (train) {
      for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
          const T* p = x.ptr() + (static_cast<std::size_t>(i) * channels + c) * hw;
          for (int j = 0; j < hw; ++j) sum += static_cast<double>(p[j]);
        }
        mean(c) = static_cast<T>(sum / m);
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
          const T* p = x.ptr() + (static_cast<std::size_t>(i) * channels + c) * hw;
          for (int j = 0; j < hw; ++j) {
            const double d = static_cast<double>(p[j]) - static_cast<double>(mean(c));
            sq += d * d;
          }
        }
        var(c) = static_cast<T>(sq / m);
      }
      if (update_running) {
        running_mean = (T(1) - momentum) * running_mean + momentum * mean;
        running_var = (T(1) - momentum) * running_var + momentum * var;
      }
    } else {
      mean = running_mean;
      var = running_var;
    }
    VecT<T> inv_std = (var.array() + eps).rsqrt().matrix();
    Tensor<T> xhat(x.shape);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels + c) * hw;
        const T* px = x.ptr() + off;
        T* ph = xhat.ptr() + off;
        T* py = y.ptr() + off;
        for (int j = 0; j < hw; ++j) {
          ph[j] = (px[j] - mean(c)) * inv_std(c);
          py[j] = gamma(c) * ph[j] + beta(c);
        }
      }
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out) {
    const Tensor<T>& xhat = cache.xhat;
    const int n = grad_out.dim(0), hw = grad_out.dim(2) * grad_out.dim(3);
    const auto m = static_cast<T>(static_cast<double>(n) * hw);
    VecT<T> sum_gy = VecT<T>::Zero(channels), sum_gy_xhat = VecT<T>::Zero(channels);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels + c) * hw;
        const T* gy = grad_out.ptr() + off;
        const T* ph = xhat.ptr() + off;
        double s = 0, sx = 0;
        for (int j = 0; j < hw; ++j) {
          s += static_cast<double>(gy[j]);
          sx += static_cast<double>(gy[j]) * static_cast<double>(ph[j]);
        }
        sum_gy(c) += static_cast<T>(s);
        sum_gy_xhat(c) += static_cast<T>(sx);
      }
    }
    grad_gamma += sum_gy_xhat;
    grad_beta += sum_gy;
    Tensor<T> gx(grad_out.shape);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels + c) * hw;
        const T* gy = grad_out.ptr() + off;
        const T* ph = xhat.ptr() + off;
        T* pg = gx.ptr() + off;
        const T k = gamma(c) * cache.inv_std(c) / m;
        for (int j = 0; j < hw; ++j)
          pg[j] = k * (m * gy[j] - sum_gy(c) - ph[j] * sum_gy_xhat(c));
      }
    }
    return gx;
  }
};

template <typename T>
struct MaxPool2d {
  int window = 2, stride = 2;  // padding 0

  struct Cache {
    std::vector<std::int32_t> argmax;  // flat H*W index per output element
    std::vector<int> in_shape;
  };

  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = conv_extent(h, window, stride, 0);
    const int ow = conv_extent(w, window, stride, 0);
    Tensor<T> y({n, c, oh, ow});
    if (cache) {
      cache->argmax.assign(y.data.size(), 0);
      cache->in_shape = x.shape;
    }
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const T* plane = x.ptr() + (static_cast<std::size_t>(i) * c + ch) * h * w;
        T* out = y.ptr() + (static_cast<std::size_t>(i) * c + ch) * oh * ow;
        std::int32_t* am =
            cache ? cache->argmax.data() + (static_cast<std::size_t>(i) * c + ch) * oh * ow
                  : nullptr;
        for (int oi = 0; oi < oh; ++oi) {
          for (int oj = 0; oj < ow; ++oj) {
            int best = (oi * stride) * w + oj * stride;
            T best_v = plane[best];
            for (int ki = 0; ki < window; ++ki) {
              for (int kj = 0; kj < window; ++kj) {
                const int idx = (oi * stride + ki) * w + (oj * stride + kj);
                if (plane[idx] > best_v) {
                  best_v = plane[idx];
                  best = idx;
                }
              }
            }
            out[oi * ow + oj] = best_v;
            if (am) am[oi * ow + oj] = best;
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out) const {
    Tensor<T> gx(cache.in_shape);
    const int n = grad_out.dim(0), c = grad_out.dim(1);
    const int ohw = grad_out.dim(2) * grad_out.dim(3);
    const int hw = cache.in_shape[2] * cache.in_shape[3];
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t plane = static_cast<std::size_t>(i) * c + ch;
        const T* gy = grad_out.ptr() + plane * ohw;
        const std::int32_t* am = cache.argmax.data() + plane * ohw;
        T* pg = gx.ptr() + plane * hw;
        for (int j = 0; j < ohw; ++j) pg[am[j]] += gy[j];
      }
    }
    return gx;
  }
};

template <typename T>
Tensor<T> relu(const Tensor<T>& x, std::vector<std::uint8_t>* mask = nullptr) {
  Tensor<T> y(x.shape);
  if (mask) mask->assign(x.data.size(), 0);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    if (x.data[i] > T(0)) {
      y.data[i] = x.data[i];
      if (mask) (*mask)[i] = 1;
    }
  }
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& mask) {
  Tensor<T> gx(grad_out.shape);
  for (std::size_t i = 0; i < gx.data.size(); ++i)
    gx.data[i] = mask[i] ? grad_out.data[i] : T(0);
  return gx;
}

template <typename T>
struct Linear {
  int in_features = 0, out_features = 0;
  MatR<T> weight;  // out x in
  VecT<T> bias;
  MatR<T> grad_weight;
  VecT<T> grad_bias;

  struct Cache {
    Tensor<T> input;
  };

  void init(Rng& rng) {
    weight.resize(out_features, in_features);
    bias = VecT<T>::Zero(out_features);
    const double stddev = std::sqrt(2.0 / in_features);
    for (Eigen::Index i = 0; i < weight.rows(); ++i)
      for (Eigen::Index j = 0; j < weight.cols(); ++j)
        weight(i, j) = static_cast<T>(rng.gaussian() * stddev);
    zero_grads();
  }

  void zero_grads() {
    grad_weight = MatR<T>::Zero(out_features, in_features);
    grad_bias = VecT<T>::Zero(out_features);
  }

  // x: [N][in_features]
  Tensor<T> forward(const Tensor<T>& x, Cache* cache) const {
    if (x.rank() != 2 || x.dim(1) != in_features) throw ShapeError("linear: bad input");
    const int n = x.dim(0);
    Tensor<T> y({n, out_features});
    Eigen::Map<const MatR<T>> xin(x.ptr(), n, in_features);
    Eigen::Map<MatR<T>> out(y.ptr(), n, out_features);
    out.noalias() = xin * weight.transpose();
    out.rowwise() += bias.transpose();
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out) {
    const int n = grad_out.dim(0);
    Eigen::Map<const MatR<T>> gy(grad_out.ptr(), n, out_features);
    Eigen::Map<const MatR<T>> xin(cache.input.ptr(), n, in_features);
    grad_weight.noalias() += gy.transpose() * xin;
    grad_bias += gy.colwise().sum();
    Tensor<T> gx({n, in_features});
    Eigen::Map<MatR<T>> gxm(gx.ptr(), n, in_features);
    gxm.noalias() = gy * weight;
    return gx;
  }
};

// Row-wise softmax for [N][K] logits, numerically stabilized.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor<T> p(logits.shape);
  for (int i = 0; i < n; ++i) {
    const T* in = logits.ptr() + static_cast<std::size_t>(i) * k;
    T* out = p.ptr() + static_cast<std::size_t>(i) * k;
    T mx = in[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, in[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (int j = 0; j < k; ++j) out[j] /= sum;
  }
  return p;
}

// Mean cross-entropy of softmax probabilities against integer targets.
template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& targets) {
  const int n = probs.dim(0), k = probs.dim(1);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const T p = probs.ptr()[static_cast<std::size_t>(i) * k + targets[static_cast<std::size_t>(i)]];
    loss -= std::log(std::max(static_cast<double>(p), 1e-30));
  }
  return loss / n;
}

// d(mean CE)/d(logits) = (softmax - onehot)/N.
template <typename T>
Tensor<T> softmax_ce_grad(const Tensor<T>& probs, const std::vector<int>& targets) {
  const int n = probs.dim(0), k = probs.dim(1);
  Tensor<T> g = probs;
  for (int i = 0; i < n; ++i) {
    g.ptr()[static_cast<std::size_t>(i) * k + targets[static_cast<std::size_t>(i)]] -= T(1);
  }
  for (auto& v : g.data) v /= static_cast<T>(n);
  return g;
}

}  // namespace icascope::nn

#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "icascope/notch.hpp"
#include "icascope/rng.hpp"

namespace testutil {

// Amari performance index of a global (unmixing*mixing) matrix, normalized to
// [0,1]; 0 means perfect recovery up to permutation and scale.
inline double amari_index(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  const Eigen::MatrixXd a = p.cwiseAbs();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    sum += a.row(i).sum() / a.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < n; ++j)
    sum += a.col(j).sum() / a.col(j).maxCoeff() - 1.0;
  return sum / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

// Brute-force best permutation/sign matching: returns the smallest, over all
// permutations, of the worst per-row normalized diagonal magnitude. Close to
// 1 means every source found a dedicated recovered component.
inline double best_permutation_match(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd rows = p;
  for (Eigen::Index i = 0; i < n; ++i) rows.row(i) /= rows.row(i).norm();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double worst = 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      worst = std::min(worst, std::abs(rows(i, perm[static_cast<std::size_t>(i)])));
    best = std::max(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Unit-variance Laplacian sources, one row per source.
inline Eigen::MatrixXd laplacian_sources(int n_sources, int n_samples,
                                         std::uint64_t seed) {
  icascope::Rng rng(seed);
  Eigen::MatrixXd s(n_sources, n_samples);
  for (int i = 0; i < n_sources; ++i)
    for (int j = 0; j < n_samples; ++j) s(i, j) = rng.laplacian();
  return s;
}

// Frequency response of a biquad cascade evaluated from the coefficients.
inline double cascade_magnitude(const std::vector<icascope::BiquadSection>& sections,
                                double freq_hz, double fs) {
  const std::complex<double> j(0.0, 1.0);
  const std::complex<double> z = std::exp(-j * (2.0 * 3.141592653589793 * freq_hz / fs));
  std::complex<double> h(1.0, 0.0);
  for (const auto& s : sections) {
    const std::complex<double> num = s.b0 + s.b1 * z + s.b2 * z * z;
    const std::complex<double> den = 1.0 + s.a1 * z + s.a2 * z * z;
    h *= num / den;
  }
  return std::abs(h);
}

// Naive inverse-distance-weighted interpolation at one raster pixel,
// recomputed from scratch (no cached weights).
inline double idw_at_pixel(int row, int col, int rows, int cols,
                           const std::vector<Eigen::Vector2d>& electrodes,
                           const Eigen::VectorXd& weights) {
  const double cx = (cols - 1) / 2.0, cy = (rows - 1) / 2.0;
  const double radius = std::min(cx, cy);
  const double x = (col - cx) / radius, y = (cy - row) / radius;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < electrodes.size(); ++i) {
    const double d2 = (x - electrodes[i].x()) * (x - electrodes[i].x()) +
                      (y - electrodes[i].y()) * (y - electrodes[i].y());
    if (d2 < 1e-12) return weights(static_cast<Eigen::Index>(i));
    num += weights(static_cast<Eigen::Index>(i)) / d2;
    den += 1.0 / d2;
  }
  return std::clamp(num / den, -1.0, 1.0);
}

// Direct nested-loop 2D convolution (cross-correlation, matching the layer).
template <typename T, typename Container>
std::vector<T> direct_conv2d(const Container& x, int in_ch, int h, int w,
                             const std::vector<T>& weight, const std::vector<T>& bias,
                             int out_ch, int k, int stride, int pad) {
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  std::vector<T> y(static_cast<std::size_t>(out_ch) * oh * ow, T(0));
  for (int oc = 0; oc < out_ch; ++oc)
    for (int oi = 0; oi < oh; ++oi)
      for (int oj = 0; oj < ow; ++oj) {
        T acc = bias[static_cast<std::size_t>(oc)];
        for (int ic = 0; ic < in_ch; ++ic)
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
              const int ih = oi * stride - pad + ki;
              const int iw = oj * stride - pad + kj;
              if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
              acc += x[(static_cast<std::size_t>(ic) * h + ih) * w + iw] *
                     weight[((static_cast<std::size_t>(oc) * in_ch + ic) * k + ki) * k + kj];
            }
        y[(static_cast<std::size_t>(oc) * oh + oi) * ow + oj] = acc;
      }
  return y;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  return fnv1a64(bytes.data(), bytes.size());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Fresh scratch directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("icascope_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

}  // namespace testutil

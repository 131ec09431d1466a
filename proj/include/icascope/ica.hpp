#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/rng.hpp"

namespace icascope {

struct Whitened {
  Eigen::MatrixXd z;         // n_channels x n_samples, zero mean, identity covariance
  Eigen::MatrixXd whitener;  // maps centered data to z
  Eigen::VectorXd mean;      // per-channel mean removed from the input
};

struct IcaResult {
  Eigen::MatrixXd mixing;    // n_channels x n_components (scalp weights per component)
  Eigen::MatrixXd unmixing;  // n_components x n_channels, acts on centered data
  Eigen::MatrixXd sources;   // n_components x n_samples
  bool converged = false;
  int iterations = 0;
};

struct FastIcaOptions {
  int n_components = 0;  // 0 = as many as channels
  double tol = 1e-4;
  int max_iter = 200;
  std::uint64_t seed = 0;
};

struct ComponentWeights {
  Eigen::VectorXd weights;  // max-abs = 1, dominant entry positive
  std::vector<std::string> channel_names;
};

// PCA whitening: z = D^(-1/2) E^T (x - mean), sample covariance of z is I.
inline Whitened center_whiten(const Eigen::MatrixXd& x) {
  const Eigen::Index n_ch = x.rows();
  const Eigen::Index n_s = x.cols();
  if (n_s <= n_ch)
    throw DegenerateInputError("whitening needs more samples than channels");
  if (!x.allFinite()) throw NumericError("whitening input has non-finite values");
  Whitened w;
  w.mean = x.rowwise().mean();
  Eigen::MatrixXd centered = x.colwise() - w.mean;
  Eigen::MatrixXd cov =
      centered * centered.transpose() / static_cast<double>(n_s - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
  const double largest = evals(n_ch - 1);
  if (!(largest > 0) || evals(0) < 1e-12 * largest)
    throw DegenerateInputError("covariance is rank deficient");
  w.whitener = evals.cwiseSqrt().cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose();
  w.z = w.whitener * centered;
  return w;
}

// W <- (W W^T)^(-1/2) W; rows become orthonormal.
inline Eigen::MatrixXd symmetric_decorrelate(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
  const Eigen::VectorXd& evals = eig.eigenvalues();
  if (!(evals(0) > 0))
    throw DegenerateInputError("decorrelation: singular update matrix");
  return eig.eigenvectors() *
         evals.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose() * w;
}

// Symmetric fixed-point FastICA with the tanh contrast. Convergence failure
// is reported through the flag, not an error; the caller decides what to do
// with a non-converged window.
inline IcaResult fast_ica(const Whitened& input, const FastIcaOptions& opts = {}) {
  const Eigen::Index n_ch = input.z.rows();
  const auto n_s = static_cast<double>(input.z.cols());
  const Eigen::Index k =
      opts.n_components > 0 ? static_cast<Eigen::Index>(opts.n_components) : n_ch;
  if (k < 1 || k > n_ch)
    throw RangeError("n_components must lie in [1, n_channels]");
  if (!input.z.allFinite()) throw NumericError("ICA input has non-finite values");

  Rng rng(opts.seed);
  Eigen::MatrixXd w(k, n_ch);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n_ch; ++j) w(i, j) = rng.gaussian();
  w = symmetric_decorrelate(w);

  IcaResult res;
  res.converged = false;
  Eigen::MatrixXd y, g;
  for (int it = 0; it < opts.max_iter; ++it) {
    y.noalias() = w * input.z;                       // k x n_s
    g = y.array().tanh().matrix();                   // contrast derivative
    Eigen::VectorXd gprime_mean =
        (1.0 - g.array().square()).rowwise().mean();  // E[g'(y)] per row
    Eigen::MatrixXd w_new =
        (g * input.z.transpose()) / n_s - gprime_mean.asDiagonal() * w;
    w_new = symmetric_decorrelate(w_new);
    double delta = 0.0;
    for (Eigen::Index i = 0; i < k; ++i)
      delta = std::max(delta, std::abs(1.0 - std::abs(w_new.row(i).dot(w.row(i)))));
    w = std::move(w_new);
    res.iterations = it + 1;
    if (delta < opts.tol) {
      res.converged = true;
      break;
    }
  }

  res.unmixing = w * input.whitener;
  res.sources = w * input.z;
  res.mixing = res.unmixing.completeOrthogonalDecomposition().pseudoInverse();
  return res;
}

inline IcaResult decompose(const Eigen::MatrixXd& x, const FastIcaOptions& opts = {}) {
  return fast_ica(center_whiten(x), opts);
}

// Scale to max-abs 1 and flip the sign so the dominant entry is positive.
// ICA components are defined only up to scale and sign; this is the canonical
// representation every topoplot is rendered from.
inline ComponentWeights normalize_component_vector(
    const Eigen::VectorXd& col, std::vector<std::string> channel_names = {}) {
  Eigen::Index dominant = 0;
  const double max_abs = col.cwiseAbs().maxCoeff(&dominant);
  if (!(max_abs > 1e-150))
    throw DegenerateComponentError("component has an all-zero weight vector");
  ComponentWeights w;
  w.weights = col / (col(dominant) > 0 ? max_abs : -max_abs);
  w.channel_names = std::move(channel_names);
  return w;
}

// Column k of the mixing matrix in canonical form.
inline ComponentWeights component_weights(const IcaResult& r, Eigen::Index k,
                                          std::vector<std::string> channel_names = {}) {
  if (k < 0 || k >= r.mixing.cols())
    throw IndexError("component index out of range");
  return normalize_component_vector(r.mixing.col(k), std::move(channel_names));
}

}  // namespace icascope

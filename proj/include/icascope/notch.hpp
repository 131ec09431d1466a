#pragma once

#include <cmath>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/recording.hpp"

namespace icascope {

// Second-order IIR notch, Orfanidis design: unity gain at DC and Nyquist,
// -3 dB at f0 +- bandwidth/2.
struct BiquadSection {
  double b0 = 1, b1 = 0, b2 = 0;  // numerator
  double a1 = 0, a2 = 0;          // denominator (a0 = 1)
};

inline BiquadSection design_notch(double freq_hz, double bandwidth_hz, double fs) {
  if (fs <= 0) throw FilterDesignError("sample rate must be positive");
  if (bandwidth_hz <= 0) throw FilterDesignError("bandwidth must be positive");
  if (freq_hz <= 0 || freq_hz >= fs / 2.0)
    throw FilterDesignError("notch frequency must lie inside (0, Nyquist)");
  const double pi = 3.141592653589793;
  const double w0 = 2.0 * pi * freq_hz / fs;
  const double bw = 2.0 * pi * bandwidth_hz / fs;
  // -3 dB edges: beta = tan(bw/2), gain = 1/(1+beta)
  const double beta = std::tan(bw / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  BiquadSection s;
  s.b0 = gain;
  s.b1 = -2.0 * gain * std::cos(w0);
  s.b2 = gain;
  s.a1 = -2.0 * gain * std::cos(w0);
  s.a2 = 2.0 * gain - 1.0;
  return s;
}

inline std::vector<BiquadSection> design_notch_cascade(const std::vector<double>& freqs,
                                                       double bandwidth_hz, double fs) {
  std::vector<BiquadSection> sections;
  sections.reserve(freqs.size());
  for (double f : freqs) sections.push_back(design_notch(f, bandwidth_hz, fs));
  return sections;
}

// Forward-only (causal) transposed direct-form II pass. State starts at the
// step steady state of the first sample, so a constant input passes through
// untouched from sample zero.
inline void apply_biquad_forward(const BiquadSection& s, double* x, Eigen::Index n) {
  if (n == 0) return;
  const double x0 = x[0];
  double z1 = x0 * (1.0 - s.b0);
  double z2 = x0 * (s.b2 - s.a2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double in = x[i];
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    x[i] = out;
  }
}

inline Recording notch_filter(const Recording& rec,
                              const std::vector<double>& freqs = {50.0, 60.0},
                              double bandwidth_hz = 2.0) {
  const auto sections = design_notch_cascade(freqs, bandwidth_hz, rec.sample_rate);
  Recording out = rec;
  std::vector<double> buf(static_cast<std::size_t>(out.n_samples()));
  for (Eigen::Index c = 0; c < out.n_channels(); ++c) {
    for (Eigen::Index t = 0; t < out.n_samples(); ++t)
      buf[static_cast<std::size_t>(t)] = out.samples(c, t);
    for (const auto& s : sections)
      apply_biquad_forward(s, buf.data(), out.n_samples());
    for (Eigen::Index t = 0; t < out.n_samples(); ++t)
      out.samples(c, t) = buf[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace icascope

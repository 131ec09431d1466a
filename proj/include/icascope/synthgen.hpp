#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "icascope/errors.hpp"
#include "icascope/ica.hpp"
#include "icascope/montage.hpp"
#include "icascope/png_io.hpp"
#include "icascope/recording.hpp"
#include "icascope/rng.hpp"
#include "icascope/topomap.hpp"

namespace icascope {

enum class Archetype { BEOG, VEOG, HEOG, ECG, EMG, IF, UBS };

inline std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::BEOG: return "BEOG";
    case Archetype::VEOG: return "VEOG";
    case Archetype::HEOG: return "HEOG";
    case Archetype::ECG: return "ECG";
    case Archetype::EMG: return "EMG";
    case Archetype::IF: return "IF";
    case Archetype::UBS: return "UBS";
  }
  throw RangeError("bad archetype");
}

inline Archetype parse_archetype(const std::string& s) {
  for (Archetype a : {Archetype::BEOG, Archetype::VEOG, Archetype::HEOG, Archetype::ECG,
                      Archetype::EMG, Archetype::IF, Archetype::UBS})
    if (to_string(a) == s) return a;
  throw RangeError("unknown archetype: " + s);
}

// Framework category an archetype belongs to.
inline std::string category_label(Archetype a) {
  switch (a) {
    case Archetype::BEOG:
    case Archetype::VEOG: return "B_V";
    case Archetype::HEOG:
    case Archetype::ECG: return "H_E";
    case Archetype::EMG:
    case Archetype::IF: return "E_I";
    case Archetype::UBS: return "UBS";
  }
  throw RangeError("bad archetype");
}

struct ArchetypeParams {
  Archetype archetype = Archetype::UBS;
  double amplitude_jitter = 0.3;  // uniform +-30% pattern scale
  double spread_scale = 1.0;      // multiplies the archetype spread range
  double noise_level = 0.0;       // additive channel noise, fraction of peak
  std::uint64_t seed = 0;
};

struct GeneratedWeights {
  ComponentWeights weights;
  std::string label;  // B_V / H_E / E_I / UBS
  Archetype archetype = Archetype::UBS;
};

namespace detail {

inline double great_circle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

// Gaussian bump in great-circle angle around a unit-sphere center.
inline Eigen::VectorXd bump(const std::vector<Eigen::Vector3d>& pos,
                            const Eigen::Vector3d& center, double sigma) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(pos.size()));
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const double a = great_circle(pos[i], center);
    w(static_cast<Eigen::Index>(i)) = std::exp(-(a * a) / (sigma * sigma));
  }
  return w;
}

inline Eigen::Vector3d jitter_on_sphere(const Eigen::Vector3d& c, double amount, Rng& rng) {
  Eigen::Vector3d t1 = c.cross(Eigen::Vector3d::UnitZ());
  if (t1.norm() < 1e-6) t1 = c.cross(Eigen::Vector3d::UnitX());
  t1.normalize();
  const Eigen::Vector3d t2 = c.cross(t1).normalized();
  return (c + rng.uniform(-amount, amount) * t1 + rng.uniform(-amount, amount) * t2)
      .normalized();
}

// ring electrodes, used to tell border peaks from mid-scalp ones
inline const std::vector<std::string>& border_labels() {
  static const std::vector<std::string> v = {"Fp1", "Fp2", "F7", "F8", "T7",
                                             "T8",  "P7",  "P8", "O1", "O2"};
  return v;
}

// EMG anchors: lateral borders over jaw, ear and neck muscles. The frontal
// poles are left out (a bump there is indistinguishable from BEOG), as are
// the occipital poles, which sit too close to the PO row to stay isolated.
inline const std::vector<std::string>& emg_labels() {
  static const std::vector<std::string> v = {"F7", "F8", "T7", "T8", "P7", "P8"};
  return v;
}

}  // namespace detail

// Labeled synthetic component weights following the archetype shapes: EOG
// concentrated frontally, HEOG/ECG as opposite-sign pairs near the nose/ears,
// EMG/IF isolated peaks, UBS smooth dipolar fields away from the frontal rim.
inline GeneratedWeights gen_weights(const ArchetypeParams& p,
                                    const Montage& montage = Montage::standard1020()) {
  if (!(p.spread_scale > 0)) throw RangeError("spread must be positive");
  if (!(p.noise_level >= 0 && p.noise_level <= 0.5))
    throw RangeError("noise level must lie in [0, 0.5]");
  const auto& labels = montage.labels();
  std::vector<Eigen::Vector3d> pos;
  pos.reserve(labels.size());
  for (const auto& l : labels) pos.push_back(montage.position(l));
  const auto n = static_cast<Eigen::Index>(labels.size());

  Rng rng(p.seed);
  auto find = [&](const std::string& name) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == name) return pos[i];
    throw MontageError("generator needs channel " + name);
  };
  const Eigen::Vector3d frontal = (find("Fp1") + find("Fp2")).normalized();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  switch (p.archetype) {
    case Archetype::BEOG: {
      const double sigma = p.spread_scale * rng.uniform(0.26, 0.35);
      w = detail::bump(pos, detail::jitter_on_sphere(frontal, 0.06, rng), sigma);
      break;
    }
    case Archetype::VEOG: {
      // same frontal center, 2-2.5x the blink spread
      const double sigma =
          p.spread_scale * rng.uniform(0.26, 0.35) * rng.uniform(2.0, 2.5);
      w = detail::bump(pos, detail::jitter_on_sphere(frontal, 0.06, rng), sigma);
      break;
    }
    case Archetype::HEOG:
    case Archetype::ECG: {
      const bool heog = p.archetype == Archetype::HEOG;
      const Eigen::Vector3d left = find(heog ? "F7" : "T7");
      const Eigen::Vector3d right = find(heog ? "F8" : "T8");
      const double sigma = p.spread_scale * rng.uniform(0.35, 0.50);
      const double flip = rng.uniform() < 0.5 ? -1.0 : 1.0;
      w = flip * (detail::bump(pos, detail::jitter_on_sphere(left, 0.05, rng), sigma) -
                  detail::bump(pos, detail::jitter_on_sphere(right, 0.05, rng), sigma));
      break;
    }
    case Archetype::EMG: {
      const auto& anchors = detail::emg_labels();
      const auto pick = anchors[rng.uniform_int(anchors.size())];
      const double sigma = p.spread_scale * rng.uniform(0.18, 0.26);
      w = detail::bump(pos, detail::jitter_on_sphere(find(pick), 0.04, rng), sigma);
      break;
    }
    case Archetype::IF: {
      // single-electrode spike; mid-scalp, where impedance faults show up
      std::vector<Eigen::Index> interior;
      for (Eigen::Index i = 0; i < n; ++i) {
        bool is_border = false;
        for (const auto& b : detail::border_labels())
          if (labels[static_cast<std::size_t>(i)] == b) is_border = true;
        if (!is_border) interior.push_back(i);
      }
      w(interior[rng.uniform_int(interior.size())]) = 1.0;
      break;
    }
    case Archetype::UBS: {
      // smooth dipolar field; lobes stay off the frontal rim and off the
      // lateral dipole anchors so labels do not collide with the artifacts
      const std::vector<Eigen::Vector3d> avoid = {frontal, find("F7"), find("F8"),
                                                  find("T7"), find("T8")};
      auto sample_center = [&] {
        for (int tries = 0; tries < 64; ++tries) {
          const double azimuth = rng.uniform(0.0, 6.283185307179586);
          const double polar = rng.uniform(0.0, 1.35);  // stay on the upper scalp
          Eigen::Vector3d c(std::sin(polar) * std::cos(azimuth),
                            std::sin(polar) * std::sin(azimuth), std::cos(polar));
          if (detail::great_circle(c, avoid[0]) < 0.7) continue;
          bool ok = true;
          for (std::size_t i = 1; i < avoid.size(); ++i)
            if (detail::great_circle(c, avoid[i]) < 0.55) ok = false;
          if (ok) return c;
        }
        return Eigen::Vector3d(0, 0, 1);
      };
      const double sigma = p.spread_scale * rng.uniform(0.65, 1.1);
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const Eigen::Vector3d first = sample_center();
      w = sign * detail::bump(pos, first, sigma);
      Eigen::Vector3d second = sample_center();
      for (int tries = 0; tries < 32 && detail::great_circle(first, second) < 1.0;
           ++tries)
        second = sample_center();
      const double sigma2 = p.spread_scale * rng.uniform(0.65, 1.1);
      w -= sign * rng.uniform(0.6, 1.0) * detail::bump(pos, second, sigma2);
      break;
    }
  }

  w *= rng.uniform(1.0 - p.amplitude_jitter, 1.0 + p.amplitude_jitter);
  if (p.noise_level > 0) {
    const double peak = w.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i)
      w(i) += p.noise_level * peak * rng.gaussian() * 0.5;
  }

  GeneratedWeights out;
  out.weights = normalize_component_vector(w, labels);
  out.label = category_label(p.archetype);
  out.archetype = p.archetype;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus generation

struct CorpusCounts {
  int b_v = 0, h_e = 0, e_i = 0, ubs = 0;
  int total() const { return b_v + h_e + e_i + ubs; }
};

// Per-category sizes mirroring the published training-set composition
// (1341 / 398 / 1592 artifacts plus enough UBS for a 1341:5020 one-vs-rest
// split), scalable by a factor.
inline CorpusCounts table1_counts(double scale) {
  if (!(scale > 0)) throw RangeError("scale must be positive");
  CorpusCounts c;
  c.b_v = static_cast<int>(std::lround(1341 * scale));
  c.h_e = static_cast<int>(std::lround(398 * scale));
  c.e_i = static_cast<int>(std::lround(1592 * scale));
  c.ubs = static_cast<int>(std::lround(3030 * scale));
  return c;
}

struct CorpusOptions {
  CorpusCounts counts;
  double noise_min = 0.05, noise_max = 0.30;
  std::uint64_t seed = 0;
};

struct CorpusEntry {
  std::string file;  // relative to the corpus directory
  std::string label;
  std::string archetype;
  std::uint64_t seed = 0;
};

struct CorpusManifest {
  std::string dir;
  std::vector<CorpusEntry> entries;
  std::string manifest_path() const { return dir + "/labels.csv"; }
};

inline CorpusManifest gen_corpus(const CorpusOptions& opt, const std::string& out_dir) {
  if (opt.counts.total() <= 0) throw RangeError("corpus counts must be positive");
  if (!(opt.noise_min >= 0 && opt.noise_max >= opt.noise_min && opt.noise_max <= 0.5))
    throw RangeError("bad corpus noise range");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  const Montage& montage = Montage::standard1020();
  const ScalpLayout layout = project_electrodes(montage, montage.labels());

  // alternate the two archetypes inside each category
  std::vector<Archetype> plan;
  auto add = [&](int count, Archetype a, Archetype b) {
    for (int i = 0; i < count; ++i) plan.push_back(i % 2 == 0 ? a : b);
  };
  add(opt.counts.b_v, Archetype::BEOG, Archetype::VEOG);
  add(opt.counts.h_e, Archetype::HEOG, Archetype::ECG);
  add(opt.counts.e_i, Archetype::EMG, Archetype::IF);
  add(opt.counts.ubs, Archetype::UBS, Archetype::UBS);

  CorpusManifest manifest;
  manifest.dir = out_dir;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    Rng meta(derive_seed(opt.seed, i));
    ArchetypeParams p;
    p.archetype = plan[i];
    p.noise_level = meta.uniform(opt.noise_min, opt.noise_max);
    p.seed = meta.next_u64();
    const GeneratedWeights gw = gen_weights(p, montage);
    const Topoplot plot = render_topoplot(gw.weights, layout);
    char name[64];
    std::snprintf(name, sizeof(name), "images/%05zu_%s.png", i,
                  to_string(plan[i]).c_str());
    export_png(plot, out_dir + "/" + name);
    manifest.entries.push_back({name, gw.label, to_string(plan[i]), p.seed});
  }

  std::ofstream csv(manifest.manifest_path());
  if (!csv) throw IoError("cannot write " + manifest.manifest_path());
  csv << "file,label,archetype,seed\n";
  for (const auto& e : manifest.entries)
    csv << e.file << ',' << e.label << ',' << e.archetype << ',' << e.seed << "\n";
  if (!csv) throw IoError("write failed: " + manifest.manifest_path());
  return manifest;
}

struct CorpusSample {
  std::string file;
  std::string label;
  std::string archetype;
  std::vector<std::uint8_t> rgb;  // interleaved, raster-sized
};

inline std::vector<CorpusSample> load_corpus(const std::string& dir) {
  std::ifstream csv(dir + "/labels.csv");
  if (!csv) throw IoError("cannot open " + dir + "/labels.csv");
  std::string line;
  if (!std::getline(csv, line) || line != "file,label,archetype,seed")
    throw ParseError(dir + "/labels.csv: bad header");
  std::vector<CorpusSample> out;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CorpusSample s;
    std::string seed;
    if (!std::getline(ls, s.file, ',') || !std::getline(ls, s.label, ',') ||
        !std::getline(ls, s.archetype, ',') || !std::getline(ls, seed))
      throw ParseError(dir + "/labels.csv: malformed row: " + line);
    PngImage img = read_png_rgb8(dir + "/" + s.file);
    s.rgb = std::move(img.rgb);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recording synthesis and artifact injection (end-to-end test enablers)

struct SynthRecordingOptions {
  double seconds = 60.0;
  int sample_rate = 512;
  int n_sources = 32;  // full rank keeps every ICA slot occupied
  double source_amp_uv = 15.0;
  double sensor_noise_uv = 0.8;
  std::uint64_t seed = 0;
};

// EEG-like recording: mixture of smooth dipolar (UBS-shaped) sources with
// super-Gaussian time courses plus light channel noise.
inline Recording synth_recording(const SynthRecordingOptions& opt) {
  const Montage& montage = Montage::standard1020();
  const auto labels = montage.labels();
  const auto n_ch = static_cast<Eigen::Index>(labels.size());
  const auto n_s = static_cast<Eigen::Index>(std::llround(opt.seconds * opt.sample_rate));
  Rng rng(opt.seed);

  Eigen::MatrixXd mixing(n_ch, opt.n_sources);
  for (int k = 0; k < opt.n_sources; ++k) {
    ArchetypeParams p;
    p.archetype = Archetype::UBS;
    p.noise_level = 0.15;  // keeps the columns well spread in channel space
    p.seed = rng.next_u64();
    mixing.col(k) = gen_weights(p, montage).weights.weights *
                    (opt.source_amp_uv * rng.uniform(0.6, 1.4));
  }

  Eigen::MatrixXd sources(opt.n_sources, n_s);
  for (int k = 0; k < opt.n_sources; ++k) {
    // smoothed Laplacian noise: sparse enough for ICA, smooth in time
    double m1 = 0, m2 = 0;
    for (Eigen::Index t = 0; t < n_s; ++t) {
      const double x = rng.laplacian();
      const double y = 0.5 * (x + m1) ;
      const double z = 0.5 * (y + m2);
      m1 = x;
      m2 = y;
      sources(k, t) = z;
    }
  }

  Recording rec;
  rec.sample_rate = opt.sample_rate;
  rec.channel_names = labels;
  rec.samples = mixing * sources;
  for (Eigen::Index c = 0; c < n_ch; ++c)
    for (Eigen::Index t = 0; t < n_s; ++t)
      rec.samples(c, t) += opt.sensor_noise_uv * rng.laplacian();
  return rec;
}

using EpochSpan = std::pair<double, double>;  // seconds, [start, end)

// Adds an artifact source spatially distributed by the archetype's weight
// vector. Blink-family archetypes inject a biphasic 0.3 s pulse train, EMG a
// 15-30 Hz band-limited burst, IF a step on its single channel.
inline Recording inject_artifact(const Recording& rec, Archetype archetype,
                                 double amplitude_uv,
                                 const std::vector<EpochSpan>& epochs,
                                 std::uint64_t seed = 0) {
  if (amplitude_uv < 0) throw RangeError("amplitude must be non-negative");
  const double duration = static_cast<double>(rec.n_samples()) / rec.sample_rate;
  for (const auto& [start, end] : epochs)
    if (!(start >= 0 && end > start && end <= duration + 1e-9))
      throw RangeError("injection epoch outside the recording");
  Recording out = rec;
  if (amplitude_uv == 0) return out;

  Rng rng(seed);
  ArchetypeParams p;
  p.archetype = archetype;
  p.noise_level = 0;
  p.amplitude_jitter = 0;
  p.seed = rng.next_u64();
  const GeneratedWeights gw = gen_weights(p);
  // map montage order onto the recording's channel order
  Eigen::VectorXd pattern = Eigen::VectorXd::Zero(rec.n_channels());
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c)
    for (std::size_t m = 0; m < gw.weights.channel_names.size(); ++m)
      if (gw.weights.channel_names[m] == rec.channel_names[static_cast<std::size_t>(c)])
        pattern(c) = gw.weights.weights(static_cast<Eigen::Index>(m));

  // band-limited burst for EMG
  std::vector<double> emg_freq, emg_phase;
  for (int k = 0; k < 12; ++k) {
    emg_freq.push_back(rng.uniform(15.0, 30.0));
    emg_phase.push_back(rng.uniform(0.0, 6.283185307179586));
  }

  const double fs = rec.sample_rate;
  for (const auto& [start, end] : epochs) {
    const auto t0 = static_cast<Eigen::Index>(std::llround(start * fs));
    const auto t1 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::llround(end * fs)),
                                           rec.n_samples());
    for (Eigen::Index t = t0; t < t1; ++t) {
      const double rel = static_cast<double>(t - t0) / fs;
      double v = 0.0;
      switch (archetype) {
        case Archetype::EMG:
          for (std::size_t k = 0; k < emg_freq.size(); ++k)
            v += std::sin(6.283185307179586 * emg_freq[k] * rel + emg_phase[k]);
          v /= std::sqrt(static_cast<double>(emg_freq.size()) / 2.0);
          break;
        case Archetype::IF:
          v = 1.0;  // impedance step
          break;
        default: {
          // biphasic 0.3 s pulses repeating every second
          const double in_pulse = rel - std::floor(rel);
          v = in_pulse < 0.3 ? std::sin(6.283185307179586 * in_pulse / 0.3) : 0.0;
          break;
        }
      }
      if (v != 0.0)
        out.samples.col(t) += (amplitude_uv * v) * pattern;
    }
  }
  return out;
}

}  // namespace icascope

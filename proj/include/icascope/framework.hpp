#pragma once

#include <chrono>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icascope/errors.hpp"
#include "icascope/ica.hpp"
#include "icascope/nn/model.hpp"
#include "icascope/notch.hpp"
#include "icascope/recording.hpp"
#include "icascope/rng.hpp"
#include "icascope/topomap.hpp"

namespace icascope {

// One binary CNN per artifact class, extensible without touching the
// existing entries.
class Registry {
 public:
  struct Entry {
    nn::Model model;
    double threshold = 0.5;  // decision = score > threshold (argmax default)
  };

  void register_model(nn::Model model, const std::string& category,
                      double threshold = 0.5) {
    if (entries_.count(category))
      throw RegistryError("category already registered: " + category);
    if (model.meta.raster != nn::kRasterConvention ||
        model.net.spec.input_rows != nn::kRasterRows ||
        model.net.spec.input_cols != nn::kRasterCols)
      throw CompatibilityError("model raster convention does not match " +
                               std::string(nn::kRasterConvention));
    entries_.emplace(category, Entry{std::move(model), threshold});
  }

  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
  }

  const Entry& at(const std::string& category) const {
    auto it = entries_.find(category);
    if (it == entries_.end()) throw RegistryError("unknown category: " + category);
    return it->second;
  }

  // Canonically ordered by category name, so results never depend on
  // registration order.
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

struct CategoryResult {
  int decision = 0;
  double score = 0.0;
};

struct Detection {
  int subtrial = -1;
  int component = -1;
  std::map<std::string, CategoryResult> per_category;
  std::vector<std::string> verdict;  // empty means UBS
  std::vector<std::pair<std::string, std::string>> double_detection;
  bool is_ubs() const { return verdict.empty(); }
};

namespace detail {

inline void merge_decisions(Detection& d) {
  d.verdict.clear();
  d.double_detection.clear();
  for (const auto& [name, res] : d.per_category)
    if (res.decision) d.verdict.push_back(name);
  for (std::size_t i = 0; i < d.verdict.size(); ++i)
    for (std::size_t j = i + 1; j < d.verdict.size(); ++j)
      d.double_detection.emplace_back(d.verdict[i], d.verdict[j]);
}

}  // namespace detail

// Run every registered CNN on a batch of rasters. Each model sees the whole
// batch at once, which keeps the per-image cost close to the big-GEMM optimum.
inline std::vector<Detection> classify_all(
    const Registry& registry, const std::vector<const std::uint8_t*>& rasters) {
  if (registry.size() == 0) throw StateError("classify: empty registry");
  const int rows = nn::kRasterRows, cols = nn::kRasterCols;
  std::vector<Detection> out(rasters.size());
  constexpr std::size_t kChunk = 32;
  for (std::size_t at = 0; at < rasters.size(); at += kChunk) {
    const std::size_t n = std::min(kChunk, rasters.size() - at);
    nn::Tensor<float> batch({static_cast<int>(n), 3, rows, cols});
    const std::size_t hw = static_cast<std::size_t>(rows) * cols;
    for (std::size_t i = 0; i < n; ++i) {
      float* dst = batch.ptr() + i * 3 * hw;
      const std::uint8_t* src = rasters[at + i];
      for (std::size_t px = 0; px < hw; ++px)
        for (int c = 0; c < 3; ++c)
          dst[static_cast<std::size_t>(c) * hw + px] = src[px * 3 + c] / 255.0f;
    }
    for (const auto& [name, entry] : registry.entries()) {
      const auto scores = nn::positive_scores(entry.model, batch);
      for (std::size_t i = 0; i < n; ++i) {
        CategoryResult r;
        r.score = scores[i];
        r.decision = scores[i] > entry.threshold ? 1 : 0;
        out[at + i].per_category[name] = r;
      }
    }
  }
  for (auto& d : out) detail::merge_decisions(d);
  return out;
}

inline Detection classify(const Registry& registry, const Topoplot& plot) {
  return classify_all(registry, {plot.rgb.data()}).front();
}

// ---------------------------------------------------------------------------
// Evaluation

struct LabeledRaster {
  std::vector<std::uint8_t> rgb;
  std::string label;  // registered category name or "UBS"
};

struct CategoryMetrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  std::map<std::string, long> errors_by_true_label;

  long total() const { return tp + fp + tn + fn; }
  double accuracy_pct() const {
    return 100.0 * static_cast<double>(tp + tn) / static_cast<double>(total());
  }
  double sensitivity_pct() const {
    return tp + fn == 0 ? 100.0
                        : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double specificity_pct() const {
    return tn + fp == 0 ? 100.0
                        : 100.0 * static_cast<double>(tn) / static_cast<double>(tn + fp);
  }
};

struct Metrics {
  std::map<std::string, CategoryMetrics> per_category;
  std::map<std::pair<std::string, std::string>, long> double_detections;
  long total_positive_decisions = 0;
  long corpus_size = 0;
  // exact-verdict matches: the merged verdict equals the true label
  double overall_accuracy_pct = 0;
};

// One-vs-rest confusion per category; double detections are tallied
// separately rather than arbitrated.
inline Metrics evaluate(const Registry& registry,
                        const std::vector<LabeledRaster>& corpus) {
  if (corpus.empty()) throw DataError("evaluate: empty corpus");
  const auto categories = registry.categories();
  for (const auto& s : corpus) {
    if (s.label == "UBS") continue;
    if (std::find(categories.begin(), categories.end(), s.label) == categories.end())
      throw DataError("corpus label not registered: " + s.label);
  }
  std::vector<const std::uint8_t*> rasters;
  rasters.reserve(corpus.size());
  for (const auto& s : corpus) rasters.push_back(s.rgb.data());
  const auto detections = classify_all(registry, rasters);

  Metrics m;
  m.corpus_size = static_cast<long>(corpus.size());
  for (const auto& c : categories) m.per_category[c] = CategoryMetrics{};
  long exact = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Detection& d = detections[i];
    const std::string& truth = corpus[i].label;
    for (const auto& c : categories) {
      CategoryMetrics& cm = m.per_category[c];
      const bool is_pos = truth == c;
      const bool says_pos = d.per_category.at(c).decision != 0;
      if (says_pos && is_pos) ++cm.tp;
      else if (says_pos && !is_pos) ++cm.fp;
      else if (!says_pos && !is_pos) ++cm.tn;
      else ++cm.fn;
      if (says_pos != is_pos) ++cm.errors_by_true_label[truth];
      if (says_pos) ++m.total_positive_decisions;
    }
    for (const auto& pair : d.double_detection) ++m.double_detections[pair];
    const bool exact_match = (truth == "UBS" && d.is_ubs()) ||
                             (d.verdict.size() == 1 && d.verdict[0] == truth);
    if (exact_match) ++exact;
  }
  m.overall_accuracy_pct =
      100.0 * static_cast<double>(exact) / static_cast<double>(m.corpus_size);
  return m;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineConfig {
  std::vector<double> notch_freqs = {50.0, 60.0};
  double notch_bandwidth_hz = 2.0;
  double window_s = 8.0;
  double hop_s = 4.0;
  int max_components = 32;
  double ica_tol = 1e-4;
  int ica_max_iter = 200;
  // symmetric FastICA occasionally oscillates from an unlucky start; fresh
  // deterministic restarts recover those windows before they are skipped
  int ica_restarts = 1;
  std::uint64_t seed = 0;
};

struct SkippedWindow {
  int subtrial = -1;
  std::string reason;
};

struct StageTiming {
  double ica_s = 0, topoplot_s = 0, classify_s = 0;
  double total_s() const { return ica_s + topoplot_s + classify_s; }
};

struct PipelineResult {
  std::vector<Detection> detections;  // canonical (subtrial, component) order
  std::vector<SkippedWindow> skipped;
  StageTiming timing;
  int n_subtrials = 0;
};

inline PipelineResult run_pipeline(const Recording& rec, const Registry& registry,
                                   const PipelineConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  const Recording filtered =
      notch_filter(rec, cfg.notch_freqs, cfg.notch_bandwidth_hz);
  const auto windows = window_subtrials(filtered, cfg.window_s, cfg.hop_s);
  const ScalpLayout layout =
      project_electrodes(Montage::standard1020(), rec.channel_names);

  PipelineResult result;
  result.n_subtrials = static_cast<int>(windows.size());
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const auto t0 = clock::now();
    FastIcaOptions opts;
    opts.n_components =
        std::min<int>(cfg.max_components, static_cast<int>(rec.n_channels()));
    opts.tol = cfg.ica_tol;
    opts.max_iter = cfg.ica_max_iter;
    const std::uint64_t window_seed = derive_seed(cfg.seed, wi);
    const Whitened white = center_whiten(windows[wi].samples);
    IcaResult ica;
    for (int attempt = 0; attempt <= cfg.ica_restarts; ++attempt) {
      opts.seed = derive_seed(window_seed, static_cast<std::uint64_t>(attempt));
      ica = fast_ica(white, opts);
      if (ica.converged) break;
    }
    const auto t1 = clock::now();
    result.timing.ica_s += seconds(t0, t1);
    if (!ica.converged) {
      result.skipped.push_back({static_cast<int>(wi), "ica_not_converged"});
      continue;
    }
    std::vector<Topoplot> plots;
    plots.reserve(static_cast<std::size_t>(ica.mixing.cols()));
    std::vector<int> component_of;
    for (Eigen::Index k = 0; k < ica.mixing.cols(); ++k) {
      try {
        plots.push_back(
            render_topoplot(component_weights(ica, k, rec.channel_names), layout));
        component_of.push_back(static_cast<int>(k));
      } catch (const DegenerateComponentError&) {
        // an all-zero mixing column carries no scalp information
      }
    }
    const auto t2 = clock::now();
    result.timing.topoplot_s += seconds(t1, t2);
    std::vector<const std::uint8_t*> rasters;
    rasters.reserve(plots.size());
    for (const auto& p : plots) rasters.push_back(p.rgb.data());
    auto detections = classify_all(registry, rasters);
    for (std::size_t i = 0; i < detections.size(); ++i) {
      detections[i].subtrial = static_cast<int>(wi);
      detections[i].component = component_of[i];
    }
    result.timing.classify_s += seconds(t2, clock::now());
    result.detections.insert(result.detections.end(), detections.begin(),
                             detections.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Detection stream (line-delimited JSON records)

inline nlohmann::json detection_to_json(const Detection& d) {
  nlohmann::json scores = nlohmann::json::object();
  nlohmann::json decisions = nlohmann::json::object();
  for (const auto& [name, r] : d.per_category) {
    scores[name] = r.score;
    decisions[name] = r.decision;
  }
  nlohmann::json j{{"subtrial", d.subtrial},
                   {"component", d.component},
                   {"scores", scores},
                   {"decisions", decisions}};
  if (d.is_ubs()) {
    j["verdict"] = "UBS";
  } else {
    j["verdict"] = d.verdict;
  }
  nlohmann::json doubles = nlohmann::json::array();
  for (const auto& [a, b] : d.double_detection) doubles.push_back({a, b});
  j["double_detection"] = doubles;
  return j;
}

inline void write_detection_stream(std::ostream& out, const PipelineResult& result) {
  std::map<int, const SkippedWindow*> skipped;
  for (const auto& s : result.skipped) skipped[s.subtrial] = &s;
  std::size_t di = 0;
  for (int w = 0; w < result.n_subtrials; ++w) {
    if (auto it = skipped.find(w); it != skipped.end()) {
      out << nlohmann::json{{"subtrial", w}, {"skipped", it->second->reason}}.dump()
          << "\n";
      continue;
    }
    while (di < result.detections.size() && result.detections[di].subtrial == w)
      out << detection_to_json(result.detections[di++]).dump() << "\n";
  }
}

inline std::string detection_stream_to_string(const PipelineResult& result) {
  std::ostringstream ss;
  write_detection_stream(ss, result);
  return ss.str();
}

}  // namespace icascope

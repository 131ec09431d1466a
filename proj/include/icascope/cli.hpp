#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icascope/framework.hpp"
#include "icascope/nn/serialize.hpp"
#include "icascope/nn/train.hpp"
#include "icascope/synthgen.hpp"

namespace icascope::cli {

namespace detail {

inline Registry load_registry(const std::vector<std::string>& model_paths,
                              double threshold) {
  Registry registry;
  for (const auto& path : model_paths) {
    nn::Model model = nn::load_model(path);
    const std::string category = model.meta.category;
    registry.register_model(std::move(model), category, threshold);
  }
  return registry;
}

inline std::vector<std::string> sorted_pngs(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.path().extension() == ".png") files.push_back(e.path().string());
  if (ec) throw IoError("cannot list " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

inline void write_history_csv(const std::string& path,
                              const std::vector<nn::EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_acc,val_acc,train_loss,val_loss\n";
  char line[160];
  for (const auto& e : history) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_acc,
                  e.val_acc, e.train_loss, e.val_loss);
    out << line;
  }
  if (!out) throw IoError("write failed: " + path);
}

// One-vs-rest split: positives are the named category, negatives everything else.
inline std::vector<nn::LabeledImage> one_vs_rest(const std::vector<CorpusSample>& corpus,
                                                 const std::string& category) {
  std::vector<nn::LabeledImage> data;
  data.reserve(corpus.size());
  for (const auto& s : corpus) data.push_back({s.rgb, s.label == category});
  return data;
}

inline void print_timing(const StageTiming& t) {
  std::printf("stage timing:\n");
  std::printf("  ica                 %8.3f s\n", t.ica_s);
  std::printf("  topoplot generation %8.3f s\n", t.topoplot_s);
  std::printf("  classification      %8.3f s\n", t.classify_s);
  std::printf("  total               %8.3f s\n", t.total_s());
}

inline RecordingFormat format_for(const std::string& path, const std::string& flag) {
  if (flag == "csv") return RecordingFormat::Csv;
  if (flag == "raw-f32") return RecordingFormat::RawF32;
  if (!flag.empty()) throw RangeError("unknown recording format: " + flag);
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv"
             ? RecordingFormat::Csv
             : RecordingFormat::RawF32;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline int cmd_train(const std::string& category, const std::string& corpus_dir,
                     std::string model_out, std::string history_out,
                     nn::TrainConfig tc, int repeats) {
  nn::parse_category(category);  // validates the name
  const auto corpus = load_corpus(corpus_dir);
  const auto data = one_vs_rest(corpus, category);
  const nn::NetworkSpec spec = nn::build_architecture(nn::parse_category(category));
  if (model_out.empty()) model_out = category + ".icm";
  if (history_out.empty()) history_out = model_out + ".history.csv";

  std::vector<double> accs;
  bool first = true;
  for (int r = 0; r < repeats; ++r) {
    nn::TrainConfig run_cfg = tc;
    run_cfg.seed = tc.seed + static_cast<std::uint64_t>(r);
    nn::TrainOutcome outcome = nn::train(spec, data, run_cfg);
    accs.push_back(outcome.best_val_acc);
    std::printf("run %d: best epoch %d, val acc %.4f, val loss %.4f (%d epochs)\n", r,
                outcome.best_epoch, outcome.best_val_acc, outcome.best_val_loss,
                outcome.model.meta.epochs_trained);
    if (first) {
      nn::save_model(outcome.model, model_out);
      write_history_csv(history_out, outcome.history);
      first = false;
    }
  }
  if (repeats > 1) {
    double mean = 0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0;
    for (double a : accs) var += (a - mean) * (a - mean);
    var /= static_cast<double>(accs.size());
    std::printf("acc = %.1f ± %.1f %%\n", 100.0 * mean, 100.0 * std::sqrt(var));
  } else {
    std::printf("final val acc = %.2f %%\n", 100.0 * accs.front());
  }
  std::printf("model: %s\nhistory: %s\n", model_out.c_str(), history_out.c_str());
  return 0;
}

inline int cmd_classify(const std::vector<std::string>& model_paths,
                        const std::string& images_dir, const std::string& out_path,
                        double threshold) {
  const Registry registry = load_registry(model_paths, threshold);
  const auto files = sorted_pngs(images_dir);
  if (files.empty()) throw DataError("no .png files in " + images_dir);
  std::vector<PngImage> images;
  std::vector<const std::uint8_t*> rasters;
  for (const auto& f : files) {
    PngImage img = read_png_rgb8(f);
    if (img.rows != nn::kRasterRows || img.cols != nn::kRasterCols)
      throw ShapeError(f + ": expected a 134x136 topoplot");
    images.push_back(std::move(img));
    rasters.push_back(images.back().rgb.data());
  }
  const auto detections = classify_all(registry, rasters);
  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file_out.open(out_path);
    if (!file_out) throw IoError("cannot write " + out_path);
    out = &file_out;
  }
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    nlohmann::json j = detection_to_json(detections[i]);
    j.erase("subtrial");
    j.erase("component");
    j["file"] = std::filesystem::path(files[i]).filename().string();
    (*out) << j.dump() << "\n";
    if (!detections[i].is_ubs()) ++flagged;
  }
  std::fprintf(stderr, "%zu topoplots, %zu flagged as artifact\n", detections.size(),
               flagged);
  return 0;
}

inline int cmd_eval(const std::vector<std::string>& model_paths,
                    const std::string& corpus_dir, double threshold) {
  const Registry registry = load_registry(model_paths, threshold);
  const auto corpus = load_corpus(corpus_dir);
  std::vector<LabeledRaster> labeled;
  labeled.reserve(corpus.size());
  std::vector<std::string> truth_labels{"UBS"};
  for (const auto& s : corpus) {
    labeled.push_back({s.rgb, s.label});
    if (std::find(truth_labels.begin(), truth_labels.end(), s.label) ==
        truth_labels.end())
      truth_labels.push_back(s.label);
  }
  const Metrics m = evaluate(registry, labeled);

  std::printf("%-6s", "CNN");
  for (const auto& l : truth_labels) std::printf(" %6s", l.c_str());
  std::printf(" %6s %7s %7s %7s\n", "TOTAL", "ACC.", "SENS.", "SPEC.");
  for (const auto& [name, cm] : m.per_category) {
    std::printf("%-6s", name.c_str());
    long total = 0;
    for (const auto& l : truth_labels) {
      const auto it = cm.errors_by_true_label.find(l);
      const long n = it == cm.errors_by_true_label.end() ? 0 : it->second;
      total += n;
      std::printf(" %6ld", n);
    }
    std::printf(" %6ld %6.1f%% %6.1f%% %6.1f%%\n", total, cm.accuracy_pct(),
                cm.sensitivity_pct(), cm.specificity_pct());
  }
  for (const auto& [name, cm] : m.per_category)
    std::printf("%s confusion: TP=%ld FP=%ld TN=%ld FN=%ld\n", name.c_str(), cm.tp,
                cm.fp, cm.tn, cm.fn);
  std::printf("overall verdict accuracy: %.1f%%\n", m.overall_accuracy_pct);
  long doubles = 0;
  for (const auto& [pair, n] : m.double_detections) {
    std::printf("double detection %s/%s: %ld\n", pair.first.c_str(),
                pair.second.c_str(), n);
    doubles += n;
  }
  std::printf("double detections: %ld of %ld positive decisions\n", doubles,
              m.total_positive_decisions);
  return 0;
}

inline int cmd_pipeline(const std::string& input_path, const std::string& input_format,
                        const std::vector<std::string>& model_paths,
                        const std::string& out_path, const PipelineConfig& pc) {
  const Registry registry = load_registry(model_paths, 0.5);
  const Recording rec =
      load_recording(input_path, format_for(input_path, input_format));
  const PipelineResult result = run_pipeline(rec, registry, pc);
  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file_out.open(out_path);
    if (!file_out) throw IoError("cannot write " + out_path);
    out = &file_out;
  }
  write_detection_stream(*out, result);
  std::size_t ubs = 0;
  for (const auto& d : result.detections) ubs += d.is_ubs() ? 1 : 0;
  std::printf("%d sub-trials, %zu components classified, %zu UBS, %zu skipped\n",
              result.n_subtrials, result.detections.size(), ubs,
              result.skipped.size());
  detail::print_timing(result.timing);
  return 0;
}

inline int cmd_bench(const std::vector<std::string>& model_paths, int runs,
                     std::uint64_t seed) {
  if (runs < 1) throw RangeError("bench needs at least one run");
  const Registry registry = load_registry(model_paths, 0.5);
  SynthRecordingOptions ropt;
  ropt.seconds = 8.0;
  ropt.seed = seed;
  const Recording rec = synth_recording(ropt);
  const ScalpLayout layout =
      project_electrodes(Montage::standard1020(), rec.channel_names);
  using clock = std::chrono::steady_clock;
  std::vector<double> ica_t, topo_t, cls_t;
  for (int r = 0; r < std::max(runs, 5); ++r) {
    auto t0 = clock::now();
    FastIcaOptions opts;
    opts.n_components = 32;
    opts.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const IcaResult ica = decompose(rec.samples, opts);
    auto t1 = clock::now();
    std::vector<Topoplot> plots;
    for (Eigen::Index k = 0; k < ica.mixing.cols(); ++k)
      plots.push_back(render_topoplot(component_weights(ica, k), layout));
    auto t2 = clock::now();
    std::vector<const std::uint8_t*> rasters;
    for (const auto& p : plots) rasters.push_back(p.rgb.data());
    classify_all(registry, rasters);
    auto t3 = clock::now();
    ica_t.push_back(std::chrono::duration<double>(t1 - t0).count());
    topo_t.push_back(std::chrono::duration<double>(t2 - t1).count());
    cls_t.push_back(std::chrono::duration<double>(t3 - t2).count());
  }
  StageTiming t;
  t.ica_s = median(ica_t);
  t.topoplot_s = median(topo_t);
  t.classify_s = median(cls_t);
  std::printf("32 topoplots, median of %d runs\n", std::max(runs, 5));
  print_timing(t);
  return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"EEG artifact detection from IC topoplots"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  std::string synth_out, preset = "table1";
  double scale = 1.0, noise_min = 0.05, noise_max = 0.30;
  std::uint64_t synth_seed = 0;
  CorpusCounts counts;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--preset", preset, "corpus preset (table1)");
  synth->add_option("--scale", scale, "preset scale factor");
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--noise-min", noise_min, "minimum channel noise level");
  synth->add_option("--noise-max", noise_max, "maximum channel noise level");
  synth->add_option("--count-bv", counts.b_v, "explicit B_V count (overrides preset)");
  synth->add_option("--count-he", counts.h_e, "explicit H_E count");
  synth->add_option("--count-ei", counts.e_i, "explicit E_I count");
  synth->add_option("--count-ubs", counts.ubs, "explicit UBS count");

  auto* train_cmd = app.add_subcommand("train", "train one category's CNN");
  std::string train_category, corpus_dir, model_out, history_out;
  nn::TrainConfig tc;
  int repeats = 1;
  train_cmd->add_option("--category", train_category, "B_V, H_E or E_I")
      ->required()
      ->check(CLI::IsMember({"B_V", "H_E", "E_I"}));
  train_cmd->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--out", model_out, "model file to write");
  train_cmd->add_option("--history", history_out, "history CSV path");
  train_cmd->add_option("--seed", tc.seed, "training seed");
  train_cmd->add_option("--epochs", tc.max_epochs, "epoch cap (<=400)");
  train_cmd->add_option("--lr", tc.learning_rate, "learning rate");
  train_cmd->add_option("--batch", tc.batch_size, "minibatch size");
  train_cmd->add_option("--momentum", tc.momentum, "SGD momentum");
  train_cmd->add_option("--clip", tc.clip_norm, "L2 gradient clip threshold");
  train_cmd->add_option("--patience", tc.patience, "early-stop patience (epochs)");
  train_cmd->add_option("--repeats", repeats, "repeat training, report mean±std");

  auto* classify_cmd =
      app.add_subcommand("classify", "classify a directory of topoplot PNGs");
  std::vector<std::string> model_paths;
  std::string images_dir, detections_out;
  double threshold = 0.5;
  classify_cmd->add_option("--models", model_paths, "model files")
      ->required()
      ->delimiter(',');
  classify_cmd->add_option("--images", images_dir, "PNG directory")->required();
  classify_cmd->add_option("--out", detections_out,
                           "detection stream path (default stdout)");
  classify_cmd->add_option("--threshold", threshold, "decision threshold");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate models on a labeled corpus");
  std::vector<std::string> eval_models;
  std::string eval_corpus;
  double eval_threshold = 0.5;
  eval_cmd->add_option("--models", eval_models, "model files")
      ->required()
      ->delimiter(',');
  eval_cmd->add_option("--corpus", eval_corpus, "corpus directory")->required();
  eval_cmd->add_option("--threshold", eval_threshold, "decision threshold");

  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "run the full detection pipeline");
  std::vector<std::string> pipe_models;
  std::string input_path, input_format, stream_out;
  PipelineConfig pc;
  pipeline_cmd->add_option("--input", input_path, "recording (csv or raw-f32)")
      ->required();
  pipeline_cmd->add_option("--format", input_format,
                           "csv or raw-f32 (default: by extension)");
  pipeline_cmd->add_option("--models", pipe_models, "model files")
      ->required()
      ->delimiter(',');
  pipeline_cmd->add_option("--out", stream_out,
                           "detection stream path (default stdout)");
  pipeline_cmd->add_option("--window", pc.window_s, "sub-trial length, seconds");
  pipeline_cmd->add_option("--hop", pc.hop_s, "sub-trial hop, seconds");
  pipeline_cmd->add_option("--notch", pc.notch_freqs, "notch frequencies, Hz")
      ->delimiter(',');
  pipeline_cmd->add_option("--bandwidth", pc.notch_bandwidth_hz,
                           "notch -3dB bandwidth, Hz");
  pipeline_cmd->add_option("--max-components", pc.max_components,
                           "IC cap per sub-trial");
  pipeline_cmd->add_option("--seed", pc.seed, "pipeline seed");

  auto* bench_cmd =
      app.add_subcommand("bench", "time the 32-topoplot stage decomposition");
  std::vector<std::string> bench_models;
  int bench_runs = 5;
  std::uint64_t bench_seed = 0;
  bench_cmd->add_option("--models", bench_models, "model files")
      ->required()
      ->delimiter(',');
  bench_cmd->add_option("--runs", bench_runs, "number of runs (median reported)");
  bench_cmd->add_option("--seed", bench_seed, "recording seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      CorpusOptions opt;
      if (counts.total() > 0) {
        opt.counts = counts;
      } else {
        if (preset != "table1") throw RangeError("unknown preset: " + preset);
        opt.counts = table1_counts(scale);
      }
      opt.noise_min = noise_min;
      opt.noise_max = noise_max;
      opt.seed = synth_seed;
      const CorpusManifest manifest = gen_corpus(opt, synth_out);
      std::map<std::string, int> by_label;
      for (const auto& e : manifest.entries) ++by_label[e.label];
      std::printf("manifest: %s\n", manifest.manifest_path().c_str());
      for (const auto& [label, n] : by_label)
        std::printf("  %-4s %d\n", label.c_str(), n);
      return 0;
    }
    if (train_cmd->parsed())
      return detail::cmd_train(train_category, corpus_dir, model_out, history_out, tc,
                               repeats);
    if (classify_cmd->parsed())
      return detail::cmd_classify(model_paths, images_dir, detections_out, threshold);
    if (eval_cmd->parsed())
      return detail::cmd_eval(eval_models, eval_corpus, eval_threshold);
    if (pipeline_cmd->parsed())
      return detail::cmd_pipeline(input_path, input_format, pipe_models, stream_out, pc);
    if (bench_cmd->parsed())
      return detail::cmd_bench(bench_models, bench_runs, bench_seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace icascope::cli

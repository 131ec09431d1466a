#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icascope/errors.hpp"
#include "icascope/montage.hpp"

namespace icascope {

// Multichannel EEG, channel-major, microvolts.
struct Recording {
  Eigen::MatrixXd samples;  // n_channels x n_samples
  int sample_rate = 0;      // Hz
  std::vector<std::string> channel_names;

  Eigen::Index n_channels() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }
};

struct SubTrial {
  Eigen::MatrixXd samples;  // n_channels x window_samples
  Eigen::Index start_sample = 0;
  double duration_s = 0.0;
};

enum class RecordingFormat { Csv, RawF32 };

namespace detail {
constexpr char kRawMagic[16] = {'I', 'C', 'A', 'S', 'C', 'O', 'P', 'E',
                                '-', 'R', 'A', 'W', 0, 0, 0, 0};
}

inline void validate_recording(const Recording& rec,
                               const Montage& montage = Montage::standard1020()) {
  if (rec.sample_rate <= 0) throw ParseError("recording: sample rate must be positive");
  if (rec.n_channels() < 2) throw ParseError("recording: need at least 2 channels");
  if (rec.n_samples() < 1) throw ParseError("recording: no samples");
  if (static_cast<Eigen::Index>(rec.channel_names.size()) != rec.n_channels())
    throw ParseError("recording: channel name count does not match sample rows");
  std::set<std::string> seen;
  for (const auto& name : rec.channel_names) {
    if (!seen.insert(name).second)
      throw ParseError("recording: duplicate channel " + name);
    if (!montage.contains(name)) throw MontageError("unknown channel label: " + name);
  }
}

namespace detail {

inline Recording load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# fs=", 0) != 0)
    throw ParseError(path + ": first line must be '# fs=<int>'");
  int fs = 0;
  try {
    fs = std::stoi(line.substr(5));
  } catch (const std::exception&) {
    throw ParseError(path + ": bad sample rate in header");
  }
  if (!std::getline(in, line)) throw ParseError(path + ": missing channel list");
  std::vector<std::string> names;
  {
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) names.push_back(tok);
  }
  std::vector<double> values;
  std::size_t n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::size_t n_fields = 0;
    while (std::getline(ls, tok, ',')) {
      try {
        values.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(path + ": bad sample value '" + tok + "'");
      }
      ++n_fields;
    }
    if (n_fields != names.size())
      throw ParseError(path + ": row has " + std::to_string(n_fields) +
                       " fields, header declares " + std::to_string(names.size()));
    ++n_rows;
  }
  Recording rec;
  rec.sample_rate = fs;
  rec.channel_names = names;
  rec.samples.resize(static_cast<Eigen::Index>(names.size()),
                     static_cast<Eigen::Index>(n_rows));
  for (std::size_t t = 0; t < n_rows; ++t)
    for (std::size_t c = 0; c < names.size(); ++c)
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          values[t * names.size() + c];
  validate_recording(rec);
  return rec;
}

inline Recording load_raw_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[16];
  if (!in.read(magic, 16) || std::memcmp(magic, kRawMagic, 16) != 0)
    throw ParseError(path + ": bad magic");
  std::uint32_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), 4))
    throw ParseError(path + ": truncated header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) throw ParseError(path + ": truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad header json: " + e.what());
  }
  if (!j.contains("fs") || !j.contains("channels"))
    throw ParseError(path + ": header must declare fs and channels");
  Recording rec;
  rec.sample_rate = j["fs"].get<int>();
  rec.channel_names = j["channels"].get<std::vector<std::string>>();
  std::vector<char> payload(std::istreambuf_iterator<char>(in), {});
  const std::size_t n_ch = rec.channel_names.size();
  if (n_ch == 0 || payload.size() % (4 * n_ch) != 0)
    throw ParseError(path + ": payload size is not a whole number of samples");
  const std::size_t n_s = payload.size() / (4 * n_ch);
  rec.samples.resize(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(n_s));
  const auto* f = reinterpret_cast<const float*>(payload.data());
  for (std::size_t c = 0; c < n_ch; ++c)
    for (std::size_t t = 0; t < n_s; ++t)
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          static_cast<double>(f[c * n_s + t]);
  validate_recording(rec);
  return rec;
}

}  // namespace detail

inline Recording load_recording(const std::string& path, RecordingFormat format) {
  return format == RecordingFormat::Csv ? detail::load_csv(path)
                                        : detail::load_raw_f32(path);
}

inline void save_recording(const Recording& rec, const std::string& path,
                           RecordingFormat format) {
  if (format == RecordingFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# fs=" << rec.sample_rate << "\n";
    for (std::size_t c = 0; c < rec.channel_names.size(); ++c)
      out << (c ? "," : "") << rec.channel_names[c];
    out << "\n";
    out.precision(17);
    for (Eigen::Index t = 0; t < rec.n_samples(); ++t) {
      for (Eigen::Index c = 0; c < rec.n_channels(); ++c)
        out << (c ? "," : "") << rec.samples(c, t);
      out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(detail::kRawMagic, 16);
  nlohmann::json j{{"fs", rec.sample_rate}, {"channels", rec.channel_names}};
  const std::string header = j.dump();
  const auto header_len = static_cast<std::uint32_t>(header.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header.data(), header.size());
  std::vector<float> buf(static_cast<std::size_t>(rec.n_samples()));
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    for (Eigen::Index t = 0; t < rec.n_samples(); ++t)
      buf[static_cast<std::size_t>(t)] = static_cast<float>(rec.samples(c, t));
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!out) throw IoError("write failed: " + path);
}

// Cuts partially overlapped windows; trailing samples that cannot fill a
// whole window are dropped.
inline std::vector<SubTrial> window_subtrials(const Recording& rec,
                                              double window_s = 8.0,
                                              double hop_s = 4.0) {
  const double ws = window_s * rec.sample_rate;
  const double hs = hop_s * rec.sample_rate;
  if (window_s <= 0 || hop_s <= 0 || ws != std::floor(ws) || hs != std::floor(hs))
    throw WindowError("window and hop must span a whole number of samples");
  const auto window = static_cast<Eigen::Index>(ws);
  const auto hop = static_cast<Eigen::Index>(hs);
  if (rec.n_samples() < window)
    throw WindowError("recording shorter than one window");
  const Eigen::Index count = (rec.n_samples() - window) / hop + 1;
  std::vector<SubTrial> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    SubTrial st;
    st.start_sample = i * hop;
    st.duration_s = window_s;
    st.samples = rec.samples.middleCols(st.start_sample, window);
    out.push_back(std::move(st));
  }
  return out;
}

}  // namespace icascope

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "icascope/errors.hpp"
#include "icascope/nn/model.hpp"

namespace icascope::nn {

namespace detail {

constexpr char kModelMagic[] = "ICASCOPE-MDL1";  // 13 bytes on disk
constexpr std::size_t kModelMagicLen = 13;

inline nlohmann::json spec_to_json(const NetworkSpec& s, const ModelMeta& meta) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : s.blocks)
    blocks.push_back({{"filters", b.filters},
                      {"pool", b.pool},
                      {"pool_window", b.pool_window},
                      {"pool_stride", b.pool_stride}});
  return nlohmann::json{{"format", 1},
                        {"category", s.category},
                        {"input_rows", s.input_rows},
                        {"input_cols", s.input_cols},
                        {"kernel", s.kernel},
                        {"conv_stride", s.conv_stride},
                        {"conv_pad", s.conv_pad},
                        {"bn_eps", s.bn_eps},
                        {"bn_momentum", s.bn_momentum},
                        {"blocks", blocks},
                        {"fc_outputs", s.fc_outputs},
                        {"raster", s.raster},
                        {"meta",
                         {{"seed", meta.seed},
                          {"epochs_trained", meta.epochs_trained},
                          {"val_accuracy", meta.val_accuracy}}}};
}

// Weight/bias/batchnorm tensors in declaration order.
inline std::vector<typename Network<float>::Span> serialized_tensors(Network<float>& net) {
  std::vector<typename Network<float>::Span> out;
  for (auto& b : net.blocks) {
    out.push_back({b.conv.weight.data(), static_cast<std::size_t>(b.conv.weight.size())});
    out.push_back({b.conv.bias.data(), static_cast<std::size_t>(b.conv.bias.size())});
    out.push_back({b.bn.gamma.data(), static_cast<std::size_t>(b.bn.gamma.size())});
    out.push_back({b.bn.beta.data(), static_cast<std::size_t>(b.bn.beta.size())});
    out.push_back({b.bn.running_mean.data(), static_cast<std::size_t>(b.bn.running_mean.size())});
    out.push_back({b.bn.running_var.data(), static_cast<std::size_t>(b.bn.running_var.size())});
  }
  out.push_back({net.fc.weight.data(), static_cast<std::size_t>(net.fc.weight.size())});
  out.push_back({net.fc.bias.data(), static_cast<std::size_t>(net.fc.bias.size())});
  return out;
}

}  // namespace detail

inline void save_model(const Model& model, const std::string& path) {
  // body = header(json) + raw little-endian float32 parameters
  const std::string header =
      detail::spec_to_json(model.net.spec, model.meta).dump();
  std::vector<char> body;
  const auto header_len = static_cast<std::uint32_t>(header.size());
  body.insert(body.end(), reinterpret_cast<const char*>(&header_len),
              reinterpret_cast<const char*>(&header_len) + 4);
  body.insert(body.end(), header.begin(), header.end());
  auto& net = const_cast<Network<float>&>(model.net);
  for (const auto& span : detail::serialized_tensors(net)) {
    const char* p = reinterpret_cast<const char*>(span.data);
    body.insert(body.end(), p, p + span.size * sizeof(float));
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size())));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(detail::kModelMagic, detail::kModelMagicLen);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.write(reinterpret_cast<const char*>(&crc), 4);
  if (!out) throw IoError("write failed: " + path);
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  if (bytes.size() < detail::kModelMagicLen + 8 ||
      std::memcmp(bytes.data(), detail::kModelMagic, detail::kModelMagicLen) != 0)
    throw ParseError(path + ": not a model file (bad magic)");
  const std::size_t body_len = bytes.size() - detail::kModelMagicLen - 4;
  const char* body = bytes.data() + detail::kModelMagicLen;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, body + body_len, 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body), static_cast<uInt>(body_len)));
  if (crc != stored_crc) throw ParseError(path + ": checksum mismatch");

  std::uint32_t header_len;
  if (body_len < 4) throw ParseError(path + ": truncated");
  std::memcpy(&header_len, body, 4);
  if (body_len < 4 + header_len) throw ParseError(path + ": truncated header");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(std::string(body + 4, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad model header: " + e.what());
  }
  NetworkSpec spec;
  spec.category = j.at("category").get<std::string>();
  spec.input_rows = j.at("input_rows").get<int>();
  spec.input_cols = j.at("input_cols").get<int>();
  spec.kernel = j.at("kernel").get<int>();
  spec.conv_stride = j.at("conv_stride").get<int>();
  spec.conv_pad = j.at("conv_pad").get<int>();
  spec.bn_eps = j.at("bn_eps").get<double>();
  spec.bn_momentum = j.at("bn_momentum").get<double>();
  spec.fc_outputs = j.at("fc_outputs").get<int>();
  spec.raster = j.at("raster").get<std::string>();
  for (const auto& jb : j.at("blocks")) {
    BlockSpec b;
    b.filters = jb.at("filters").get<int>();
    b.pool = jb.at("pool").get<bool>();
    b.pool_window = jb.at("pool_window").get<int>();
    b.pool_stride = jb.at("pool_stride").get<int>();
    spec.blocks.push_back(b);
  }
  Model model;
  model.net = Network<float>::build(spec, 0);
  model.meta.category = spec.category;
  model.meta.raster = spec.raster;
  model.meta.seed = j.at("meta").at("seed").get<std::uint64_t>();
  model.meta.epochs_trained = j.at("meta").at("epochs_trained").get<int>();
  model.meta.val_accuracy = j.at("meta").at("val_accuracy").get<double>();

  const char* cursor = body + 4 + header_len;
  std::size_t remaining = body_len - 4 - header_len;
  for (const auto& span : detail::serialized_tensors(model.net)) {
    const std::size_t nbytes = span.size * sizeof(float);
    if (remaining < nbytes) throw ParseError(path + ": parameter payload truncated");
    std::memcpy(span.data, cursor, nbytes);
    cursor += nbytes;
    remaining -= nbytes;
  }
  if (remaining != 0) throw ParseError(path + ": trailing bytes after parameters");
  return model;
}

}  // namespace icascope::nn

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "icascope/errors.hpp"

namespace icascope {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// 64-level Parula ramp, dark blue to bright yellow. Also shipped as
// assets/parula64.csv, which the tests treat as the source of truth.
inline const char* parula64_csv() {
  return
      "53,42,135\n"
      "47,49,146\n"
      "40,56,158\n"
      "34,64,169\n"
      "28,71,181\n"
      "21,78,192\n"
      "15,85,204\n"
      "9,93,215\n"
      "3,100,225\n"
      "5,104,223\n"
      "8,108,221\n"
      "10,112,220\n"
      "12,117,218\n"
      "14,121,217\n"
      "16,125,215\n"
      "18,130,213\n"
      "20,134,212\n"
      "18,138,210\n"
      "16,143,208\n"
      "14,147,206\n"
      "12,151,204\n"
      "11,156,203\n"
      "9,160,201\n"
      "7,164,199\n"
      "8,168,196\n"
      "15,170,191\n"
      "21,172,186\n"
      "27,175,181\n"
      "34,177,176\n"
      "40,179,171\n"
      "46,182,166\n"
      "53,184,161\n"
      "62,185,155\n"
      "73,186,150\n"
      "85,187,144\n"
      "96,188,139\n"
      "107,188,133\n"
      "119,189,128\n"
      "130,190,123\n"
      "142,191,117\n"
      "152,191,113\n"
      "161,190,109\n"
      "170,189,105\n"
      "179,189,102\n"
      "188,188,98\n"
      "197,187,94\n"
      "206,187,91\n"
      "215,186,87\n"
      "220,188,82\n"
      "225,190,77\n"
      "229,193,72\n"
      "234,196,67\n"
      "238,198,62\n"
      "243,201,57\n"
      "247,203,52\n"
      "251,206,47\n"
      "252,211,42\n"
      "251,217,38\n"
      "251,222,34\n"
      "251,228,30\n"
      "250,234,26\n"
      "250,240,22\n"
      "249,245,18\n"
      "249,251,14\n";
}

inline const std::array<Rgb, 64>& parula64_table() {
  static const std::array<Rgb, 64> table = [] {
    std::array<Rgb, 64> t{};
    std::istringstream in(parula64_csv());
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      int r, g, b;
      char c1, c2;
      ls >> r >> c1 >> g >> c2 >> b;
      t.at(i++) = Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                      static_cast<std::uint8_t>(b)};
    }
    if (i != 64) throw ParseError("parula64: expected 64 entries");
    return t;
  }();
  return table;
}

// Quantized lookup: entry floor(v*63); v = 1 returns the last entry.
inline Rgb parula64(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw RangeError("parula64: value outside [0,1]");
  int idx = static_cast<int>(std::floor(v * 63.0));
  if (idx > 63) idx = 63;
  return parula64_table()[static_cast<std::size_t>(idx)];
}

}  // namespace icascope

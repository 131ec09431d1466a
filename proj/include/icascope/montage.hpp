#pragma once

#include <Eigen/Dense>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icascope/errors.hpp"

namespace icascope {

// Unit-sphere head coordinates of the standard 10-20 positions used by DEAP.
// Frame: x toward the nose, y toward the left ear, z toward the vertex.
// Values follow the idealized 10-20 construction (circumference ring at
// 72 deg polar, midline at 10% steps, intermediate electrodes on the circle
// through their ring anchor, midline point and mirrored anchor). The same
// table ships as assets/montage1020.csv; a test keeps the two in sync.
inline const char* montage1020_csv() {
  return
      "Fp1,0.904508497187,0.293892626146,0.309016994375\n"
      "AF3,0.798559031945,0.312961496656,0.514158121700\n"
      "F3,0.579959681937,0.459030529990,0.673006493182\n"
      "F7,0.559016994375,0.769420884294,0.309016994375\n"
      "FC5,0.300012962899,0.765784151467,0.568829372883\n"
      "FC1,0.307950375560,0.291089467475,0.905777835961\n"
      "C3,0.000000000000,0.587785252292,0.809016994375\n"
      "T7,0.000000000000,0.951056516295,0.309016994375\n"
      "CP5,-0.300012962899,0.765784151467,0.568829372883\n"
      "CP1,-0.307950375560,0.291089467475,0.905777835961\n"
      "P3,-0.579959681937,0.459030529990,0.673006493182\n"
      "P7,-0.559016994375,0.769420884294,0.309016994375\n"
      "PO3,-0.798559031945,0.312961496656,0.514158121700\n"
      "O1,-0.904508497187,0.293892626146,0.309016994375\n"
      "Oz,-0.951056516295,0.000000000000,0.309016994375\n"
      "Pz,-0.587785252292,0.000000000000,0.809016994375\n"
      "Fp2,0.904508497187,-0.293892626146,0.309016994375\n"
      "AF4,0.798559031945,-0.312961496656,0.514158121700\n"
      "Fz,0.587785252292,0.000000000000,0.809016994375\n"
      "F4,0.579959681937,-0.459030529990,0.673006493182\n"
      "F8,0.559016994375,-0.769420884294,0.309016994375\n"
      "FC6,0.300012962899,-0.765784151467,0.568829372883\n"
      "FC2,0.307950375560,-0.291089467475,0.905777835961\n"
      "Cz,0.000000000000,0.000000000000,1.000000000000\n"
      "C4,0.000000000000,-0.587785252292,0.809016994375\n"
      "T8,0.000000000000,-0.951056516295,0.309016994375\n"
      "CP6,-0.300012962899,-0.765784151467,0.568829372883\n"
      "CP2,-0.307950375560,-0.291089467475,0.905777835961\n"
      "P4,-0.579959681937,-0.459030529990,0.673006493182\n"
      "P8,-0.559016994375,-0.769420884294,0.309016994375\n"
      "PO4,-0.798559031945,-0.312961496656,0.514158121700\n"
      "O2,-0.904508497187,-0.293892626146,0.309016994375\n";
}

class Montage {
 public:
  static Montage from_csv(const std::string& text) {
    Montage m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string label, xs, ys, zs;
      if (!std::getline(ls, label, ',') || !std::getline(ls, xs, ',') ||
          !std::getline(ls, ys, ',') || !std::getline(ls, zs))
        throw ParseError("montage: malformed line: " + line);
      Eigen::Vector3d p(std::stod(xs), std::stod(ys), std::stod(zs));
      if (std::abs(p.norm() - 1.0) > 1e-9)
        throw MontageError("montage: " + label + " is not on the unit sphere");
      m.table_.emplace(label, p);
      m.labels_.push_back(label);
    }
    return m;
  }

  // The built-in 32-label DEAP table.
  static const Montage& standard1020() {
    static const Montage m = from_csv(montage1020_csv());
    return m;
  }

  bool contains(const std::string& label) const { return table_.count(label) != 0; }

  const Eigen::Vector3d& position(const std::string& label) const {
    auto it = table_.find(label);
    if (it == table_.end()) throw MontageError("unknown channel label: " + label);
    return it->second;
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, Eigen::Vector3d> table_;
  std::vector<std::string> labels_;  // file order
};

}  // namespace icascope

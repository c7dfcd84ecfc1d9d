#pragma once

#include <map>
#include <string>
#include <vector>

#include "sqpf/folds.hpp"
#include "sqpf/grid.hpp"

namespace sqpf {

// Dice overlap in [0,100]: 2|A∩B| / (|A|+|B|) * 100. Two empty masks agree
// perfectly and score 100.
double dice_score(const MaskGrid& pred, const MaskGrid& gt);

// Running intersection/size sums for per-volume Dice over stacked slices.
struct DiceAccumulator {
  long long intersection = 0;
  long long total = 0;  // |A| + |B|

  void add(const MaskGrid& pred, const MaskGrid& gt);
  double dice() const;  // 100 when nothing was accumulated (both empty)
};

struct DiceReport {
  std::map<std::string, double> per_class;  // class -> mean Dice over volumes/episodes
  std::map<std::string, std::vector<std::pair<std::string, double>>> per_volume;
  std::vector<double> per_fold;  // fold means (aggregates only)
  double mean = 0.0;             // arithmetic mean of per-class means
  std::string config_hash;
  std::string dice_protocol;  // "volume" or "episode"
  int fold = -1;
  Setting setting = Setting::kSetting1;

  void finalize();  // recompute mean from per_class
};

}  // namespace sqpf

#include "sqpf/metrics.hpp"

#include "sqpf/errors.hpp"

namespace sqpf {

double dice_score(const MaskGrid& pred, const MaskGrid& gt) {
  if (!pred.same_shape(gt))
    throw DataError("dice_score: shape mismatch " + std::to_string(pred.rows()) + "x" +
                    std::to_string(pred.cols()) + " vs " + std::to_string(gt.rows()) + "x" +
                    std::to_string(gt.cols()));
  long long inter = 0, total = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.raw()[i] != 0;
    const bool b = gt.raw()[i] != 0;
    inter += a && b;
    total += a;
    total += b;
  }
  if (total == 0) return 100.0;  // both empty: perfect agreement
  return 200.0 * static_cast<double>(inter) / static_cast<double>(total);
}

void DiceAccumulator::add(const MaskGrid& pred, const MaskGrid& gt) {
  if (!pred.same_shape(gt)) throw DataError("DiceAccumulator: shape mismatch");
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.raw()[i] != 0;
    const bool b = gt.raw()[i] != 0;
    intersection += a && b;
    total += a;
    total += b;
  }
}

double DiceAccumulator::dice() const {
  if (total == 0) return 100.0;
  return 200.0 * static_cast<double>(intersection) / static_cast<double>(total);
}

void DiceReport::finalize() {
  mean = 0.0;
  if (per_class.empty()) return;
  for (const auto& [cls, d] : per_class) mean += d;
  mean /= static_cast<double>(per_class.size());
}

}  // namespace sqpf

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sqpf/folds.hpp"
#include "sqpf/slices.hpp"

namespace sqpf {

// Immutable slice store plus fold-aware pool views. Once assembled, a dataset
// is shareable across threads.
class SliceDataset {
 public:
  SliceDataset() = default;

  // `normalized` states whether the samples already carry zero-mean
  // unit-variance images (slice_and_resize output does; synthetic and
  // disk-loaded samples do not and get normalized here).
  static SliceDataset assemble(std::vector<SliceSample> samples, bool normalized);

  const std::vector<SliceSample>& slices() const { return slices_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::string>& cases() const { return cases_; }
  int image_size() const { return image_size_; }

  std::vector<const SliceSample*> all() const;

  // Slices usable for training episodes: cases outside `fold`; under
  // Setting 2 additionally no test-class slices. A nonempty train_classes
  // list restricts the pool to those classes.
  std::vector<const SliceSample*> training_pool(const FoldPlan& plan, int fold) const;

  // Slices evaluated for `fold`: cases inside the fold, test classes only.
  std::vector<const SliceSample*> evaluation_pool(const FoldPlan& plan, int fold) const;

  // Evaluation-support slices for `fold`: test-class slices from cases
  // outside the fold (annotated exemplars of the class being evaluated).
  std::vector<const SliceSample*> support_pool(const FoldPlan& plan, int fold) const;

 private:
  std::vector<SliceSample> slices_;
  std::vector<std::string> classes_;
  std::vector<std::string> cases_;
  int image_size_ = 0;
};

// On-disk layout: dataset_manifest.json + images/*.pgm (16-bit) +
// masks/*.pgm (8-bit, 0/255), optional fold_plan.json. Samples are stored
// as-is (raw or normalized intensities); loading always re-normalizes.
void save_dataset(const std::filesystem::path& dir, const std::vector<SliceSample>& samples,
                  const std::string& kind, std::uint64_t seed);
SliceDataset load_dataset(const std::filesystem::path& dir);

void save_fold_plan(const std::filesystem::path& dir, const FoldPlan& plan);
FoldPlan load_fold_plan(const std::filesystem::path& dir);

}  // namespace sqpf

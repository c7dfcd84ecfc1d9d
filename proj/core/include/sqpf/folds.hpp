#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sqpf {

// Setting 1: test classes may appear in training episodes.
// Setting 2: test-class slices are banned from training entirely.
enum class Setting { kSetting1 = 1, kSetting2 = 2 };

struct ClassSplit {
  std::vector<std::string> train_classes;
  std::vector<std::string> test_classes;
};

struct FoldPlan {
  int k_folds = 0;
  std::map<std::string, int> assignments;  // case_id -> fold index
  Setting setting = Setting::kSetting1;
  // Empty lists mean "all classes" (Setting 1 only).
  std::vector<std::string> train_classes;
  std::vector<std::string> test_classes;

  std::vector<std::string> fold_cases(int fold) const;
  bool is_test_class(const std::string& cls) const;
};

// Seeded near-equal partition of the cases (fold sizes differ by at most 1).
// Setting 2 requires a class split with disjoint train/test sets.
FoldPlan make_folds(const std::vector<std::string>& cases, int k, Setting setting,
                    const std::optional<ClassSplit>& class_split = std::nullopt,
                    std::uint64_t seed = 0);

std::string fold_plan_to_json(const FoldPlan& plan);
FoldPlan fold_plan_from_json(const std::string& json_text);

}  // namespace sqpf

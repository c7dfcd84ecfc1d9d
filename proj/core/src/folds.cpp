#include "sqpf/folds.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "sqpf/errors.hpp"

namespace sqpf {

std::vector<std::string> FoldPlan::fold_cases(int fold) const {
  std::vector<std::string> out;
  for (const auto& [case_id, f] : assignments)
    if (f == fold) out.push_back(case_id);
  return out;
}

bool FoldPlan::is_test_class(const std::string& cls) const {
  if (test_classes.empty()) return true;  // "all classes"
  return std::find(test_classes.begin(), test_classes.end(), cls) != test_classes.end();
}

FoldPlan make_folds(const std::vector<std::string>& cases, int k, Setting setting,
                    const std::optional<ClassSplit>& class_split, std::uint64_t seed) {
  if (k < 2) throw DataError("make_folds: k must be >= 2");
  if (static_cast<int>(cases.size()) < k)
    throw DataError("make_folds: k=" + std::to_string(k) + " exceeds number of cases (" +
                    std::to_string(cases.size()) + ")");
  std::vector<std::string> sorted(cases);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DataError("make_folds: duplicate case ids");

  FoldPlan plan;
  plan.k_folds = k;
  plan.setting = setting;
  if (setting == Setting::kSetting2) {
    if (!class_split) throw DataError("make_folds: Setting 2 requires a class split");
  }
  if (class_split) {
    std::set<std::string> train(class_split->train_classes.begin(),
                                class_split->train_classes.end());
    for (const auto& cls : class_split->test_classes)
      if (train.count(cls))
        throw DataError("make_folds: class '" + cls + "' appears in both train and test splits");
    plan.train_classes = class_split->train_classes;
    plan.test_classes = class_split->test_classes;
    std::sort(plan.train_classes.begin(), plan.train_classes.end());
    std::sort(plan.test_classes.begin(), plan.test_classes.end());
  }

  std::mt19937_64 rng(seed);
  std::shuffle(sorted.begin(), sorted.end(), rng);
  for (size_t i = 0; i < sorted.size(); ++i)
    plan.assignments[sorted[i]] = static_cast<int>(i % k);
  return plan;
}

std::string fold_plan_to_json(const FoldPlan& plan) {
  nlohmann::json j;
  j["k_folds"] = plan.k_folds;
  j["setting"] = plan.setting == Setting::kSetting2 ? 2 : 1;
  j["assignments"] = plan.assignments;
  j["train_classes"] = plan.train_classes;
  j["test_classes"] = plan.test_classes;
  return j.dump(2) + "\n";
}

FoldPlan fold_plan_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed fold plan JSON: ") + e.what());
  }
  FoldPlan plan;
  plan.k_folds = j.at("k_folds").get<int>();
  plan.setting = j.at("setting").get<int>() == 2 ? Setting::kSetting2 : Setting::kSetting1;
  plan.assignments = j.at("assignments").get<std::map<std::string, int>>();
  plan.train_classes = j.at("train_classes").get<std::vector<std::string>>();
  plan.test_classes = j.at("test_classes").get<std::vector<std::string>>();
  return plan;
}

}  // namespace sqpf

#include "sqpf/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "sqpf/image_ops.hpp"
#include "sqpf/pgm_io.hpp"

namespace sqpf {

namespace fs = std::filesystem;

SliceDataset SliceDataset::assemble(std::vector<SliceSample> samples, bool normalized) {
  if (samples.empty()) throw DataError("SliceDataset: no samples");
  SliceDataset ds;
  ds.image_size_ = samples.front().image.rows();
  std::set<std::string> classes, cases;
  for (auto& s : samples) {
    if (s.image.rows() != ds.image_size_ || s.image.cols() != ds.image_size_ ||
        !s.mask.same_shape(MaskGrid(ds.image_size_, ds.image_size_)))
      throw DataError("SliceDataset: inconsistent sample shapes");
    if (mask_area(s.mask) == 0)
      throw DataError("SliceDataset: sample with empty foreground (case " + s.case_id + ")");
    if (!normalized) normalize_slice(s.image);
    classes.insert(s.class_label);
    cases.insert(s.case_id);
  }
  ds.classes_.assign(classes.begin(), classes.end());
  ds.cases_.assign(cases.begin(), cases.end());
  // stable order: by case, class, slice index
  std::sort(samples.begin(), samples.end(), [](const SliceSample& a, const SliceSample& b) {
    if (a.case_id != b.case_id) return a.case_id < b.case_id;
    if (a.class_label != b.class_label) return a.class_label < b.class_label;
    return a.slice_index < b.slice_index;
  });
  ds.slices_ = std::move(samples);
  return ds;
}

std::vector<const SliceSample*> SliceDataset::all() const {
  std::vector<const SliceSample*> out;
  out.reserve(slices_.size());
  for (const auto& s : slices_) out.push_back(&s);
  return out;
}

std::vector<const SliceSample*> SliceDataset::training_pool(const FoldPlan& plan,
                                                            int fold) const {
  std::vector<const SliceSample*> out;
  const std::set<std::string> train(plan.train_classes.begin(), plan.train_classes.end());
  const std::set<std::string> test(plan.test_classes.begin(), plan.test_classes.end());
  for (const auto& s : slices_) {
    auto it = plan.assignments.find(s.case_id);
    if (it == plan.assignments.end())
      throw DataError("training_pool: case '" + s.case_id + "' missing from fold plan");
    if (it->second == fold) continue;
    if (!train.empty() && !train.count(s.class_label)) continue;
    if (plan.setting == Setting::kSetting2 && test.count(s.class_label)) continue;
    out.push_back(&s);
  }
  return out;
}

std::vector<const SliceSample*> SliceDataset::evaluation_pool(const FoldPlan& plan,
                                                              int fold) const {
  std::vector<const SliceSample*> out;
  for (const auto& s : slices_) {
    auto it = plan.assignments.find(s.case_id);
    if (it == plan.assignments.end())
      throw DataError("evaluation_pool: case '" + s.case_id + "' missing from fold plan");
    if (it->second != fold) continue;
    if (!plan.is_test_class(s.class_label)) continue;
    out.push_back(&s);
  }
  return out;
}

std::vector<const SliceSample*> SliceDataset::support_pool(const FoldPlan& plan, int fold) const {
  std::vector<const SliceSample*> out;
  for (const auto& s : slices_) {
    auto it = plan.assignments.find(s.case_id);
    if (it == plan.assignments.end())
      throw DataError("support_pool: case '" + s.case_id + "' missing from fold plan");
    if (it->second == fold) continue;
    if (!plan.is_test_class(s.class_label)) continue;
    out.push_back(&s);
  }
  return out;
}

namespace {

std::string sample_stem(const SliceSample& s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%04d", s.slice_index);
  return s.case_id + "_" + s.class_label + buf;
}

}  // namespace

void save_dataset(const fs::path& dir, const std::vector<SliceSample>& raw_samples,
                  const std::string& kind, std::uint64_t seed) {
  if (raw_samples.empty()) throw DataError("save_dataset: no samples");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  std::vector<const SliceSample*> ordered;
  ordered.reserve(raw_samples.size());
  for (const auto& s : raw_samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(), [](const SliceSample* a, const SliceSample* b) {
    if (a->case_id != b->case_id) return a->case_id < b->case_id;
    if (a->class_label != b->class_label) return a->class_label < b->class_label;
    return a->slice_index < b->slice_index;
  });
  std::set<std::string> classes;
  for (const auto& s : raw_samples) classes.insert(s.class_label);

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = kind;
  manifest["image_size"] = raw_samples.front().image.rows();
  manifest["seed"] = seed;
  manifest["classes"] = classes;
  auto& samples = manifest["samples"] = nlohmann::json::array();

  for (const SliceSample* sp : ordered) {
    const SliceSample& s = *sp;
    const std::string stem = sample_stem(s);
    const std::string img_rel = "images/" + stem + ".pgm";
    const std::string mask_rel = "masks/" + stem + ".pgm";

    const QuantizedSlice q = quantize_slice(s.image);
    write_pgm16(dir / img_rel, q.samples);
    MaskGrid m255(s.mask.rows(), s.mask.cols());
    for (size_t i = 0; i < s.mask.size(); ++i) m255.raw()[i] = s.mask.raw()[i] ? 255 : 0;
    write_pgm8(dir / mask_rel, m255);

    samples.push_back({{"case_id", s.case_id},
                       {"slice_index", s.slice_index},
                       {"class", s.class_label},
                       {"image", img_rel},
                       {"mask", mask_rel},
                       {"intensity_scale", q.scale},
                       {"intensity_offset", q.offset}});
  }

  std::ofstream out(dir / "dataset_manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

SliceDataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "dataset_manifest.json");
  if (!in) throw DataError("no dataset manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed dataset manifest: " + std::string(e.what()));
  }
  if (manifest.at("format_version").get<int>() != 1)
    throw DataError("unsupported dataset manifest version " +
                    std::to_string(manifest.at("format_version").get<int>()) + " (expected 1)");

  std::vector<SliceSample> samples;
  for (const auto& entry : manifest.at("samples")) {
    SliceSample s;
    s.case_id = entry.at("case_id").get<std::string>();
    s.slice_index = entry.at("slice_index").get<int>();
    s.class_label = entry.at("class").get<std::string>();
    const auto q = read_pgm16(dir / entry.at("image").get<std::string>());
    s.image = dequantize_slice(q, entry.at("intensity_scale").get<double>(),
                               entry.at("intensity_offset").get<double>());
    const auto m = read_pgm8(dir / entry.at("mask").get<std::string>());
    s.mask = MaskGrid(m.rows(), m.cols());
    for (size_t i = 0; i < m.size(); ++i) s.mask.raw()[i] = m.raw()[i] >= 128 ? 1 : 0;
    samples.push_back(std::move(s));
  }
  return SliceDataset::assemble(std::move(samples), /*normalized=*/false);
}

void save_fold_plan(const fs::path& dir, const FoldPlan& plan) {
  std::ofstream out(dir / "fold_plan.json");
  if (!out) throw DataError("cannot write fold plan in " + dir.string());
  out << fold_plan_to_json(plan);
}

FoldPlan load_fold_plan(const fs::path& dir) {
  std::ifstream in(dir / "fold_plan.json");
  if (!in) throw DataError("no fold plan in " + dir.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fold_plan_from_json(text);
}

}  // namespace sqpf

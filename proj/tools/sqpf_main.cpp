// Command-line front end: prepare / train / eval / ablate / predict.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sqpf/dataset.hpp"
#include "sqpf/image_ops.hpp"
#include "sqpf/loss.hpp"
#include "sqpf/pgm_io.hpp"
#include "sqpf/report.hpp"
#include "sqpf/synthetic.hpp"
#include "sqpf/train.hpp"
#include "sqpf/volume_io.hpp"

namespace fs = std::filesystem;
using namespace sqpf;

namespace {

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

fs::path resolve_output_dir(std::string out, const std::string& command) {
  if (!out.empty()) return out;
  const char* root = std::getenv("SQPF_OUT_ROOT");
  if (root && *root) return fs::path(root) / command;
  throw UsageError("no --out given and SQPF_OUT_ROOT is unset");
}

// A directory holding a run_manifest.json is a finished run; refuse to
// clobber it unless --overwrite.
void claim_output_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir / "run_manifest.json")) {
    if (!overwrite)
      throw UsageError("output directory " + dir.string() +
                       " already holds a run; pass --overwrite to redo it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

RunManifest begin_manifest(const std::string& command, const std::string& config_path,
                           std::uint64_t seed, const fs::path& out_dir) {
  RunManifest m;
  m.command = command;
  m.config_path = config_path;
  m.seed = seed;
  m.output_dir = out_dir.string();
  m.started_at = iso8601_utc_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir) {
  m.finished_at = iso8601_utc_now();
  write_run_manifest(out_dir, m);
}

// Grayscale image file (8- or 16-bit PGM) as a real-valued grid.
RealGrid read_image_file(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open image: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  probe >> magic >> w >> h >> maxval;
  if (magic != "P5") throw DataError("expected a P5 PGM image: " + path.string());
  probe.close();
  RealGrid img;
  if (maxval > 255) {
    const auto raw = read_pgm16(path);
    img = RealGrid(raw.rows(), raw.cols());
    for (size_t i = 0; i < raw.size(); ++i) img.raw()[i] = raw.raw()[i];
  } else {
    const auto raw = read_pgm8(path);
    img = RealGrid(raw.rows(), raw.cols());
    for (size_t i = 0; i < raw.size(); ++i) img.raw()[i] = raw.raw()[i];
  }
  return img;
}

MaskGrid read_mask_file(const fs::path& path) {
  const auto raw = read_pgm8(path);
  MaskGrid m(raw.rows(), raw.cols());
  for (size_t i = 0; i < raw.size(); ++i) m.raw()[i] = raw.raw()[i] >= 128 ? 1 : 0;
  return m;
}

void write_mask_file(const fs::path& path, const MaskGrid& mask) {
  MaskGrid m255(mask.rows(), mask.cols());
  for (size_t i = 0; i < mask.size(); ++i) m255.raw()[i] = mask.raw()[i] ? 255 : 0;
  write_pgm8(path, m255);
}

std::uint8_t to_gray(double v, double lo, double hi) {
  if (hi <= lo) return 0;
  const double t = (v - lo) / (hi - lo);
  return static_cast<std::uint8_t>(std::clamp(t, 0.0, 1.0) * 255.0);
}

// Side-by-side panel: support with its mask tinted green, plain query, query
// with the prediction tinted red.
void write_visualization(const fs::path& path, const RealGrid& support_img,
                         const MaskGrid& support_mask, const RealGrid& query_img,
                         const MaskGrid& pred) {
  const int h = support_img.rows(), w = support_img.cols();
  double lo = 1e300, hi = -1e300;
  for (const RealGrid* g : {&support_img, &query_img})
    for (double v : g->raw()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  RgbImage img{Grid2D<std::uint8_t>(h, 3 * w + 8, 255), Grid2D<std::uint8_t>(h, 3 * w + 8, 255),
               Grid2D<std::uint8_t>(h, 3 * w + 8, 255)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::uint8_t s = to_gray(support_img(r, c), lo, hi);
      const std::uint8_t q = to_gray(query_img(r, c), lo, hi);
      // panel 1: support + mask overlay
      img.r(r, c) = support_mask(r, c) ? s / 2 : s;
      img.g(r, c) = support_mask(r, c) ? 128 + s / 2 : s;
      img.b(r, c) = support_mask(r, c) ? s / 2 : s;
      // panel 2: query
      img.r(r, c + w + 4) = q;
      img.g(r, c + w + 4) = q;
      img.b(r, c + w + 4) = q;
      // panel 3: query + prediction overlay
      img.r(r, c + 2 * w + 8) = pred(r, c) ? 128 + q / 2 : q;
      img.g(r, c + 2 * w + 8) = pred(r, c) ? q / 2 : q;
      img.b(r, c + 2 * w + 8) = pred(r, c) ? q / 2 : q;
    }
  }
  write_ppm(path, img);
}

// --- subcommand payloads ---------------------------------------------------

struct PrepareArgs {
  std::string kind;
  std::string input_dir;
  std::string out;
  std::string plane = "axial";
  int size = 256;
  int folds = 5;
  int setting = 1;
  std::string train_classes, test_classes;
  std::uint64_t seed = 0;
  bool overwrite = false;
  // synthetic knobs
  int cases = 24;
  std::string families = "ellipse,rectangle,crescent";
  double noise = 0.05;
};

int cmd_prepare(const PrepareArgs& args) {
  const fs::path out_dir = resolve_output_dir(args.out, "prepare");
  claim_output_dir(out_dir, args.overwrite);
  RunManifest manifest = begin_manifest("prepare", "", args.seed, out_dir);

  std::vector<SliceSample> samples;
  if (args.kind == "synthetic") {
    SyntheticConfig cfg = default_synthetic_config();
    cfg.n_cases = args.cases;
    cfg.image_size = args.size;
    cfg.shape_families = split_csv(args.families);
    cfg.noise_sigma = args.noise;
    cfg.seed = args.seed;
    samples = synth_generate(cfg);
  } else if (args.kind == "sabs_like" || args.kind == "cmr_like") {
    const SlicePlane plane = args.plane == "axial" ? SlicePlane::kAxial : SlicePlane::kShortAxis;
    if (args.kind == "cmr_like" && plane != SlicePlane::kShortAxis)
      throw UsageError("cmr_like volumes are short-axis stacks; use --plane short_axis");
    if (args.kind == "sabs_like" && plane != SlicePlane::kAxial)
      throw UsageError("sabs_like volumes are axial stacks; use --plane axial");
    const IntensityWindow window = args.kind == "sabs_like" ? IntensityWindow::kCtSoftTissue
                                                            : IntensityWindow::kPercentile;
    if (args.input_dir.empty()) throw UsageError("--input is required for volume datasets");
    const LabelMap label_map = read_label_map(fs::path(args.input_dir) / "labels.json");
    for (const auto& entry : fs::directory_iterator(args.input_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.find("_label") != std::string::npos) continue;
      if (name.size() < 4 || (name.find(".nii") == std::string::npos)) continue;
      const VolumeRecord rec = load_volume(entry.path(), label_map);
      auto slices = slice_and_resize(rec, plane, args.size, window);
      samples.insert(samples.end(), std::make_move_iterator(slices.begin()),
                     std::make_move_iterator(slices.end()));
    }
    if (samples.empty()) throw DataError("no usable slices found under " + args.input_dir);
  } else {
    throw UsageError("unknown dataset kind '" + args.kind +
                     "' (expected synthetic, sabs_like, cmr_like)");
  }

  save_dataset(out_dir, samples, args.kind, args.seed);

  std::set<std::string> case_set;
  for (const auto& s : samples) case_set.insert(s.case_id);
  std::optional<ClassSplit> split;
  if (!args.train_classes.empty() || !args.test_classes.empty())
    split = ClassSplit{split_csv(args.train_classes), split_csv(args.test_classes)};
  const Setting setting = args.setting == 2 ? Setting::kSetting2 : Setting::kSetting1;
  const FoldPlan plan = make_folds({case_set.begin(), case_set.end()}, args.folds, setting,
                                   split, args.seed);
  save_fold_plan(out_dir, plan);

  manifest.artifacts = {"dataset_manifest.json", "fold_plan.json", "images/", "masks/"};
  finish_manifest(manifest, out_dir);
  std::cout << "prepared " << samples.size() << " slices in " << out_dir.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string config_file;
  std::string data_dir;
  std::string out;
  bool overwrite = false;
  TrainConfig config;
};

int cmd_train(const TrainArgs& args) {
  validate_config(args.config);
  const fs::path out_dir = resolve_output_dir(args.out, "train");
  claim_output_dir(out_dir, args.overwrite);
  RunManifest manifest = begin_manifest("train", args.config_file, args.config.seed, out_dir);
  manifest.config_hash = config_hash(args.config);

  const SliceDataset dataset = load_dataset(args.data_dir);
  FoldPlan plan = load_fold_plan(args.data_dir);
  plan.setting = args.config.setting;
  if (!args.config.train_classes.empty()) plan.train_classes = args.config.train_classes;
  if (!args.config.test_classes.empty()) plan.test_classes = args.config.test_classes;
  if (plan.setting == Setting::kSetting2 && plan.test_classes.empty())
    throw UsageError("Setting 2 requires test classes (config test_classes or fold plan)");

  std::ofstream log(out_dir / "train_log.txt");
  if (plan.setting == Setting::kSetting2) {
    const auto pool = dataset.training_pool(plan, args.config.fold_index);
    long long banned = 0;
    const std::set<std::string> test(plan.test_classes.begin(), plan.test_classes.end());
    for (const auto& s : dataset.slices()) banned += test.count(s.class_label) ? 1 : 0;
    std::string names;
    for (const auto& cls : plan.test_classes) names += (names.empty() ? "" : ",") + cls;
    log << "setting 2: test classes excluded from training pool: " << names << " (" << banned
        << " slices banned, pool size " << pool.size() << ")\n";
  }

  const TrainResult result = train_fold(args.config, dataset, plan, &log);
  save_checkpoint(out_dir / "checkpoint.ckpt", result.checkpoint);
  if (result.checkpoint.diverged)
    log << "training aborted after epoch " << result.checkpoint.epoch
        << "; checkpoint holds the last good parameters\n";

  manifest.artifacts = {"checkpoint.ckpt", "train_log.txt"};
  finish_manifest(manifest, out_dir);
  std::cout << "trained " << result.episode_losses.size() << " episodes; checkpoint at "
            << (out_dir / "checkpoint.ckpt").string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string out;
  int fold = -1;
  int eval_episodes = -1;
  bool overwrite = false;
};

int cmd_eval(const EvalArgs& args) {
  const fs::path out_dir = resolve_output_dir(args.out, "eval");
  claim_output_dir(out_dir, args.overwrite);

  Checkpoint ckpt = load_checkpoint(args.checkpoint);
  if (args.eval_episodes >= 0) ckpt.config.eval_episodes = args.eval_episodes;
  RunManifest manifest = begin_manifest("eval", args.checkpoint, ckpt.config.seed, out_dir);
  manifest.config_hash = config_hash(ckpt.config);

  const SliceDataset dataset = load_dataset(args.data_dir);
  FoldPlan plan = load_fold_plan(args.data_dir);
  plan.setting = ckpt.config.setting;
  if (!ckpt.config.train_classes.empty()) plan.train_classes = ckpt.config.train_classes;
  if (!ckpt.config.test_classes.empty()) plan.test_classes = ckpt.config.test_classes;
  const int fold = args.fold >= 0 ? args.fold : ckpt.config.fold_index;

  const DiceReport report = evaluate_with_config(ckpt, dataset, plan, fold);
  write_dice_report_json(out_dir / "report.json", report);
  write_dice_report_csv(out_dir / "report.csv", report);

  manifest.artifacts = {"report.json", "report.csv"};
  finish_manifest(manifest, out_dir);
  std::cout << "mean dice " << report.mean << " (fold " << fold << ", "
            << report.dice_protocol << " protocol)\n";
  return 0;
}

struct AblateArgs {
  std::string config_file;
  std::string data_dir;
  std::string out;
  std::string modes = "SSP,MSP,MSP+QP";
  std::string alpha_grid;
  std::string folds = "0";
  bool overwrite = false;
  TrainConfig config;
};

int cmd_ablate(const AblateArgs& args) {
  validate_config(args.config);
  const auto mode_names = split_csv(args.modes);
  const auto alpha_items = split_csv(args.alpha_grid);
  if (mode_names.empty() && alpha_items.empty())
    throw UsageError("nothing to do: give --modes and/or --alpha-grid");

  const fs::path out_dir = resolve_output_dir(args.out, "ablate");
  claim_output_dir(out_dir, args.overwrite);
  RunManifest manifest = begin_manifest("ablate", args.config_file, args.config.seed, out_dir);
  manifest.config_hash = config_hash(args.config);

  const SliceDataset dataset = load_dataset(args.data_dir);
  FoldPlan plan = load_fold_plan(args.data_dir);
  plan.setting = args.config.setting;
  if (!args.config.train_classes.empty()) plan.train_classes = args.config.train_classes;
  if (!args.config.test_classes.empty()) plan.test_classes = args.config.test_classes;

  std::vector<int> folds;
  for (const auto& f : split_csv(args.folds)) folds.push_back(std::stoi(f));

  std::ofstream log(out_dir / "ablate_log.txt");
  if (!mode_names.empty()) {
    std::vector<AblationMode> modes;
    for (const auto& name : mode_names) modes.push_back(ablation_mode_from_name(name));
    const AblationResult table = ablate(args.config, dataset, plan, modes, folds, &log);
    write_ablation_csv(out_dir / "ablation.csv", table);
    manifest.artifacts.push_back("ablation.csv");
  }
  if (!alpha_items.empty()) {
    std::vector<double> alphas;
    for (const auto& a : alpha_items) alphas.push_back(std::stod(a));
    const auto points = alpha_sweep(args.config, dataset, plan, alphas, folds.front(), &log);
    write_alpha_sweep_csv(out_dir / "alpha_sweep.csv", points);
    write_alpha_sweep_svg(out_dir / "alpha_sweep.svg", points);
    manifest.artifacts.push_back("alpha_sweep.csv");
    manifest.artifacts.push_back("alpha_sweep.svg");
  }
  manifest.artifacts.push_back("ablate_log.txt");
  finish_manifest(manifest, out_dir);
  std::cout << "ablation artifacts in " << out_dir.string() << "\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string support_image, support_mask, query_image;
  std::string out_mask;
  std::string trace;
  std::string viz;
};

int cmd_predict(const PredictArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const Encoder enc = encoder_from_checkpoint(ckpt);
  const PipelineConfig cfg = pipeline_config_from(ckpt.config);

  SliceSample support;
  support.case_id = "support";
  support.image = read_image_file(args.support_image);
  support.mask = read_mask_file(args.support_mask);
  RealGrid query = read_image_file(args.query_image);
  if (!support.image.same_shape(support.mask))
    throw DataError("support image and mask sizes differ");
  if (!support.image.same_shape(query))
    throw DataError("support and query image sizes differ");
  if (mask_area(support.mask) == 0) throw DataError("support mask has no foreground");
  normalize_slice(support.image);
  normalize_slice(query);

  const EpisodePrediction pred = predict_episode(enc, {&support}, query, cfg);
  write_mask_file(args.out_mask, pred.final_mask);
  if (!args.trace.empty()) {
    std::ofstream out(args.trace);
    if (!out) throw DataError("cannot write trace: " + args.trace);
    out << diagnostics_to_json(pred.diag);
  }
  if (!args.viz.empty())
    write_visualization(args.viz, support.image, support.mask, query, pred.final_mask);
  std::cout << "wrote " << args.out_mask << (pred.diag.fallback ? " (coarse fallback)" : "")
            << "\n";
  return 0;
}

// Config handling: --config names a key=value file in the canonical config
// format ([section] headers allowed); explicitly passed flags override the
// file's values.
struct ConfigFlags {
  TrainConfig values;
  int setting = 0;
  std::string train_classes, test_classes, encoder_kind;
};

void add_config_options(CLI::App* sub, std::string& config_file, ConfigFlags& f) {
  sub->add_option("--config", config_file, "key=value config file; flags win");
  TrainConfig& cfg = f.values;
  sub->add_option("--episodes-per-epoch", cfg.episodes_per_epoch);
  sub->add_option("--epochs", cfg.epochs);
  sub->add_option("--learning-rate", cfg.learning_rate);
  sub->add_option("--momentum", cfg.momentum);
  sub->add_option("--lr-step-epochs", cfg.lr_step_epochs);
  sub->add_option("--lr-decay", cfg.lr_decay);
  sub->add_option("--n-regions", cfg.n_regions);
  sub->add_option("--alpha", cfg.alpha);
  sub->add_option("--temperature", cfg.temperature);
  sub->add_option("--t-b", cfg.t_b);
  sub->add_option("--n-way", cfg.n_way);
  sub->add_option("--k-shot", cfg.k_shot);
  sub->add_option("--setting", f.setting, "1 or 2");
  sub->add_option("--fold", cfg.fold_index);
  sub->add_option("--k-folds", cfg.k_folds);
  sub->add_option("--seed", cfg.seed);
  sub->add_option("--train-classes", f.train_classes);
  sub->add_option("--test-classes", f.test_classes);
  sub->add_option("--lambda-coarse", cfg.lambda_coarse);
  sub->add_option("--lambda-final", cfg.lambda_final);
  sub->add_flag("--augment", cfg.augment);
  sub->add_option("--eval-episodes", cfg.eval_episodes);
  sub->add_option("--encoder-kind", f.encoder_kind, "tiny or pretrained_deep");
  sub->add_option("--feature-channels", cfg.encoder.feature_channels);
  sub->add_option("--encoder-weights", cfg.encoder.weights_source);
}

TrainConfig resolve_config(const CLI::App* sub, const std::string& config_file,
                           const ConfigFlags& f) {
  TrainConfig cfg;
  if (!config_file.empty()) {
    try {
      cfg = read_config_file(config_file);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
  const auto passed = [sub](const std::string& name) { return sub->count(name) > 0; };
  const TrainConfig& v = f.values;
  if (passed("--episodes-per-epoch")) cfg.episodes_per_epoch = v.episodes_per_epoch;
  if (passed("--epochs")) cfg.epochs = v.epochs;
  if (passed("--learning-rate")) cfg.learning_rate = v.learning_rate;
  if (passed("--momentum")) cfg.momentum = v.momentum;
  if (passed("--lr-step-epochs")) cfg.lr_step_epochs = v.lr_step_epochs;
  if (passed("--lr-decay")) cfg.lr_decay = v.lr_decay;
  if (passed("--n-regions")) cfg.n_regions = v.n_regions;
  if (passed("--alpha")) cfg.alpha = v.alpha;
  if (passed("--temperature")) cfg.temperature = v.temperature;
  if (passed("--t-b")) cfg.t_b = v.t_b;
  if (passed("--n-way")) cfg.n_way = v.n_way;
  if (passed("--k-shot")) cfg.k_shot = v.k_shot;
  if (passed("--setting")) {
    if (f.setting != 1 && f.setting != 2) throw UsageError("--setting must be 1 or 2");
    cfg.setting = f.setting == 2 ? Setting::kSetting2 : Setting::kSetting1;
  }
  if (passed("--fold")) cfg.fold_index = v.fold_index;
  if (passed("--k-folds")) cfg.k_folds = v.k_folds;
  if (passed("--seed")) cfg.seed = v.seed;
  if (passed("--train-classes")) cfg.train_classes = split_csv(f.train_classes);
  if (passed("--test-classes")) cfg.test_classes = split_csv(f.test_classes);
  if (passed("--lambda-coarse")) cfg.lambda_coarse = v.lambda_coarse;
  if (passed("--lambda-final")) cfg.lambda_final = v.lambda_final;
  if (passed("--augment")) cfg.augment = v.augment;
  if (passed("--eval-episodes")) cfg.eval_episodes = v.eval_episodes;
  if (passed("--encoder-kind")) cfg.encoder.kind = encoder_kind_from_name(f.encoder_kind);
  if (passed("--feature-channels")) cfg.encoder.feature_channels = v.encoder.feature_channels;
  if (passed("--encoder-weights")) cfg.encoder.weights_source = v.encoder.weights_source;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot segmentation via support-query prototype fusion"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* prep = app.add_subcommand("prepare", "Ingest volumes or generate a synthetic dataset");
  prep->add_option("--kind", prepare.kind, "synthetic | sabs_like | cmr_like")->required();
  prep->add_option("--input", prepare.input_dir, "volume directory with labels.json");
  prep->add_option("--out", prepare.out);
  prep->add_option("--plane", prepare.plane, "axial | short_axis");
  prep->add_option("--size", prepare.size);
  prep->add_option("--folds", prepare.folds);
  prep->add_option("--setting", prepare.setting);
  prep->add_option("--train-classes", prepare.train_classes);
  prep->add_option("--test-classes", prepare.test_classes);
  prep->add_option("--seed", prepare.seed);
  prep->add_option("--cases", prepare.cases, "synthetic case count");
  prep->add_option("--families", prepare.families, "synthetic shape families");
  prep->add_option("--noise", prepare.noise, "synthetic noise sigma");
  prep->add_flag("--overwrite", prepare.overwrite);

  TrainArgs train;
  ConfigFlags train_flags;
  auto* tr = app.add_subcommand("train", "Episodic training on a prepared dataset");
  add_config_options(tr, train.config_file, train_flags);
  tr->add_option("--data", train.data_dir)->required();
  tr->add_option("--out", train.out);
  tr->add_flag("--overwrite", train.overwrite);

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", eval_args.checkpoint)->required();
  ev->add_option("--data", eval_args.data_dir)->required();
  ev->add_option("--out", eval_args.out);
  ev->add_option("--fold", eval_args.fold);
  ev->add_option("--eval-episodes", eval_args.eval_episodes,
                 "override the checkpoint's evaluation protocol");
  ev->add_flag("--overwrite", eval_args.overwrite);

  AblateArgs ablate_args;
  ConfigFlags ablate_flags;
  auto* ab = app.add_subcommand("ablate", "Ablation table and fusion-weight sweep");
  add_config_options(ab, ablate_args.config_file, ablate_flags);
  ab->add_option("--data", ablate_args.data_dir)->required();
  ab->add_option("--out", ablate_args.out);
  ab->add_option("--modes", ablate_args.modes, "subset of SSP,MSP,SSP+QP,MSP+QP");
  ab->add_option("--alpha-grid", ablate_args.alpha_grid, "comma-separated fusion weights");
  ab->add_option("--folds", ablate_args.folds, "comma-separated fold indices");
  ab->add_flag("--overwrite", ablate_args.overwrite);

  PredictArgs predict;
  auto* pr = app.add_subcommand("predict", "Segment one query image from one support pair");
  pr->add_option("--checkpoint", predict.checkpoint)->required();
  pr->add_option("--support-image", predict.support_image)->required();
  pr->add_option("--support-mask", predict.support_mask)->required();
  pr->add_option("--query-image", predict.query_image)->required();
  pr->add_option("--out-mask", predict.out_mask)->required();
  pr->add_option("--trace", predict.trace, "diagnostics JSON path");
  pr->add_option("--viz", predict.viz, "side-by-side overlay PPM path");

  try {
    app.parse(argc, argv);
    if (prep->parsed()) return cmd_prepare(prepare);
    if (tr->parsed()) {
      train.config_file = tr->get_config_ptr()->as<std::string>();
      return cmd_train(train);
    }
    if (ev->parsed()) return cmd_eval(eval_args);
    if (ab->parsed()) {
      ablate_args.config_file = ab->get_config_ptr()->as<std::string>();
      return cmd_ablate(ablate_args);
    }
    if (pr->parsed()) return cmd_predict(predict);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

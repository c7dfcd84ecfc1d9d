#include "sqpf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sqpf/errors.hpp"

namespace sqpf {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string dice_report_to_json(const DiceReport& report) {
  nlohmann::json j;
  j["config_hash"] = report.config_hash;
  j["dice_protocol"] = report.dice_protocol;
  j["fold"] = report.fold;
  j["setting"] = report.setting == Setting::kSetting2 ? 2 : 1;
  j["per_class"] = report.per_class;
  if (!report.per_volume.empty()) {
    nlohmann::json pv;
    for (const auto& [cls, vols] : report.per_volume) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& [case_id, dice] : vols) arr.push_back({{"case", case_id}, {"dice", dice}});
      pv[cls] = arr;
    }
    j["per_volume"] = pv;
  }
  if (!report.per_fold.empty()) j["per_fold"] = report.per_fold;
  j["mean"] = report.mean;
  return j.dump(2) + "\n";
}

void write_dice_report_json(const std::filesystem::path& path, const DiceReport& report) {
  open_out(path) << dice_report_to_json(report);
}

void write_dice_report_csv(const std::filesystem::path& path, const DiceReport& report) {
  auto out = open_out(path);
  out << "class,dice\n";
  for (const auto& [cls, dice] : report.per_class) out << cls << "," << fmt(dice) << "\n";
  out << "mean," << fmt(report.mean) << "\n";
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result) {
  auto out = open_out(path);
  out << "mode";
  for (int fold : result.folds) out << ",fold" << fold + 1;
  out << ",mean\n";
  for (const auto& row : result.rows) {
    out << ablation_mode_name(row.mode);
    for (double d : row.fold_scores) out << "," << fmt(d);
    out << "," << fmt(row.mean) << "\n";
  }
}

void write_alpha_sweep_csv(const std::filesystem::path& path,
                           const std::vector<AlphaSweepPoint>& points) {
  auto out = open_out(path);
  out << "alpha,mean_dice\n";
  for (const auto& p : points) out << fmt(p.alpha) << "," << fmt(p.mean_dice) << "\n";
}

void write_alpha_sweep_svg(const std::filesystem::path& path,
                           const std::vector<AlphaSweepPoint>& points) {
  if (points.empty()) throw DataError("write_alpha_sweep_svg: no points");
  const int width = 640, height = 420;
  const int ml = 70, mr = 25, mt = 30, mb = 55;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;

  double ymin = points.front().mean_dice, ymax = ymin;
  for (const auto& p : points) {
    ymin = std::min(ymin, p.mean_dice);
    ymax = std::max(ymax, p.mean_dice);
  }
  const double pad = std::max(1.0, (ymax - ymin) * 0.15);
  ymin = std::max(0.0, ymin - pad);
  ymax = std::min(100.0, ymax + pad);
  if (ymax - ymin < 1e-9) ymax = ymin + 1.0;

  auto sx = [&](double alpha) { return ml + alpha * plot_w; };
  auto sy = [&](double dice) { return mt + (1.0 - (dice - ymin) / (ymax - ymin)) * plot_h; };

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + plot_h << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
      << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  // x ticks at 0, 0.25, ..., 1; y ticks at 5 even divisions
  for (int i = 0; i <= 4; ++i) {
    const double a = i / 4.0;
    out << "<line x1=\"" << sx(a) << "\" y1=\"" << mt + plot_h << "\" x2=\"" << sx(a)
        << "\" y2=\"" << mt + plot_h + 5 << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << sx(a) << "\" y=\"" << mt + plot_h + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << fmt(a).substr(0, 4) << "</text>\n";
    const double d = ymin + (ymax - ymin) * i / 4.0;
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(d) << "\" x2=\"" << ml << "\" y2=\""
        << sy(d) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << sy(d) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(d).substr(0, 5) << "</text>\n";
  }
  out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"14\" text-anchor=\"middle\">fusion weight alpha</text>\n"
      << "<text x=\"18\" y=\"" << mt + plot_h / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << mt + plot_h / 2 << ")\">mean Dice</text>\n";

  std::vector<AlphaSweepPoint> sorted(points);
  std::sort(sorted.begin(), sorted.end(),
            [](const AlphaSweepPoint& a, const AlphaSweepPoint& b) { return a.alpha < b.alpha; });
  if (sorted.size() > 1) {
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
    for (const auto& p : sorted) out << sx(p.alpha) << "," << sy(p.mean_dice) << " ";
    out << "\"/>\n";
  }
  for (const auto& p : sorted)
    out << "<circle cx=\"" << sx(p.alpha) << "\" cy=\"" << sy(p.mean_dice)
        << "\" r=\"4\" fill=\"#1f6fb2\"/>\n";
  out << "</svg>\n";
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_run_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config_path"] = manifest.config_path;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["output_dir"] = manifest.output_dir;
  j["artifacts"] = manifest.artifacts;
  open_out(dir / "run_manifest.json") << j.dump(2) << "\n";
}

}  // namespace sqpf

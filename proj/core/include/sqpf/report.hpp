#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sqpf/metrics.hpp"
#include "sqpf/train.hpp"

namespace sqpf {

// Reports are written timestamp-free so identical runs produce identical
// bytes; run manifests carry the wall-clock provenance instead.
std::string dice_report_to_json(const DiceReport& report);
void write_dice_report_json(const std::filesystem::path& path, const DiceReport& report);

// CSV layout: one row per class plus a final mean row.
void write_dice_report_csv(const std::filesystem::path& path, const DiceReport& report);

// CSV layout mirrors the ablation table: mode, one column per fold, mean.
void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result);

void write_alpha_sweep_csv(const std::filesystem::path& path,
                           const std::vector<AlphaSweepPoint>& points);

// Line chart of mean Dice against the fusion weight.
void write_alpha_sweep_svg(const std::filesystem::path& path,
                           const std::vector<AlphaSweepPoint>& points);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // ISO 8601 UTC
  std::string output_dir;
  std::vector<std::string> artifacts;
};

std::string iso8601_utc_now();
void write_run_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace sqpf

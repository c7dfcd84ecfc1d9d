#include "sqpf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace sqpf {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct ShapeParams {
  double cy = 0, cx = 0;      // center
  double a = 0, b = 0;        // primary/secondary extents
  double theta = 0;           // orientation
  double phi = 0;             // crescent cut direction
};

// Inside tests at integer pixel coordinates.
bool inside_ellipse(const ShapeParams& p, double y, double x) {
  const double dy = y - p.cy, dx = x - p.cx;
  const double u = (dx * std::cos(p.theta) + dy * std::sin(p.theta)) / p.a;
  const double v = (-dx * std::sin(p.theta) + dy * std::cos(p.theta)) / p.b;
  return u * u + v * v <= 1.0;
}

bool inside_rectangle(const ShapeParams& p, double y, double x) {
  const double dy = y - p.cy, dx = x - p.cx;
  const double u = dx * std::cos(p.theta) + dy * std::sin(p.theta);
  const double v = -dx * std::sin(p.theta) + dy * std::cos(p.theta);
  return std::abs(u) <= p.a && std::abs(v) <= p.b;
}

bool inside_crescent(const ShapeParams& p, double y, double x) {
  const double dy = y - p.cy, dx = x - p.cx;
  if (dx * dx + dy * dy > p.a * p.a) return false;
  // cut disk: radius 0.9R offset 0.7R along phi
  const double ccy = p.cy + 0.7 * p.a * std::sin(p.phi);
  const double ccx = p.cx + 0.7 * p.a * std::cos(p.phi);
  const double r2 = 0.9 * p.a;
  const double ey = y - ccy, ex = x - ccx;
  return ex * ex + ey * ey > r2 * r2;
}

bool connected_foreground(const MaskGrid& m) {
  const long long area = mask_area(m);
  if (area == 0) return false;
  int sr = -1, sc = -1;
  for (int r = 0; r < m.rows() && sr < 0; ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c)) { sr = r; sc = c; break; }
  MaskGrid seen(m.rows(), m.cols(), 0);
  std::queue<std::pair<int, int>> q;
  q.push({sr, sc});
  seen(sr, sc) = 1;
  long long reached = 0;
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop();
    ++reached;
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= m.rows() || nc >= m.cols()) continue;
      if (!m(nr, nc) || seen(nr, nc)) continue;
      seen(nr, nc) = 1;
      q.push({nr, nc});
    }
  }
  return reached == area;
}

struct FamilyGeometry {
  double min_frac, max_frac;  // primary extent as a fraction of image size
  bool (*inside)(const ShapeParams&, double, double);
  double (*outer_extent)(const ShapeParams&);
};

double extent_ellipse(const ShapeParams& p) { return std::max(p.a, p.b); }
double extent_rectangle(const ShapeParams& p) { return std::hypot(p.a, p.b); }
double extent_crescent(const ShapeParams& p) { return p.a; }

const std::map<std::string, FamilyGeometry>& family_geometries() {
  static const std::map<std::string, FamilyGeometry> geoms = {
      {"ellipse", {0.13, 0.26, inside_ellipse, extent_ellipse}},
      {"rectangle", {0.11, 0.22, inside_rectangle, extent_rectangle}},
      {"crescent", {0.14, 0.26, inside_crescent, extent_crescent}},
  };
  return geoms;
}

}  // namespace

SyntheticConfig default_synthetic_config() {
  SyntheticConfig cfg;
  cfg.intensity_ranges = {
      {"background", {0.05, 0.25}},
      {"ellipse", {0.55, 0.75}},
      {"rectangle", {0.65, 0.85}},
      {"crescent", {0.45, 0.65}},
  };
  return cfg;
}

std::vector<SliceSample> synth_generate(const SyntheticConfig& config) {
  if (config.n_cases < 1) throw DataError("synth_generate: n_cases must be >= 1");
  if (config.image_size < 8) throw DataError("synth_generate: image_size too small");
  if (config.shape_families.empty()) throw DataError("synth_generate: no shape families");
  if (!config.intensity_ranges.count("background"))
    throw DataError("synth_generate: missing 'background' intensity range");
  const auto& geoms = family_geometries();
  for (const auto& fam : config.shape_families) {
    if (!geoms.count(fam)) throw DataError("synth_generate: unknown shape family '" + fam + "'");
    if (!config.intensity_ranges.count(fam))
      throw DataError("synth_generate: no intensity range for family '" + fam + "'");
  }

  const int s = config.image_size;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SliceSample> out;
  out.reserve(static_cast<size_t>(config.n_cases) * config.shape_families.size());

  for (int case_i = 0; case_i < config.n_cases; ++case_i) {
    char case_name[32];
    std::snprintf(case_name, sizeof(case_name), "synth_%03d", case_i);
    for (const auto& fam : config.shape_families) {
      const auto& geom = geoms.at(fam);
      // feasibility at minimum scale
      const double min_extent = std::max(3.5, geom.min_frac * s);
      if (2.0 * (min_extent + 2.0) >= s - 1)
        throw DataError("synth_generate: shape '" + fam + "' cannot fit image bounds of size " +
                        std::to_string(s));

      MaskGrid mask;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        ShapeParams p;
        p.a = std::max(3.5, (geom.min_frac + (geom.max_frac - geom.min_frac) * unit(rng)) * s);
        p.b = p.a * (0.55 + 0.45 * unit(rng));
        p.theta = kPi * unit(rng);
        p.phi = 2.0 * kPi * unit(rng);
        const double extent = geom.outer_extent(p) + 2.0;
        if (2.0 * extent >= s - 1) continue;
        p.cy = extent + (s - 1 - 2.0 * extent) * unit(rng);
        p.cx = extent + (s - 1 - 2.0 * extent) * unit(rng);

        mask = MaskGrid(s, s, 0);
        for (int r = 0; r < s; ++r)
          for (int c = 0; c < s; ++c)
            if (geom.inside(p, r, c)) mask(r, c) = 1;
        ok = mask_area(mask) >= config.min_foreground_pixels && connected_foreground(mask);
      }
      if (!ok)
        throw DataError("synth_generate: failed to render family '" + fam +
                        "' within bounds at image_size " + std::to_string(s));

      const auto& bg_range = config.intensity_ranges.at("background");
      const auto& fg_range = config.intensity_ranges.at(fam);
      const double bg = bg_range.lo + (bg_range.hi - bg_range.lo) * unit(rng);
      const double fg = fg_range.lo + (fg_range.hi - fg_range.lo) * unit(rng);

      RealGrid img(s, s);
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c) img(r, c) = mask(r, c) ? fg : bg;
      if (config.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, config.noise_sigma);
        for (double& v : img.raw()) v += noise(rng);
      }

      SliceSample sample;
      sample.case_id = case_name;
      sample.slice_index = 0;
      sample.image = std::move(img);
      sample.mask = std::move(mask);
      sample.class_label = fam;
      out.push_back(std::move(sample));
    }
  }
  return out;
}

}  // namespace sqpf

#include "cacdn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace cacdn {

namespace {

// per-scene RNG stream ids
enum Stream : uint64_t {
  kTerrain = 1,
  kLandcover = 2,
  kOptical = 3,
  kRadarPre = 4,
  kRadarPost = 5,
  kConfuser = 6,
  kSlideSeeds = 7,
};

Rng scene_rng(const SynthConfig& cfg, int index, Stream stream) {
  return Rng(mix_seed(cfg.seed, static_cast<uint64_t>(index), stream));
}

// Smooth field as a sum of seeded Gaussian bumps.
std::vector<double> bump_field(int size, Rng& rng, int n_bumps, double amp_lo,
                               double amp_hi, double sigma_lo, double sigma_hi,
                               double negative_prob) {
  std::vector<double> f(static_cast<size_t>(size) * size, 0.0);
  for (int b = 0; b < n_bumps; ++b) {
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double sigma = rng.uniform(sigma_lo, sigma_hi);
    double amp = rng.uniform(amp_lo, amp_hi);
    if (rng.uniform() < negative_prob) amp = -amp;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        f[static_cast<size_t>(y) * size + x] += amp * std::exp(-d2 * inv2s2);
      }
  }
  return f;
}

void minmax_normalize(std::vector<double>& f) {
  auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  const double span = *hi - *lo;
  for (auto& v : f) v = span > 0 ? (v - *lo) / span : 0.0;
}

double quantile(std::vector<double> values, double q) {
  const size_t k = static_cast<size_t>(
      q * static_cast<double>(values.size() - 1));
  std::nth_element(values.begin(), values.begin() + static_cast<ptrdiff_t>(k),
                   values.end());
  return values[k];
}

void dilate(std::vector<uint8_t>& mask, int size, int radius) {
  std::vector<uint8_t> cur = mask;
  for (int it = 0; it < radius; ++it) {
    std::vector<uint8_t> next = cur;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        if (cur[static_cast<size_t>(y) * size + x]) continue;
        for (int dy = -1; dy <= 1 && !next[static_cast<size_t>(y) * size + x];
             ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny >= 0 && ny < size && nx >= 0 && nx < size &&
                cur[static_cast<size_t>(ny) * size + nx]) {
              next[static_cast<size_t>(y) * size + x] = 1;
              break;
            }
          }
      }
    cur = std::move(next);
  }
  mask = std::move(cur);
}

// 4-connected components in scan order; returns labels (-1 = background).
int label_components(const std::vector<uint8_t>& mask, int size,
                     std::vector<int>& labels) {
  labels.assign(mask.size(), -1);
  int n_comp = 0;
  std::vector<int> stack;
  for (size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || labels[start] >= 0) continue;
    const int comp = n_comp++;
    stack.push_back(static_cast<int>(start));
    labels[start] = comp;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int y = idx / size, x = idx % size;
      const int neigh[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& nb : neigh) {
        if (nb[0] < 0 || nb[0] >= size || nb[1] < 0 || nb[1] >= size) continue;
        const size_t nidx = static_cast<size_t>(nb[0]) * size + nb[1];
        if (mask[nidx] && labels[nidx] < 0) {
          labels[nidx] = comp;
          stack.push_back(static_cast<int>(nidx));
        }
      }
    }
  }
  return n_comp;
}

// Class radar/optical signatures. S1 in dB (VV; VH sits kVhOffset below),
// S2 in reflectance for bands (Red, Green, Blue, NIR).
constexpr double kVhOffset = -7.0;

double class_vv_db(LandClass c) {
  switch (c) {
    case LandClass::WATER: return -23.0;
    case LandClass::WET_VEG: return -10.5;
    case LandClass::VEG: return -9.5;
    case LandClass::BARE: return -13.0;
  }
  return 0.0;
}

const double* class_reflectance(LandClass c) {
  static const double kWater[4] = {0.06, 0.09, 0.11, 0.03};
  static const double kWetVeg[4] = {0.07, 0.14, 0.06, 0.33};
  static const double kVeg[4] = {0.07, 0.11, 0.05, 0.46};
  static const double kBare[4] = {0.26, 0.22, 0.17, 0.30};
  switch (c) {
    case LandClass::WATER: return kWater;
    case LandClass::WET_VEG: return kWetVeg;
    case LandClass::VEG: return kVeg;
    case LandClass::BARE: return kBare;
  }
  return kBare;
}

constexpr double kFloodVv = -23.0;   // flooded land looks like open water
constexpr double kScarVv = -2.0;     // fresh landslide scars brighten

// dB value with multiplicative speckle applied in the linear power domain.
double speckled_db(double db, Rng& rng, int looks) {
  return db + 10.0 * std::log10(rng.speckle(looks));
}

}  // namespace

SynthScene generate_scene(const SynthConfig& cfg, int scene_index) {
  cfg.validate();
  const int s = cfg.scene_size;
  const size_t npx = static_cast<size_t>(s) * s;
  const bool slide = cfg.event == SynthConfig::Event::LANDSLIDE;

  // terrain: flood scenes are gentle, landslide scenes mountainous
  Rng terra = scene_rng(cfg, scene_index, kTerrain);
  std::vector<double> elev =
      slide ? bump_field(s, terra, 12, 60.0, 280.0, s / 12.0, s / 5.0, 0.25)
            : bump_field(s, terra, 10, 10.0, 60.0, s / 10.0, s / 4.0, 0.3);
  for (auto& v : elev) v += 80.0;

  Tensor elev_grid({s, s});
  for (size_t i = 0; i < npx; ++i) elev_grid.data[i] = static_cast<float>(elev[i]);
  auto [slope_grid, aspect_grid] = compute_slope_aspect(elev_grid, 10.0);

  // landcover follows the terrain (water collects in valleys) plus an
  // independent field so class boundaries are not pure contour lines
  Rng lc_rng = scene_rng(cfg, scene_index, kLandcover);
  std::vector<double> lc_noise =
      bump_field(s, lc_rng, 12, 0.4, 1.0, s / 12.0, s / 4.0, 0.35);
  minmax_normalize(lc_noise);
  std::vector<double> elev_norm = elev;
  minmax_normalize(elev_norm);
  std::vector<double> g(npx);
  for (size_t i = 0; i < npx; ++i)
    g[i] = 0.55 * elev_norm[i] + 0.45 * lc_noise[i];
  const double q_water = quantile(g, 0.10);
  const double q_wet = quantile(g, 0.22);
  const double q_veg = quantile(g, 0.72);
  std::vector<uint8_t> landcover(npx);
  for (size_t i = 0; i < npx; ++i) {
    LandClass c = g[i] < q_water   ? LandClass::WATER
                  : g[i] < q_wet   ? LandClass::WET_VEG
                  : g[i] < q_veg   ? LandClass::VEG
                                   : LandClass::BARE;
    landcover[i] = static_cast<uint8_t>(c);
  }

  // truth mask
  std::vector<uint8_t> truth(npx, 0);
  std::vector<uint8_t> flood_zone(npx, 0);  // radar+DEM-plausible flood area
  if (!slide) {
    const double low_thresh = quantile(elev, 0.30);
    std::vector<uint8_t> near_water(npx, 0);
    for (size_t i = 0; i < npx; ++i)
      near_water[i] = landcover[i] == static_cast<uint8_t>(LandClass::WATER);
    dilate(near_water, s, 12);
    for (size_t i = 0; i < npx; ++i) {
      const bool plausible = elev[i] <= low_thresh &&
                             slope_grid.data[i] < 5.0f && near_water[i];
      flood_zone[i] = plausible;
      const auto c = static_cast<LandClass>(landcover[i]);
      truth[i] = plausible &&
                 (c == LandClass::VEG || c == LandClass::BARE);
    }
  } else {
    std::vector<uint8_t> steep(npx, 0);
    std::vector<int> steep_idx;
    for (size_t i = 0; i < npx; ++i)
      if (slope_grid.data[i] > 25.0f) {
        steep[i] = 1;
        steep_idx.push_back(static_cast<int>(i));
      }
    Rng seeds = scene_rng(cfg, scene_index, kSlideSeeds);
    std::vector<uint8_t> patches(npx, 0);
    if (!steep_idx.empty()) {
      for (int k = 0; k < 6; ++k)
        patches[static_cast<size_t>(
            steep_idx[static_cast<size_t>(seeds.uniform_int(
                static_cast<int>(steep_idx.size())))])] = 1;
      dilate(patches, s, 8);
    }
    for (size_t i = 0; i < npx; ++i) {
      const auto c = static_cast<LandClass>(landcover[i]);
      truth[i] = patches[i] && steep[i] &&
                 (c == LandClass::VEG || c == LandClass::BARE);
    }
  }

  // confusers: whole wet-vegetation patches inside the plausible zone get the
  // event's radar shift without being true change
  std::vector<uint8_t> confuser(npx, 0);
  if (cfg.confuser_fraction > 0.0) {
    std::vector<uint8_t> candidates(npx, 0);
    for (size_t i = 0; i < npx; ++i) {
      if (landcover[i] != static_cast<uint8_t>(LandClass::WET_VEG)) continue;
      candidates[i] = slide ? 1 : flood_zone[i];
    }
    std::vector<int> labels;
    const int n_comp = label_components(candidates, s, labels);
    Rng pick = scene_rng(cfg, scene_index, kConfuser);
    std::vector<uint8_t> chosen(static_cast<size_t>(n_comp));
    for (int cidx = 0; cidx < n_comp; ++cidx)
      chosen[static_cast<size_t>(cidx)] =
          pick.uniform() < cfg.confuser_fraction;
    for (size_t i = 0; i < npx; ++i)
      if (labels[i] >= 0 && chosen[static_cast<size_t>(labels[i])])
        confuser[i] = 1;
  }

  // imagery
  SynthScene out;
  SceneStack& scene = out.scene;
  scene.id = "synth" + std::to_string(scene_index);
  scene.pixel_spacing_m = 10.0;
  scene.s2_pre = Tensor({4, s, s});
  Rng opt = scene_rng(cfg, scene_index, kOptical);
  for (size_t i = 0; i < npx; ++i) {
    const double* base =
        class_reflectance(static_cast<LandClass>(landcover[i]));
    for (int band = 0; band < 4; ++band) {
      const double raw = (base[band] + 0.012 * opt.normal()) * 10000.0;
      scene.s2_pre.data[static_cast<size_t>(band) * npx + i] =
          static_cast<float>(std::clamp(raw, 0.0, 10000.0));
    }
  }

  const double event_vv = slide ? kScarVv : kFloodVv;
  scene.s1_pre = Tensor({2, s, s});
  scene.s1_post = Tensor({2, s, s});
  Rng pre_rng = scene_rng(cfg, scene_index, kRadarPre);
  Rng post_rng = scene_rng(cfg, scene_index, kRadarPost);
  for (size_t i = 0; i < npx; ++i) {
    const double base_vv = class_vv_db(static_cast<LandClass>(landcover[i]));
    const double post_vv = (truth[i] || confuser[i]) ? event_vv : base_vv;
    scene.s1_pre.data[i] = static_cast<float>(
        speckled_db(base_vv, pre_rng, cfg.speckle_looks));
    scene.s1_pre.data[npx + i] = static_cast<float>(
        speckled_db(base_vv + kVhOffset, pre_rng, cfg.speckle_looks));
    scene.s1_post.data[i] = static_cast<float>(
        speckled_db(post_vv, post_rng, cfg.speckle_looks));
    scene.s1_post.data[npx + i] = static_cast<float>(
        speckled_db(post_vv + kVhOffset, post_rng, cfg.speckle_looks));
  }

  scene.dem = make_dem_stack(elev_grid, scene.pixel_spacing_m);
  scene.mask = truth;
  out.landcover = std::move(landcover);
  out.confuser = std::move(confuser);
  return out;
}

std::vector<TileSample> generate_tiles(const SynthConfig& cfg,
                                       Manifest* manifest) {
  cfg.validate();
  std::vector<TileSample> all;
  NormalizationSpec norm;
  for (int i = 0; i < cfg.n_scenes; ++i) {
    SynthScene sc = generate_scene(cfg, i);
    NormalizeResult nr = normalize(sc.scene, norm);
    auto tiles = tile_scene(nr.scene, cfg.p, cfg.p);
    for (auto& t : tiles) all.push_back(std::move(t));
  }
  std::vector<std::string> ids;
  ids.reserve(all.size());
  for (const auto& t : all) ids.push_back(t.id);
  Manifest m = build_manifest(ids, SplitFractions{0.8, 0.1, 0.1});
  auto assign = [&](const std::vector<std::string>& list, Split sp) {
    for (const auto& id : list)
      for (auto& t : all)
        if (t.id == id) t.split = sp;
  };
  assign(m.train, Split::TRAIN);
  assign(m.val, Split::VAL);
  assign(m.test, Split::TEST);
  if (manifest) *manifest = std::move(m);
  return all;
}

Manifest generate_dataset(const SynthConfig& cfg,
                          const std::filesystem::path& out_dir) {
  Manifest manifest;
  std::vector<TileSample> tiles = generate_tiles(cfg, &manifest);
  save_dataset(out_dir, tiles, manifest, "synthgen");
  nlohmann::json j = {
      {"seed", cfg.seed},
      {"n_scenes", cfg.n_scenes},
      {"scene_size", cfg.scene_size},
      {"p", cfg.p},
      {"event", cfg.event == SynthConfig::Event::FLOOD ? "flood" : "landslide"},
      {"confuser_fraction", cfg.confuser_fraction},
      {"speckle_looks", cfg.speckle_looks}};
  std::ofstream os(out_dir / "synth_config.json");
  if (!os) fail("io_error", "cannot write synth_config.json");
  os << j.dump(2) << "\n";
  return manifest;
}

}  // namespace cacdn

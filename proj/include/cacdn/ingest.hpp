#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cacdn/core_types.hpp"
#include "cacdn/tensor.hpp"

namespace cacdn {

// Raw (unnormalized) co-registered scene. S1 grids hold backscatter in dB,
// S2 holds reflectance scaled by NormalizationSpec::s2_reflectance_divisor,
// the DEM stack holds [elevation_m, slope_deg, aspect_sin, aspect_cos].
struct SceneStack {
  std::string id;
  Tensor s1_pre;   // [2, H, W]
  Tensor s1_post;  // [2, H, W]
  Tensor s2_pre;   // [4, H, W]
  Tensor dem;      // [4, H, W]
  std::vector<uint8_t> mask;  // [H*W]; empty = no labels
  double pixel_spacing_m = 10.0;
  std::optional<Split> split_hint;
  bool normalized = false;

  int height() const { return s1_pre.dim(1); }
  int width() const { return s1_pre.dim(2); }
};

struct NormalizationSpec {
  double s1_db_min = -30.0;
  double s1_db_max = 0.0;
  double s2_reflectance_divisor = 10000.0;
  // NaN means "compute per scene from the elevation band".
  double dem_elev_min = std::nan("");
  double dem_elev_max = std::nan("");

  void validate() const;
};

// Horn 3x3 finite-difference slope/aspect. Slope in [0,90] degrees; aspect is
// the downslope direction in degrees clockwise from north, in [0,360), with
// flat cells reported as 0. Border pixels use edge replication. Math runs in
// double regardless of T.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> compute_slope_aspect(
    const TensorT<T>& elevation, double pixel_spacing_m) {
  const int h = elevation.dim(elevation.ndim() - 2);
  const int w = elevation.dim(elevation.ndim() - 1);
  if (h < 3 || w < 3) fail("data_error", "degenerate DEM (smaller than 3x3)");
  if (!(pixel_spacing_m > 0))
    fail("data_error", "pixel spacing must be positive");
  TensorT<T> slope({h, w}), aspect({h, w});
  const T* z = elevation.ptr();
  auto zat = [&](int r, int c) -> double {
    r = std::clamp(r, 0, h - 1);
    c = std::clamp(c, 0, w - 1);
    return static_cast<double>(z[static_cast<size_t>(r) * w + c]);
  };
  constexpr double kRadToDeg = 57.29577951308232;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double a = zat(r - 1, c - 1), b = zat(r - 1, c),
                   cc = zat(r - 1, c + 1);
      const double d = zat(r, c - 1), f = zat(r, c + 1);
      const double g = zat(r + 1, c - 1), hh = zat(r + 1, c),
                   i = zat(r + 1, c + 1);
      // row 0 is north; columns increase eastwards
      const double dz_east =
          ((cc + 2 * f + i) - (a + 2 * d + g)) / (8.0 * pixel_spacing_m);
      const double dz_north =
          ((a + 2 * b + cc) - (g + 2 * hh + i)) / (8.0 * pixel_spacing_m);
      const double rise = std::hypot(dz_east, dz_north);
      slope.data[static_cast<size_t>(r) * w + c] =
          static_cast<T>(std::atan(rise) * kRadToDeg);
      double asp = 0.0;
      if (rise > 0.0) {
        asp = std::atan2(-dz_east, -dz_north) * kRadToDeg;
        if (asp < 0.0) asp += 360.0;
        if (asp >= 360.0) asp -= 360.0;
      }
      aspect.data[static_cast<size_t>(r) * w + c] = static_cast<T>(asp);
    }
  }
  return {std::move(slope), std::move(aspect)};
}

// Builds the raw 4-band DEM stack from an elevation grid.
Tensor make_dem_stack(const Tensor& elevation_m, double pixel_spacing_m);

struct NormalizeResult {
  SceneStack scene;
  int64_t nan_replaced = 0;
};

// Maps every raw grid to [0,1]: S1 via the dB window, S2 via the reflectance
// divisor, elevation via per-scene min-max, slope via /90, aspect sin/cos via
// (v+1)/2. Non-finite pixels become 0 and are counted.
NormalizeResult normalize(const SceneStack& scene,
                          const NormalizationSpec& spec);

// Row-major tiling with top-left origin; right/bottom remainders are dropped.
// Tile ids are "{scene_id}_{row}_{col}".
std::vector<TileSample> tile_scene(const SceneStack& scene, int p, int stride);

// Seeded training-time augmentation: with probability 0.5 each, Gaussian blur
// (sigma ~ U[0.5,1.5]) on all input grids, and gamma contrast
// (gamma ~ U[0.7,1.4]) on the S2 bands. The mask is never touched.
TileSample augment(const TileSample& sample, uint64_t rng_seed);

struct SplitFractions {
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;
};

struct Manifest {
  std::vector<std::string> train, val, test;

  const std::vector<std::string>& ids(Split s) const {
    switch (s) {
      case Split::TRAIN: return train;
      case Split::VAL: return val;
      case Split::TEST: return test;
    }
    return test;
  }
  size_t size() const { return train.size() + val.size() + test.size(); }
};

// Deterministic split by hash of sample id: ids are ordered by hash and cut
// at floor(n*f) boundaries, so re-runs reproduce the manifest exactly. An
// optional override map (e.g. a published dataset split) wins per id.
Manifest build_manifest(const std::vector<std::string>& ids,
                        const SplitFractions& fractions,
                        const std::map<std::string, Split>* overrides = nullptr);

// --- tile container format ---------------------------------------------------
//
// One file per grid: magic "CACD", u32 version=1, u32 ndim, ndim x u32 dims,
// then row-major little-endian payload (float32 for grids, u8 for masks).
// Each sample directory holds the grid files plus a sample.json sidecar.

void write_grid(const std::filesystem::path& path, const Tensor& grid);
Tensor read_grid(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path,
                const std::vector<uint8_t>& mask, int h, int w);
std::vector<uint8_t> read_mask(const std::filesystem::path& path, int* h,
                               int* w);

void write_sample(const std::filesystem::path& sample_dir,
                  const TileSample& sample, const std::string& provenance);
TileSample read_sample(const std::filesystem::path& sample_dir);

void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

// Writes tiles + manifest under dataset_dir (tiles/<id>/...).
void save_dataset(const std::filesystem::path& dataset_dir,
                  const std::vector<TileSample>& tiles, const Manifest& m,
                  const std::string& provenance);
// Loads one split's tiles in manifest order, with split fields applied.
std::vector<TileSample> load_split(const std::filesystem::path& dataset_dir,
                                   Split split);

// Raw scene container (input to the tiling command): scene.json plus raw
// grid files (s1_pre/s1_post in dB, s2_pre in scaled reflectance, elevation
// in meters, optional mask).
void write_scene(const std::filesystem::path& scene_dir,
                 const SceneStack& scene);
SceneStack read_scene(const std::filesystem::path& scene_dir);

}  // namespace cacdn

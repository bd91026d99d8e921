#pragma once

#include <filesystem>
#include <string>

#include "cacdn/ingest.hpp"

// Deterministic synthetic multi-source scenes with analytically known change
// masks. The world is built so the central ablation has a known direction:
// a "wet vegetation" landcover class receives the same radar shift as truly
// changed pixels (radar-ambiguous) while its optical signature cleanly
// identifies it as unchanged. Radar speckle is multiplicative gamma noise.

namespace cacdn {

struct SynthConfig {
  uint64_t seed = 7;
  int n_scenes = 4;
  int scene_size = 256;
  int p = 128;
  enum class Event { FLOOD, LANDSLIDE };
  Event event = Event::FLOOD;
  // fraction of radar-ambiguous wet-vegetation patches that receive the
  // event's radar shift without entering the truth mask
  double confuser_fraction = 0.3;
  int speckle_looks = 4;

  void validate() const {
    require(n_scenes >= 1, "config_error", "n_scenes must be >= 1");
    require(scene_size >= p, "config_error", "scene_size must be >= p");
    require(p >= 16 && p % 16 == 0, "config_error",
            "p must be a positive multiple of 16");
    require(confuser_fraction >= 0.0 && confuser_fraction <= 1.0,
            "config_error", "confuser_fraction must lie in [0,1]");
    require(speckle_looks >= 1, "config_error", "speckle_looks must be >= 1");
  }
};

// Land cover classes used by the generator (exposed for test probes).
enum class LandClass : uint8_t { WATER = 0, WET_VEG = 1, VEG = 2, BARE = 3 };

struct SynthScene {
  SceneStack scene;                  // raw grids + truth mask
  std::vector<uint8_t> landcover;    // LandClass per pixel
  std::vector<uint8_t> confuser;     // pixels shifted in radar but unchanged
};

// Pure function of (cfg, scene_index); same arguments give a bitwise
// identical scene.
SynthScene generate_scene(const SynthConfig& cfg, int scene_index);

// Generates, normalizes and tiles all scenes into the dataset container
// format with an 80/10/10 manifest; echoes the config to synth_config.json.
Manifest generate_dataset(const SynthConfig& cfg,
                          const std::filesystem::path& out_dir);

// In-memory variant used by tests and the acceptance suite.
std::vector<TileSample> generate_tiles(const SynthConfig& cfg,
                                       Manifest* manifest = nullptr);

}  // namespace cacdn

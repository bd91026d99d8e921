#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cacdn/tensor.hpp"

namespace cacdn {

enum class Modality { S1_PRE, S1_POST, S2_PRE, DEM_STACK };
enum class Split { TRAIN, VAL, TEST };

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::S1_PRE: return "s1_pre";
    case Modality::S1_POST: return "s1_post";
    case Modality::S2_PRE: return "s2_pre";
    case Modality::DEM_STACK: return "dem";
  }
  return "?";
}

inline const char* to_string(Split s) {
  switch (s) {
    case Split::TRAIN: return "train";
    case Split::VAL: return "val";
    case Split::TEST: return "test";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::TRAIN;
  if (s == "val") return Split::VAL;
  if (s == "test") return Split::TEST;
  fail("config_error", "unknown split '" + s + "'");
}

// Fixed band orders per modality. These are the one place the band layout is
// written down; everything else goes through band_spec().
struct BandSpec {
  Modality modality;
  std::vector<std::string> band_names;
  int count() const { return static_cast<int>(band_names.size()); }
};

inline const BandSpec& band_spec(Modality m) {
  static const BandSpec s1_pre{Modality::S1_PRE, {"VV", "VH"}};
  static const BandSpec s1_post{Modality::S1_POST, {"VV", "VH"}};
  static const BandSpec s2_pre{Modality::S2_PRE,
                               {"Red", "Green", "Blue", "NIR"}};
  static const BandSpec dem{
      Modality::DEM_STACK, {"elevation", "slope", "aspect_sin", "aspect_cos"}};
  switch (m) {
    case Modality::S1_PRE: return s1_pre;
    case Modality::S1_POST: return s1_post;
    case Modality::S2_PRE: return s2_pre;
    case Modality::DEM_STACK: return dem;
  }
  return dem;
}

constexpr Modality kInputModalities[] = {Modality::S1_PRE, Modality::S1_POST,
                                         Modality::S2_PRE,
                                         Modality::DEM_STACK};

// One co-registered multi-modal tile. All input grids are normalized to
// [0,1]; the mask is absent for inference tiles.
struct TileSample {
  std::string id;
  int p = 0;
  Tensor s1_pre;   // [2, p, p]
  Tensor s1_post;  // [2, p, p]
  Tensor s2_pre;   // [4, p, p]
  Tensor dem;      // [4, p, p]: elevation, slope, aspect_sin, aspect_cos
  std::vector<uint8_t> mask;  // [p*p], values in {0,1}; empty = absent
  bool has_mask = false;
  Split split = Split::TRAIN;

  const Tensor& grid(Modality m) const {
    switch (m) {
      case Modality::S1_PRE: return s1_pre;
      case Modality::S1_POST: return s1_post;
      case Modality::S2_PRE: return s2_pre;
      case Modality::DEM_STACK: return dem;
    }
    return dem;
  }
  Tensor& grid(Modality m) {
    return const_cast<Tensor&>(
        static_cast<const TileSample*>(this)->grid(m));
  }
};

// Decoder taps keyed by scale divisor (spatial size is p/d).
template <typename T>
struct FeaturePyramidT {
  std::map<int, TensorT<T>> levels;
};
using FeaturePyramid = FeaturePyramidT<float>;

// Returns an empty list iff every TileSample invariant holds. Total function:
// never throws, each violation names the offending field and rule.
std::vector<std::string> validate_sample(const TileSample& sample);

}  // namespace cacdn

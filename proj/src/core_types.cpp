#include "cacdn/core_types.hpp"

#include <cmath>

namespace cacdn {

namespace {

void check_grid(const Tensor& g, Modality m, int p,
                std::vector<std::string>& out) {
  const char* name = to_string(m);
  const int want_bands = band_spec(m).count();
  if (g.ndim() != 3) {
    out.push_back(std::string(name) + ": expected 3-d grid");
    return;
  }
  if (g.dim(0) != want_bands)
    out.push_back(std::string(name) + ": expected " +
                  std::to_string(want_bands) + " bands");
  if (g.dim(1) != p || g.dim(2) != p)
    out.push_back(std::string(name) + ": expected spatial dims " +
                  std::to_string(p) + "x" + std::to_string(p));
  for (float v : g.data) {
    if (!std::isfinite(v)) {
      out.push_back(std::string(name) + ": non-finite value");
      break;
    }
    if (v < 0.0f || v > 1.0f) {
      out.push_back(std::string(name) + ": value outside [0,1]");
      break;
    }
  }
}

}  // namespace

std::vector<std::string> validate_sample(const TileSample& s) {
  std::vector<std::string> out;
  if (s.id.empty()) out.push_back("id: empty");
  if (s.p <= 0 || s.p % 16 != 0)
    out.push_back("p: must be positive and divisible by 16");
  for (Modality m : kInputModalities) check_grid(s.grid(m), m, s.p, out);
  if (s.has_mask) {
    if (static_cast<int64_t>(s.mask.size()) !=
        static_cast<int64_t>(s.p) * s.p) {
      out.push_back("mask: expected " + std::to_string(s.p) + "x" +
                    std::to_string(s.p) + " grid");
    } else {
      for (uint8_t v : s.mask) {
        if (v > 1) {
          out.push_back("mask: non-binary value");
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace cacdn

#include "cacdn/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "container format readers/writers assume a little-endian host");

namespace cacdn {

using nlohmann::json;
namespace fs = std::filesystem;

void NormalizationSpec::validate() const {
  require(s1_db_min < s1_db_max, "config_error",
          "s1_db_min must be below s1_db_max");
  require(s2_reflectance_divisor > 0, "config_error",
          "s2_reflectance_divisor must be positive");
  if (!std::isnan(dem_elev_min) && !std::isnan(dem_elev_max))
    require(dem_elev_min <= dem_elev_max, "config_error",
            "dem_elev_min must not exceed dem_elev_max");
}

Tensor make_dem_stack(const Tensor& elevation_m, double pixel_spacing_m) {
  Tensor elev = elevation_m;
  if (elev.ndim() == 3 && elev.dim(0) == 1)
    elev.shape = {elev.dim(1), elev.dim(2)};
  require(elev.ndim() == 2, "data_error", "elevation grid must be 2-d");
  auto [slope, aspect] = compute_slope_aspect(elev, pixel_spacing_m);
  const int h = elev.dim(0), w = elev.dim(1);
  Tensor stack({4, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  std::copy_n(elev.ptr(), plane, stack.ptr());
  std::copy_n(slope.ptr(), plane, stack.ptr() + plane);
  constexpr double kDegToRad = 0.017453292519943295;
  for (size_t i = 0; i < plane; ++i) {
    double a = static_cast<double>(aspect.data[i]) * kDegToRad;
    stack.data[2 * plane + i] = static_cast<float>(std::sin(a));
    stack.data[3 * plane + i] = static_cast<float>(std::cos(a));
  }
  return stack;
}

namespace {

inline float scrub(float v, int64_t& nan_count) {
  if (!std::isfinite(v)) {
    ++nan_count;
    return 0.0f;
  }
  return v;
}

}  // namespace

NormalizeResult normalize(const SceneStack& scene,
                          const NormalizationSpec& spec) {
  spec.validate();
  require(scene.s1_pre.numel() > 0 && scene.s1_post.numel() > 0 &&
              scene.s2_pre.numel() > 0 && scene.dem.numel() > 0,
          "data_error", "scene '" + scene.id + "' is missing a modality");
  NormalizeResult res;
  res.scene = scene;
  SceneStack& out = res.scene;
  int64_t nans = 0;

  const double db_lo = spec.s1_db_min, db_span = spec.s1_db_max - spec.s1_db_min;
  for (Tensor* g : {&out.s1_pre, &out.s1_post}) {
    for (auto& v : g->data) {
      double x = scrub(v, nans);
      x = std::clamp(x, spec.s1_db_min, spec.s1_db_max);
      v = static_cast<float>((x - db_lo) / db_span);
    }
  }
  for (auto& v : out.s2_pre.data) {
    double x = scrub(v, nans);
    v = static_cast<float>(std::clamp(x / spec.s2_reflectance_divisor, 0.0, 1.0));
  }

  const size_t plane = static_cast<size_t>(out.dem.dim(1)) * out.dem.dim(2);
  float* elev = out.dem.ptr();
  for (size_t i = 0; i < plane; ++i) elev[i] = scrub(elev[i], nans);
  double lo = spec.dem_elev_min, hi = spec.dem_elev_max;
  if (std::isnan(lo) || std::isnan(hi)) {
    lo = *std::min_element(elev, elev + plane);
    hi = *std::max_element(elev, elev + plane);
  }
  const double span = hi - lo;
  for (size_t i = 0; i < plane; ++i) {
    double x = std::clamp(static_cast<double>(elev[i]), lo, hi);
    elev[i] = span > 0 ? static_cast<float>((x - lo) / span) : 0.0f;
  }
  float* slope = out.dem.ptr() + plane;
  for (size_t i = 0; i < plane; ++i)
    slope[i] = static_cast<float>(
        std::clamp(scrub(slope[i], nans) / 90.0, 0.0, 1.0));
  for (int band = 2; band < 4; ++band) {
    float* v = out.dem.ptr() + band * plane;
    for (size_t i = 0; i < plane; ++i)
      v[i] = static_cast<float>(
          std::clamp((scrub(v[i], nans) + 1.0) * 0.5, 0.0, 1.0));
  }
  out.normalized = true;
  res.nan_replaced = nans;
  return res;
}

std::vector<TileSample> tile_scene(const SceneStack& scene, int p, int stride) {
  require(scene.normalized, "data_error",
          "tile_scene expects a normalized scene");
  require(stride >= 1, "config_error", "stride must be >= 1");
  const int h = scene.height(), w = scene.width();
  require(p <= h && p <= w, "data_error",
          "patch size " + std::to_string(p) + " exceeds scene dims " +
              std::to_string(h) + "x" + std::to_string(w));
  const int rows = (h - p) / stride + 1;
  const int cols = (w - p) / stride + 1;
  const bool has_mask = !scene.mask.empty();
  std::vector<TileSample> tiles;
  tiles.reserve(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int y0 = r * stride, x0 = c * stride;
      TileSample t;
      t.id = scene.id + "_" + std::to_string(r) + "_" + std::to_string(c);
      t.p = p;
      if (scene.split_hint) t.split = *scene.split_hint;
      auto crop = [&](const Tensor& g) {
        Tensor out({g.dim(0), p, p});
        for (int band = 0; band < g.dim(0); ++band)
          for (int y = 0; y < p; ++y)
            std::copy_n(g.ptr() + (static_cast<size_t>(band) * h + y0 + y) * w +
                            x0,
                        p, out.ptr() + (static_cast<size_t>(band) * p + y) * p);
        return out;
      };
      t.s1_pre = crop(scene.s1_pre);
      t.s1_post = crop(scene.s1_post);
      t.s2_pre = crop(scene.s2_pre);
      t.dem = crop(scene.dem);
      if (has_mask) {
        t.mask.resize(static_cast<size_t>(p) * p);
        for (int y = 0; y < p; ++y)
          std::copy_n(&scene.mask[static_cast<size_t>(y0 + y) * w + x0], p,
                      &t.mask[static_cast<size_t>(y) * p]);
        t.has_mask = true;
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

namespace {

// Separable Gaussian blur with edge replication, in place.
void gaussian_blur(Tensor& grid, double sigma) {
  const int bands = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] =
        std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= sum;
  std::vector<double> tmp(static_cast<size_t>(h) * w);
  for (int band = 0; band < bands; ++band) {
    float* plane = grid.ptr() + static_cast<size_t>(band) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 plane[static_cast<size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
        tmp[static_cast<size_t>(y) * w + x] = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp[static_cast<size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
        plane[static_cast<size_t>(y) * w + x] =
            static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
  }
}

}  // namespace

TileSample augment(const TileSample& sample, uint64_t rng_seed) {
  Rng rng(rng_seed);
  // fixed draw order keeps the stream stable whichever branches fire
  const bool do_blur = rng.uniform() < 0.5;
  const double sigma = rng.uniform(0.5, 1.5);
  const bool do_gamma = rng.uniform() < 0.5;
  const double gamma = rng.uniform(0.7, 1.4);
  if (!do_blur && !do_gamma) return sample;
  TileSample out = sample;
  if (do_blur)
    for (Modality m : kInputModalities) gaussian_blur(out.grid(m), sigma);
  if (do_gamma)
    for (auto& v : out.s2_pre.data)
      v = static_cast<float>(
          std::clamp(std::pow(static_cast<double>(v), gamma), 0.0, 1.0));
  return out;
}

Manifest build_manifest(const std::vector<std::string>& ids,
                        const SplitFractions& fractions,
                        const std::map<std::string, Split>* overrides) {
  require(!ids.empty(), "data_error", "cannot build a manifest from no samples");
  const double total = fractions.train + fractions.val + fractions.test;
  require(std::abs(total - 1.0) < 1e-9, "config_error",
          "split fractions must sum to 1");
  {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "data_error", "duplicate sample ids");
  }
  Manifest m;
  std::vector<std::string> pool;
  for (const auto& id : ids) {
    if (overrides) {
      auto it = overrides->find(id);
      if (it != overrides->end()) {
        switch (it->second) {
          case Split::TRAIN: m.train.push_back(id); break;
          case Split::VAL: m.val.push_back(id); break;
          case Split::TEST: m.test.push_back(id); break;
        }
        continue;
      }
    }
    pool.push_back(id);
  }
  std::sort(pool.begin(), pool.end(),
            [](const std::string& a, const std::string& b) {
              uint64_t ha = splitmix64(fnv1a64(a)), hb = splitmix64(fnv1a64(b));
              return ha != hb ? ha < hb : a < b;
            });
  const auto n = static_cast<double>(pool.size());
  const auto n_train = static_cast<size_t>(std::floor(fractions.train * n));
  const auto n_train_val = static_cast<size_t>(
      std::floor((fractions.train + fractions.val) * n));
  for (size_t i = 0; i < pool.size(); ++i) {
    if (i < n_train)
      m.train.push_back(pool[i]);
    else if (i < n_train_val)
      m.val.push_back(pool[i]);
    else
      m.test.push_back(pool[i]);
  }
  std::sort(m.train.begin(), m.train.end());
  std::sort(m.val.begin(), m.val.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

// --- container IO ------------------------------------------------------------

namespace {

constexpr char kMagic[5] = "CACD";
constexpr uint32_t kVersion = 1;

void write_header(std::ofstream& os, const std::vector<int>& dims) {
  os.write(kMagic, 4);
  uint32_t v = kVersion, nd = static_cast<uint32_t>(dims.size());
  os.write(reinterpret_cast<const char*>(&v), 4);
  os.write(reinterpret_cast<const char*>(&nd), 4);
  for (int d : dims) {
    uint32_t u = static_cast<uint32_t>(d);
    os.write(reinterpret_cast<const char*>(&u), 4);
  }
}

std::vector<int> read_header(std::ifstream& is, const fs::path& path) {
  char magic[4];
  uint32_t v = 0, nd = 0;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&v), 4);
  is.read(reinterpret_cast<char*>(&nd), 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    fail("io_error", "not a CACD grid file: " + path.string());
  if (v != kVersion)
    fail("io_error", "unsupported grid version " + std::to_string(v) + ": " +
                         path.string());
  if (nd == 0 || nd > 4)
    fail("io_error", "bad grid rank in " + path.string());
  std::vector<int> dims(nd);
  for (auto& d : dims) {
    uint32_t u = 0;
    is.read(reinterpret_cast<char*>(&u), 4);
    d = static_cast<int>(u);
  }
  if (!is) fail("io_error", "truncated grid header: " + path.string());
  return dims;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail("io_error", "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("io_error", "cannot read " + path.string());
  return is;
}

json read_json_file(const fs::path& path) {
  auto is = open_in(path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) fail("io_error", "invalid JSON in " + path.string());
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
  if (!os) fail("io_error", "short write to " + path.string());
}

}  // namespace

void write_grid(const fs::path& path, const Tensor& grid) {
  auto os = open_out(path);
  write_header(os, grid.shape);
  os.write(reinterpret_cast<const char*>(grid.ptr()),
           static_cast<std::streamsize>(grid.numel() * sizeof(float)));
  if (!os) fail("io_error", "short write to " + path.string());
}

Tensor read_grid(const fs::path& path) {
  auto is = open_in(path);
  auto dims = read_header(is, path);
  Tensor t(dims);
  is.read(reinterpret_cast<char*>(t.ptr()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (is.gcount() !=
      static_cast<std::streamsize>(t.numel() * sizeof(float)))
    fail("io_error", "truncated grid payload: " + path.string());
  return t;
}

void write_mask(const fs::path& path, const std::vector<uint8_t>& mask, int h,
                int w) {
  require(static_cast<int64_t>(mask.size()) == static_cast<int64_t>(h) * w,
          "data_error", "mask size does not match dims");
  auto os = open_out(path);
  write_header(os, {h, w});
  os.write(reinterpret_cast<const char*>(mask.data()),
           static_cast<std::streamsize>(mask.size()));
  if (!os) fail("io_error", "short write to " + path.string());
}

std::vector<uint8_t> read_mask(const fs::path& path, int* h, int* w) {
  auto is = open_in(path);
  auto dims = read_header(is, path);
  if (dims.size() != 2) fail("io_error", "mask must be 2-d: " + path.string());
  std::vector<uint8_t> mask(static_cast<size_t>(dims[0]) *
                            static_cast<size_t>(dims[1]));
  is.read(reinterpret_cast<char*>(mask.data()),
          static_cast<std::streamsize>(mask.size()));
  if (is.gcount() != static_cast<std::streamsize>(mask.size()))
    fail("io_error", "truncated mask payload: " + path.string());
  if (h) *h = dims[0];
  if (w) *w = dims[1];
  return mask;
}

void write_sample(const fs::path& dir, const TileSample& sample,
                  const std::string& provenance) {
  fs::create_directories(dir);
  json files;
  for (Modality m : kInputModalities) {
    std::string fname = std::string(to_string(m)) + ".bin";
    write_grid(dir / fname, sample.grid(m));
    files[to_string(m)] = fname;
  }
  if (sample.has_mask) {
    write_mask(dir / "mask.bin", sample.mask, sample.p, sample.p);
    files["mask"] = "mask.bin";
  }
  json j = {{"id", sample.id},
            {"p", sample.p},
            {"split", to_string(sample.split)},
            {"files", files},
            {"provenance", provenance}};
  write_text_file(dir / "sample.json", j.dump(2) + "\n");
}

TileSample read_sample(const fs::path& dir) {
  json j = read_json_file(dir / "sample.json");
  TileSample t;
  t.id = j.at("id").get<std::string>();
  t.p = j.at("p").get<int>();
  t.split = split_from_string(j.at("split").get<std::string>());
  const json& files = j.at("files");
  for (Modality m : kInputModalities)
    t.grid(m) = read_grid(dir / files.at(to_string(m)).get<std::string>());
  if (files.contains("mask")) {
    int h = 0, w = 0;
    t.mask = read_mask(dir / files.at("mask").get<std::string>(), &h, &w);
    t.has_mask = true;
  }
  return t;
}

void save_manifest(const fs::path& path, const Manifest& m) {
  json j = {{"train", m.train}, {"val", m.val}, {"test", m.test}};
  write_text_file(path, j.dump(2) + "\n");
}

Manifest load_manifest(const fs::path& path) {
  json j = read_json_file(path);
  Manifest m;
  m.train = j.at("train").get<std::vector<std::string>>();
  m.val = j.at("val").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  return m;
}

void save_dataset(const fs::path& dataset_dir,
                  const std::vector<TileSample>& tiles, const Manifest& m,
                  const std::string& provenance) {
  fs::create_directories(dataset_dir / "tiles");
  for (const auto& t : tiles)
    write_sample(dataset_dir / "tiles" / t.id, t, provenance);
  save_manifest(dataset_dir / "manifest.json", m);
}

std::vector<TileSample> load_split(const fs::path& dataset_dir, Split split) {
  Manifest m = load_manifest(dataset_dir / "manifest.json");
  std::vector<TileSample> tiles;
  tiles.reserve(m.ids(split).size());
  for (const auto& id : m.ids(split)) {
    TileSample t = read_sample(dataset_dir / "tiles" / id);
    t.split = split;
    tiles.push_back(std::move(t));
  }
  return tiles;
}

void write_scene(const fs::path& dir, const SceneStack& scene) {
  require(!scene.normalized, "data_error",
          "scene container stores raw (unnormalized) grids");
  fs::create_directories(dir);
  write_grid(dir / "s1_pre.bin", scene.s1_pre);
  write_grid(dir / "s1_post.bin", scene.s1_post);
  write_grid(dir / "s2_pre.bin", scene.s2_pre);
  Tensor elev({scene.height(), scene.width()});
  std::copy_n(scene.dem.ptr(), elev.numel(), elev.ptr());
  write_grid(dir / "elevation.bin", elev);
  json j = {{"id", scene.id},
            {"pixel_spacing_m", scene.pixel_spacing_m},
            {"files",
             {{"s1_pre", "s1_pre.bin"},
              {"s1_post", "s1_post.bin"},
              {"s2_pre", "s2_pre.bin"},
              {"elevation", "elevation.bin"}}}};
  if (!scene.mask.empty()) {
    write_mask(dir / "mask.bin", scene.mask, scene.height(), scene.width());
    j["files"]["mask"] = "mask.bin";
  }
  if (scene.split_hint) j["split_hint"] = to_string(*scene.split_hint);
  write_text_file(dir / "scene.json", j.dump(2) + "\n");
}

SceneStack read_scene(const fs::path& dir) {
  json j = read_json_file(dir / "scene.json");
  SceneStack s;
  s.id = j.at("id").get<std::string>();
  s.pixel_spacing_m = j.at("pixel_spacing_m").get<double>();
  const json& files = j.at("files");
  s.s1_pre = read_grid(dir / files.at("s1_pre").get<std::string>());
  s.s1_post = read_grid(dir / files.at("s1_post").get<std::string>());
  s.s2_pre = read_grid(dir / files.at("s2_pre").get<std::string>());
  Tensor elev = read_grid(dir / files.at("elevation").get<std::string>());
  s.dem = make_dem_stack(elev, s.pixel_spacing_m);
  if (files.contains("mask")) {
    int h = 0, w = 0;
    s.mask = read_mask(dir / files.at("mask").get<std::string>(), &h, &w);
  }
  if (j.contains("split_hint"))
    s.split_hint = split_from_string(j.at("split_hint").get<std::string>());
  return s;
}

}  // namespace cacdn

#include "cacdn/runconfig.hpp"

#include <fstream>
#include <set>

namespace cacdn {

using nlohmann::json;

namespace {

// Strict object reader: every key must be known, every known key optional.
class ObjReader {
 public:
  ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), "config_error", path_ + " must be a JSON object");
  }
  ~ObjReader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail("config_error", path_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        fail("config_error", "unknown key '" + path_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json adam_to_json(const AdamConfig& a) {
  return {{"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

json schedule_to_json(const TrainSchedule& s) {
  return {{"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"lr_init", s.lr_init},
          {"lr_floor", s.lr_floor},
          {"adam", adam_to_json(s.adam)},
          {"plateau_patience", s.plateau.patience},
          {"plateau_factor", s.plateau.factor},
          {"plateau_min_delta", s.plateau.min_delta}};
}

TrainSchedule schedule_from_json(const json& j, const std::string& path,
                                 TrainSchedule defaults) {
  TrainSchedule s = defaults;
  ObjReader r(j, path);
  r.get("epochs", s.epochs);
  r.get("batch_size", s.batch_size);
  r.get("lr_init", s.lr_init);
  r.get("lr_floor", s.lr_floor);
  if (r.has("adam")) {
    ObjReader ra(r.sub("adam"), path + ".adam");
    ra.get("beta1", s.adam.beta1);
    ra.get("beta2", s.adam.beta2);
    ra.get("eps", s.adam.eps);
    ra.finish();
  }
  r.get("plateau_patience", s.plateau.patience);
  r.get("plateau_factor", s.plateau.factor);
  r.get("plateau_min_delta", s.plateau.min_delta);
  r.finish();
  s.validate();
  return s;
}

json loss_to_json(const LossConfig& c) {
  return {{"sup_weight", c.sup_weight},   {"selfsup_weight", c.selfsup_weight},
          {"beta", c.beta},               {"focal_gamma", c.focal_gamma},
          {"focal_alpha", c.focal_alpha}, {"dice_smooth", c.dice_smooth}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig c;
  ObjReader r(j, "loss");
  r.get("sup_weight", c.sup_weight);
  r.get("selfsup_weight", c.selfsup_weight);
  r.get("beta", c.beta);
  r.get("focal_gamma", c.focal_gamma);
  r.get("focal_alpha", c.focal_alpha);
  r.get("dice_smooth", c.dice_smooth);
  r.finish();
  c.validate();
  return c;
}

json normalization_to_json(const NormalizationSpec& n) {
  json j = {{"s1_db_min", n.s1_db_min},
            {"s1_db_max", n.s1_db_max},
            {"s2_reflectance_divisor", n.s2_reflectance_divisor}};
  if (!std::isnan(n.dem_elev_min)) j["dem_elev_min"] = n.dem_elev_min;
  if (!std::isnan(n.dem_elev_max)) j["dem_elev_max"] = n.dem_elev_max;
  return j;
}

NormalizationSpec normalization_from_json(const json& j) {
  NormalizationSpec n;
  ObjReader r(j, "data.normalization");
  r.get("s1_db_min", n.s1_db_min);
  r.get("s1_db_max", n.s1_db_max);
  r.get("s2_reflectance_divisor", n.s2_reflectance_divisor);
  r.get("dem_elev_min", n.dem_elev_min);
  r.get("dem_elev_max", n.dem_elev_max);
  r.finish();
  n.validate();
  return n;
}

json synth_to_json(const SynthConfig& s) {
  return {{"seed", s.seed},
          {"n_scenes", s.n_scenes},
          {"scene_size", s.scene_size},
          {"p", s.p},
          {"event",
           s.event == SynthConfig::Event::FLOOD ? "flood" : "landslide"},
          {"confuser_fraction", s.confuser_fraction},
          {"speckle_looks", s.speckle_looks}};
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig s;
  ObjReader r(j, "synth");
  r.get("seed", s.seed);
  r.get("n_scenes", s.n_scenes);
  r.get("scene_size", s.scene_size);
  r.get("p", s.p);
  std::string event = s.event == SynthConfig::Event::FLOOD ? "flood"
                                                           : "landslide";
  r.get("event", event);
  if (event == "flood")
    s.event = SynthConfig::Event::FLOOD;
  else if (event == "landslide")
    s.event = SynthConfig::Event::LANDSLIDE;
  else
    fail("config_error", "synth.event must be 'flood' or 'landslide'");
  r.get("confuser_fraction", s.confuser_fraction);
  r.get("speckle_looks", s.speckle_looks);
  r.finish();
  s.validate();
  return s;
}

}  // namespace

json autoencoder_config_to_json(const AutoencoderConfig& c) {
  return {{"in_channels", c.in_channels},
          {"levels", c.levels},
          {"stem_channels", c.stem_channels},
          {"stage_channels", c.stage_channels},
          {"blocks_per_stage", c.blocks_per_stage},
          {"decoder_channels", c.decoder_channels},
          {"tap_scales", c.tap_scales}};
}

AutoencoderConfig autoencoder_config_from_json(const json& j) {
  AutoencoderConfig c;
  ObjReader r(j, "autoencoder");
  r.get("in_channels", c.in_channels);
  r.get("levels", c.levels);
  r.get("stem_channels", c.stem_channels);
  r.get("stage_channels", c.stage_channels);
  r.get("blocks_per_stage", c.blocks_per_stage);
  r.get("decoder_channels", c.decoder_channels);
  r.get("tap_scales", c.tap_scales);
  r.finish();
  c.validate();
  return c;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"variant",
           c.variant == ModelConfig::Variant::LARGE ? "large" : "small"},
          {"p", c.p},
          {"use_s2_pre", c.use_s2_pre},
          {"dem_branch_channels", c.dem_branch_channels},
          {"width_mult", c.width_mult},
          {"full_scale", c.full_scale}};
}

ModelConfig model_config_from_json(const json& j) {
  ObjReader r(j, "model");
  std::string variant = "small";
  bool use_s2 = true;
  double width_mult = 0.25;
  bool full_scale = false;
  r.get("variant", variant);
  r.get("use_s2_pre", use_s2);
  r.get("width_mult", width_mult);
  r.get("full_scale", full_scale);
  require(variant == "small" || variant == "large", "config_error",
          "model.variant must be 'small' or 'large'");
  ModelConfig c = variant == "large"
                      ? ModelConfig::flood(use_s2, width_mult, full_scale)
                      : ModelConfig::landslide(use_s2, width_mult, full_scale);
  r.get("p", c.p);
  r.get("dem_branch_channels", c.dem_branch_channels);
  r.finish();
  c.validate();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"model", model_config_to_json(c.model)},
          {"loss", loss_to_json(c.loss)},
          {"schedule",
           {{"pretrain", schedule_to_json(c.pretrain_schedule)},
            {"end_to_end", schedule_to_json(c.e2e_schedule)}}},
          {"data",
           {{"dataset_dir", c.dataset_dir},
            {"normalization", normalization_to_json(c.normalization)}}},
          {"synth", synth_to_json(c.synth)},
          {"seed", c.seed},
          {"deterministic", c.deterministic}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ObjReader r(j, "config");
  if (r.has("model")) c.model = model_config_from_json(r.sub("model"));
  if (r.has("loss")) c.loss = loss_from_json(r.sub("loss"));
  if (r.has("schedule")) {
    ObjReader rs(r.sub("schedule"), "schedule");
    if (rs.has("pretrain"))
      c.pretrain_schedule = schedule_from_json(
          rs.sub("pretrain"), "schedule.pretrain", TrainSchedule::pretrain());
    if (rs.has("end_to_end"))
      c.e2e_schedule = schedule_from_json(
          rs.sub("end_to_end"), "schedule.end_to_end",
          TrainSchedule::end_to_end());
    rs.finish();
  }
  if (r.has("data")) {
    ObjReader rd(r.sub("data"), "data");
    rd.get("dataset_dir", c.dataset_dir);
    if (rd.has("normalization"))
      c.normalization = normalization_from_json(rd.sub("normalization"));
    rd.finish();
  }
  if (r.has("synth")) c.synth = synth_from_json(r.sub("synth"));
  r.get("seed", c.seed);
  r.get("deterministic", c.deterministic);
  r.finish();
  c.pretrain_schedule.phase = TrainSchedule::Phase::PRETRAIN;
  c.e2e_schedule.phase = TrainSchedule::Phase::END_TO_END;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("io_error", "cannot read config file " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) fail("config_error", "invalid JSON in " + path);
  return run_config_from_json(j);
}

uint64_t config_hash(const json& config) { return fnv1a64(config.dump()); }

std::string first_json_divergence(const json& a, const json& b) {
  if (a == b) return "";
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
    for (const auto& k : keys) {
      if (!a.contains(k) || !b.contains(k)) return k;
      std::string sub = first_json_divergence(a.at(k), b.at(k));
      if (!sub.empty()) return k + "." + sub;
      if (a.at(k) != b.at(k)) return k;
    }
  }
  return "<root>";
}

}  // namespace cacdn

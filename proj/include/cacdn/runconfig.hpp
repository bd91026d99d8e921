#pragma once

#include <string>

#include "json.hpp"

#include "cacdn/ingest.hpp"
#include "cacdn/losses.hpp"
#include "cacdn/network.hpp"
#include "cacdn/synthgen.hpp"
#include "cacdn/trainer_types.hpp"

// Unified run configuration: one JSON document drives every CLI command.
// Parsing is strict (unknown keys are rejected) and every field except the
// data paths has a default; the fully resolved document is echoed into each
// run directory so reruns reproduce outputs.

namespace cacdn {

struct RunConfig {
  ModelConfig model = ModelConfig::landslide();
  LossConfig loss;
  TrainSchedule pretrain_schedule = TrainSchedule::pretrain();
  TrainSchedule e2e_schedule = TrainSchedule::end_to_end();
  NormalizationSpec normalization;
  SynthConfig synth;
  uint64_t seed = 7;
  bool deterministic = true;
  std::string dataset_dir;  // the one field without a default
};

nlohmann::json autoencoder_config_to_json(const AutoencoderConfig& c);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);

// Stable 64-bit hash of a canonically serialized config document.
uint64_t config_hash(const nlohmann::json& config);

// First dotted path at which two JSON documents differ (empty if equal).
std::string first_json_divergence(const nlohmann::json& a,
                                  const nlohmann::json& b);

}  // namespace cacdn

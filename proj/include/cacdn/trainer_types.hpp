#pragma once

#include <cmath>
#include <string>

#include "cacdn/common.hpp"

namespace cacdn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct PlateauConfig {
  int patience = 10;
  double factor = 0.5;
  double min_delta = 1e-5;
};

struct TrainSchedule {
  enum class Phase { PRETRAIN, END_TO_END };
  Phase phase = Phase::END_TO_END;
  int epochs = 300;
  int batch_size = 4;
  double lr_init = 1e-5;
  double lr_floor = 1e-6;
  AdamConfig adam;
  PlateauConfig plateau;

  static TrainSchedule pretrain() {
    TrainSchedule s;
    s.phase = Phase::PRETRAIN;
    s.epochs = 50;
    s.lr_init = 1e-4;
    return s;
  }
  static TrainSchedule end_to_end() { return TrainSchedule{}; }

  void validate() const {
    require(epochs >= 1, "config_error", "epochs must be >= 1");
    require(batch_size >= 1, "config_error", "batch_size must be >= 1");
    require(lr_init > 0 && lr_floor > 0 && lr_floor <= lr_init, "config_error",
            "need 0 < lr_floor <= lr_init");
    require(plateau.patience >= 1, "config_error", "patience must be >= 1");
    require(plateau.factor > 0 && plateau.factor < 1, "config_error",
            "plateau factor must lie in (0,1)");
  }
};

inline const char* to_string(TrainSchedule::Phase p) {
  return p == TrainSchedule::Phase::PRETRAIN ? "pretrain" : "end_to_end";
}

}  // namespace cacdn

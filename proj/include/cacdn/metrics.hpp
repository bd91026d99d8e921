#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cacdn/core_types.hpp"
#include "cacdn/tensor.hpp"

// Evaluation metrics: micro (pixel-pooled) change-class IoU, macro per-tile
// mean IoU with empty-union tiles excluded, and average-precision AUPRC with
// step interpolation. Pixel scores feed a seeded reservoir so memory stays
// bounded on large evaluation sets; below the cap every pixel is kept.

namespace cacdn {

struct TileCounts {
  std::string id;
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  int64_t union_count() const { return tp + fp + fn; }
  double iou() const {
    return union_count() > 0
               ? static_cast<double>(tp) / static_cast<double>(union_count())
               : 0.0;
  }
};

class EvalAccumulator {
 public:
  explicit EvalAccumulator(int64_t reservoir_cap = 2'000'000,
                           uint64_t seed = 0x5eed);

  // prob and gt are p*p pixel arrays; counts use threshold 0.5 by default.
  void add_tile(const std::string& id, const Tensor& prob,
                const std::vector<uint8_t>& gt, double threshold = 0.5);

  const std::vector<TileCounts>& tiles() const { return tiles_; }
  const std::vector<float>& scores() const { return scores_; }
  const std::vector<uint8_t>& labels() const { return labels_; }

 private:
  void reservoir_add(float score, uint8_t label);

  std::vector<TileCounts> tiles_;
  std::vector<float> scores_;
  std::vector<uint8_t> labels_;
  int64_t reservoir_cap_;
  int64_t seen_ = 0;
  Rng rng_;
};

// Micro IoU pooled over all test pixels. Errors when the pooled union is
// empty ("no change content in evaluation set").
double iou_dataset(const EvalAccumulator& acc);

// Macro average of per-tile change-class IoU; tiles whose prediction and
// ground truth are both empty are excluded and counted.
double mean_iou(const EvalAccumulator& acc, int* n_excluded = nullptr);

// Average precision over descending scores with step interpolation; ties are
// broken by stable original order. Errors on single-class label sets.
double auprc(const std::vector<float>& scores,
             const std::vector<uint8_t>& labels);

struct MetricReport {
  double auprc = 0.0;
  double iou = 0.0;
  double mean_iou = 0.0;
  int n_tiles = 0;
  int n_tiles_excluded = 0;
};

// Model abstraction: maps a tile to a [p,p] probability grid.
using ModelFn = std::function<Tensor(const TileSample&)>;

// Runs the model over every tile, accumulates counts and scores, and emits
// the report. When csv_path is non-empty, writes the per-tile breakdown as
// "id,tp,fp,fn,tn,iou" rows.
MetricReport evaluate(const ModelFn& model,
                      const std::vector<TileSample>& tiles,
                      double threshold = 0.5,
                      const std::filesystem::path& csv_path = {},
                      int64_t reservoir_cap = 2'000'000);

}  // namespace cacdn

#include "cacdn/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace cacdn {

EvalAccumulator::EvalAccumulator(int64_t reservoir_cap, uint64_t seed)
    : reservoir_cap_(reservoir_cap), rng_(seed) {
  require(reservoir_cap_ >= 1, "config_error", "reservoir cap must be >= 1");
}

void EvalAccumulator::reservoir_add(float score, uint8_t label) {
  ++seen_;
  if (static_cast<int64_t>(scores_.size()) < reservoir_cap_) {
    scores_.push_back(score);
    labels_.push_back(label);
    return;
  }
  // algorithm R: replace a random slot with probability cap/seen
  int64_t j = static_cast<int64_t>(rng_.uniform() * static_cast<double>(seen_));
  if (j < reservoir_cap_) {
    scores_[static_cast<size_t>(j)] = score;
    labels_[static_cast<size_t>(j)] = label;
  }
}

void EvalAccumulator::add_tile(const std::string& id, const Tensor& prob,
                               const std::vector<uint8_t>& gt,
                               double threshold) {
  require(static_cast<size_t>(prob.numel()) == gt.size(), "shape_mismatch",
          "add_tile: prob and mask sizes disagree");
  TileCounts c;
  c.id = id;
  for (size_t i = 0; i < gt.size(); ++i) {
    const bool pred = static_cast<double>(prob.data[i]) >= threshold;
    if (gt[i]) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
    reservoir_add(prob.data[i], gt[i]);
  }
  tiles_.push_back(std::move(c));
}

double iou_dataset(const EvalAccumulator& acc) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& t : acc.tiles()) {
    tp += t.tp;
    fp += t.fp;
    fn += t.fn;
  }
  require(tp + fp + fn > 0, "metric_undefined",
          "no change content in evaluation set");
  return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
}

double mean_iou(const EvalAccumulator& acc, int* n_excluded) {
  double sum = 0.0;
  int included = 0, excluded = 0;
  for (const auto& t : acc.tiles()) {
    if (t.union_count() == 0) {
      ++excluded;
      continue;
    }
    sum += t.iou();
    ++included;
  }
  if (n_excluded) *n_excluded = excluded;
  require(included > 0, "metric_undefined",
          "every tile has empty prediction and ground truth");
  return sum / included;
}

double auprc(const std::vector<float>& scores,
             const std::vector<uint8_t>& labels) {
  require(scores.size() == labels.size(), "shape_mismatch",
          "auprc: scores and labels sizes disagree");
  int64_t n_pos = std::count(labels.begin(), labels.end(), uint8_t(1));
  require(n_pos > 0 && n_pos < static_cast<int64_t>(labels.size()),
          "metric_undefined", "AUPRC undefined for single-class labels");
  std::vector<int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  // AP = sum over positive ranks of (delta recall) * precision@rank
  double ap = 0.0;
  int64_t tp = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (labels[static_cast<size_t>(order[k])]) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

MetricReport evaluate(const ModelFn& model,
                      const std::vector<TileSample>& tiles, double threshold,
                      const std::filesystem::path& csv_path,
                      int64_t reservoir_cap) {
  require(!tiles.empty(), "data_error", "evaluate: empty dataset");
  for (const auto& t : tiles)
    require(t.has_mask, "data_error",
            "evaluate: tile '" + t.id + "' has no mask");
  EvalAccumulator acc(reservoir_cap);
  for (const auto& t : tiles) {
    Tensor prob = model(t);
    acc.add_tile(t.id, prob, t.mask, threshold);
  }
  MetricReport r;
  r.n_tiles = static_cast<int>(tiles.size());
  r.auprc = auprc(acc.scores(), acc.labels());
  r.iou = iou_dataset(acc);
  r.mean_iou = mean_iou(acc, &r.n_tiles_excluded);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) fail("io_error", "cannot write " + csv_path.string());
    os << "id,tp,fp,fn,tn,iou\n";
    char buf[64];
    for (const auto& t : acc.tiles()) {
      std::snprintf(buf, sizeof(buf), "%.9g", t.iou());
      os << t.id << ',' << t.tp << ',' << t.fp << ',' << t.fn << ',' << t.tn
         << ',' << buf << '\n';
    }
  }
  return r;
}

}  // namespace cacdn

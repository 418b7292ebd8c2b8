#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mq/core.hpp"

namespace mq {

struct VideoInfo {
  double duration = 0.0;
  std::vector<std::pair<Segment, std::string>> ground_truths;
};

struct Dataset {
  std::map<std::string, VideoInfo> videos;

  std::size_t total_gt() const {
    std::size_t n = 0;
    for (const auto& [id, v] : videos) n += v.ground_truths.size();
    return n;
  }
};

using PredictionSet = std::map<std::string, std::vector<ScoredSegment>>;

struct EvalReport {
  // (category, threshold) -> AP
  std::map<std::pair<std::string, double>, double> ap;
  std::map<double, double> map_at;
  double average_map = 0.0;
  // (k, threshold) -> recall
  std::map<std::pair<int, double>, double> recall_at;
};

struct MatchResult {
  // Prediction indices in evaluation order (score descending, input-order
  // ties) and the TP flag / matched GT index for each, in that order.
  std::vector<int> order;
  std::vector<char> is_tp;
  std::vector<int> matched_gt;  // -1 for FP
};

/// Greedy one-to-one matching: each prediction, in score order, takes the
/// highest-tIoU unmatched same-category GT at or above the threshold.
MatchResult match_predictions(
    const std::vector<ScoredSegment>& preds,
    const std::vector<std::pair<Segment, std::string>>& gts, double threshold);

/// All-point interpolated AP over flags given in score order.
double average_precision(const std::vector<char>& flags, int num_gt);

/// All-point interpolated AP with an arbitrary recall denominator
/// (used for DETAD-style normalized mAP).
double average_precision_normalized(const std::vector<char>& flags,
                                    double gt_denominator);

struct EvalOptions {
  bool macro_recall = false;  // default micro over all GT
  int threads = 1;
};

EvalReport evaluate(const Dataset& dataset, const PredictionSet& preds,
                    const std::vector<double>& thresholds,
                    const std::vector<int>& recall_ks,
                    const EvalOptions& opts = {});

std::vector<double> default_tiou_thresholds();

}  // namespace mq

#pragma once

#include <cstddef>
#include <vector>

#include "mq/core.hpp"

namespace mq {

enum class NmsMethod { hard, soft_linear, soft_gaussian };

struct NmsConfig {
  NmsMethod method = NmsMethod::soft_gaussian;
  double sigma = 2.0;
  double iou_threshold = 0.5;
  double score_floor = 0.001;
  std::size_t max_kept = 2000;
  bool class_agnostic = false;
};

/// Prior baseline setting (sigma = 0.9), kept as a named preset.
NmsConfig nms_baseline_preset();

/// exp(-iou^2 / sigma). Rejects sigma <= 0.
double gaussian_penalty(double iou, double sigma);

/// Greedy score-decay suppression. Hard NMS zeroes scores above the IoU
/// threshold; soft variants decay them. Rescoring is cumulative across
/// iterations. Output is sorted by final score and truncated to max_kept.
std::vector<ScoredSegment> suppress(const std::vector<ScoredSegment>& candidates,
                                    const NmsConfig& config);

}  // namespace mq

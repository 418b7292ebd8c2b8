#pragma once

#include <utility>
#include <vector>

#include "mq/core.hpp"

namespace mq {

/// Per-candidate model outputs read by the assignment cost.
struct CandidatePrediction {
  PyramidPoint point;
  std::vector<double> class_probs;
  Segment decoded;
};

struct AssignConfig {
  double center_radius = 1.5;   // in strides
  double lambda_iou = 3.0;      // IoU cost weight
  int top_q = 10;               // dynamic-k pool size
  double ineligible_cost = 1e5;
  double eps = 1e-8;
  // Whether SimOTA eligibility also enforces the candidate's regression
  // range, as center sampling does. Off by default.
  bool keep_range_constraint = false;
};

struct AssignmentResult {
  static constexpr int kBackground = -1;

  struct CandidateAssignment {
    int gt_index = kBackground;
    double cost = 0.0;
  };
  std::vector<CandidateAssignment> candidates;
  // Per-GT assigned candidate indices (after conflict resolution) and the
  // dynamic k chosen for that GT (0 when no candidate was eligible).
  std::vector<std::vector<int>> gt_candidates;
  std::vector<int> dynamic_k;
};

/// Ground truth pairs are (segment, category index).
using GroundTruth = std::pair<Segment, int>;

/// Static baseline: a point is positive for a GT when it sits within
/// radius strides of the GT center, inside the GT, and the larger of its
/// onset/offset distances (in stride units) falls in the point's
/// regression range. Multi-eligible points go to the shortest GT.
AssignmentResult center_sampling(const std::vector<PyramidPoint>& points,
                                 const std::vector<GroundTruth>& gts,
                                 double radius);

/// Simplified optimal-transport assignment: per-GT dynamic top-k on a
/// classification + IoU cost matrix, with min-cost conflict resolution
/// and no re-filling pass.
AssignmentResult simota_assign(const std::vector<CandidatePrediction>& candidates,
                               const std::vector<GroundTruth>& gts,
                               const AssignConfig& config);

}  // namespace mq

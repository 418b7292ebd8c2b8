#include "mq/assign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mq {

AssignmentResult center_sampling(const std::vector<PyramidPoint>& points,
                                 const std::vector<GroundTruth>& gts,
                                 double radius) {
  if (radius <= 0.0) throw std::invalid_argument("center_sampling: radius <= 0");

  AssignmentResult result;
  result.candidates.resize(points.size());
  result.gt_candidates.resize(gts.size());
  result.dynamic_k.assign(gts.size(), 0);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const PyramidPoint& p = points[i];
    int chosen = AssignmentResult::kBackground;
    double chosen_duration = 0.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const Segment& g = gts[j].first;
      if (std::abs(p.time - g.center()) > radius * p.stride) continue;
      if (p.time < g.start || p.time > g.end) continue;
      double d_on = (p.time - g.start) / p.stride;
      double d_off = (g.end - p.time) / p.stride;
      double reach = std::max(d_on, d_off);
      if (reach < p.range_min || reach >= p.range_max) continue;
      if (chosen == AssignmentResult::kBackground ||
          g.duration() < chosen_duration) {
        chosen = static_cast<int>(j);
        chosen_duration = g.duration();
      }
    }
    result.candidates[i].gt_index = chosen;
    if (chosen != AssignmentResult::kBackground)
      result.gt_candidates[chosen].push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < gts.size(); ++j)
    result.dynamic_k[j] = static_cast<int>(result.gt_candidates[j].size());
  return result;
}

namespace {

double neg_log_clamped(double v, double eps) {
  return -std::log(std::clamp(v, eps, 1.0));
}

}  // namespace

AssignmentResult simota_assign(const std::vector<CandidatePrediction>& candidates,
                               const std::vector<GroundTruth>& gts,
                               const AssignConfig& cfg) {
  if (candidates.empty())
    throw std::invalid_argument("simota_assign: no candidates");
  if (cfg.top_q < 1) throw std::invalid_argument("simota_assign: top_q < 1");
  if (cfg.lambda_iou < 0.0)
    throw std::invalid_argument("simota_assign: lambda_iou < 0");

  const std::size_t num_classes = candidates.front().class_probs.size();
  for (const auto& c : candidates)
    if (c.class_probs.size() != num_classes)
      throw std::invalid_argument(
          "simota_assign: class_probs length disagrees across candidates");
  for (const auto& [seg, label] : gts)
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
      throw std::invalid_argument(
          "simota_assign: GT label outside class_probs vocabulary");

  const std::size_t n = candidates.size();
  const std::size_t m = gts.size();

  AssignmentResult result;
  result.candidates.resize(n);
  result.gt_candidates.resize(m);
  result.dynamic_k.assign(m, 0);
  if (m == 0) return result;

  std::vector<std::vector<double>> cost(m, std::vector<double>(n));
  std::vector<std::vector<char>> eligible(m, std::vector<char>(n, 0));
  std::vector<std::vector<double>> iou(m, std::vector<double>(n));

  for (std::size_t j = 0; j < m; ++j) {
    const Segment& g = gts[j].first;
    int label = gts[j].second;
    for (std::size_t i = 0; i < n; ++i) {
      const CandidatePrediction& c = candidates[i];
      double t = c.point.time;
      bool inside = t >= g.start && t <= g.end;
      bool near_center =
          std::abs(t - g.center()) <= cfg.center_radius * c.point.stride;
      bool ok = inside || near_center;
      if (ok && cfg.keep_range_constraint) {
        double reach = std::max((t - g.start) / c.point.stride,
                                (g.end - t) / c.point.stride);
        ok = reach >= c.point.range_min && reach < c.point.range_max;
      }
      eligible[j][i] = ok ? 1 : 0;
      iou[j][i] = tiou(c.decoded, g);
      cost[j][i] = neg_log_clamped(c.class_probs[label], cfg.eps) +
                   cfg.lambda_iou * neg_log_clamped(iou[j][i], cfg.eps) +
                   (ok ? 0.0 : cfg.ineligible_cost);
    }
  }

  // Dynamic k per GT, then the k lowest-cost eligible candidates.
  std::vector<std::vector<int>> picks(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<int> elig;
    for (std::size_t i = 0; i < n; ++i)
      if (eligible[j][i]) elig.push_back(static_cast<int>(i));
    if (elig.empty()) continue;

    std::vector<double> ious;
    ious.reserve(elig.size());
    for (int i : elig) ious.push_back(iou[j][i]);
    std::sort(ious.begin(), ious.end(), std::greater<double>());
    std::size_t q = std::min<std::size_t>(cfg.top_q, ious.size());
    double iou_sum = std::accumulate(ious.begin(), ious.begin() + q, 0.0);
    int k = static_cast<int>(std::floor(iou_sum));
    k = std::clamp(k, 1, static_cast<int>(elig.size()));
    result.dynamic_k[j] = k;

    std::sort(elig.begin(), elig.end(), [&](int a, int b) {
      if (cost[j][a] != cost[j][b]) return cost[j][a] < cost[j][b];
      return a < b;
    });
    picks[j].assign(elig.begin(), elig.begin() + k);
  }

  // Conflict resolution: a candidate claimed by several GTs keeps only the
  // one with minimal cost (ties to the lower GT index). No re-filling.
  std::vector<int> claim(n, AssignmentResult::kBackground);
  for (std::size_t j = 0; j < m; ++j) {
    for (int i : picks[j]) {
      int cur = claim[i];
      if (cur == AssignmentResult::kBackground ||
          cost[j][i] < cost[cur][i])
        claim[i] = static_cast<int>(j);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    result.candidates[i].gt_index = claim[i];
    if (claim[i] != AssignmentResult::kBackground) {
      result.candidates[i].cost = cost[claim[i]][i];
      result.gt_candidates[claim[i]].push_back(static_cast<int>(i));
    }
  }
  return result;
}

}  // namespace mq

#include "mq/nms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mq {

NmsConfig nms_baseline_preset() {
  NmsConfig c;
  c.method = NmsMethod::soft_gaussian;
  c.sigma = 0.9;
  return c;
}

double gaussian_penalty(double iou, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_penalty: sigma <= 0");
  if (iou < 0.0 || iou > 1.0)
    throw std::invalid_argument("gaussian_penalty: iou outside [0,1]");
  return std::exp(-(iou * iou) / sigma);
}

namespace {

struct Item {
  ScoredSegment s;
  std::size_t input_index;
};

// Pop order: higher score, then earlier start, then shorter duration,
// then input index.
bool pop_before(const Item& a, const Item& b) {
  if (a.s.score != b.s.score) return a.s.score > b.s.score;
  if (a.s.segment.start != b.s.segment.start)
    return a.s.segment.start < b.s.segment.start;
  if (a.s.segment.duration() != b.s.segment.duration())
    return a.s.segment.duration() < b.s.segment.duration();
  return a.input_index < b.input_index;
}

void suppress_group(std::vector<Item>& items, const NmsConfig& cfg,
                    std::vector<Item>& kept) {
  std::size_t n = items.size();
  // Selection-sort style greedy: items[0..i) are kept, the rest pending.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < n; ++j)
      if (pop_before(items[j], items[best])) best = j;
    std::swap(items[i], items[best]);
    const Item& top = items[i];
    kept.push_back(top);

    std::size_t w = i + 1;
    for (std::size_t j = i + 1; j < n; ++j) {
      Item& cand = items[j];
      double iou = tiou(top.s.segment, cand.s.segment);
      bool removed = false;
      switch (cfg.method) {
        case NmsMethod::hard:
          if (iou > cfg.iou_threshold) {
            cand.s.score = 0.0;
            removed = true;
          }
          break;
        case NmsMethod::soft_linear:
          if (iou > cfg.iou_threshold) cand.s.score *= (1.0 - iou);
          break;
        case NmsMethod::soft_gaussian:
          cand.s.score *= gaussian_penalty(iou, cfg.sigma);
          break;
      }
      if (removed || cand.s.score < cfg.score_floor) continue;
      items[w++] = cand;
    }
    items.resize(w);
    n = w;
  }
}

}  // namespace

std::vector<ScoredSegment> suppress(const std::vector<ScoredSegment>& candidates,
                                    const NmsConfig& cfg) {
  if (cfg.sigma <= 0.0) throw std::invalid_argument("suppress: sigma <= 0");
  if (cfg.iou_threshold < 0.0 || cfg.iou_threshold > 1.0)
    throw std::invalid_argument("suppress: iou_threshold outside [0,1]");
  if (cfg.score_floor < 0.0 || cfg.score_floor > 1.0)
    throw std::invalid_argument("suppress: score_floor outside [0,1]");

  std::vector<Item> kept;
  kept.reserve(candidates.size());

  if (cfg.class_agnostic) {
    std::vector<Item> items;
    items.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
      items.push_back({candidates[i], i});
    suppress_group(items, cfg, kept);
  } else {
    std::map<std::string, std::vector<Item>> groups;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      groups[candidates[i].label].push_back({candidates[i], i});
    for (auto& [label, items] : groups) suppress_group(items, cfg, kept);
  }

  std::sort(kept.begin(), kept.end(), pop_before);
  if (kept.size() > cfg.max_kept) kept.resize(cfg.max_kept);

  std::vector<ScoredSegment> out;
  out.reserve(kept.size());
  for (auto& k : kept) out.push_back(std::move(k.s));
  return out;
}

}  // namespace mq

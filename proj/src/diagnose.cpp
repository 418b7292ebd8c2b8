#include "mq/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace mq {

const char* fp_type_name(FpType t) {
  switch (t) {
    case FpType::true_positive: return "true_positive";
    case FpType::double_detection: return "double_detection";
    case FpType::wrong_label: return "wrong_label";
    case FpType::localization_error: return "localization_error";
    case FpType::confusion_error: return "confusion_error";
    case FpType::background_error: return "background_error";
  }
  return "?";
}

const char* characteristic_name(Characteristic c) {
  switch (c) {
    case Characteristic::length: return "length";
    case Characteristic::coverage: return "coverage";
    case Characteristic::num_instances: return "num_instances";
  }
  return "?";
}

ReplicateReport near_replicates(const Dataset& dataset,
                                double overlap_threshold, bool per_category) {
  if (overlap_threshold <= 0.0 || overlap_threshold > 1.0)
    throw std::invalid_argument("near_replicates: threshold outside (0,1]");

  ReplicateReport report;
  for (const auto& [vid, info] : dataset.videos) {
    const auto& gts = info.ground_truths;
    report.total_gt += gts.size();
    std::vector<char> hit(gts.size(), 0);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      for (std::size_t j = i + 1; j < gts.size(); ++j) {
        if (per_category && gts[i].second != gts[j].second) continue;
        double v = tiou(gts[i].first, gts[j].first);
        if (v >= overlap_threshold) {
          hit[i] = hit[j] = 1;
          report.pairs.emplace_back(vid, static_cast<int>(i),
                                    static_cast<int>(j), v);
        }
      }
    }
    std::vector<int> flagged;
    for (std::size_t i = 0; i < gts.size(); ++i)
      if (hit[i]) flagged.push_back(static_cast<int>(i));
    if (!flagged.empty()) report.flagged[vid] = std::move(flagged);
  }
  for (const auto& [vid, f] : report.flagged) report.flagged_count += f.size();
  if (report.total_gt > 0) {
    report.flagged_fraction = static_cast<double>(report.flagged_count) /
                              static_cast<double>(report.total_gt);
    report.pair_fraction = static_cast<double>(report.pairs.size()) /
                           static_cast<double>(report.total_gt);
  }
  return report;
}

namespace {

struct TaggedPred {
  std::string video;
  std::size_t index;  // position in the video's prediction list
  const ScoredSegment* p;
};

std::vector<TaggedPred> top_predictions(const Dataset& dataset,
                                        const PredictionSet& preds,
                                        std::size_t limit) {
  std::vector<TaggedPred> all;
  for (const auto& [vid, info] : dataset.videos) {
    auto it = preds.find(vid);
    if (it == preds.end()) continue;
    for (std::size_t i = 0; i < it->second.size(); ++i)
      all.push_back({vid, i, &it->second[i]});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const TaggedPred& a, const TaggedPred& b) {
                     return a.p->score > b.p->score;
                   });
  if (all.size() > limit) all.resize(limit);
  return all;
}

PredictionSet to_prediction_set(const std::vector<TaggedPred>& tagged,
                                const std::vector<char>& keep) {
  // Rebuild per-video lists in original input order.
  std::vector<std::size_t> order(tagged.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (tagged[a].video != tagged[b].video)
                       return tagged[a].video < tagged[b].video;
                     return tagged[a].index < tagged[b].index;
                   });
  PredictionSet out;
  for (std::size_t i : order)
    if (keep.empty() || keep[i]) out[tagged[i].video].push_back(*tagged[i].p);
  return out;
}

}  // namespace

FpProfile classify_false_positives(const Dataset& dataset,
                                   const PredictionSet& preds,
                                   double tiou_strong, double tiou_weak,
                                   int depth_multiplier,
                                   const std::vector<double>& thresholds) {
  if (!(0.0 < tiou_weak && tiou_weak < tiou_strong && tiou_strong <= 1.0))
    throw std::invalid_argument(
        "classify_false_positives: require 0 < weak < strong <= 1");
  if (depth_multiplier < 1)
    throw std::invalid_argument("classify_false_positives: depth < 1");

  std::size_t depth =
      static_cast<std::size_t>(depth_multiplier) * dataset.total_gt();
  std::vector<TaggedPred> analyzed = top_predictions(dataset, preds, depth);

  FpProfile profile;
  profile.analyzed = analyzed.size();

  std::map<std::string, std::vector<char>> gt_matched;
  for (const auto& [vid, info] : dataset.videos)
    gt_matched[vid].assign(info.ground_truths.size(), 0);

  std::vector<FpType> types(analyzed.size());
  for (std::size_t a = 0; a < analyzed.size(); ++a) {
    const TaggedPred& tp = analyzed[a];
    const auto& gts = dataset.videos.at(tp.video).ground_truths;
    auto& matched = gt_matched[tp.video];

    int best_unmatched_same = -1;
    double best_unmatched_iou = 0.0;
    bool strong_same_matched = false;
    bool strong_other = false;
    bool weak_same = false;
    bool weak_other = false;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      double v = tiou(tp.p->segment, gts[j].first);
      bool same = gts[j].second == tp.p->label;
      if (v >= tiou_strong) {
        if (same) {
          if (!matched[j]) {
            if (best_unmatched_same < 0 || v > best_unmatched_iou ||
                (v == best_unmatched_iou &&
                 gts[j].first.start < gts[best_unmatched_same].first.start)) {
              best_unmatched_same = static_cast<int>(j);
              best_unmatched_iou = v;
            }
          } else {
            strong_same_matched = true;
          }
        } else {
          strong_other = true;
        }
      } else if (v >= tiou_weak) {
        (same ? weak_same : weak_other) = true;
      }
    }

    FpType type;
    if (best_unmatched_same >= 0) {
      type = FpType::true_positive;
      matched[best_unmatched_same] = 1;
    } else if (strong_same_matched) {
      type = FpType::double_detection;
    } else if (strong_other) {
      type = FpType::wrong_label;
    } else if (weak_same) {
      type = FpType::localization_error;
    } else if (weak_other) {
      type = FpType::confusion_error;
    } else {
      type = FpType::background_error;
    }
    types[a] = type;
    ++profile.counts[static_cast<int>(type)];
  }

  PredictionSet base_set = to_prediction_set(analyzed, {});
  profile.base_average_map =
      evaluate(dataset, base_set, thresholds, {1}).average_map;
  for (int t = 1; t < kNumFpTypes; ++t) {
    if (profile.counts[t] == 0) continue;
    std::vector<char> keep(analyzed.size(), 1);
    for (std::size_t a = 0; a < analyzed.size(); ++a)
      if (types[a] == static_cast<FpType>(t)) keep[a] = 0;
    PredictionSet reduced = to_prediction_set(analyzed, keep);
    profile.map_impact[t] =
        evaluate(dataset, reduced, thresholds, {1}).average_map -
        profile.base_average_map;
  }
  return profile;
}

namespace {

struct GtRef {
  std::string video;
  std::size_t index;
  double char_value[3];  // length, coverage, num_instances
  bool matched = false;
};

// Greedy per-video matching over the full prediction lists; marks each GT
// matched or not at the given threshold.
void mark_matches(const Dataset& dataset, const PredictionSet& preds,
                  double threshold, std::vector<GtRef>& refs,
                  std::map<std::string, std::vector<int>>* pred_match_out) {
  std::map<std::string, std::map<std::size_t, std::size_t>> lookup;
  for (std::size_t r = 0; r < refs.size(); ++r)
    lookup[refs[r].video][refs[r].index] = r;

  for (const auto& [vid, info] : dataset.videos) {
    auto it = preds.find(vid);
    std::vector<ScoredSegment> empty;
    const auto& plist = it == preds.end() ? empty : it->second;
    MatchResult m = match_predictions(plist, info.ground_truths, threshold);
    if (pred_match_out) {
      auto& pm = (*pred_match_out)[vid];
      pm.assign(plist.size(), -1);
      for (std::size_t r = 0; r < m.order.size(); ++r)
        pm[m.order[r]] = m.matched_gt[r];
    }
    for (std::size_t r = 0; r < m.order.size(); ++r)
      if (m.matched_gt[r] >= 0)
        refs[lookup[vid][static_cast<std::size_t>(m.matched_gt[r])]].matched =
            true;
  }
}

std::vector<GtRef> collect_gt_refs(const Dataset& dataset) {
  std::vector<GtRef> refs;
  for (const auto& [vid, info] : dataset.videos) {
    double n = static_cast<double>(info.ground_truths.size());
    for (std::size_t i = 0; i < info.ground_truths.size(); ++i) {
      GtRef r;
      r.video = vid;
      r.index = i;
      double len = info.ground_truths[i].first.duration();
      r.char_value[0] = len;
      r.char_value[1] = info.duration > 0 ? len / info.duration : 0.0;
      r.char_value[2] = n;
      refs.push_back(std::move(r));
    }
  }
  return refs;
}

const char* kBinLabels[5] = {"XS", "S", "M", "L", "XL"};

// Quantile edges over the observed values; bins are [e_b, e_{b+1}) with
// the last bin closed. Degenerate (empty-width) bins end up empty and are
// dropped by the caller.
std::vector<double> quantile_edges(std::vector<double> values, int num_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges(num_bins + 1);
  std::size_t n = values.size();
  edges[0] = values.front();
  edges[num_bins] = values.back();
  for (int b = 1; b < num_bins; ++b) {
    std::size_t idx = b * n / num_bins;
    edges[b] = values[std::min(idx, n - 1)];
  }
  return edges;
}

int bin_of(double v, const std::vector<double>& edges) {
  int num_bins = static_cast<int>(edges.size()) - 1;
  for (int b = num_bins - 1; b >= 0; --b)
    if (v >= edges[b]) return b;
  return 0;
}

}  // namespace

CharacteristicBins fn_breakdown(const Dataset& dataset,
                                const PredictionSet& preds,
                                const std::vector<Characteristic>& characteristics,
                                double threshold, int num_bins) {
  if (num_bins < 1) throw std::invalid_argument("fn_breakdown: num_bins < 1");
  std::vector<GtRef> refs = collect_gt_refs(dataset);
  CharacteristicBins out;
  if (refs.empty()) return out;
  mark_matches(dataset, preds, threshold, refs, nullptr);

  std::size_t missed = 0;
  for (const auto& r : refs)
    if (!r.matched) ++missed;
  out.overall_value = static_cast<double>(missed) /
                      static_cast<double>(refs.size());

  for (Characteristic c : characteristics) {
    int ci = static_cast<int>(c);
    std::vector<double> values;
    values.reserve(refs.size());
    for (const auto& r : refs) values.push_back(r.char_value[ci]);
    std::vector<double> edges = quantile_edges(values, num_bins);

    std::vector<std::size_t> total(num_bins, 0), fn(num_bins, 0);
    for (const auto& r : refs) {
      int b = bin_of(r.char_value[ci], edges);
      ++total[b];
      if (!r.matched) ++fn[b];
    }
    std::vector<CharacteristicBins::Bin> bins;
    for (int b = 0; b < num_bins; ++b) {
      if (total[b] == 0) continue;  // empty bins reported as absent
      CharacteristicBins::Bin bin;
      bin.label = num_bins == 5 ? kBinLabels[b] : ("B" + std::to_string(b));
      bin.lo = edges[b];
      bin.hi = edges[b + 1];
      bin.gt_count = total[b];
      bin.value = static_cast<double>(fn[b]) / static_cast<double>(total[b]);
      bins.push_back(std::move(bin));
    }
    out.per_characteristic[characteristic_name(c)] = std::move(bins);
  }
  return out;
}

namespace {

// Mean per-category normalized AP at one threshold, with AP's recall
// denominator fixed to norm_constant (DETAD-style).
double normalized_map(
    const std::map<std::string, std::vector<std::pair<Segment, std::string>>>&
        gts_by_video,
    const PredictionSet& preds, double threshold, double norm_constant) {
  std::set<std::string> categories;
  for (const auto& [vid, gts] : gts_by_video)
    for (const auto& [seg, label] : gts) categories.insert(label);
  if (categories.empty()) return 0.0;

  double sum = 0.0;
  for (const auto& cat : categories) {
    struct Entry { double score; std::size_t seq; char tp; };
    std::vector<Entry> pooled;
    std::size_t seq = 0;
    for (const auto& [vid, gts] : gts_by_video) {
      std::vector<std::pair<Segment, std::string>> cat_gts;
      for (const auto& g : gts)
        if (g.second == cat) cat_gts.push_back(g);
      std::vector<ScoredSegment> cat_preds;
      auto it = preds.find(vid);
      if (it != preds.end())
        for (const auto& p : it->second)
          if (p.label == cat) cat_preds.push_back(p);
      MatchResult m = match_predictions(cat_preds, cat_gts, threshold);
      for (std::size_t r = 0; r < m.order.size(); ++r)
        pooled.push_back({cat_preds[m.order[r]].score,
                          seq + static_cast<std::size_t>(m.order[r]),
                          m.is_tp[r]});
      seq += cat_preds.size();
    }
    std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.seq < b.seq;
    });
    std::vector<char> flags;
    flags.reserve(pooled.size());
    for (const auto& e : pooled) flags.push_back(e.tp);
    sum += average_precision_normalized(flags, norm_constant);
  }
  return sum / static_cast<double>(categories.size());
}

}  // namespace

CharacteristicBins sensitivity(const Dataset& dataset,
                               const PredictionSet& preds,
                               const std::vector<Characteristic>& characteristics,
                               double threshold, int num_bins,
                               double norm_constant) {
  if (num_bins < 1) throw std::invalid_argument("sensitivity: num_bins < 1");
  std::vector<GtRef> refs = collect_gt_refs(dataset);
  CharacteristicBins out;
  if (refs.empty()) return out;

  if (norm_constant <= 0.0) {
    std::set<std::string> categories;
    for (const auto& [vid, info] : dataset.videos)
      for (const auto& [seg, label] : info.ground_truths)
        categories.insert(label);
    norm_constant = static_cast<double>(refs.size()) /
                    static_cast<double>(categories.size());
  }

  // Full matching: which GT each prediction is matched to, per video.
  std::map<std::string, std::vector<int>> pred_match;
  mark_matches(dataset, preds, threshold, refs, &pred_match);

  std::map<std::string, std::vector<std::pair<Segment, std::string>>> all_gts;
  for (const auto& [vid, info] : dataset.videos)
    all_gts[vid] = info.ground_truths;
  out.overall_value = normalized_map(all_gts, preds, threshold, norm_constant);

  std::map<std::string, std::map<std::size_t, std::size_t>> ref_lookup;
  for (std::size_t r = 0; r < refs.size(); ++r)
    ref_lookup[refs[r].video][refs[r].index] = r;

  for (Characteristic c : characteristics) {
    int ci = static_cast<int>(c);
    std::vector<double> values;
    values.reserve(refs.size());
    for (const auto& r : refs) values.push_back(r.char_value[ci]);
    std::vector<double> edges = quantile_edges(values, num_bins);

    std::vector<CharacteristicBins::Bin> bins;
    for (int b = 0; b < num_bins; ++b) {
      // Restrict GT to this bin; drop predictions matched to out-of-bin GT.
      std::map<std::string, std::vector<std::pair<Segment, std::string>>>
          bin_gts;
      std::size_t bin_count = 0;
      for (const auto& [vid, info] : dataset.videos) {
        std::vector<std::pair<Segment, std::string>> kept;
        for (std::size_t i = 0; i < info.ground_truths.size(); ++i) {
          const GtRef& r = refs[ref_lookup[vid][i]];
          if (bin_of(r.char_value[ci], edges) == b)
            kept.push_back(info.ground_truths[i]);
        }
        bin_count += kept.size();
        if (!kept.empty()) bin_gts[vid] = std::move(kept);
      }
      if (bin_count == 0) continue;  // bins with no GT are skipped

      PredictionSet bin_preds;
      for (const auto& [vid, plist] : preds) {
        auto pm = pred_match.find(vid);
        std::vector<ScoredSegment> kept;
        for (std::size_t i = 0; i < plist.size(); ++i) {
          int gt = (pm != pred_match.end() && i < pm->second.size())
                       ? pm->second[i]
                       : -1;
          bool matched_out_of_bin =
              gt >= 0 &&
              bin_of(refs[ref_lookup[vid][static_cast<std::size_t>(gt)]]
                         .char_value[ci],
                     edges) != b;
          if (!matched_out_of_bin) kept.push_back(plist[i]);
        }
        if (!kept.empty()) bin_preds[vid] = std::move(kept);
      }

      CharacteristicBins::Bin bin;
      bin.label = num_bins == 5 ? kBinLabels[b] : ("B" + std::to_string(b));
      bin.lo = edges[b];
      bin.hi = edges[b + 1];
      bin.gt_count = bin_count;
      bin.value = normalized_map(bin_gts, bin_preds, threshold, norm_constant);
      bin.relative_change =
          out.overall_value != 0.0
              ? (bin.value - out.overall_value) / out.overall_value
              : 0.0;
      bins.push_back(std::move(bin));
    }
    out.per_characteristic[characteristic_name(c)] = std::move(bins);
  }
  return out;
}

}  // namespace mq

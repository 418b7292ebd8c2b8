#include "mq/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

namespace mq {

std::vector<double> default_tiou_thresholds() {
  return {0.1, 0.2, 0.3, 0.4, 0.5};
}

MatchResult match_predictions(
    const std::vector<ScoredSegment>& preds,
    const std::vector<std::pair<Segment, std::string>>& gts,
    double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw std::invalid_argument("match_predictions: threshold outside (0,1]");

  MatchResult r;
  r.order.resize(preds.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    return preds[a].score > preds[b].score;
  });

  std::vector<char> gt_matched(gts.size(), 0);
  r.is_tp.assign(preds.size(), 0);
  r.matched_gt.assign(preds.size(), -1);

  for (std::size_t rank = 0; rank < r.order.size(); ++rank) {
    const ScoredSegment& p = preds[r.order[rank]];
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (gt_matched[j] || gts[j].second != p.label) continue;
      double v = tiou(p.segment, gts[j].first);
      if (v < threshold) continue;
      if (best < 0 || v > best_iou ||
          (v == best_iou && gts[j].first.start < gts[best].first.start))
        best = static_cast<int>(j), best_iou = v;
    }
    if (best >= 0) {
      gt_matched[best] = 1;
      r.is_tp[rank] = 1;
      r.matched_gt[rank] = best;
    }
  }
  return r;
}

double average_precision_normalized(const std::vector<char>& flags,
                                    double gt_denominator) {
  if (gt_denominator <= 0.0) return flags.empty() ? 1.0 : 0.0;
  double ap = 0.0;
  int tp = 0;
  // Walk ranks from the back keeping the running-max precision, so each
  // recall increment is weighted by the precision envelope.
  std::vector<double> precision(flags.size());
  int cum_tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) ++cum_tp;
    precision[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
  }
  double env = 0.0;
  for (std::size_t i = flags.size(); i-- > 0;) {
    env = std::max(env, precision[i]);
    if (flags[i]) {
      ap += env / gt_denominator;
      ++tp;
    }
  }
  (void)tp;
  return ap;
}

double average_precision(const std::vector<char>& flags, int num_gt) {
  if (num_gt < 0) throw std::invalid_argument("average_precision: num_gt < 0");
  return average_precision_normalized(flags, static_cast<double>(num_gt));
}

namespace {

struct PooledPred {
  double score;
  std::size_t seq;  // global input order (video map order, then index)
  char tp;
};

void run_parallel(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t t = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace

EvalReport evaluate(const Dataset& dataset, const PredictionSet& preds,
                    const std::vector<double>& thresholds,
                    const std::vector<int>& recall_ks,
                    const EvalOptions& opts) {
  if (thresholds.empty())
    throw std::invalid_argument("evaluate: no thresholds");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw std::invalid_argument("evaluate: thresholds not strictly increasing");

  std::set<std::string> category_set;
  for (const auto& [vid, info] : dataset.videos)
    for (const auto& [seg, label] : info.ground_truths)
      category_set.insert(label);
  std::vector<std::string> categories(category_set.begin(),
                                      category_set.end());

  // Per (video, category): predictions of that category in evaluation
  // order, GTs of that category, and the prediction/GT tIoU matrix.
  struct Cell {
    std::vector<std::size_t> pred_seq;           // global order key
    std::vector<double> pred_scores;
    std::vector<Segment> pred_segments;
    std::vector<Segment> gt_segments;
    std::size_t gt_count = 0;
  };
  // cells[c] lists this category's cells in video map order.
  std::vector<std::vector<Cell>> cells(categories.size());
  std::map<std::string, std::size_t> cat_index;
  for (std::size_t c = 0; c < categories.size(); ++c)
    cat_index[categories[c]] = c;

  std::size_t seq = 0;
  std::size_t total_gt = 0;
  for (const auto& [vid, info] : dataset.videos) {
    std::vector<Cell> per_cat(categories.size());
    for (const auto& [seg, label] : info.ground_truths) {
      per_cat[cat_index.at(label)].gt_segments.push_back(seg);
      ++per_cat[cat_index.at(label)].gt_count;
      ++total_gt;
    }
    auto it = preds.find(vid);
    if (it != preds.end()) {
      for (const auto& p : it->second) {
        auto ci = cat_index.find(p.label);
        ++seq;
        if (ci == cat_index.end()) continue;  // unknown category: never a TP
        Cell& cell = per_cat[ci->second];
        cell.pred_seq.push_back(seq);
        cell.pred_scores.push_back(p.score);
        cell.pred_segments.push_back(p.segment);
      }
    }
    for (std::size_t c = 0; c < categories.size(); ++c)
      if (!per_cat[c].gt_segments.empty() || !per_cat[c].pred_segments.empty())
        cells[c].push_back(std::move(per_cat[c]));
  }

  EvalReport report;
  std::vector<std::vector<double>> ap(categories.size());       // [c][t]
  std::vector<std::vector<std::vector<long long>>> rec_matched(
      categories.size());  // [c][k][t]
  std::vector<long long> cat_gt(categories.size(), 0);

  auto greedy_match = [](const std::vector<std::size_t>& order,
                         const std::vector<std::vector<double>>& iou,
                         const std::vector<Segment>& gts, double thr,
                         std::vector<char>* flags_out) -> long long {
    std::vector<char> gt_matched(gts.size(), 0);
    long long matched = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      std::size_t i = order[r];
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (gt_matched[j]) continue;
        double v = iou[i][j];
        if (v < thr) continue;
        if (best < 0 || v > best_iou ||
            (v == best_iou && gts[j].start < gts[best].start))
          best = static_cast<int>(j), best_iou = v;
      }
      if (best >= 0) {
        gt_matched[best] = 1;
        ++matched;
        if (flags_out) (*flags_out)[r] = 1;
      }
    }
    return matched;
  };

  run_parallel(categories.size(), opts.threads, [&](std::size_t c) {
    ap[c].assign(thresholds.size(), 0.0);
    rec_matched[c].assign(recall_ks.size(),
                          std::vector<long long>(thresholds.size(), 0));

    // Per-cell prediction order and tIoU matrices, shared across thresholds.
    struct Prepared {
      std::vector<std::size_t> order;               // indices into cell preds
      std::vector<std::vector<double>> iou;         // [pred][gt]
    };
    std::vector<Prepared> prep(cells[c].size());
    for (std::size_t v = 0; v < cells[c].size(); ++v) {
      const Cell& cell = cells[c][v];
      cat_gt[c] += static_cast<long long>(cell.gt_count);
      Prepared& pr = prep[v];
      pr.order.resize(cell.pred_scores.size());
      std::iota(pr.order.begin(), pr.order.end(), 0);
      std::stable_sort(pr.order.begin(), pr.order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return cell.pred_scores[a] > cell.pred_scores[b];
                       });
      pr.iou.resize(cell.pred_segments.size());
      for (std::size_t i = 0; i < cell.pred_segments.size(); ++i) {
        pr.iou[i].resize(cell.gt_segments.size());
        for (std::size_t j = 0; j < cell.gt_segments.size(); ++j)
          pr.iou[i][j] = tiou(cell.pred_segments[i], cell.gt_segments[j]);
      }
    }

    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      // AP: match per video, pool flags across videos by score.
      std::vector<PooledPred> pooled;
      for (std::size_t v = 0; v < cells[c].size(); ++v) {
        const Cell& cell = cells[c][v];
        const Prepared& pr = prep[v];
        std::vector<char> flags(pr.order.size(), 0);
        greedy_match(pr.order, pr.iou, cell.gt_segments, thresholds[t],
                     &flags);
        for (std::size_t r = 0; r < pr.order.size(); ++r)
          pooled.push_back({cell.pred_scores[pr.order[r]],
                            cell.pred_seq[pr.order[r]], flags[r]});
      }
      std::sort(pooled.begin(), pooled.end(),
                [](const PooledPred& a, const PooledPred& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.seq < b.seq;
                });
      std::vector<char> flags;
      flags.reserve(pooled.size());
      for (const auto& p : pooled) flags.push_back(p.tp);
      ap[c][t] = average_precision(flags, static_cast<int>(cat_gt[c]));

      // Recall@kx: keep top ceil(k*M) per (video, category) before matching.
      for (std::size_t ki = 0; ki < recall_ks.size(); ++ki) {
        for (std::size_t v = 0; v < cells[c].size(); ++v) {
          const Cell& cell = cells[c][v];
          if (cell.gt_count == 0) continue;
          const Prepared& pr = prep[v];
          std::size_t keep = std::min<std::size_t>(
              pr.order.size(),
              static_cast<std::size_t>(recall_ks[ki]) * cell.gt_count);
          std::vector<std::size_t> top(pr.order.begin(),
                                       pr.order.begin() + keep);
          rec_matched[c][ki][t] +=
              greedy_match(top, pr.iou, cell.gt_segments, thresholds[t],
                           nullptr);
        }
      }
    }
  });

  for (std::size_t c = 0; c < categories.size(); ++c)
    for (std::size_t t = 0; t < thresholds.size(); ++t)
      report.ap[{categories[c], thresholds[t]}] = ap[c][t];

  double avg = 0.0;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    double m = 0.0;
    for (std::size_t c = 0; c < categories.size(); ++c) m += ap[c][t];
    m = categories.empty() ? 0.0 : m / static_cast<double>(categories.size());
    report.map_at[thresholds[t]] = m;
    avg += m;
  }
  report.average_map = avg / static_cast<double>(thresholds.size());

  for (std::size_t ki = 0; ki < recall_ks.size(); ++ki) {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      double recall = 0.0;
      if (opts.macro_recall) {
        double sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t c = 0; c < categories.size(); ++c) {
          if (cat_gt[c] == 0) continue;
          sum += static_cast<double>(rec_matched[c][ki][t]) /
                 static_cast<double>(cat_gt[c]);
          ++counted;
        }
        recall = counted ? sum / static_cast<double>(counted) : 0.0;
      } else {
        long long matched = 0;
        for (std::size_t c = 0; c < categories.size(); ++c)
          matched += rec_matched[c][ki][t];
        recall = total_gt ? static_cast<double>(matched) /
                                static_cast<double>(total_gt)
                          : 0.0;
      }
      report.recall_at[{recall_ks[ki], thresholds[t]}] = recall;
    }
  }
  return report;
}

}  // namespace mq

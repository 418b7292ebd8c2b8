#include "mq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mq/rng.hpp"

namespace mq {

SynthConfig default_noise_profile() {
  SynthConfig c;
  c.num_videos = 30;
  c.num_categories = 8;
  c.moments_min = 4;
  c.moments_max = 12;
  c.replicate_rate = 0.15;
  c.preds_per_gt = 4;
  c.jitter_std = 1.0;
  c.duplicate_rate = 0.5;
  c.background_fp_rate = 1.0;
  c.label_flip_rate = 0.05;
  c.score_base = 0.95;
  c.score_jitter_scale = 0.35;
  c.score_noise_std = 0.05;
  return c;
}

namespace {

void validate_rates(const SynthConfig& c) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(c.replicate_rate) || !in01(c.duplicate_rate) ||
      !in01(c.label_flip_rate))
    throw std::invalid_argument("synth: rate outside [0,1]");
  if (c.background_fp_rate < 0.0)
    throw std::invalid_argument("synth: negative background_fp_rate");
  if (c.jitter_std < 0.0 || c.score_noise_std < 0.0)
    throw std::invalid_argument("synth: negative noise std");
  if (c.num_videos < 1 || c.num_categories < 1)
    throw std::invalid_argument("synth: need >= 1 video and category");
  if (c.moments_min < 1 || c.moments_max < c.moments_min)
    throw std::invalid_argument("synth: bad moments range");
  if (c.duration_min <= 0.0 || c.duration_max < c.duration_min)
    throw std::invalid_argument("synth: bad duration range");
  if (c.moment_len_min <= 0.0 || c.moment_len_max < c.moment_len_min)
    throw std::invalid_argument("synth: bad moment length range");
  if (c.moment_len_min >= c.duration_min)
    throw std::invalid_argument("synth: moments cannot fit the duration");
  if (c.preds_per_gt < 0)
    throw std::invalid_argument("synth: negative preds_per_gt");
}

std::string video_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%04d", i);
  return buf;
}

std::string category_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cat_%02d", i);
  return buf;
}

// Margin below the 0.9 near-replicate threshold: unplanted moments stay
// clearly under it, planted partners clearly over it.
constexpr double kClearBelow = 0.88;
constexpr double kPlantAbove = 0.905;

Segment sample_moment(Rng& rng, const SynthConfig& cfg, double duration) {
  double len_max = std::min(cfg.moment_len_max, 0.8 * duration);
  double len = rng.uniform(cfg.moment_len_min, std::max(cfg.moment_len_min,
                                                        len_max));
  double start = rng.uniform(0.0, duration - len);
  return Segment(start, start + len);
}

bool clear_of(const Segment& s, const std::vector<Segment>& others,
              int skip = -1) {
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (static_cast<int>(i) == skip) continue;
    if (tiou(s, others[i]) >= kClearBelow) return false;
  }
  return true;
}

}  // namespace

SynthDataset generate_dataset(const SynthConfig& cfg) {
  validate_rates(cfg);
  Rng rng(cfg.seed);

  std::vector<double> durations(cfg.num_videos);
  std::vector<int> counts(cfg.num_videos);
  long long total = 0;
  for (int v = 0; v < cfg.num_videos; ++v) {
    durations[v] = rng.uniform(cfg.duration_min, cfg.duration_max);
    counts[v] = rng.uniform_int(cfg.moments_min, cfg.moments_max);
    total += counts[v];
  }

  // Plant exactly round(rate * total) replicate members, two per pair,
  // spread round-robin over videos with spare capacity.
  long long flagged_target = std::llround(cfg.replicate_rate * total);
  long long pairs_left = flagged_target / 2;
  std::vector<int> pairs_per_video(cfg.num_videos, 0);
  bool assigned = true;
  while (pairs_left > 0 && assigned) {
    assigned = false;
    for (int v = 0; v < cfg.num_videos && pairs_left > 0; ++v) {
      if (2 * (pairs_per_video[v] + 1) <= counts[v]) {
        ++pairs_per_video[v];
        --pairs_left;
        assigned = true;
      }
    }
  }

  SynthDataset out;
  for (int v = 0; v < cfg.num_videos; ++v) {
    std::string vid = video_id(v);
    VideoInfo info;
    info.duration = durations[v];
    std::vector<Segment> placed;

    auto place_clear = [&](int skip) -> Segment {
      for (int attempt = 0; attempt < 2000; ++attempt) {
        Segment s = sample_moment(rng, cfg, info.duration);
        if (clear_of(s, placed, skip)) return s;
      }
      throw std::runtime_error("generate_dataset: cannot place moment in " +
                               vid + " without accidental overlap");
    };

    for (int p = 0; p < pairs_per_video[v]; ++p) {
      Segment base = place_clear(-1);
      int cat = rng.uniform_int(0, cfg.num_categories - 1);
      placed.push_back(base);
      int base_idx = static_cast<int>(info.ground_truths.size());
      info.ground_truths.emplace_back(base, category_id(cat));

      Segment partner;
      bool ok = false;
      for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
        double wiggle = 0.02 * base.duration();
        double s = std::max(0.0, base.start + rng.uniform(-wiggle, wiggle));
        double e = std::min(info.duration,
                            base.end + rng.uniform(-wiggle, wiggle));
        if (s >= e) continue;
        partner = Segment(s, e);
        ok = tiou(partner, base) >= kPlantAbove &&
             clear_of(partner, placed, static_cast<int>(placed.size()) - 1);
      }
      if (!ok)
        throw std::runtime_error("generate_dataset: cannot place replicate");
      placed.push_back(partner);
      int partner_idx = static_cast<int>(info.ground_truths.size());
      info.ground_truths.emplace_back(partner, category_id(cat));
      out.planted_pairs.emplace_back(vid, base_idx, partner_idx);
    }

    int singles = counts[v] - 2 * pairs_per_video[v];
    for (int s = 0; s < singles; ++s) {
      Segment seg = place_clear(-1);
      placed.push_back(seg);
      int cat = rng.uniform_int(0, cfg.num_categories - 1);
      info.ground_truths.emplace_back(seg, category_id(cat));
    }
    out.dataset.videos[vid] = std::move(info);
  }

  out.planted_members = out.planted_pairs.size() * 2;
  out.planted_fraction =
      total > 0 ? static_cast<double>(out.planted_members) /
                      static_cast<double>(total)
                : 0.0;
  return out;
}

PredictionSet generate_predictions(const Dataset& dataset,
                                   const SynthConfig& cfg) {
  validate_rates(cfg);
  // Decorrelate from the dataset stream while staying a pure function of
  // the seed.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::string> categories;
  {
    std::set<std::string> cats;
    for (const auto& [vid, info] : dataset.videos)
      for (const auto& [seg, label] : info.ground_truths) cats.insert(label);
    categories.assign(cats.begin(), cats.end());
  }

  PredictionSet preds;
  for (const auto& [vid, info] : dataset.videos) {
    std::vector<ScoredSegment>& plist = preds[vid];

    auto emit_jittered = [&](const Segment& gt, const std::string& label) {
      double js = rng.normal(0.0, cfg.jitter_std);
      double je = rng.normal(0.0, cfg.jitter_std);
      double s = std::clamp(gt.start + js, 0.0, info.duration);
      double e = std::clamp(gt.end + je, 0.0, info.duration);
      if (e - s < 0.05) {
        double mid = std::clamp(0.5 * (s + e), 0.05, info.duration - 0.05);
        s = mid - 0.025;
        e = mid + 0.025;
      }
      double jmag = 0.5 * (std::abs(js) + std::abs(je));
      double score = cfg.score_base - cfg.score_jitter_scale * jmag +
                     rng.normal(0.0, cfg.score_noise_std);
      score = std::clamp(score, 0.0, 1.0);

      std::string out_label = label;
      if (rng.uniform() < cfg.label_flip_rate && categories.size() > 1) {
        int pick = rng.uniform_int(0, static_cast<int>(categories.size()) - 2);
        int idx = 0;
        for (const auto& c : categories) {
          if (c == label) continue;
          if (idx++ == pick) { out_label = c; break; }
        }
      }
      plist.push_back({Segment(s, e), out_label, score});
    };

    for (const auto& [gt, label] : info.ground_truths) {
      for (int e = 0; e < cfg.preds_per_gt; ++e) emit_jittered(gt, label);
      if (rng.uniform() < cfg.duplicate_rate) emit_jittered(gt, label);
    }

    if (categories.empty()) continue;
    double expected = cfg.background_fp_rate *
                      static_cast<double>(info.ground_truths.size());
    int n_bg = static_cast<int>(expected);
    if (rng.uniform() < expected - n_bg) ++n_bg;
    for (int b = 0; b < n_bg; ++b) {
      double len = rng.uniform(1.0, std::max(1.5, std::min(10.0,
                                                           info.duration / 4)));
      len = std::min(len, 0.5 * info.duration);
      double start = rng.uniform(0.0, info.duration - len);
      int cat = rng.uniform_int(0, static_cast<int>(categories.size()) - 1);
      double score = rng.uniform(0.05, 0.40);
      plist.push_back({Segment(start, start + len), categories[cat], score});
    }
  }
  return preds;
}

}  // namespace mq

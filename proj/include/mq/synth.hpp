#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "mq/eval.hpp"

namespace mq {

struct SynthConfig {
  int num_videos = 20;
  int num_categories = 5;
  int moments_min = 3;
  int moments_max = 12;
  double duration_min = 60.0;
  double duration_max = 180.0;
  double moment_len_min = 1.0;
  double moment_len_max = 20.0;
  double replicate_rate = 0.0;  // target fraction of near-replicate moments

  // Predictor noise.
  int preds_per_gt = 1;            // jittered emissions per GT
  double jitter_std = 0.0;         // boundary jitter, seconds
  double duplicate_rate = 0.0;     // extra near-duplicate per GT
  double background_fp_rate = 0.0; // background FPs per GT
  double label_flip_rate = 0.0;

  // Score model: clamp(base - jitter_scale * mean|jitter| + noise, 0, 1).
  double score_base = 0.95;
  double score_jitter_scale = 0.25;
  double score_noise_std = 0.0;

  std::uint64_t seed = 1;
};

/// Noise profile used by the sigma-sweep fixture.
SynthConfig default_noise_profile();

struct SynthDataset {
  Dataset dataset;
  // Planted near-replicate pairs: (video_id, gt index i, gt index j).
  std::vector<std::tuple<std::string, int, int>> planted_pairs;
  std::size_t planted_members = 0;
  double planted_fraction = 0.0;
};

SynthDataset generate_dataset(const SynthConfig& config);

PredictionSet generate_predictions(const Dataset& dataset,
                                   const SynthConfig& config);

}  // namespace mq

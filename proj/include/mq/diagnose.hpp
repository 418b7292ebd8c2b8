#pragma once

#include <array>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mq/eval.hpp"

namespace mq {

struct ReplicateReport {
  // video_id -> flagged GT indices (sorted).
  std::map<std::string, std::vector<int>> flagged;
  // (video_id, gt index i, gt index j, tIoU) with i < j.
  std::vector<std::tuple<std::string, int, int, double>> pairs;
  std::size_t total_gt = 0;
  std::size_t flagged_count = 0;
  double flagged_fraction = 0.0;  // flagged members / total GT
  double pair_fraction = 0.0;     // pairs / total GT
};

ReplicateReport near_replicates(const Dataset& dataset,
                                double overlap_threshold,
                                bool per_category = false);

enum class FpType : int {
  true_positive = 0,
  double_detection,
  wrong_label,
  localization_error,
  confusion_error,
  background_error,
};
constexpr int kNumFpTypes = 6;
const char* fp_type_name(FpType t);

struct FpProfile {
  std::array<long long, kNumFpTypes> counts{};
  std::size_t analyzed = 0;
  double base_average_map = 0.0;
  // Average-mAP gain when all predictions of that type are removed
  // (zero for true positives).
  std::array<double, kNumFpTypes> map_impact{};
};

FpProfile classify_false_positives(
    const Dataset& dataset, const PredictionSet& preds,
    double tiou_strong = 0.5, double tiou_weak = 0.1,
    int depth_multiplier = 10,
    const std::vector<double>& thresholds = default_tiou_thresholds());

enum class Characteristic { length, coverage, num_instances };
const char* characteristic_name(Characteristic c);

struct CharacteristicBins {
  struct Bin {
    std::string label;  // XS/S/M/L/XL
    double lo = 0.0;
    double hi = 0.0;
    std::size_t gt_count = 0;
    double value = 0.0;           // FN rate or normalized mAP
    double relative_change = 0.0; // sensitivity only
  };
  // characteristic name -> non-empty bins in ascending order.
  std::map<std::string, std::vector<Bin>> per_characteristic;
  double overall_value = 0.0;  // overall FN rate or overall normalized mAP
};

/// Per-bin false-negative rate at one tIoU threshold.
CharacteristicBins fn_breakdown(const Dataset& dataset,
                                const PredictionSet& preds,
                                const std::vector<Characteristic>& characteristics,
                                double threshold, int num_bins = 5);

/// Per-bin normalized mAP (GT restricted to the bin, predictions matched
/// to out-of-bin GT removed) and its relative change vs. overall.
CharacteristicBins sensitivity(const Dataset& dataset,
                               const PredictionSet& preds,
                               const std::vector<Characteristic>& characteristics,
                               double threshold, int num_bins = 5,
                               double norm_constant = -1.0);

}  // namespace mq

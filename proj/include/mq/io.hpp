#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mq/assign.hpp"
#include "mq/diagnose.hpp"
#include "mq/eval.hpp"
#include "mq/synth.hpp"

namespace mq {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ground-truth file: {"version", "videos": [{"video_id", "duration_sec",
/// "annotations": [{"label", "segment": [start, end]}]}]}.
Dataset load_dataset(const std::string& path, bool strict);
Dataset parse_dataset(const std::string& json_text, bool strict);
std::string dataset_to_json(const Dataset& dataset);

/// Prediction file: {"version", "results": {video_id: [{"label",
/// "segment": [s, e], "score"}]}}. Unknown video ids and out-of-range
/// scores are rejected.
PredictionSet load_predictions(const std::string& path, const Dataset& dataset);
PredictionSet parse_predictions(const std::string& json_text,
                                const Dataset& dataset);
std::string predictions_to_json(const PredictionSet& preds);

/// Assignment instance file for `assign-sim`: {"version",
/// "num_categories", "gts": [{"label", "segment"}], "candidates":
/// [{"time", "level", "stride", "range": [lo, hi]?, "segment",
/// "class_probs"}]}.
struct AssignInstance {
  int num_categories = 0;
  std::vector<GroundTruth> gts;
  std::vector<CandidatePrediction> candidates;
};
AssignInstance load_assign_instance(const std::string& path);
AssignInstance parse_assign_instance(const std::string& json_text);

std::string eval_report_to_json(const EvalReport& report);
std::string assign_summary_to_json(const AssignmentResult& result,
                                   std::size_t num_gts);
std::string replicate_report_to_json(const ReplicateReport& report);
std::string fp_profile_to_json(const FpProfile& profile);
std::string characteristic_bins_to_json(const CharacteristicBins& bins);
std::string sweep_table_to_text(const std::vector<double>& sigmas,
                                const std::vector<double>& average_maps);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Fixed 6-decimal formatting used for every emitted number.
std::string format_number(double v);

}  // namespace mq

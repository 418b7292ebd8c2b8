#include "mq/io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace mq {

using nlohmann::json;

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << content;
  if (!out) throw InputError("write failed: " + path);
}

namespace {

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InputError("malformed JSON in " + what);
  return j;
}

double require_number(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number())
    throw InputError(ctx + ": missing or non-numeric '" + key + "'");
  return j[key].get<double>();
}

std::pair<double, double> require_segment(const json& j,
                                          const std::string& ctx) {
  if (!j.contains("segment") || !j["segment"].is_array() ||
      j["segment"].size() != 2 || !j["segment"][0].is_number() ||
      !j["segment"][1].is_number())
    throw InputError(ctx + ": 'segment' must be [start, end]");
  return {j["segment"][0].get<double>(), j["segment"][1].get<double>()};
}

std::string require_label(const json& j, const std::string& ctx) {
  if (!j.contains("label")) throw InputError(ctx + ": missing 'label'");
  if (j["label"].is_string()) return j["label"].get<std::string>();
  if (j["label"].is_number_integer())
    return std::to_string(j["label"].get<long long>());
  throw InputError(ctx + ": 'label' must be a string or integer");
}

}  // namespace

Dataset parse_dataset(const std::string& text, bool strict) {
  json j = parse_json(text, "ground-truth file");
  if (!j.contains("videos") || !j["videos"].is_array())
    throw InputError("ground-truth file: missing 'videos' array");

  Dataset ds;
  for (const auto& vj : j["videos"]) {
    if (!vj.contains("video_id") || !vj["video_id"].is_string())
      throw InputError("ground-truth file: video without 'video_id'");
    std::string vid = vj["video_id"].get<std::string>();
    if (ds.videos.count(vid))
      throw InputError("duplicate video_id '" + vid + "'");
    VideoInfo info;
    info.duration = require_number(vj, "duration_sec", "video '" + vid + "'");
    if (info.duration <= 0.0)
      throw InputError("video '" + vid + "': duration must be > 0");
    if (vj.contains("annotations")) {
      if (!vj["annotations"].is_array())
        throw InputError("video '" + vid + "': 'annotations' must be an array");
      int idx = 0;
      for (const auto& aj : vj["annotations"]) {
        std::string ctx =
            "video '" + vid + "' annotation " + std::to_string(idx);
        auto [s, e] = require_segment(aj, ctx);
        std::string label = require_label(aj, ctx);
        if (s > e) {
          if (strict) throw InputError(ctx + ": start > end");
          std::swap(s, e);
          std::cerr << "warning: " << ctx << ": swapped start/end\n";
        }
        if (s < 0.0 || e > info.duration) {
          if (strict) throw InputError(ctx + ": segment outside [0, duration]");
          s = std::max(0.0, s);
          e = std::min(e, info.duration);
          s = std::min(s, e);
          std::cerr << "warning: " << ctx << ": clamped to video extent\n";
        }
        info.ground_truths.emplace_back(Segment(s, e), label);
        ++idx;
      }
    }
    ds.videos[vid] = std::move(info);
  }
  return ds;
}

Dataset load_dataset(const std::string& path, bool strict) {
  return parse_dataset(read_file(path), strict);
}

PredictionSet parse_predictions(const std::string& text,
                                const Dataset& dataset) {
  json j = parse_json(text, "prediction file");
  if (!j.contains("results") || !j["results"].is_object())
    throw InputError("prediction file: missing 'results' object");

  PredictionSet preds;
  for (const auto& [vid, plist] : j["results"].items()) {
    if (!dataset.videos.count(vid))
      throw InputError("prediction file: unknown video_id '" + vid + "'");
    if (!plist.is_array())
      throw InputError("prediction file: results['" + vid +
                       "'] must be an array");
    std::vector<ScoredSegment> out;
    int idx = 0;
    for (const auto& pj : plist) {
      std::string ctx = "video '" + vid + "' prediction " + std::to_string(idx);
      auto [s, e] = require_segment(pj, ctx);
      if (s > e) throw InputError(ctx + ": start > end");
      if (s < 0.0) throw InputError(ctx + ": negative start");
      double score = require_number(pj, "score", ctx);
      if (score < 0.0 || score > 1.0)
        throw InputError(ctx + ": score outside [0,1]");
      out.push_back({Segment(s, e), require_label(pj, ctx), score});
      ++idx;
    }
    preds[vid] = std::move(out);
  }
  return preds;
}

PredictionSet load_predictions(const std::string& path,
                               const Dataset& dataset) {
  return parse_predictions(read_file(path), dataset);
}

AssignInstance parse_assign_instance(const std::string& text) {
  json j = parse_json(text, "assignment file");
  AssignInstance inst;
  if (!j.contains("num_categories") || !j["num_categories"].is_number_integer())
    throw InputError("assignment file: missing integer 'num_categories'");
  inst.num_categories = j["num_categories"].get<int>();

  if (j.contains("gts")) {
    int idx = 0;
    for (const auto& gj : j["gts"]) {
      std::string ctx = "gt " + std::to_string(idx);
      auto [s, e] = require_segment(gj, ctx);
      if (!gj.contains("label") || !gj["label"].is_number_integer())
        throw InputError(ctx + ": 'label' must be an integer index");
      inst.gts.emplace_back(Segment(s, e), gj["label"].get<int>());
      ++idx;
    }
  }
  if (!j.contains("candidates") || !j["candidates"].is_array())
    throw InputError("assignment file: missing 'candidates' array");
  int idx = 0;
  for (const auto& cj : j["candidates"]) {
    std::string ctx = "candidate " + std::to_string(idx);
    CandidatePrediction c;
    c.point.time = require_number(cj, "time", ctx);
    c.point.level = cj.value("level", 0);
    c.point.stride = require_number(cj, "stride", ctx);
    if (cj.contains("range")) {
      if (!cj["range"].is_array() || cj["range"].size() != 2)
        throw InputError(ctx + ": 'range' must be [lo, hi]");
      c.point.range_min = cj["range"][0].get<double>();
      c.point.range_max = cj["range"][1].is_null()
                              ? std::numeric_limits<double>::infinity()
                              : cj["range"][1].get<double>();
    } else {
      c.point.range_min = 0.0;
      c.point.range_max = std::numeric_limits<double>::infinity();
    }
    auto [s, e] = require_segment(cj, ctx);
    c.decoded = Segment(s, e);
    if (!cj.contains("class_probs") || !cj["class_probs"].is_array())
      throw InputError(ctx + ": missing 'class_probs' array");
    for (const auto& p : cj["class_probs"]) {
      double v = p.get<double>();
      if (v < 0.0 || v > 1.0)
        throw InputError(ctx + ": class probability outside [0,1]");
      c.class_probs.push_back(v);
    }
    if (static_cast<int>(c.class_probs.size()) != inst.num_categories)
      throw InputError(ctx + ": class_probs length disagrees with vocabulary");
    inst.candidates.push_back(std::move(c));
    ++idx;
  }
  return inst;
}

AssignInstance load_assign_instance(const std::string& path) {
  return parse_assign_instance(read_file(path));
}

// All emitters write fields in a fixed order with %.6f numbers so output
// files are byte-stable.

std::string dataset_to_json(const Dataset& dataset) {
  std::ostringstream o;
  o << "{\n  \"version\": \"1.0\",\n  \"videos\": [\n";
  bool first_v = true;
  for (const auto& [vid, info] : dataset.videos) {
    if (!first_v) o << ",\n";
    first_v = false;
    o << "    {\"video_id\": \"" << vid << "\", \"duration_sec\": "
      << format_number(info.duration) << ", \"annotations\": [";
    bool first_a = true;
    for (const auto& [seg, label] : info.ground_truths) {
      if (!first_a) o << ", ";
      first_a = false;
      o << "{\"label\": \"" << label << "\", \"segment\": ["
        << format_number(seg.start) << ", " << format_number(seg.end) << "]}";
    }
    o << "]}";
  }
  o << "\n  ]\n}\n";
  return o.str();
}

std::string predictions_to_json(const PredictionSet& preds) {
  std::ostringstream o;
  o << "{\n  \"version\": \"1.0\",\n  \"results\": {\n";
  bool first_v = true;
  for (const auto& [vid, plist] : preds) {
    if (!first_v) o << ",\n";
    first_v = false;
    o << "    \"" << vid << "\": [";
    bool first_p = true;
    for (const auto& p : plist) {
      if (!first_p) o << ", ";
      first_p = false;
      o << "{\"label\": \"" << p.label << "\", \"segment\": ["
        << format_number(p.segment.start) << ", "
        << format_number(p.segment.end) << "], \"score\": "
        << format_number(p.score) << "}";
    }
    o << "]";
  }
  o << "\n  }\n}\n";
  return o.str();
}

std::string eval_report_to_json(const EvalReport& report) {
  std::ostringstream o;
  o << "{\n  \"average_map\": " << format_number(report.average_map)
    << ",\n  \"map_at\": {";
  bool first = true;
  for (const auto& [t, v] : report.map_at) {
    if (!first) o << ", ";
    first = false;
    o << "\"" << format_number(t) << "\": " << format_number(v);
  }
  o << "},\n  \"recall_at\": {";
  first = true;
  for (const auto& [key, v] : report.recall_at) {
    if (!first) o << ", ";
    first = false;
    o << "\"" << key.first << "x@" << format_number(key.second)
      << "\": " << format_number(v);
  }
  o << "},\n  \"ap\": {";
  first = true;
  for (const auto& [key, v] : report.ap) {
    if (!first) o << ", ";
    first = false;
    o << "\"" << key.first << "@" << format_number(key.second)
      << "\": " << format_number(v);
  }
  o << "}\n}\n";
  return o.str();
}

std::string assign_summary_to_json(const AssignmentResult& result,
                                   std::size_t num_gts) {
  std::ostringstream o;
  o << "{\n  \"num_gts\": " << num_gts << ",\n  \"candidates\": [";
  bool first = true;
  for (const auto& c : result.candidates) {
    if (!first) o << ", ";
    first = false;
    if (c.gt_index == AssignmentResult::kBackground)
      o << "{\"gt\": null}";
    else
      o << "{\"gt\": " << c.gt_index << ", \"cost\": "
        << format_number(c.cost) << "}";
  }
  o << "],\n  \"gts\": [";
  first = true;
  for (std::size_t j = 0; j < result.gt_candidates.size(); ++j) {
    if (!first) o << ", ";
    first = false;
    o << "{\"dynamic_k\": " << result.dynamic_k[j] << ", \"assigned\": [";
    for (std::size_t a = 0; a < result.gt_candidates[j].size(); ++a) {
      if (a) o << ", ";
      o << result.gt_candidates[j][a];
    }
    o << "]}";
  }
  o << "]\n}\n";
  return o.str();
}

std::string replicate_report_to_json(const ReplicateReport& report) {
  std::ostringstream o;
  o << "{\n  \"total_gt\": " << report.total_gt
    << ",\n  \"flagged_count\": " << report.flagged_count
    << ",\n  \"flagged_fraction\": " << format_number(report.flagged_fraction)
    << ",\n  \"pair_count\": " << report.pairs.size()
    << ",\n  \"pair_fraction\": " << format_number(report.pair_fraction)
    << ",\n  \"flagged\": {";
  bool first = true;
  for (const auto& [vid, idxs] : report.flagged) {
    if (!first) o << ", ";
    first = false;
    o << "\"" << vid << "\": [";
    for (std::size_t i = 0; i < idxs.size(); ++i) {
      if (i) o << ", ";
      o << idxs[i];
    }
    o << "]";
  }
  o << "},\n  \"pairs\": [";
  first = true;
  for (const auto& [vid, i, j, v] : report.pairs) {
    if (!first) o << ", ";
    first = false;
    o << "{\"video_id\": \"" << vid << "\", \"gt\": [" << i << ", " << j
      << "], \"tiou\": " << format_number(v) << "}";
  }
  o << "]\n}\n";
  return o.str();
}

std::string fp_profile_to_json(const FpProfile& profile) {
  std::ostringstream o;
  o << "{\n  \"analyzed\": " << profile.analyzed
    << ",\n  \"base_average_map\": " << format_number(profile.base_average_map)
    << ",\n  \"counts\": {";
  for (int t = 0; t < kNumFpTypes; ++t) {
    if (t) o << ", ";
    o << "\"" << fp_type_name(static_cast<FpType>(t))
      << "\": " << profile.counts[t];
  }
  o << "},\n  \"map_impact\": {";
  for (int t = 1; t < kNumFpTypes; ++t) {
    if (t > 1) o << ", ";
    o << "\"" << fp_type_name(static_cast<FpType>(t))
      << "\": " << format_number(profile.map_impact[t]);
  }
  o << "}\n}\n";
  return o.str();
}

std::string characteristic_bins_to_json(const CharacteristicBins& bins) {
  std::ostringstream o;
  o << "{\n  \"overall\": " << format_number(bins.overall_value)
    << ",\n  \"characteristics\": {";
  bool first_c = true;
  for (const auto& [name, blist] : bins.per_characteristic) {
    if (!first_c) o << ", ";
    first_c = false;
    o << "\"" << name << "\": [";
    for (std::size_t b = 0; b < blist.size(); ++b) {
      const auto& bin = blist[b];
      if (b) o << ", ";
      o << "{\"label\": \"" << bin.label << "\", \"range\": ["
        << format_number(bin.lo) << ", " << format_number(bin.hi)
        << "], \"gt_count\": " << bin.gt_count << ", \"value\": "
        << format_number(bin.value) << ", \"relative_change\": "
        << format_number(bin.relative_change) << "}";
    }
    o << "]";
  }
  o << "}\n}\n";
  return o.str();
}

std::string sweep_table_to_text(const std::vector<double>& sigmas,
                                const std::vector<double>& average_maps) {
  std::ostringstream o;
  o << "sigma      average_mAP\n";
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%-10.6f %.6f\n", sigmas[i],
                  average_maps[i]);
    o << buf;
  }
  return o.str();
}

}  // namespace mq

// Command-line front end: synthesis, NMS, evaluation, assignment
// simulation, diagnosis, and the sigma sweep.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "mq/assign.hpp"
#include "mq/diagnose.hpp"
#include "mq/eval.hpp"
#include "mq/io.hpp"
#include "mq/nms.hpp"
#include "mq/synth.hpp"

namespace {

using mq::ConfigError;
using mq::InputError;

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ConfigError("bad value in " + what + ": '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text,
                                const std::string& what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) out.push_back((int)v);
  return out;
}

mq::NmsMethod parse_method(const std::string& name) {
  if (name == "hard") return mq::NmsMethod::hard;
  if (name == "soft_linear") return mq::NmsMethod::soft_linear;
  if (name == "soft_gaussian") return mq::NmsMethod::soft_gaussian;
  throw ConfigError("unknown NMS method '" + name + "'");
}

// Per-video suppression; per-video work is independent, results land in
// pre-assigned slots so thread count never changes the output.
mq::PredictionSet run_nms(const mq::PredictionSet& preds,
                          const mq::NmsConfig& cfg, int threads) {
  std::vector<const std::string*> ids;
  std::vector<const std::vector<mq::ScoredSegment>*> in;
  for (const auto& [vid, plist] : preds) {
    ids.push_back(&vid);
    in.push_back(&plist);
  }
  std::vector<std::vector<mq::ScoredSegment>> out(ids.size());
  auto work = [&](std::size_t i) { out[i] = mq::suppress(*in[i], cfg); };
  if (threads <= 1 || ids.size() <= 1) {
    for (std::size_t i = 0; i < ids.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = next.fetch_add(1);
          if (i >= ids.size()) return;
          work(i);
        }
      });
    for (auto& t : pool) t.join();
  }
  mq::PredictionSet result;
  for (std::size_t i = 0; i < ids.size(); ++i)
    result[*ids[i]] = std::move(out[i]);
  return result;
}

struct OutputGuard {
  std::vector<std::string> paths;
  bool committed = false;
  void track(const std::string& p) {
    if (!p.empty()) paths.push_back(p);
  }
  ~OutputGuard() {
    if (committed) return;
    for (const auto& p : paths) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  }
};

// Flat key-value config file; every key must name a flag of the invoked
// subcommand (or a global flag), and flags given on the command line win.
void apply_config_file(CLI::App& app, CLI::App* sub,
                       const std::string& config_path) {
  nlohmann::json j =
      nlohmann::json::parse(mq::read_file(config_path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config file must be a JSON object: " + config_path);
  for (const auto& [key, value] : j.items()) {
    std::string flag = "--" + key;
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option(flag);
    } catch (...) {
    }
    if (!opt) {
      try {
        opt = app.get_option(flag);
      } catch (...) {
      }
    }
    if (!opt) throw ConfigError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // flag wins
    std::string text = value.is_string() ? value.get<std::string>()
                                         : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal moment post-processing, assignment and evaluation"};
  app.require_subcommand(1);

  int threads = (int)std::thread::hardware_concurrency();
  if (threads < 1) threads = 1;
  std::uint64_t seed = 1;
  bool strict = false;
  std::string config_path;
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--seed", seed, "random seed");
  app.add_flag("--strict", strict, "reject out-of-range records");
  app.add_option("--config", config_path, "flat JSON config file");

  // synth
  auto* synth = app.add_subcommand("synth", "generate dataset + predictions");
  synth->fallthrough();
  mq::SynthConfig scfg;
  std::string out_dataset, out_predictions, out_metadata;
  bool default_noise = false;
  synth->add_option("--out-dataset", out_dataset)->required();
  synth->add_option("--out-predictions", out_predictions);
  synth->add_option("--out-metadata", out_metadata);
  synth->add_flag("--default-noise", default_noise,
                  "start from the sweep fixture noise profile");
  synth->add_option("--num-videos", scfg.num_videos);
  synth->add_option("--num-categories", scfg.num_categories);
  synth->add_option("--moments-min", scfg.moments_min);
  synth->add_option("--moments-max", scfg.moments_max);
  synth->add_option("--duration-min", scfg.duration_min);
  synth->add_option("--duration-max", scfg.duration_max);
  synth->add_option("--replicate-rate", scfg.replicate_rate);
  synth->add_option("--preds-per-gt", scfg.preds_per_gt);
  synth->add_option("--jitter-std", scfg.jitter_std);
  synth->add_option("--duplicate-rate", scfg.duplicate_rate);
  synth->add_option("--background-fp-rate", scfg.background_fp_rate);
  synth->add_option("--label-flip-rate", scfg.label_flip_rate);
  synth->add_option("--score-base", scfg.score_base);
  synth->add_option("--score-jitter-scale", scfg.score_jitter_scale);
  synth->add_option("--score-noise-std", scfg.score_noise_std);

  // nms
  auto* nms = app.add_subcommand("nms", "suppress a prediction file");
  nms->fallthrough();
  std::string nms_preds, nms_out, nms_dataset;
  std::string method_name = "soft_gaussian";
  mq::NmsConfig ncfg;
  long long max_kept = (long long)ncfg.max_kept;
  nms->add_option("--predictions", nms_preds)->required();
  nms->add_option("--output", nms_out)->required();
  nms->add_option("--dataset", nms_dataset,
                  "validate predictions against this ground truth");
  nms->add_option("--method", method_name, "hard|soft_linear|soft_gaussian");
  nms->add_option("--sigma", ncfg.sigma);
  nms->add_option("--iou-threshold", ncfg.iou_threshold);
  nms->add_option("--score-floor", ncfg.score_floor);
  nms->add_option("--max-kept", max_kept);
  nms->add_flag("--class-agnostic", ncfg.class_agnostic);

  // eval
  auto* ev = app.add_subcommand("eval", "score predictions");
  ev->fallthrough();
  std::string ev_dataset, ev_preds, ev_out;
  std::string thresholds_text = "0.1,0.2,0.3,0.4,0.5";
  std::string recall_text = "1,5";
  bool macro_recall = false;
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--predictions", ev_preds)->required();
  ev->add_option("--output", ev_out);
  ev->add_option("--tiou-thresholds", thresholds_text);
  ev->add_option("--recall-k", recall_text);
  ev->add_flag("--macro-recall", macro_recall);

  // assign-sim
  auto* as = app.add_subcommand("assign-sim", "run label assignment");
  as->fallthrough();
  std::string as_input, as_out, strategy = "simota";
  mq::AssignConfig acfg;
  as->add_option("--input", as_input)->required();
  as->add_option("--output", as_out);
  as->add_option("--strategy", strategy, "simota|center");
  as->add_option("--center-radius", acfg.center_radius);
  as->add_option("--lambda-iou", acfg.lambda_iou);
  as->add_option("--top-q", acfg.top_q);
  as->add_option("--ineligible-cost", acfg.ineligible_cost);
  as->add_flag("--keep-range-constraint", acfg.keep_range_constraint);

  // diagnose
  auto* dg = app.add_subcommand("diagnose", "error analysis report");
  dg->fallthrough();
  std::string dg_dataset, dg_preds, dg_out;
  double replicate_threshold = 0.9, tiou_strong = 0.5, tiou_weak = 0.1;
  double fn_threshold = 0.5;
  int depth_multiplier = 10, num_bins = 5;
  bool per_category_replicates = false;
  dg->add_option("--dataset", dg_dataset)->required();
  dg->add_option("--predictions", dg_preds)->required();
  dg->add_option("--output", dg_out);
  dg->add_option("--replicate-threshold", replicate_threshold);
  dg->add_flag("--per-category-replicates", per_category_replicates);
  dg->add_option("--tiou-strong", tiou_strong);
  dg->add_option("--tiou-weak", tiou_weak);
  dg->add_option("--depth-multiplier", depth_multiplier);
  dg->add_option("--fn-threshold", fn_threshold);
  dg->add_option("--num-bins", num_bins);

  // sweep
  auto* sw = app.add_subcommand("sweep", "NMS + eval across a sigma list");
  sw->fallthrough();
  std::string sw_dataset, sw_preds, sw_out;
  std::string sigmas_text = "0.9,1.5,2.0,4.0";
  std::string sw_thresholds_text = "0.1,0.2,0.3,0.4,0.5";
  mq::NmsConfig sw_ncfg;
  sw->add_option("--dataset", sw_dataset)->required();
  sw->add_option("--predictions", sw_preds)->required();
  sw->add_option("--output", sw_out);
  sw->add_option("--sigmas", sigmas_text);
  sw->add_option("--tiou-thresholds", sw_thresholds_text);
  sw->add_option("--score-floor", sw_ncfg.score_floor);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  OutputGuard guard;
  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) apply_config_file(app, sub, config_path);
    if (threads < 1) throw ConfigError("--threads must be >= 1");

    if (sub == synth) {
      if (default_noise) {
        mq::SynthConfig base = mq::default_noise_profile();
        // Values given on the command line (or config file) still win.
        auto keep = [&](const char* flag, auto member) {
          if (synth->get_option(flag)->count() == 0)
            scfg.*member = base.*member;
        };
        keep("--num-videos", &mq::SynthConfig::num_videos);
        keep("--num-categories", &mq::SynthConfig::num_categories);
        keep("--moments-min", &mq::SynthConfig::moments_min);
        keep("--moments-max", &mq::SynthConfig::moments_max);
        keep("--replicate-rate", &mq::SynthConfig::replicate_rate);
        keep("--preds-per-gt", &mq::SynthConfig::preds_per_gt);
        keep("--jitter-std", &mq::SynthConfig::jitter_std);
        keep("--duplicate-rate", &mq::SynthConfig::duplicate_rate);
        keep("--background-fp-rate", &mq::SynthConfig::background_fp_rate);
        keep("--label-flip-rate", &mq::SynthConfig::label_flip_rate);
        keep("--score-base", &mq::SynthConfig::score_base);
        keep("--score-jitter-scale", &mq::SynthConfig::score_jitter_scale);
        keep("--score-noise-std", &mq::SynthConfig::score_noise_std);
      }
      scfg.seed = seed;
      guard.track(out_dataset);
      guard.track(out_predictions);
      guard.track(out_metadata);
      mq::SynthDataset sd = mq::generate_dataset(scfg);
      mq::write_file(out_dataset, mq::dataset_to_json(sd.dataset));
      if (!out_predictions.empty()) {
        mq::PredictionSet preds = mq::generate_predictions(sd.dataset, scfg);
        mq::write_file(out_predictions, mq::predictions_to_json(preds));
      }
      if (!out_metadata.empty()) {
        std::ostringstream o;
        o << "{\n  \"planted_members\": " << sd.planted_members
          << ",\n  \"planted_fraction\": "
          << mq::format_number(sd.planted_fraction) << ",\n  \"pairs\": [";
        for (std::size_t i = 0; i < sd.planted_pairs.size(); ++i) {
          const auto& [vid, a, b] = sd.planted_pairs[i];
          if (i) o << ", ";
          o << "{\"video_id\": \"" << vid << "\", \"gt\": [" << a << ", " << b
            << "]}";
        }
        o << "]\n}\n";
        mq::write_file(out_metadata, o.str());
      }
    } else if (sub == nms) {
      ncfg.method = parse_method(method_name);
      if (max_kept < 1) throw ConfigError("--max-kept must be >= 1");
      ncfg.max_kept = (std::size_t)max_kept;
      mq::PredictionSet preds;
      if (!nms_dataset.empty()) {
        mq::Dataset ds = mq::load_dataset(nms_dataset, strict);
        preds = mq::load_predictions(nms_preds, ds);
      } else {
        // No ground truth given: accept any video ids.
        nlohmann::json j = nlohmann::json::parse(mq::read_file(nms_preds),
                                                 nullptr, false);
        if (j.is_discarded() || !j.contains("results"))
          throw InputError("prediction file: missing 'results' object");
        mq::Dataset pseudo;
        for (const auto& [vid, unused] : j["results"].items())
          pseudo.videos[vid].duration = 1e18;
        preds = mq::parse_predictions(mq::read_file(nms_preds), pseudo);
      }
      guard.track(nms_out);
      mq::write_file(nms_out,
                     mq::predictions_to_json(run_nms(preds, ncfg, threads)));
    } else if (sub == ev) {
      mq::Dataset ds = mq::load_dataset(ev_dataset, strict);
      mq::PredictionSet preds = mq::load_predictions(ev_preds, ds);
      std::vector<double> thr =
          parse_double_list(thresholds_text, "--tiou-thresholds");
      std::vector<int> ks = parse_int_list(recall_text, "--recall-k");
      mq::EvalOptions opts;
      opts.macro_recall = macro_recall;
      opts.threads = threads;
      mq::EvalReport report = mq::evaluate(ds, preds, thr, ks, opts);
      std::string text = mq::eval_report_to_json(report);
      if (ev_out.empty()) {
        std::cout << text;
      } else {
        guard.track(ev_out);
        mq::write_file(ev_out, text);
      }
    } else if (sub == as) {
      mq::AssignInstance inst = mq::load_assign_instance(as_input);
      mq::AssignmentResult result;
      if (strategy == "simota") {
        result = mq::simota_assign(inst.candidates, inst.gts, acfg);
      } else if (strategy == "center") {
        std::vector<mq::PyramidPoint> points;
        for (const auto& c : inst.candidates) points.push_back(c.point);
        result = mq::center_sampling(points, inst.gts, acfg.center_radius);
      } else {
        throw ConfigError("unknown strategy '" + strategy + "'");
      }
      std::string text = mq::assign_summary_to_json(result, inst.gts.size());
      if (as_out.empty()) {
        std::cout << text;
      } else {
        guard.track(as_out);
        mq::write_file(as_out, text);
      }
    } else if (sub == dg) {
      mq::Dataset ds = mq::load_dataset(dg_dataset, strict);
      mq::PredictionSet preds = mq::load_predictions(dg_preds, ds);
      mq::ReplicateReport rep =
          mq::near_replicates(ds, replicate_threshold, per_category_replicates);
      mq::FpProfile fp = mq::classify_false_positives(
          ds, preds, tiou_strong, tiou_weak, depth_multiplier);
      std::vector<mq::Characteristic> chars = {
          mq::Characteristic::length, mq::Characteristic::coverage,
          mq::Characteristic::num_instances};
      mq::CharacteristicBins fn =
          mq::fn_breakdown(ds, preds, chars, fn_threshold, num_bins);
      mq::CharacteristicBins sens =
          mq::sensitivity(ds, preds, chars, fn_threshold, num_bins);
      std::ostringstream o;
      o << "{\n\"near_replicates\": " << mq::replicate_report_to_json(rep)
        << ",\n\"false_positives\": " << mq::fp_profile_to_json(fp)
        << ",\n\"false_negatives\": " << mq::characteristic_bins_to_json(fn)
        << ",\n\"sensitivity\": " << mq::characteristic_bins_to_json(sens)
        << "}\n";
      if (dg_out.empty()) {
        std::cout << o.str();
      } else {
        guard.track(dg_out);
        mq::write_file(dg_out, o.str());
      }
    } else if (sub == sw) {
      mq::Dataset ds = mq::load_dataset(sw_dataset, strict);
      mq::PredictionSet preds = mq::load_predictions(sw_preds, ds);
      std::vector<double> sigmas = parse_double_list(sigmas_text, "--sigmas");
      std::vector<double> thr =
          parse_double_list(sw_thresholds_text, "--tiou-thresholds");
      std::vector<double> maps;
      for (double sigma : sigmas) {
        mq::NmsConfig cfg = sw_ncfg;
        cfg.method = mq::NmsMethod::soft_gaussian;
        cfg.sigma = sigma;
        mq::PredictionSet kept = run_nms(preds, cfg, threads);
        mq::EvalOptions opts;
        opts.threads = threads;
        maps.push_back(mq::evaluate(ds, kept, thr, {1}, opts).average_map);
      }
      std::string text = mq::sweep_table_to_text(sigmas, maps);
      if (sw_out.empty()) {
        std::cout << text;
      } else {
        guard.track(sw_out);
        mq::write_file(sw_out, text);
      }
    }
    guard.committed = true;
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

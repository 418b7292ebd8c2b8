// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Oracles here are independent re-implementations (exhaustive
// matching, subset enumeration, brute-force AP integration), not calls back
// into the library code under test.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "mq/assign.hpp"
#include "mq/diagnose.hpp"
#include "mq/eval.hpp"
#include "mq/io.hpp"
#include "mq/nms.hpp"
#include "mq/synth.hpp"

using namespace mq;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok,
            const std::string& detail = "") {
  std::printf("[%s] %d. %s%s%s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---------------------------------------------------------------- criterion 1

PredictionSet apply_nms(const PredictionSet& preds, const NmsConfig& cfg) {
  PredictionSet out;
  for (const auto& [vid, plist] : preds) out[vid] = suppress(plist, cfg);
  return out;
}

void criterion_sweep_shape() {
  auto t0 = std::chrono::steady_clock::now();
  SynthConfig cfg = default_noise_profile();
  cfg.seed = 7;
  SynthDataset sd = generate_dataset(cfg);
  PredictionSet preds = generate_predictions(sd.dataset, cfg);

  std::map<double, double> map_at_sigma;
  for (double sigma : {0.9, 2.0, 4.0}) {
    NmsConfig ncfg;
    ncfg.method = NmsMethod::soft_gaussian;
    ncfg.sigma = sigma;
    PredictionSet kept = apply_nms(preds, ncfg);
    EvalOptions opts;  // single-threaded
    map_at_sigma[sigma] =
        evaluate(sd.dataset, kept, default_tiou_thresholds(), {1}, opts)
            .average_map;
  }
  double secs = elapsed_s(t0);
  bool shape = map_at_sigma[2.0] > map_at_sigma[0.9] &&
               map_at_sigma[4.0] < map_at_sigma[2.0];
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "avg mAP sigma 0.9/2.0/4.0 = %.4f/%.4f/%.4f, %.1fs",
                map_at_sigma[0.9], map_at_sigma[2.0], map_at_sigma[4.0], secs);
  report(1, "sigma sweep rises to 2.0 then falls at 4.0, < 60 s 1-thread",
         shape && secs < 60.0, detail);
}

// ---------------------------------------------------------------- criterion 2

using EvalGt = std::pair<Segment, std::string>;

int max_matching(const std::vector<ScoredSegment>& preds,
                 const std::vector<EvalGt>& gts, double threshold) {
  std::vector<std::vector<int>> adj(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (preds[i].label == gts[j].second &&
          tiou(preds[i].segment, gts[j].first) >= threshold)
        adj[i].push_back((int)j);
  std::vector<int> match_gt(gts.size(), -1);
  std::function<bool(int, std::vector<char>&)> try_kuhn =
      [&](int i, std::vector<char>& used) {
        for (int j : adj[i]) {
          if (used[j]) continue;
          used[j] = 1;
          if (match_gt[j] < 0 || try_kuhn(match_gt[j], used)) {
            match_gt[j] = i;
            return true;
          }
        }
        return false;
      };
  int count = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<char> used(gts.size(), 0);
    if (try_kuhn((int)i, used)) ++count;
  }
  return count;
}

double ap_oracle(const std::vector<char>& flags, int num_gt) {
  if (num_gt == 0) return flags.empty() ? 1.0 : 0.0;
  double ap = 0.0;
  int tp_before = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) {
      double env = 0.0;
      int tp = tp_before;
      for (std::size_t j = i; j < flags.size(); ++j) {
        if (flags[j]) ++tp;
        env = std::max(env, (double)tp / (double)(j + 1));
      }
      ap += env / num_gt;
      ++tp_before;
    }
  }
  return ap;
}

struct EvalInstance {
  std::vector<ScoredSegment> preds;
  std::vector<EvalGt> gts;
};

// GTs spaced 8 apart with jitter bounded by 1: each prediction overlaps at
// most one GT, so greedy matching provably equals maximum matching.
EvalInstance random_eval_instance(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EvalInstance inst;
  int m = 1 + (int)(rng() % 4);
  for (int j = 0; j < m; ++j) {
    double s = j * 8.0;
    inst.gts.emplace_back(Segment(s, s + 1.0 + u(rng) * 5.0), "c");
  }
  int n = (int)(rng() % 7);
  for (int i = 0; i < n; ++i) {
    const Segment& g = inst.gts[rng() % inst.gts.size()].first;
    double s = std::max(0.0, g.start + (u(rng) - 0.5) * 2.0);
    double e = std::min(g.end + 1.0,
                        std::max(s + 0.1, g.end + (u(rng) - 0.5) * 2.0));
    inst.preds.push_back({Segment(s, e), "c", u(rng)});
  }
  return inst;
}

void criterion_eval_oracle() {
  std::mt19937 rng(2024);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    EvalInstance inst = random_eval_instance(rng);
    for (int t = 1; t <= 9; ++t) {
      double thr = t / 10.0;
      auto m = match_predictions(inst.preds, inst.gts, thr);
      int greedy_tp = 0;
      for (char f : m.is_tp) greedy_tp += f;
      if (greedy_tp != max_matching(inst.preds, inst.gts, thr)) ok = false;
      double got = average_precision(m.is_tp, (int)inst.gts.size());
      double want = ap_oracle(m.is_tp, (int)inst.gts.size());
      if (std::abs(got - want) > 1e-9) ok = false;
    }
  }
  report(2, "greedy matching equals max matching, AP equals oracle (1e-9)",
         ok, "200 instances x thresholds 0.1-0.9");
}

// ---------------------------------------------------------------- criterion 3

std::vector<ScoredSegment> hard_nms_reference(
    const std::vector<ScoredSegment>& in, double iou_threshold,
    bool class_agnostic) {
  auto better = [&](std::size_t a, std::size_t b) {
    if (in[a].score != in[b].score) return in[a].score > in[b].score;
    if (in[a].segment.start != in[b].segment.start)
      return in[a].segment.start < in[b].segment.start;
    if (in[a].segment.duration() != in[b].segment.duration())
      return in[a].segment.duration() < in[b].segment.duration();
    return a < b;
  };
  std::vector<ScoredSegment> out;
  std::vector<char> dead(in.size(), 0);
  for (;;) {
    std::size_t best = in.size();
    for (std::size_t i = 0; i < in.size(); ++i)
      if (!dead[i] && (best == in.size() || better(i, best))) best = i;
    if (best == in.size()) break;
    dead[best] = 1;
    out.push_back(in[best]);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (dead[i]) continue;
      if (!class_agnostic && in[i].label != in[best].label) continue;
      if (tiou(in[i].segment, in[best].segment) > iou_threshold) dead[i] = 1;
    }
  }
  return out;
}

bool same_output(const std::vector<ScoredSegment>& a,
                 const std::vector<ScoredSegment>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].label != b[i].label) return false;
    if (std::abs(a[i].score - b[i].score) > 1e-12) return false;
    if (std::abs(a[i].segment.start - b[i].segment.start) > 1e-12) return false;
    if (std::abs(a[i].segment.end - b[i].segment.end) > 1e-12) return false;
  }
  return true;
}

std::vector<ScoredSegment> random_candidates(std::mt19937& rng, int n,
                                             int num_labels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScoredSegment> out;
  for (int i = 0; i < n; ++i) {
    double s = u(rng) * 20.0;
    out.push_back({Segment(s, s + 0.2 + u(rng) * 8.0),
                   "c" + std::to_string(rng() % num_labels), u(rng)});
  }
  return out;
}

void criterion_nms() {
  bool ok = true;

  std::vector<ScoredSegment> two = {{Segment(0, 2), "a", 1.0},
                                    {Segment(0, 2), "a", 0.8}};
  NmsConfig cfg;
  cfg.method = NmsMethod::soft_gaussian;
  cfg.score_floor = 0.0;
  cfg.sigma = 2.0;
  auto out = suppress(two, cfg);
  if (out.size() != 2 ||
      std::abs(out[1].score - 0.8 * std::exp(-0.5)) > 1e-6)
    ok = false;
  cfg.sigma = 0.9;
  out = suppress(two, cfg);
  if (out.size() != 2 ||
      std::abs(out[1].score - 0.8 * std::exp(-1.0 / 0.9)) > 1e-6)
    ok = false;

  std::mt19937 rng(500);
  for (int trial = 0; trial < 500 && ok; ++trial) {
    auto in = random_candidates(rng, 12, trial % 3 ? 2 : 1);
    NmsConfig h;
    h.method = NmsMethod::hard;
    h.iou_threshold = 0.2 + 0.1 * (trial % 6);
    h.score_floor = 0.0;
    h.class_agnostic = (trial % 2 == 0);
    auto got = suppress(in, h);
    auto want = hard_nms_reference(in, h.iou_threshold, h.class_agnostic);
    std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.segment.start != b.segment.start)
        return a.segment.start < b.segment.start;
      return a.segment.duration() < b.segment.duration();
    });
    if (!same_output(got, want)) ok = false;
    if (!same_output(got, suppress(got, h))) ok = false;  // idempotence
  }
  report(3, "soft-NMS fixtures (1e-6), hard NMS = exhaustive oracle + "
            "idempotent on 500 cases",
         ok);
}

// ---------------------------------------------------------------- criterion 4

PyramidPoint point_at(double time) {
  return PyramidPoint{time, 0, 1.0, 0.0, 1e18};
}

CandidatePrediction make_candidate(double time, Segment decoded,
                                   std::vector<double> probs) {
  CandidatePrediction c;
  c.point = point_at(time);
  c.decoded = decoded;
  c.class_probs = std::move(probs);
  return c;
}

struct AssignInstanceToy {
  std::vector<CandidatePrediction> cands;
  std::vector<GroundTruth> gts;
};

AssignInstanceToy random_assign_instance(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AssignInstanceToy inst;
  int m = 1 + (int)(rng() % 3);
  for (int j = 0; j < m; ++j) {
    double s = u(rng) * 20.0;
    inst.gts.emplace_back(Segment(s, s + 1.0 + u(rng) * 8.0),
                          (int)(rng() % 3));
  }
  int n = 1 + (int)(rng() % 6);
  for (int i = 0; i < n; ++i) {
    const Segment& g = inst.gts[rng() % inst.gts.size()].first;
    double t = g.start + u(rng) * g.duration();
    double ds = std::max(0.0, g.start + (u(rng) - 0.5) * 2.0);
    double de = std::max(ds + 0.1, g.end + (u(rng) - 0.5) * 2.0);
    std::vector<double> probs(3);
    for (auto& p : probs) p = u(rng);
    inst.cands.push_back(make_candidate(t, Segment(ds, de), probs));
  }
  return inst;
}

std::vector<int> brute_force_assign(const AssignInstanceToy& inst,
                                    const AssignConfig& cfg) {
  std::size_t n = inst.cands.size(), m = inst.gts.size();
  std::vector<std::vector<double>> cost(m, std::vector<double>(n));
  std::vector<std::vector<char>> elig(m, std::vector<char>(n, 0));
  std::vector<std::vector<double>> iou(m, std::vector<double>(n));
  auto nl = [&](double v) { return -std::log(std::clamp(v, cfg.eps, 1.0)); };
  for (std::size_t j = 0; j < m; ++j) {
    const Segment& g = inst.gts[j].first;
    for (std::size_t i = 0; i < n; ++i) {
      double t = inst.cands[i].point.time;
      bool e = (t >= g.start && t <= g.end) ||
               std::abs(t - g.center()) <=
                   cfg.center_radius * inst.cands[i].point.stride;
      elig[j][i] = e;
      iou[j][i] = tiou(inst.cands[i].decoded, g);
      cost[j][i] = nl(inst.cands[i].class_probs[inst.gts[j].second]) +
                   cfg.lambda_iou * nl(iou[j][i]) +
                   (e ? 0.0 : cfg.ineligible_cost);
    }
  }
  std::vector<std::vector<int>> best_subset(m);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<int> eligible;
    for (std::size_t i = 0; i < n; ++i)
      if (elig[j][i]) eligible.push_back((int)i);
    if (eligible.empty()) continue;
    std::vector<double> ious;
    for (int i : eligible) ious.push_back(iou[j][i]);
    std::sort(ious.rbegin(), ious.rend());
    double sum = 0;
    for (std::size_t q = 0; q < std::min<std::size_t>(cfg.top_q, ious.size());
         ++q)
      sum += ious[q];
    int k = std::clamp((int)std::floor(sum), 1, (int)eligible.size());
    double best_cost = 1e300;
    std::vector<int> best, pick;
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
      if ((int)pick.size() == k) {
        double c = 0;
        for (int i : pick) c += cost[j][i];
        if (c < best_cost - 1e-15 ||
            (std::abs(c - best_cost) <= 1e-15 && pick < best)) {
          best_cost = c;
          best = pick;
        }
        return;
      }
      if (pos >= eligible.size()) return;
      if ((int)(pick.size() + (eligible.size() - pos)) < k) return;
      pick.push_back(eligible[pos]);
      rec(pos + 1);
      pick.pop_back();
      rec(pos + 1);
    };
    rec(0);
    best_subset[j] = best;
  }
  std::vector<int> assigned(n, -1);
  for (std::size_t j = 0; j < m; ++j)
    for (int i : best_subset[j]) {
      int cur = assigned[i];
      if (cur < 0 || cost[j][i] < cost[cur][i]) assigned[i] = (int)j;
    }
  return assigned;
}

void criterion_assign() {
  std::mt19937 rng(1234);
  AssignConfig cfg;
  bool ok = true;
  for (int trial = 0; trial < 300 && ok; ++trial) {
    AssignInstanceToy inst = random_assign_instance(rng);
    auto got = simota_assign(inst.cands, inst.gts, cfg);
    auto want = brute_force_assign(inst, cfg);
    for (std::size_t i = 0; i < inst.cands.size(); ++i)
      if (got.candidates[i].gt_index != want[i]) ok = false;

    // Coverage: every GT with at least one eligible candidate selects at
    // least one (k_j >= 1). Conflict resolution may still strip it later;
    // no re-fill pass exists by design.
    for (std::size_t j = 0; j < inst.gts.size(); ++j) {
      bool any = false;
      for (const auto& c : inst.cands) {
        double t = c.point.time;
        const Segment& g = inst.gts[j].first;
        if ((t >= g.start && t <= g.end) ||
            std::abs(t - g.center()) <= cfg.center_radius * c.point.stride)
          any = true;
      }
      if (any && got.dynamic_k[j] < 1) ok = false;
    }

    // Bit-identical rerun.
    auto again = simota_assign(inst.cands, inst.gts, cfg);
    for (std::size_t i = 0; i < inst.cands.size(); ++i)
      if (again.candidates[i].gt_index != got.candidates[i].gt_index ||
          again.candidates[i].cost != got.candidates[i].cost)
        ok = false;
  }
  report(4, "label assignment equals subset enumeration, covers eligible "
            "GTs, bit-identical reruns",
         ok, "300 instances");
}

// ---------------------------------------------------------------- criterion 5

void criterion_replicates() {
  SynthConfig cfg;
  cfg.num_videos = 100;
  cfg.moments_min = 10;
  cfg.moments_max = 10;
  cfg.replicate_rate = 0.15;
  cfg.seed = 5;
  SynthDataset sd = generate_dataset(cfg);
  ReplicateReport rep = near_replicates(sd.dataset, 0.9);

  std::map<std::string, std::set<int>> expect;
  for (const auto& [vid, i, j] : sd.planted_pairs) {
    expect[vid].insert(i);
    expect[vid].insert(j);
  }
  bool ok = sd.dataset.total_gt() == 1000 &&
            rep.flagged_count == sd.planted_members &&
            rep.flagged_count == 150 &&
            rep.flagged_fraction == sd.planted_fraction &&
            rep.pairs.size() == sd.planted_pairs.size();
  if (ok) {
    for (const auto& [vid, idx] : rep.flagged) {
      std::set<int> got(idx.begin(), idx.end());
      if (got != expect[vid]) ok = false;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "1000 moments, flagged %zu (%.4f), planted %zu",
                rep.flagged_count, rep.flagged_fraction, sd.planted_members);
  report(5, "near-replicate detection recovers exactly the planted members",
         ok, detail);
}

// ---------------------------------------------------------------- criterion 6

void criterion_fp_profile() {
  bool ok = true;
  for (int seed = 0; seed < 50 && ok; ++seed) {
    SynthConfig cfg = default_noise_profile();
    cfg.num_videos = 5;
    cfg.seed = 3000 + seed;
    SynthDataset sd = generate_dataset(cfg);
    PredictionSet preds = generate_predictions(sd.dataset, cfg);

    FpProfile prof = classify_false_positives(sd.dataset, preds);
    long long sum = 0;
    for (long long c : prof.counts) sum += c;
    if ((std::size_t)sum != prof.analyzed) ok = false;

    // Remove background errors (no GT overlap at 0.1 in the video) and
    // check no per-category AP decreases.
    PredictionSet pruned;
    for (const auto& [vid, plist] : preds) {
      const auto& gts = sd.dataset.videos.at(vid).ground_truths;
      for (const auto& p : plist) {
        double best = 0.0;
        for (const auto& g : gts)
          best = std::max(best, tiou(p.segment, g.first));
        if (best >= 0.1) pruned[vid].push_back(p);
      }
    }
    auto before = evaluate(sd.dataset, preds, default_tiou_thresholds(), {1});
    auto after = evaluate(sd.dataset, pruned, default_tiou_thresholds(), {1});
    for (const auto& [key, v] : before.ap)
      if (after.ap.at(key) < v - 1e-12) ok = false;
  }
  report(6, "FP types partition analyzed predictions; dropping background "
            "errors never lowers any AP",
         ok, "50 seeds");
}

// ---------------------------------------------------------------- criterion 7

void criterion_performance() {
  std::mt19937 rng(77);
  auto big = random_candidates(rng, 10000, 1);
  NmsConfig ncfg;  // soft gaussian, defaults
  auto t0 = std::chrono::steady_clock::now();
  auto kept = suppress(big, ncfg);
  double nms_s = elapsed_s(t0);
  bool ok = !kept.empty() && nms_s < 1.0;

  SynthConfig cfg = default_noise_profile();
  cfg.num_videos = 500;
  cfg.num_categories = 100;
  cfg.seed = 17;
  SynthDataset sd = generate_dataset(cfg);
  PredictionSet preds = generate_predictions(sd.dataset, cfg);
  EvalOptions opts;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());
  t0 = std::chrono::steady_clock::now();
  auto rep = evaluate(sd.dataset, preds, default_tiou_thresholds(), {1, 5},
                      opts);
  double eval_s = elapsed_s(t0);
  ok = ok && rep.average_map > 0.0 && eval_s < 10.0;

  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "suppress 10k: %.2fs (<1s), evaluate 500x100: %.2fs (<10s)",
                nms_s, eval_s);
  report(7, "performance budgets", ok, detail);
}

// ---------------------------------------------------------------- criterion 8

const std::string kCli = MQ_CLI_PATH;

int run_cli(const std::string& args) {
  int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

void criterion_cli_determinism() {
  fs::path tmp = fs::temp_directory_path() /
                 ("mq_accept_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  auto f = [&](const std::string& n) { return (tmp / n).string(); };
  bool ok = true;
  auto same = [&](const std::string& a, const std::string& b) {
    if (read_file(a) != read_file(b)) ok = false;
  };

  for (int rep = 0; rep < 2; ++rep) {
    std::string tag = std::to_string(rep);
    int threads = rep == 0 ? 1 : 8;
    std::string t = " --threads " + std::to_string(threads) + " ";
    if (run_cli("synth --out-dataset " + f("d" + tag) + " --out-predictions " +
                f("p" + tag) + t + "--default-noise --seed 42") != 0)
      ok = false;
    if (run_cli("nms --predictions " + f("p" + tag) + t + "--output " +
                f("n" + tag)) != 0)
      ok = false;
    if (run_cli("eval --dataset " + f("d" + tag) + " --predictions " +
                f("p" + tag) + t + "--output " + f("e" + tag)) != 0)
      ok = false;
    if (run_cli("sweep --dataset " + f("d" + tag) + " --predictions " +
                f("p" + tag) + t + "--output " + f("s" + tag)) != 0)
      ok = false;
    if (run_cli("diagnose --dataset " + f("d" + tag) + " --predictions " +
                f("p" + tag) + t + "--output " + f("g" + tag)) != 0)
      ok = false;
  }
  std::ofstream(f("inst")) <<
      R"({"num_categories": 2,
          "gts": [{"label": 0, "segment": [0, 10]},
                  {"label": 1, "segment": [20, 26]}],
          "candidates": [
            {"time": 5, "stride": 1, "segment": [1, 9],
             "class_probs": [0.9, 0.1]},
            {"time": 23, "stride": 1, "segment": [21, 25],
             "class_probs": [0.2, 0.8]},
            {"time": 50, "stride": 1, "segment": [48, 52],
             "class_probs": [0.5, 0.5]}]})";
  if (run_cli("assign-sim --input " + f("inst") + " --threads 1 --output " +
              f("a0")) != 0)
    ok = false;
  if (run_cli("assign-sim --input " + f("inst") + " --threads 8 --output " +
              f("a1")) != 0)
    ok = false;

  if (ok)
    for (const char* n : {"d", "p", "n", "e", "s", "g", "a"})
      same(f(std::string(n) + "0"), f(std::string(n) + "1"));

  std::error_code ec;
  fs::remove_all(tmp, ec);
  report(8, "every CLI subcommand is byte-identical across reruns and "
            "thread counts",
         ok);
}

}  // namespace

int main() {
  criterion_sweep_shape();
  criterion_eval_oracle();
  criterion_nms();
  criterion_assign();
  criterion_replicates();
  criterion_fp_profile();
  criterion_performance();
  criterion_cli_determinism();
  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 8 criteria passed\n");
  return 0;
}

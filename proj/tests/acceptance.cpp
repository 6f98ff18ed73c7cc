// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and budgets are fixed below.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kalman_oracle.hpp"
#include "metrics_oracle.hpp"
#include "rct/geometry.hpp"
#include "rct/io.hpp"
#include "rct/metrics.hpp"
#include "rct/synth.hpp"
#include "rct/tracker.hpp"

using namespace rct;
namespace fs = std::filesystem;

namespace {

constexpr double kKalmanRelTol = 1e-6;
constexpr int kKalmanSequences = 200;
constexpr double kKalmanBudget = 10.0;
constexpr int kAssignmentMatrices = 500;
constexpr int kAssignmentMaxDim = 7;
constexpr double kAssignmentBudget = 10.0;
constexpr int kDiouPairs = 10000;
constexpr double kClosureTol = 1e-9;
constexpr double kEndToEndMinHota = 0.9;
constexpr double kEndToEndBudget = 60.0;
constexpr double kSotErrorRatio = 2.0;
constexpr double kThroughputBudget = 300.0;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
const std::vector<double> kPrefilters = {0.3, 0.5, 0.7};

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Run {
  std::vector<Track> tracks;
  metrics::EvalReport eval;
  double seconds = 0.0;
};

Run track(const synth::Scenario& sc, const synth::Synthetic& data, const RctParams& params,
          double prefilter = 0.0) {
  DetectionPool pool(data.detections, sc.num_frames);
  if (prefilter > 0.0) pool = pool.prefiltered(prefilter);
  const auto start = Clock::now();
  Run run;
  run.tracks = run_rct(std::move(pool), data.frames.get(), params, sc.dims).tracks;
  run.seconds = elapsed(start);
  run.eval = metrics::evaluate(data.ground_truth, to_track_set(run.tracks));
  return run;
}

// ---------------------------------------------------------------------------

Outcome kalman_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  double worst = 0.0;
  for (int i = 0; i < kKalmanSequences; ++i) {
    const auto cfg = i % 2 == 0 ? kalman::KalmanConfig::defaults()
                                : kalman::KalmanConfig::diagonal(u(rng), u(rng), u(rng), u(rng),
                                                                 u(rng), u(rng));
    const auto seq = oracle::random_sequence(rng);
    const auto rts = kalman::smooth(seq.obs, seq.init_box, cfg);
    const auto exact = oracle::joint_posterior(seq.obs, seq.init_box, cfg);
    if (rts.size() != exact.size()) return {false, "length mismatch"};
    for (std::size_t t = 0; t < rts.size(); ++t) {
      worst = std::max({worst, oracle::relative_error(rts[t].mean, exact[t].mean),
                        oracle::relative_error(rts[t].cov, exact[t].cov)});
    }
  }
  const double secs = elapsed(start);
  return {worst < kKalmanRelTol && secs < kKalmanBudget,
          fmt("%d sequences, max relative error %.2e (tol %.0e), %.2f s", kKalmanSequences, worst,
              kKalmanRelTol, secs)};
}

Outcome assignment_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> dim(1, kAssignmentMaxDim);
  std::uniform_int_distribution<int> value(0, 50);
  std::uniform_real_distribution<double> u(0, 1);
  int mismatches = 0;
  for (int i = 0; i < kAssignmentMatrices; ++i) {
    const int rows = dim(rng), cols = dim(rng);
    const double forbid = (i % 4) * 0.2;
    Eigen::MatrixXd c(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int k = 0; k < cols; ++k) c(r, k) = u(rng) < forbid ? metrics::kForbidden : value(rng);
    }
    const auto got = metrics::assign(c);
    const auto want = oracle::brute_force_assignment(c);
    if (static_cast<int>(got.size()) != want.cardinality || metrics::assignment_cost(c, got) != want.cost) {
      ++mismatches;
    }
  }
  const double secs = elapsed(start);
  return {mismatches == 0 && secs < kAssignmentBudget,
          fmt("%d matrices up to %dx%d, %d mismatches, %.2f s", kAssignmentMatrices, kAssignmentMaxDim,
              kAssignmentMaxDim, mismatches, secs)};
}

Outcome diou_suite() {
  const Box a{0, 0, 10, 10};
  bool ok = diou(a, a) == 0.0;
  ok &= diou(a, Box{10, 10, 10, 10}) == 1.25;
  ok &= std::abs(diou(a, Box{100, 100, 10, 10}) - (1.0 + 20000.0 / 24200.0)) < 1e-12;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(-200, 800), size(0.5, 300);
  int violations = 0;
  for (int i = 0; i < kDiouPairs; ++i) {
    const Box p{pos(rng), pos(rng), size(rng), size(rng)};
    const Box q{pos(rng), pos(rng), size(rng), size(rng)};
    const double d = diou(p, q);
    if (d != diou(q, p) || !(d >= 0.0 && d < 2.0) || diou(p, p) != 0.0) ++violations;
  }
  return {ok && violations == 0,
          fmt("analytic cases %s, %d random pairs, %d symmetry/range violations", ok ? "exact" : "WRONG",
              kDiouPairs, violations)};
}

Outcome metric_closure() {
  int scenarios = 0, failures = 0;
  for (const std::string& name : synth::preset_names()) {
    for (std::uint64_t seed : kSeeds) {
      const auto sc = synth::preset(name, seed);
      const auto data = synth::generate(sc);
      const auto r = metrics::evaluate(data.ground_truth, data.ground_truth);
      ++scenarios;
      if (std::abs(r.hota - 1.0) > kClosureTol || r.mota != 1.0 || r.id_switches != 0) ++failures;
    }
  }
  return {failures == 0, fmt("%d preset/seed scenarios, %d not perfect", scenarios, failures)};
}

Outcome end_to_end() {
  std::string detail;
  bool ok = true;
  for (std::uint64_t seed : kSeeds) {
    const auto sc = synth::preset("three_objects", seed);
    const auto data = synth::generate(sc);
    const Run run = track(sc, data, {});
    ok &= run.tracks.size() == 3 && run.eval.id_switches == 0 && run.eval.hota >= kEndToEndMinHota &&
          run.seconds < kEndToEndBudget;
    detail += fmt("%sseed %d: %zu tracks, IDSW %d, HOTA %.3f, %.1f s", detail.empty() ? "" : "; ",
                  static_cast<int>(seed), run.tracks.size(), run.eval.id_switches, run.eval.hota, run.seconds);
  }
  return {ok, detail};
}

// Results of the ablation variants on every non-throughput preset and seed.
struct SuiteResults {
  std::map<std::string, std::vector<double>> hota;  // variant -> per scenario
  std::map<std::string, double> gap_error;          // variant -> sinusoid_gap error, summed per seed
  std::vector<std::pair<double, std::vector<double>>> gap_bridging;  // (unfiltered, prefiltered)
  std::vector<std::pair<double, double>> sot;                        // (full, no medianflow) per seed
};

// Mean centre error over the object's detection gap, taking each frame's
// nearest track box; a frame no track covers counts as the frame diagonal.
double gap_error(const synth::Scenario& sc, const std::vector<Track>& tracks) {
  const auto& gap = sc.objects.at(0).gaps.at(0);
  const double diagonal = std::hypot(sc.dims.width, sc.dims.height);
  double total = 0.0;
  for (int f = gap.first; f <= gap.last; ++f) {
    const Point truth = center(*synth::object_box(sc, 0, f));
    double best = diagonal;
    for (const Track& t : tracks) {
      if (t.covers(f)) best = std::min(best, distance(center(t.at(f).box), truth));
    }
    total += best;
  }
  return total / (gap.last - gap.first + 1);
}

const SuiteResults& suite() {
  static const SuiteResults results = [] {
    SuiteResults out;
    const RctParams full;
    RctParams no_mf = full;
    no_mf.use_medianflow = false;
    RctParams no_join = full;
    no_join.use_joining = false;
    RctParams no_off = full;
    no_off.trim_mode = TrimMode::NoOffscreen;
    const std::vector<std::pair<std::string, RctParams>> variants = {
        {"full", full}, {"no_medianflow", no_mf}, {"no_joining", no_join}, {"no_offscreen_trim", no_off}};
    for (const std::string& name : synth::preset_names()) {
      if (name == "throughput") continue;
      for (std::uint64_t seed : kSeeds) {
        const auto sc = synth::preset(name, seed);
        const auto data = synth::generate(sc);
        std::map<std::string, Run> runs;
        for (const auto& [variant, params] : variants) {
          runs[variant] = track(sc, data, params);
          out.hota[variant].push_back(runs[variant].eval.hota);
        }
        if (name == "gap_bridging") {
          std::vector<double> filtered;
          for (double h : kPrefilters) filtered.push_back(track(sc, data, full, h).eval.hota);
          out.gap_bridging.emplace_back(runs["full"].eval.hota, filtered);
        }
        if (name == "sinusoid_gap") {
          out.sot.emplace_back(gap_error(sc, runs["full"].tracks), gap_error(sc, runs["no_medianflow"].tracks));
        }
      }
    }
    return out;
  }();
  return results;
}

Outcome prefilter_sweep() {
  bool ok = true;
  std::string detail;
  for (const auto& [unfiltered, filtered] : suite().gap_bridging) {
    detail += detail.empty() ? "" : "; ";
    detail += fmt("h=0 %.3f vs", unfiltered);
    for (std::size_t i = 0; i < filtered.size(); ++i) {
      ok &= unfiltered > filtered[i];
      detail += fmt(" h=%.1f %.3f", kPrefilters[i], filtered[i]);
    }
  }
  return {ok, detail};
}

Outcome ablation() {
  std::map<std::string, double> mean;
  for (const auto& [variant, values] : suite().hota) {
    double s = 0.0;
    for (double v : values) s += v;
    mean[variant] = s / static_cast<double>(values.size());
  }
  const double full = mean["full"];
  bool ok = true;
  std::string detail = fmt("mean HOTA over %zu scenarios: full %.4f", suite().hota.at("full").size(), full);
  for (const char* v : {"no_medianflow", "no_joining", "no_offscreen_trim"}) {
    ok &= mean[v] < full;
    detail += fmt(", %s %.4f", v, mean[v]);
  }
  ok &= mean["no_offscreen_trim"] < mean["no_medianflow"] && mean["no_offscreen_trim"] < mean["no_joining"];
  return {ok, detail};
}

Outcome sot_efficacy() {
  bool ok = true;
  std::string detail;
  for (const auto& [full, kalman_only] : suite().sot) {
    ok &= kSotErrorRatio * full <= kalman_only;
    detail += fmt("%sgap error %.2f px vs %.2f px without MedianFlow", detail.empty() ? "" : "; ", full,
                  kalman_only);
  }
  return {ok, detail};
}

Outcome throughput() {
  const auto sc = synth::preset("throughput", 1);
  const auto data = synth::generate(sc);
  const Run run = track(sc, data, {});
  const double per_frame = static_cast<double>(data.detections.size()) / sc.num_frames;
  return {run.seconds < kThroughputBudget,
          fmt("%d frames %dx%d, %.1f detections/frame, %zu tracks, HOTA %.3f, %.1f s (budget %.0f s)",
              sc.num_frames, sc.dims.width, sc.dims.height, per_frame, run.tracks.size(), run.eval.hota,
              run.seconds, kThroughputBudget)};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome timeout_contract() {
  const fs::path dir = fs::temp_directory_path() / fmt("rct_acceptance_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  const std::string bin = RCT_BINARY;
  const fs::path out = dir / "tracks.txt";
  const fs::path manifest = dir / "manifest.json";
  Outcome o;
  if (shell(bin + " synth --preset throughput --no-frames --out '" + (dir / "video").string() + "'") != 0) {
    o.detail = "could not generate the input video";
  } else {
    const int code = shell(bin + " track --detections '" + (dir / "video/detections.txt").string() +
                           "' --size 640x480 --timeout 0.001 --output '" + out.string() + "' --manifest '" +
                           manifest.string() + "'");
    std::string status = "(none)";
    if (fs::exists(manifest)) status = nlohmann::json::parse(io::read_file(manifest))["status"];
    const bool track_file = fs::exists(out);
    o.pass = code == 3 && status == "TIMEOUT" && !track_file;
    o.detail = fmt("exit %d, manifest status %s, track file %s", code, status.c_str(),
                   track_file ? "present" : "absent");
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"kalman_oracle", kalman_oracle},
      {"assignment_oracle", assignment_oracle},
      {"diou_analytic", diou_suite},
      {"metric_closure", metric_closure},
      {"end_to_end_three_objects", end_to_end},
      {"prefilter_sweep_shape", prefilter_sweep},
      {"ablation_direction", ablation},
      {"sot_fallback_efficacy", sot_efficacy},
      {"throughput", throughput},
      {"timeout_contract", timeout_contract},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "draw.hpp"
#include "json.hpp"
#include "rct/io.hpp"
#include "rct/metrics.hpp"
#include "rct/synth.hpp"
#include "rct/tracker.hpp"

namespace rct::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::ordered_json;

// How long past its deadline a video may run before the watchdog kills the
// process. The cooperative check normally fires well before this.
constexpr std::chrono::seconds kWatchdogGrace{2};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string frame_file_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", frame);
  return buf;
}

// Runs `fn`, turning any parse or validation failure into an InputError.
template <class Fn>
auto input(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

FrameDims parse_size(const std::string& text) {
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw InputError("--size must look like 640x480, got " + text);
  const FrameDims dims{static_cast<int>(input("--size", [&] { return io::parse_int(text.substr(0, x)); })),
                       static_cast<int>(input("--size", [&] { return io::parse_int(text.substr(x + 1)); }))};
  if (!dims.valid()) throw InputError("--size must be positive, got " + text);
  return dims;
}

RctParams load_params(const TrackerInputs& in) {
  RctParams params;
  if (in.config) {
    params = input("config " + in.config->string(), [&] { return io::read_config(*in.config); });
  }
  for (const std::string& kv : in.overrides) {
    input("--set " + kv, [&] {
      io::apply_override(params, kv);
      return 0;
    });
  }
  return params;
}

struct Video {
  std::string name;
  fs::path detections_path;
  std::optional<fs::path> frames_path;
  fs::path output;
  std::unique_ptr<io::DirectoryFrameSource> frames;
  std::vector<Detection> detections;
  FrameDims dims;
  int num_frames = 0;

  DetectionPool pool() const { return DetectionPool(detections, num_frames); }
};

void load_video(Video& v, const std::optional<std::string>& size) {
  v.detections = input(v.detections_path.string(), [&] { return io::read_detections(v.detections_path); });
  std::optional<FrameDims> given;
  if (size) given = parse_size(*size);
  if (v.frames_path) {
    v.frames = input(v.frames_path->string(), [&] {
      return std::make_unique<io::DirectoryFrameSource>(*v.frames_path);
    });
    v.dims = v.frames->dims();
    v.num_frames = v.frames->count();
    if (given && *given != v.dims) {
      throw InputError("--size " + *size + " does not match the frames in " + v.frames_path->string());
    }
  } else {
    if (!given) throw InputError(v.name + ": --size is required when no frames are given");
    v.dims = *given;
  }
  // Validates frame numbers against the video length.
  input(v.detections_path.string(), [&] {
    const DetectionPool check(v.detections, v.num_frames);
    v.num_frames = check.num_frames();
    return 0;
  });
}

std::vector<Video> collect_videos(const TrackOptions& opts) {
  std::vector<Video> videos;
  if (opts.batch) {
    if (!fs::is_directory(*opts.batch)) throw InputError("not a directory: " + opts.batch->string());
    std::set<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(*opts.batch)) {
      if (entry.is_directory() && fs::exists(entry.path() / "detections.txt")) dirs.insert(entry.path());
    }
    if (dirs.empty()) throw InputError("no video directories with detections.txt in " + opts.batch->string());
    for (const fs::path& dir : dirs) {
      Video v;
      v.name = dir.filename().string();
      v.detections_path = dir / "detections.txt";
      if (fs::is_directory(dir / "frames")) v.frames_path = dir / "frames";
      v.output = opts.output / (v.name + ".txt");
      videos.push_back(std::move(v));
    }
  } else {
    if (!opts.detections) throw InputError("--detections or --batch is required");
    Video v;
    v.name = opts.detections->stem().string();
    v.detections_path = *opts.detections;
    v.frames_path = opts.frames;
    v.output = opts.output;
    videos.push_back(std::move(v));
  }
  return videos;
}

struct VideoRecord {
  std::string status = "PENDING";  // PENDING, RUNNING, OK, TIMEOUT, ERROR, ABORTED
  std::optional<Clock::time_point> started;
  double seconds = 0.0;
  std::size_t tracks = 0;
  std::vector<std::string> warnings;
  std::string error;
};

// Shared between the workers and the watchdog.
class TrackRun {
 public:
  TrackRun(const TrackOptions& opts, const RctParams& params, std::vector<Video>& videos,
           fs::path manifest)
      : opts_(opts), params_(params), videos_(videos), records_(videos.size()),
        manifest_(std::move(manifest)), start_(Clock::now()) {}

  int execute() {
    std::thread watchdog([this] { watch(); });
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < videos_.size(); i = next++) run_one(i);
    };
    const int jobs = std::clamp(opts_.jobs, 1, static_cast<int>(videos_.size()));
    std::vector<std::thread> pool;
    for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    {
      std::lock_guard lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    watchdog.join();

    std::lock_guard lock(mu_);
    int code = kOk;
    for (const VideoRecord& r : records_) {
      if (r.status == "ERROR") code = kFailure;
    }
    for (const VideoRecord& r : records_) {
      if (r.status == "TIMEOUT") code = kTimeout;
    }
    write_manifest(code);
    return code;
  }

 private:
  void run_one(std::size_t i) {
    const Video& v = videos_[i];
    const Clock::time_point started = Clock::now();
    {
      std::lock_guard lock(mu_);
      records_[i].status = "RUNNING";
      records_[i].started = started;
    }
    VideoRecord out;
    try {
      const auto deadline = Deadline::after(std::chrono::duration<double>(opts_.timeout_seconds));
      RctResult result = run_rct(v.pool(), v.frames.get(), params_, v.dims, deadline);
      io::write_tracks(v.output, result.tracks);
      out.status = "OK";
      out.tracks = result.tracks.size();
      out.warnings = std::move(result.warnings);
    } catch (const Cancelled&) {
      out.status = "TIMEOUT";
      std::error_code ec;
      fs::remove(v.output, ec);  // never leave a stale result behind
    } catch (const std::exception& e) {
      out.status = "ERROR";
      out.error = e.what();
    }
    out.started = started;
    out.seconds = seconds_since(started);
    std::lock_guard lock(mu_);
    records_[i] = std::move(out);
    std::cerr << v.name << ": " << records_[i].status;
    if (records_[i].status == "OK") std::cerr << ", " << records_[i].tracks << " tracks";
    if (!records_[i].error.empty()) std::cerr << " (" << records_[i].error << ")";
    std::cerr << ", " << fixed(records_[i].seconds, 2) << " s\n";
  }

  void watch() {
    const auto limit = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(opts_.timeout_seconds) + kWatchdogGrace);
    std::unique_lock lock(mu_);
    while (!done_) {
      cv_.wait_for(lock, std::chrono::milliseconds(50));
      if (done_) break;
      const auto now = Clock::now();
      bool overdue = false;
      for (const VideoRecord& r : records_) {
        overdue |= r.status == "RUNNING" && r.started && now - *r.started > limit;
      }
      if (!overdue) continue;
      for (std::size_t i = 0; i < records_.size(); ++i) {
        VideoRecord& r = records_[i];
        if (r.status != "RUNNING") continue;
        r.status = r.started && now - *r.started > limit ? "TIMEOUT" : "ABORTED";
        r.seconds = seconds_since(*r.started);
        std::error_code ec;
        fs::remove(videos_[i].output, ec);
      }
      write_manifest(kTimeout);
      std::cerr << "timeout: watchdog stopped the run\n";
      std::_Exit(kTimeout);
    }
  }

  // Caller holds mu_.
  void write_manifest(int code) const {
    ordered_json m;
    m["command"] = "track";
    m["status"] = code == kOk ? "OK" : code == kTimeout ? "TIMEOUT" : "ERROR";
    m["exit_code"] = code;
    ordered_json in;
    if (opts_.batch) in["batch"] = opts_.batch->string();
    if (opts_.detections) in["detections"] = opts_.detections->string();
    if (opts_.frames) in["frames"] = opts_.frames->string();
    if (opts_.tracker.config) in["config"] = opts_.tracker.config->string();
    in["overrides"] = opts_.tracker.overrides;
    if (opts_.tracker.size) in["size"] = *opts_.tracker.size;
    in["output"] = opts_.output.string();
    m["inputs"] = in;
    m["timeout_seconds"] = opts_.timeout_seconds;
    m["jobs"] = opts_.jobs;
    const std::string config = io::format_config(params_);
    ordered_json params = ordered_json::object();
    for (const io::KeyValue& kv : io::parse_key_values(config)) params[kv.key] = kv.value;
    m["parameters"] = params;
    m["config_text"] = config;
    m["wall_seconds"] = seconds_since(start_);
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < videos_.size(); ++i) {
      const Video& v = videos_[i];
      const VideoRecord& r = records_[i];
      ordered_json e;
      e["name"] = v.name;
      e["detections"] = v.detections_path.string();
      e["frames"] = v.frames_path ? ordered_json(v.frames_path->string()) : ordered_json(nullptr);
      e["output"] = v.output.string();
      e["num_frames"] = v.num_frames;
      e["status"] = r.status;
      e["seconds"] = r.seconds;
      if (r.status == "OK") e["tracks"] = r.tracks;
      e["warnings"] = r.warnings;
      if (!r.error.empty()) e["error"] = r.error;
      list.push_back(std::move(e));
    }
    m["videos"] = list;
    try {
      io::write_file_atomic(manifest_, m.dump(2) + "\n");
    } catch (const std::exception& e) {
      std::cerr << "cannot write manifest: " << e.what() << "\n";
    }
  }

  const TrackOptions& opts_;
  const RctParams& params_;
  std::vector<Video>& videos_;
  std::vector<VideoRecord> records_;
  fs::path manifest_;
  Clock::time_point start_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
};

std::string eval_table(const metrics::EvalReport& r, const metrics::HotaResult& h) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) {
    out += k + std::string(12 - k.size(), ' ') + v + "\n";
  };
  line("HOTA", fixed(r.hota));
  line("DetA", fixed(h.det_a));
  line("AssA", fixed(h.ass_a));
  line("MOTA", fixed(r.mota));
  line("IDSW", std::to_string(r.id_switches));
  line("FP", std::to_string(r.false_positives));
  line("FN", std::to_string(r.misses));
  line("Precision", fixed(r.precision));
  line("Recall", fixed(r.recall));
  return out;
}

}  // namespace

int run_track(const TrackOptions& opts) {
  if (!(opts.timeout_seconds > 0)) throw InputError("--timeout must be positive");
  const RctParams params = load_params(opts.tracker);
  std::vector<Video> videos = collect_videos(opts);
  for (Video& v : videos) load_video(v, opts.tracker.size);
  if (opts.batch) {
    std::error_code ec;
    fs::create_directories(opts.output, ec);
    if (!fs::is_directory(opts.output)) throw InputError("cannot create " + opts.output.string());
  }
  fs::path manifest = opts.manifest.value_or(
      opts.batch ? opts.output / "manifest.json" : fs::path(opts.output.string() + ".manifest.json"));
  TrackRun run(opts, params, videos, std::move(manifest));
  return run.execute();
}

int run_eval(const EvalOptions& opts) {
  const TrackSet gt = input(opts.gt.string(), [&] { return io::read_mot(opts.gt); });
  const TrackSet pred = input(opts.pred.string(), [&] { return io::read_mot(opts.pred); });
  const metrics::EvalReport r = metrics::evaluate(gt, pred);
  const metrics::HotaResult h = metrics::hota(gt, pred);
  const std::string table = eval_table(r, h);
  std::cout << table;
  if (opts.report) {
    const std::string csv = "hota,mota,idsw,fp,fn,precision,recall\n" + fixed(r.hota) + "," +
                            fixed(r.mota) + "," + std::to_string(r.id_switches) + "," +
                            std::to_string(r.false_positives) + "," + std::to_string(r.misses) +
                            "," + fixed(r.precision) + "," + fixed(r.recall) + "\n";
    io::write_file_atomic(*opts.report, csv);
    fs::path text = *opts.report;
    text.replace_extension(".txt");
    if (text != *opts.report) io::write_file_atomic(text, table);
  }
  return kOk;
}

int run_sweep(const SweepOptions& opts) {
  if (!(opts.timeout_seconds > 0)) throw InputError("--timeout must be positive");
  const RctParams params = load_params(opts.tracker);
  Video v;
  v.name = opts.detections.stem().string();
  v.detections_path = opts.detections;
  v.frames_path = opts.frames;
  load_video(v, opts.tracker.size);
  const TrackSet gt = input(opts.gt.string(), [&] { return io::read_mot(opts.gt); });

  std::set<double> thresholds(opts.thresholds.begin(), opts.thresholds.end());
  thresholds.insert(0.0);
  for (double h : thresholds) {
    if (!(h >= 0.0 && h <= 1.0)) throw InputError("thresholds must lie in [0, 1]");
  }

  std::string csv = "threshold,hota,mota,idsw,tracks,seconds,status\n";
  int code = kOk;
  for (double h : thresholds) {
    DetectionPool pool = v.pool();
    if (h > 0.0) pool = pool.prefiltered(h);
    const Clock::time_point start = Clock::now();
    std::string row = io::format_double(h) + ",";
    try {
      const auto deadline = Deadline::after(std::chrono::duration<double>(opts.timeout_seconds));
      const RctResult result = run_rct(std::move(pool), v.frames.get(), params, v.dims, deadline);
      const double secs = seconds_since(start);
      // Through the track file format, so the numbers match track + eval.
      const TrackSet pred = io::parse_mot(io::format_mot(to_track_set(result.tracks)));
      const metrics::EvalReport r = metrics::evaluate(gt, pred);
      row += fixed(r.hota) + "," + fixed(r.mota) + "," + std::to_string(r.id_switches) + "," +
             std::to_string(result.tracks.size()) + "," + fixed(secs, 3) + ",OK";
    } catch (const Cancelled&) {
      row += ",,,," + fixed(seconds_since(start), 3) + ",TIMEOUT";
      code = kTimeout;
    }
    std::cerr << "threshold " << io::format_double(h) << " done\n";
    csv += row + "\n";
  }
  if (opts.output) {
    io::write_file_atomic(*opts.output, csv);
  } else {
    std::cout << csv;
  }
  return code;
}

int run_synth(const SynthOptions& opts) {
  if (opts.preset.has_value() == opts.scenario.has_value()) {
    throw InputError("give exactly one of --preset and --scenario");
  }
  synth::Scenario sc;
  if (opts.preset) {
    sc = input("--preset", [&] { return synth::preset(*opts.preset, opts.seed.value_or(1)); });
  } else {
    sc = input(opts.scenario->string(), [&] {
      return synth::parse_scenario(io::read_file(*opts.scenario), opts.scenario->string());
    });
    if (opts.seed) sc.seed = *opts.seed;
  }
  const synth::Synthetic data = input("scenario", [&] { return synth::generate(sc); });

  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (!fs::is_directory(opts.out)) throw InputError("cannot create " + opts.out.string());
  io::write_file_atomic(opts.out / "scenario.txt", synth::format_scenario(sc));
  io::write_file_atomic(opts.out / "detections.txt", io::format_detections(data.detections));
  io::write_mot(opts.out / "gt.txt", data.ground_truth);
  if (!opts.no_frames) {
    const fs::path dir = opts.out / "frames";
    fs::create_directories(dir);
    for (int f = 1; f <= data.frames->count(); ++f) {
      io::write_png(dir / frame_file_name(f), to_rgb(data.frames->load(f)));
    }
  }
  std::cerr << "wrote " << data.detections.size() << " detections, " << data.ground_truth.size()
            << " ground-truth boxes over " << sc.num_frames << " frames to " << opts.out.string()
            << "\n";
  return kOk;
}

int run_viz(const VizOptions& opts) {
  const auto frames = input(opts.frames.string(), [&] {
    return std::make_unique<io::DirectoryFrameSource>(opts.frames);
  });
  const TrackSet rows = input(opts.tracks.string(), [&] { return io::read_mot(opts.tracks); });
  for (const MotRow& r : rows) {
    if (r.frame < 1 || r.frame > frames->count()) {
      throw InputError("track " + std::to_string(r.id) + " has frame " + std::to_string(r.frame) +
                       " outside the video (1.." + std::to_string(frames->count()) + ")");
    }
  }
  const auto by_frame = rows_by_frame(rows);
  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (!fs::is_directory(opts.out)) throw InputError("cannot create " + opts.out.string());
  constexpr int kScale = 2;
  constexpr int kLabelHeight = 5 * kScale + 2 * kScale;
  for (int f = 1; f <= frames->count(); ++f) {
    RgbImage img = input(frames->file(f).string(), [&] { return io::read_rgb(frames->file(f)); });
    if (const auto it = by_frame.find(f); it != by_frame.end()) {
      for (const MotRow& r : it->second) {
        const Color c = track_color(r.id);
        draw_box(img, r.box, c);
        const int x = static_cast<int>(std::lround(r.box.x));
        int y = static_cast<int>(std::lround(r.box.y)) - kLabelHeight;
        if (y < 0) y = static_cast<int>(std::lround(r.box.y));
        draw_label(img, x, y, std::to_string(r.id), c, kScale);
      }
    }
    io::write_png(opts.out / frame_file_name(f), img);
  }
  return kOk;
}

}  // namespace rct::cli

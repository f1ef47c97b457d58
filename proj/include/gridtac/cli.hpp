#pragma once

// Command implementations behind the gridtac tool: calibrate, detect,
// simulate and bench. Each returns its result and writes its files; the
// tool front end only parses arguments and prints.

#include "gridtac/config.hpp"
#include "gridtac/contact.hpp"
#include "gridtac/errors.hpp"
#include "gridtac/fusion.hpp"
#include "gridtac/image_io.hpp"
#include "gridtac/proximity.hpp"
#include "gridtac/scenario.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace gridtac {

namespace fs = std::filesystem;

/// PNG files directly inside `dir`, in lexicographic order of file name.
inline std::vector<fs::path> list_frames(const fs::path& dir)
{
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return out;
}

/// Loads frames and checks that every one matches the first frame's size.
inline std::vector<Frame> load_frames(const std::vector<fs::path>& paths)
{
  std::vector<Frame> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) {
    frames.push_back(io::load_frame(p));
    if (!frames.back().same_shape(frames.front())) {
      throw InvalidInput(p.filename().string() + " is " + std::to_string(frames.back().width()) + "x" +
                         std::to_string(frames.back().height()) + ", expected " +
                         std::to_string(frames.front().width()) + "x" + std::to_string(frames.front().height()));
    }
  }
  return frames;
}

inline void ensure_dir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
}

inline std::ofstream open_output(const fs::path& path)
{
  std::ofstream os(path);
  if (!os) {
    throw IoError("cannot write " + path.string());
  }
  return os;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateResult
{
  std::size_t frames_used = 0;
  std::array<std::size_t, 3> grid_pixels{};
};

/// Builds references from the first n_frames PNGs of `frames_dir`.
inline CalibrateResult cmd_calibrate(const fs::path& frames_dir, const fs::path& refs_dir, const RunConfig& cfg)
{
  cfg.validate();
  auto paths = list_frames(frames_dir);
  const auto n = static_cast<std::size_t>(cfg.pipeline.fusion.n_frames);
  if (paths.size() < n) {
    throw InvalidInput("expected " + std::to_string(n) + " frames in " + frames_dir.string() + ", found " +
                       std::to_string(paths.size()));
  }
  paths.resize(n);
  const auto frames = load_frames(paths);
  const auto refs = build_references(frames, cfg.pipeline.fusion);
  ensure_dir(refs_dir);
  save_references(refs_dir, refs);
  CalibrateResult r;
  r.frames_used = n;
  for (int c = 0; c < 3; ++c) {
    r.grid_pixels[c] = refs.grid_ref[c].count();
  }
  return r;
}

// ---------------------------------------------------------------------------
// detect

/// Frame-by-frame detection without a gripper. Holding is inferred from the
/// contact stream: a frame is held when the previous non-noise frame was
/// Touched, and slip is tested over the run of held frames.
class Detector
{
public:
  Detector(const ReferenceSet& refs, const PipelineConfig& cfg) : refs_(refs), cfg_(cfg)
  {
    cfg_.contact.tau_b = refs.params.tau_b;
    cfg_.contact.blur_sigma = refs.params.blur_sigma;
  }

  struct Row
  {
    FusedState fused;
    double score = 0.0;
    bool slip = false;
  };

  Row push(const Frame& f, std::size_t index)
  {
    Row row;
    const auto prox = classify_proximity(f, refs_, cfg_.proximity, index);
    const auto cont = grid_similarity(f, refs_, cfg_.contact, index);
    row.fused = fuse(prox, cont);
    row.score = proximity_score(prox, cfg_.proximity);
    if (row.fused.verdict != Verdict::NoiseSuppressed) {
      const bool holding = !history_.empty() && history_.back().state == ContactState::Touched;
      if (!holding) {
        history_.clear();
      }
      history_.push_back(cont);
      row.slip = detect_slip(history_, cfg_.contact, holding);
    }
    return row;
  }

private:
  const ReferenceSet& refs_;
  PipelineConfig cfg_;
  std::vector<ContactRecord> history_;
};

/// Runs detection over every PNG in `frames_dir` and writes CSV rows to `os`.
/// Returns the number of frames processed.
inline std::size_t cmd_detect(const fs::path& frames_dir, const fs::path& refs_dir, const RunConfig& cfg,
                              std::ostream& os)
{
  cfg.validate();
  const auto refs = load_references(refs_dir);
  const auto paths = list_frames(frames_dir);
  Detector det(refs, cfg.pipeline);
  os << kDetectionHeader << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Frame f = io::load_frame(paths[i]);
    if (f.width() != refs.width() || f.height() != refs.height()) {
      throw InvalidInput(paths[i].filename().string() + " does not match the reference size");
    }
    const auto row = det.push(f, i);
    os << detection_row(row.fused, row.score, row.slip) << '\n';
  }
  return paths.size();
}

// ---------------------------------------------------------------------------
// simulate

inline std::string frame_name(std::size_t index)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.png", index);
  return buf;
}

/// Renders a script into out_dir/frames. In closed loop it also writes
/// refs/, detections.csv, timeline.csv and summary.txt.
inline ScenarioReport cmd_simulate(const fs::path& script_path, const fs::path& out_dir, const RunConfig& cfg,
                                   bool closed_loop)
{
  cfg.validate();
  const auto script = load_script(script_path);
  const fs::path frames_dir = out_dir / "frames";
  ensure_dir(frames_dir);

  RunOptions opt;
  opt.closed_loop = closed_loop;
  opt.on_frame = [&](std::size_t t, const Frame& f) { io::save_frame(frames_dir / frame_name(t), f); };
  auto report = run_scenario(script, cfg.pipeline, opt);

  if (closed_loop) {
    if (report.references) {
      ensure_dir(out_dir / "refs");
      save_references(out_dir / "refs", *report.references);
    }
    auto det = open_output(out_dir / "detections.csv");
    write_detections(det, report);
    auto tl = open_output(out_dir / "timeline.csv");
    write_timeline(tl, report);
    auto sum = open_output(out_dir / "summary.txt");
    write_summary(sum, report);
  }
  return report;
}

// ---------------------------------------------------------------------------
// bench

struct StageTiming
{
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

struct BenchResult
{
  std::size_t frames = 0;
  int iterations = 0;
  double seconds = 0.0;
  double fps = 0.0;
  StageTiming proximity;
  StageTiming contact;
  StageTiming fuse;
  StageTiming total;
};

inline StageTiming percentiles(std::vector<double> ms)
{
  StageTiming t;
  if (ms.empty()) {
    return t;
  }
  std::sort(ms.begin(), ms.end());
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(ms.size() - 1) + 0.5);
    return ms[std::min(k, ms.size() - 1)];
  };
  t.p50_ms = at(0.50);
  t.p95_ms = at(0.95);
  return t;
}

/// Times the detection stages over preloaded frames. Image decoding is not
/// part of the measurement.
inline BenchResult bench_frames(std::span<const Frame> frames, const ReferenceSet& refs, const PipelineConfig& cfg,
                                int iterations)
{
  if (frames.empty()) {
    throw InvalidInput("bench: no frames to process");
  }
  if (iterations < 1) {
    throw InvalidInput("bench: iterations must be >= 1");
  }
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };

  ContactParams cp = cfg.contact;
  cp.tau_b = refs.params.tau_b;
  cp.blur_sigma = refs.params.blur_sigma;

  std::vector<double> tp, tc, tf, tt;
  volatile double sink = 0.0;
  const auto start = clock::now();
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto t0 = clock::now();
      const auto prox = classify_proximity(frames[i], refs, cfg.proximity, i);
      const auto t1 = clock::now();
      const auto cont = grid_similarity(frames[i], refs, cp, i);
      const auto t2 = clock::now();
      const auto fused = fuse(prox, cont);
      sink = sink + proximity_score(prox, cfg.proximity) + static_cast<double>(fused.verdict);
      const auto t3 = clock::now();
      tp.push_back(ms(t1 - t0));
      tc.push_back(ms(t2 - t1));
      tf.push_back(ms(t3 - t2));
      tt.push_back(ms(t3 - t0));
    }
  }
  const double seconds = std::chrono::duration<double>(clock::now() - start).count();

  BenchResult r;
  r.frames = frames.size();
  r.iterations = iterations;
  r.seconds = seconds;
  r.fps = seconds > 0.0 ? static_cast<double>(frames.size() * static_cast<std::size_t>(iterations)) / seconds : 0.0;
  r.proximity = percentiles(std::move(tp));
  r.contact = percentiles(std::move(tc));
  r.fuse = percentiles(std::move(tf));
  r.total = percentiles(std::move(tt));
  return r;
}

inline BenchResult cmd_bench(const fs::path& frames_dir, const fs::path& refs_dir, const RunConfig& cfg,
                             int iterations)
{
  cfg.validate();
  const auto refs = load_references(refs_dir);
  const auto paths = list_frames(frames_dir);
  if (paths.empty()) {
    throw InvalidInput("bench: no PNG frames in " + frames_dir.string());
  }
  const auto frames = load_frames(paths);
  if (frames.front().width() != refs.width() || frames.front().height() != refs.height()) {
    throw InvalidInput("bench: frames do not match the reference size");
  }
  return bench_frames(frames, refs, cfg.pipeline, iterations);
}

inline void write_bench(std::ostream& os, const BenchResult& r)
{
  char buf[128];
  os << "frames=" << r.frames << '\n' << "iterations=" << r.iterations << '\n';
  std::snprintf(buf, sizeof buf, "seconds=%.3f\nfps=%.1f\n", r.seconds, r.fps);
  os << buf;
  const std::pair<const char*, const StageTiming*> stages[] = {
    {"proximity", &r.proximity}, {"contact", &r.contact}, {"fuse", &r.fuse}, {"total", &r.total}};
  for (const auto& [name, t] : stages) {
    std::snprintf(buf, sizeof buf, "%s.p50_ms=%.3f\n%s.p95_ms=%.3f\n", name, t->p50_ms, name, t->p95_ms);
    os << buf;
  }
}

} // namespace gridtac

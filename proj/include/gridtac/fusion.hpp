#pragma once

// Temporal fusion: builds M background references and one grid reference
// from an N-frame initialization sequence captured with nothing in view.

#include "gridtac/errors.hpp"
#include "gridtac/frames.hpp"
#include "gridtac/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gridtac {

struct FusionParams
{
  int n_frames = 30;
  int m_backgrounds = 3;
  std::uint8_t tau_b = 35;
  double blur_sigma = 1.0;

  void validate() const
  {
    if (n_frames < 1) {
      throw ConfigError("fusion.n_frames must be >= 1");
    }
    if (m_backgrounds < 1 || m_backgrounds > n_frames) {
      throw ConfigError("fusion.m_backgrounds must be in [1, n_frames]");
    }
    if (n_frames % m_backgrounds != 0) {
      throw ConfigError("fusion.n_frames must be divisible by fusion.m_backgrounds");
    }
    if (!(blur_sigma > 0.0)) {
      throw ConfigError("fusion.blur_sigma must be > 0");
    }
  }

  int segment_length() const { return n_frames / m_backgrounds; }
};

struct ReferenceSet
{
  FusionParams params;
  std::vector<Frame> backgrounds;           // B_1..B_M in chronological order
  std::array<RealPlane, 3> grid_prob;       // per channel mean of binary grid masks
  std::array<BinaryMask, 3> grid_ref;       // grid_prob >= 0.5
  std::vector<Channels> background_planes;  // backgrounds split per channel

  int width() const { return backgrounds.empty() ? 0 : backgrounds.front().width(); }
  int height() const { return backgrounds.empty() ? 0 : backgrounds.front().height(); }

  /// Recompute derived per-channel background planes and check invariants.
  void finalize()
  {
    if (backgrounds.size() != static_cast<std::size_t>(params.m_backgrounds)) {
      throw InvalidInput("reference set must hold exactly m_backgrounds backgrounds");
    }
    for (const auto& b : backgrounds) {
      if (!b.same_shape(backgrounds.front())) {
        throw InvalidInput("reference backgrounds differ in size");
      }
    }
    for (int c = 0; c < 3; ++c) {
      check_shape(grid_prob[c]);
      check_shape(grid_ref[c]);
    }
    background_planes.clear();
    for (const auto& b : backgrounds) {
      background_planes.push_back(split_channels(b));
    }
  }

private:
  template <class P>
  void check_shape(const P& p) const
  {
    if (p.width() != width() || p.height() != height()) {
      throw InvalidInput("grid reference size differs from backgrounds");
    }
  }
};

/// Temporal fusion over a chronological initialization sequence.
inline ReferenceSet build_references(std::span<const Frame> frames, const FusionParams& params)
{
  params.validate();
  if (frames.size() != static_cast<std::size_t>(params.n_frames)) {
    throw InvalidInput("build_references: expected " + std::to_string(params.n_frames) + " frames, got " +
                       std::to_string(frames.size()));
  }
  const Frame& first = frames.front();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!frames[i].same_shape(first)) {
      throw InvalidInput("build_references: frame " + std::to_string(i) + " has mismatched dimensions");
    }
  }
  const int w = first.width();
  const int h = first.height();
  const std::size_t samples = first.data().size();

  ReferenceSet refs;
  refs.params = params;

  // Backgrounds: rounded mean of each consecutive segment of N/M frames.
  const int seg = params.segment_length();
  std::vector<std::uint32_t> sum(samples);
  for (int j = 0; j < params.m_backgrounds; ++j) {
    std::fill(sum.begin(), sum.end(), 0u);
    for (int i = j * seg; i < (j + 1) * seg; ++i) {
      auto src = frames[static_cast<std::size_t>(i)].data();
      for (std::size_t k = 0; k < samples; ++k) {
        sum[k] += src[k];
      }
    }
    std::vector<std::uint8_t> mean(samples);
    const std::uint32_t n = static_cast<std::uint32_t>(seg);
    for (std::size_t k = 0; k < samples; ++k) {
      mean[k] = static_cast<std::uint8_t>((2 * sum[k] + n) / (2 * n));
    }
    refs.backgrounds.emplace_back(w, h, std::move(mean));
  }

  // Grid: per channel, fraction of frames whose blurred channel passes tau_b.
  const auto kernel = GaussianKernel::make(params.blur_sigma);
  std::array<std::vector<std::uint32_t>, 3> hits;
  for (auto& v : hits) {
    v.assign(static_cast<std::size_t>(w) * h, 0u);
  }
  for (const auto& f : frames) {
    const auto ch = split_channels(f);
    for (int c = 0; c < 3; ++c) {
      const auto mask = binarize(gaussian_blur(ch[c], kernel), params.tau_b);
      auto m = mask.data();
      for (std::size_t k = 0; k < m.size(); ++k) {
        hits[c][k] += m[k];
      }
    }
  }
  const auto nf = static_cast<std::uint32_t>(params.n_frames);
  for (int c = 0; c < 3; ++c) {
    RealPlane prob(w, h);
    BinaryMask ref(w, h);
    auto p = prob.data();
    auto r = ref.data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = static_cast<double>(hits[c][k]) / static_cast<double>(nf);
      r[k] = 2 * hits[c][k] >= nf ? 1 : 0;
    }
    refs.grid_prob[c] = std::move(prob);
    refs.grid_ref[c] = std::move(ref);
  }
  refs.finalize();
  return refs;
}

// ---------------------------------------------------------------------------
// On-disk layout:
//   background_<j>.png   j = 1..M
//   grid_prob_<c>.pgm    16-bit, value = round(p * 65535)
//   grid_ref_<c>.png     8-bit, 255 = grid
//   manifest.txt         key=value

namespace fusion_detail {

constexpr const char* kChannelNames[3] = {"r", "g", "b"};

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(lineno, "expected key=value in " + path.string());
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

} // namespace fusion_detail

inline void save_references(const std::filesystem::path& dir, const ReferenceSet& refs)
{
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t j = 0; j < refs.backgrounds.size(); ++j) {
    io::save_frame(dir / ("background_" + std::to_string(j + 1) + ".png"), refs.backgrounds[j]);
  }
  for (int c = 0; c < 3; ++c) {
    const auto& prob = refs.grid_prob[c];
    Plane<std::uint16_t> q(prob.width(), prob.height());
    auto src = prob.data();
    auto dst = q.data();
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = static_cast<std::uint16_t>(std::floor(src[k] * 65535.0 + 0.5));
    }
    io::save_pgm16(dir / (std::string("grid_prob_") + fusion_detail::kChannelNames[c] + ".pgm"), q);
    io::save_mask(dir / (std::string("grid_ref_") + fusion_detail::kChannelNames[c] + ".png"), refs.grid_ref[c]);
  }
  std::ofstream m(dir / "manifest.txt");
  m.precision(17);
  m << "n_frames=" << refs.params.n_frames << '\n'
    << "m_backgrounds=" << refs.params.m_backgrounds << '\n'
    << "tau_b=" << static_cast<int>(refs.params.tau_b) << '\n'
    << "blur_sigma=" << refs.params.blur_sigma << '\n'
    << "width=" << refs.width() << '\n'
    << "height=" << refs.height() << '\n';
  if (!m) {
    throw IoError("cannot write manifest in " + dir.string());
  }
}

inline ReferenceSet load_references(const std::filesystem::path& dir)
{
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IoError("reference directory not found: " + dir.string());
  }
  const auto kv = fusion_detail::read_key_values(dir / "manifest.txt");
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) {
      throw IoError("manifest missing key " + k);
    }
    return it->second;
  };
  ReferenceSet refs;
  refs.params.n_frames = std::stoi(get("n_frames"));
  refs.params.m_backgrounds = std::stoi(get("m_backgrounds"));
  const int tau = std::stoi(get("tau_b"));
  if (tau < 0 || tau > 255) {
    throw ConfigError("manifest tau_b out of range");
  }
  refs.params.tau_b = static_cast<std::uint8_t>(tau);
  refs.params.blur_sigma = std::stod(get("blur_sigma"));
  refs.params.validate();
  for (int j = 1; j <= refs.params.m_backgrounds; ++j) {
    refs.backgrounds.push_back(io::load_frame(dir / ("background_" + std::to_string(j) + ".png")));
  }
  for (int c = 0; c < 3; ++c) {
    const auto q = io::load_pgm16(dir / (std::string("grid_prob_") + fusion_detail::kChannelNames[c] + ".pgm"));
    RealPlane prob(q.width(), q.height());
    auto src = q.data();
    auto dst = prob.data();
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = static_cast<double>(src[k]) / 65535.0;
    }
    refs.grid_prob[c] = std::move(prob);
    refs.grid_ref[c] = io::load_mask(dir / (std::string("grid_ref_") + fusion_detail::kChannelNames[c] + ".png"));
  }
  refs.finalize();
  return refs;
}

} // namespace gridtac

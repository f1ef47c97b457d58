#pragma once

// Image representation and the pixel-level primitives shared by the
// detectors: channel split/merge, clamped subtraction, per-pixel minimum,
// fixed-point Gaussian blur, binarization, histogram entropy, Pearson
// correlation and windowed SSIM.
//
// Every operation is a pure function of its arguments.

#include "gridtac/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gridtac {

enum class ChannelTag { r, g, b, gray };

inline const char* to_string(ChannelTag t)
{
  switch (t) {
  case ChannelTag::r: return "r";
  case ChannelTag::g: return "g";
  case ChannelTag::b: return "b";
  case ChannelTag::gray: return "gray";
  }
  return "?";
}

/// Dense row-major W x H array.
template <class T>
class Plane
{
public:
  using value_type = T;

  Plane() = default;

  Plane(int width, int height, T fill = T{})
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(checked_area(width, height)), fill)
  {
  }

  Plane(int width, int height, std::vector<T> data)
    : width_(width), height_(height), data_(std::move(data))
  {
    if (data_.size() != static_cast<std::size_t>(checked_area(width, height))) {
      throw InvalidInput("plane data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool same_shape(const Plane& o) const noexcept
  {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Plane& a, const Plane& b)
  {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

protected:
  static long checked_area(int w, int h)
  {
    if (w < 0 || h < 0) {
      throw InvalidInput("negative plane dimensions");
    }
    return static_cast<long>(w) * h;
  }

  std::size_t index(int x, int y) const noexcept
  {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RealPlane = Plane<double>;

/// One 8-bit channel of a frame, tagged with the channel it came from.
class ChannelPlane : public Plane<std::uint8_t>
{
public:
  ChannelPlane() = default;

  ChannelPlane(int width, int height, ChannelTag tag, std::uint8_t fill = 0)
    : Plane(width, height, fill), tag_(tag)
  {
  }

  ChannelPlane(int width, int height, ChannelTag tag, std::vector<std::uint8_t> data)
    : Plane(width, height, std::move(data)), tag_(tag)
  {
  }

  ChannelTag tag() const noexcept { return tag_; }
  void set_tag(ChannelTag t) noexcept { tag_ = t; }

  friend bool operator==(const ChannelPlane& a, const ChannelPlane& b)
  {
    return a.tag_ == b.tag_ && static_cast<const Plane&>(a) == static_cast<const Plane&>(b);
  }

private:
  ChannelTag tag_ = ChannelTag::gray;
};

/// A {0,1} mask.
class BinaryMask : public Plane<std::uint8_t>
{
public:
  BinaryMask() = default;

  BinaryMask(int width, int height, std::uint8_t fill = 0) : Plane(width, height, fill)
  {
    if (fill > 1) {
      throw InvalidInput("binary mask values must be 0 or 1");
    }
  }

  BinaryMask(int width, int height, std::vector<std::uint8_t> data)
    : Plane(width, height, std::move(data))
  {
    for (auto v : data_) {
      if (v > 1) {
        throw InvalidInput("binary mask values must be 0 or 1");
      }
    }
  }

  std::size_t count() const noexcept
  {
    std::size_t n = 0;
    for (auto v : data_) {
      n += v;
    }
    return n;
  }

  /// Mask as a displayable plane (1 -> 255).
  ChannelPlane to_plane(ChannelTag tag = ChannelTag::gray) const
  {
    std::vector<std::uint8_t> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    return {width_, height_, tag, std::move(out)};
  }

  /// Inverse of to_plane: nonzero -> 1.
  static BinaryMask from_plane(const ChannelPlane& p)
  {
    std::vector<std::uint8_t> out(p.size());
    auto src = p.data();
    std::transform(src.begin(), src.end(), out.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 1 : 0); });
    return {p.width(), p.height(), std::move(out)};
  }
};

/// H x W x 3 interleaved RGB image.
class Frame
{
public:
  Frame() = default;

  Frame(int width, int height, std::uint8_t fill = 0)
    : width_(width), height_(height), data_(area(width, height) * 3, fill)
  {
  }

  Frame(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), data_(std::move(rgb))
  {
    if (data_.size() != area(width, height) * 3) {
      throw InvalidInput("frame data length must be width*height*3");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return data_.size() / 3; }

  std::uint8_t& at(int x, int y, int c)
  {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const
  {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  bool same_shape(const Frame& o) const noexcept
  {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

private:
  static std::size_t area(int w, int h)
  {
    if (w < 0 || h < 0) {
      throw InvalidInput("negative frame dimensions");
    }
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using Channels = std::array<ChannelPlane, 3>;

namespace detail {

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* op)
{
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidInput(std::string(op) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                       std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                       std::to_string(b.height()) + ")");
  }
}

/// Round half away from zero for nonnegative values.
inline std::uint8_t round_to_u8(double v)
{
  if (v <= 0.0) {
    return 0;
  }
  if (v >= 255.0) {
    return 255;
  }
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

} // namespace detail

inline Channels split_channels(const Frame& f)
{
  const int w = f.width();
  const int h = f.height();
  Channels out{ChannelPlane(w, h, ChannelTag::r), ChannelPlane(w, h, ChannelTag::g),
               ChannelPlane(w, h, ChannelTag::b)};
  auto src = f.data();
  auto r = out[0].data();
  auto g = out[1].data();
  auto b = out[2].data();
  for (std::size_t i = 0, n = f.pixel_count(); i < n; ++i) {
    r[i] = src[3 * i];
    g[i] = src[3 * i + 1];
    b[i] = src[3 * i + 2];
  }
  return out;
}

inline Frame merge_channels(const ChannelPlane& r, const ChannelPlane& g, const ChannelPlane& b)
{
  detail::require_same_shape(r, g, "merge_channels");
  detail::require_same_shape(r, b, "merge_channels");
  if (r.tag() != ChannelTag::r || g.tag() != ChannelTag::g || b.tag() != ChannelTag::b) {
    throw InvalidInput("merge_channels: planes must be tagged r, g, b");
  }
  Frame f(r.width(), r.height());
  auto dst = f.data();
  auto rs = r.data();
  auto gs = g.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < rs.size(); ++i) {
    dst[3 * i] = rs[i];
    dst[3 * i + 1] = gs[i];
    dst[3 * i + 2] = bs[i];
  }
  return f;
}

inline Frame merge_channels(const Channels& c) { return merge_channels(c[0], c[1], c[2]); }

/// Per pixel max(a - b, 0). Result keeps a's tag.
inline ChannelPlane clamped_subtract(const ChannelPlane& a, const ChannelPlane& b)
{
  detail::require_same_shape(a, b, "clamped_subtract");
  ChannelPlane out(a.width(), a.height(), a.tag());
  auto as = a.data();
  auto bs = b.data();
  auto os = out.data();
  for (std::size_t i = 0; i < as.size(); ++i) {
    os[i] = as[i] > bs[i] ? static_cast<std::uint8_t>(as[i] - bs[i]) : 0;
  }
  return out;
}

/// Per-pixel minimum; logical AND on {0,255} planes. Result keeps a's tag.
inline ChannelPlane intersect_min(const ChannelPlane& a, const ChannelPlane& b)
{
  detail::require_same_shape(a, b, "intersect_min");
  ChannelPlane out(a.width(), a.height(), a.tag());
  auto as = a.data();
  auto bs = b.data();
  auto os = out.data();
  for (std::size_t i = 0; i < as.size(); ++i) {
    os[i] = std::min(as[i], bs[i]);
  }
  return out;
}

inline BinaryMask intersect(const BinaryMask& a, const BinaryMask& b)
{
  detail::require_same_shape(a, b, "intersect");
  BinaryMask out(a.width(), a.height());
  auto as = a.data();
  auto bs = b.data();
  auto os = out.data();
  for (std::size_t i = 0; i < as.size(); ++i) {
    os[i] = as[i] & bs[i];
  }
  return out;
}

/// 1-D Gaussian taps quantized to integers summing to exactly 2^16.
///
/// Blurring with integer taps makes the separable pass and a dense 2-D
/// convolution with the outer-product kernel agree bit for bit.
struct GaussianKernel
{
  static constexpr int kShift = 16;
  static constexpr std::int64_t kOne = std::int64_t{1} << kShift;

  int radius = 0;
  std::vector<std::int32_t> taps; // 2 * radius + 1 entries

  static GaussianKernel make(double sigma)
  {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw InvalidInput("gaussian_blur: sigma must be > 0");
    }
    GaussianKernel k;
    k.radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> g(2 * k.radius + 1);
    double total = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
      g[i + k.radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
      total += g[i + k.radius];
    }
    k.taps.resize(g.size());
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      k.taps[i] = static_cast<std::int32_t>(std::llround(static_cast<double>(kOne) * g[i] / total));
      sum += k.taps[i];
    }
    k.taps[k.radius] += static_cast<std::int32_t>(kOne - sum);
    return k;
  }
};

/// Separable Gaussian blur, radius ceil(3 sigma), clamp-to-border edges.
inline ChannelPlane gaussian_blur(const ChannelPlane& p, const GaussianKernel& k)
{
  const int w = p.width();
  const int h = p.height();
  ChannelPlane out(w, h, p.tag());
  if (w == 0 || h == 0) {
    return out;
  }
  const int r = k.radius;
  const std::int32_t* taps = k.taps.data() + r;

  // Horizontal pass into 32-bit sums (<= 255 * 2^16).
  std::vector<std::int32_t> tmp(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = &p(0, y);
    for (int i = 0; i < w + 2 * r; ++i) {
      row[i] = src[std::clamp(i - r, 0, w - 1)];
    }
    std::int32_t* dst = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      std::int32_t acc = 0;
      const std::uint8_t* c = row.data() + x + r;
      for (int i = -r; i <= r; ++i) {
        acc += taps[i] * c[i];
      }
      dst[x] = acc;
    }
  }

  // Vertical pass in 64 bits, then round half up from the 2^32 scale.
  std::vector<std::int64_t> acc(static_cast<std::size_t>(w));
  constexpr std::int64_t half = std::int64_t{1} << (2 * GaussianKernel::kShift - 1);
  for (int y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0);
    for (int j = -r; j <= r; ++j) {
      const std::int32_t* src = tmp.data() + static_cast<std::size_t>(std::clamp(y + j, 0, h - 1)) * w;
      const std::int64_t t = taps[j];
      for (int x = 0; x < w; ++x) {
        acc[x] += t * src[x];
      }
    }
    std::uint8_t* dst = &out(0, y);
    for (int x = 0; x < w; ++x) {
      dst[x] = static_cast<std::uint8_t>((acc[x] + half) >> (2 * GaussianKernel::kShift));
    }
  }
  return out;
}

inline ChannelPlane gaussian_blur(const ChannelPlane& p, double sigma)
{
  return gaussian_blur(p, GaussianKernel::make(sigma));
}

/// 1 where intensity >= tau (inclusive boundary).
inline BinaryMask binarize(const ChannelPlane& p, std::uint8_t tau)
{
  BinaryMask out(p.width(), p.height());
  auto src = p.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i] >= tau ? 1 : 0;
  }
  return out;
}

/// Per pixel round((R + G + B) / 3).
inline ChannelPlane to_gray(const Frame& f)
{
  ChannelPlane out(f.width(), f.height(), ChannelTag::gray);
  auto src = f.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const unsigned s = src[3 * i] + src[3 * i + 1] + src[3 * i + 2];
    // s / 3 is never exactly x.5, so this is round-half-up.
    dst[i] = static_cast<std::uint8_t>((2 * s + 3) / 6);
  }
  return out;
}

inline std::array<std::size_t, 256> histogram(const ChannelPlane& p)
{
  std::array<std::size_t, 256> hist{};
  for (auto v : p.data()) {
    ++hist[v];
  }
  return hist;
}

/// Shannon entropy in bits of the 256-bin histogram of a gray plane.
inline double entropy(const ChannelPlane& p)
{
  if (p.tag() != ChannelTag::gray) {
    throw InvalidInput("entropy: plane must be gray (apply to_gray first)");
  }
  if (p.empty()) {
    return 0.0;
  }
  const auto hist = histogram(p);
  const double n = static_cast<double>(p.size());
  double h = 0.0;
  for (auto c : hist) {
    if (c != 0) {
      const double q = static_cast<double>(c) / n;
      h -= q * std::log2(q);
    }
  }
  return h;
}

/// Pearson correlation over the flattened planes; 0 if either is constant.
///
/// Moments accumulate in exact integer arithmetic so the result is
/// independent of summation order.
inline double correlation(const ChannelPlane& a, const ChannelPlane& b)
{
  detail::require_same_shape(a, b, "correlation");
  auto as = a.data();
  auto bs = b.data();
  std::int64_t sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < as.size(); ++i) {
    const std::int64_t x = as[i];
    const std::int64_t y = bs[i];
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  const auto n = static_cast<std::int64_t>(as.size());
  const std::int64_t vara = n * saa - sa * sa;
  const std::int64_t varb = n * sbb - sb * sb;
  if (vara == 0 || varb == 0) {
    return 0.0;
  }
  const std::int64_t cov = n * sab - sa * sb;
  const double r = static_cast<double>(cov) / std::sqrt(static_cast<double>(vara) * static_cast<double>(varb));
  return std::clamp(r, -1.0, 1.0);
}

struct SsimParams
{
  int window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Mean SSIM over all window x window positions (stride 1). Planes smaller
/// than the window use one window spanning the plane along that axis.
inline double ssim(const ChannelPlane& a, const ChannelPlane& b, const SsimParams& prm = {})
{
  detail::require_same_shape(a, b, "ssim");
  const int w = a.width();
  const int h = a.height();
  if (w == 0 || h == 0) {
    return 1.0;
  }
  const int wx = std::min(prm.window, w);
  const int wy = std::min(prm.window, h);
  const double c1 = (prm.k1 * prm.dynamic_range) * (prm.k1 * prm.dynamic_range);
  const double c2 = (prm.k2 * prm.dynamic_range) * (prm.k2 * prm.dynamic_range);

  // Summed-area tables of a, b, a^2, b^2, ab.
  const std::size_t sw = static_cast<std::size_t>(w) + 1;
  std::array<std::vector<std::int64_t>, 5> sat;
  for (auto& t : sat) {
    t.assign(sw * (static_cast<std::size_t>(h) + 1), 0);
  }
  for (int y = 0; y < h; ++y) {
    std::array<std::int64_t, 5> run{};
    for (int x = 0; x < w; ++x) {
      const std::int64_t va = a(x, y);
      const std::int64_t vb = b(x, y);
      run[0] += va;
      run[1] += vb;
      run[2] += va * va;
      run[3] += vb * vb;
      run[4] += va * vb;
      const std::size_t idx = (static_cast<std::size_t>(y) + 1) * sw + x + 1;
      for (int k = 0; k < 5; ++k) {
        sat[k][idx] = sat[k][idx - sw] + run[k];
      }
    }
  }
  auto box = [&](int k, int x0, int y0) {
    const auto& t = sat[k];
    const std::size_t x1 = static_cast<std::size_t>(x0 + wx);
    const std::size_t y1 = static_cast<std::size_t>(y0 + wy);
    return t[y1 * sw + x1] - t[static_cast<std::size_t>(y0) * sw + x1] - t[y1 * sw + x0] +
           t[static_cast<std::size_t>(y0) * sw + x0];
  };

  const double n = static_cast<double>(wx) * wy;
  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + wy <= h; ++y) {
    for (int x = 0; x + wx <= w; ++x) {
      const double ma = box(0, x, y) / n;
      const double mb = box(1, x, y) / n;
      const double va = box(2, x, y) / n - ma * ma;
      const double vb = box(3, x, y) / n - mb * mb;
      const double cov = box(4, x, y) / n - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

} // namespace gridtac

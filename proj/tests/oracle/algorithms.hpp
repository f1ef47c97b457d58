#pragma once

// Straight-line transcription of reference building, proximity
// classification and grid similarity over raw interleaved RGB buffers.
// Nothing here calls into the library: every step is its own per-pixel loop.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Bytes = std::vector<std::uint8_t>; // w * h * 3, interleaved

struct Refs
{
  std::vector<Bytes> backgrounds;
  std::vector<std::uint8_t> grid[3]; // w * h, 0 or 1
};

struct Proximity
{
  double e_total = 0.0;
  double c_total = 0.0;
  int state = 0; // 0 Normal, 1 Approaching, 2 Noise
};

struct Contact
{
  double s_total = 0.0;
  int state = 0; // 0 Untouched, 1 Touched
};

inline std::vector<std::int64_t> blur_taps(double sigma, int& radius)
{
  radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> g;
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    g.push_back(std::exp(-(i * i) / (2.0 * sigma * sigma)));
    total += g.back();
  }
  std::vector<std::int64_t> t;
  std::int64_t sum = 0;
  for (double v : g) {
    t.push_back(std::llround(65536.0 * v / total));
    sum += t.back();
  }
  t[static_cast<std::size_t>(radius)] += 65536 - sum;
  return t;
}

// Dense 2-D integer convolution with the outer-product kernel, clamped
// borders, then binarized at tau.
inline std::vector<std::uint8_t> blurred_mask(const Bytes& rgb, int w, int h, int c, double sigma, int tau)
{
  int r = 0;
  const auto t = blur_taps(sigma, r);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w * h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
          int sx = x + i;
          int sy = y + j;
          if (sx < 0) sx = 0;
          if (sx > w - 1) sx = w - 1;
          if (sy < 0) sy = 0;
          if (sy > h - 1) sy = h - 1;
          acc += t[i + r] * t[j + r] * rgb[static_cast<std::size_t>((sy * w + sx) * 3 + c)];
        }
      }
      const std::int64_t v = (acc + (std::int64_t{1} << 31)) >> 32;
      out[static_cast<std::size_t>(y * w + x)] = v >= tau ? 1 : 0;
    }
  }
  return out;
}

inline Refs build(const std::vector<Bytes>& frames, int w, int h, int n, int m, int tau, double sigma)
{
  Refs refs;
  const int seg = n / m;
  for (int j = 0; j < m; ++j) {
    Bytes b(static_cast<std::size_t>(w * h * 3));
    for (std::size_t k = 0; k < b.size(); ++k) {
      double sum = 0.0;
      for (int i = j * seg; i < (j + 1) * seg; ++i) {
        sum += frames[static_cast<std::size_t>(i)][k];
      }
      b[k] = static_cast<std::uint8_t>(std::floor(sum / seg + 0.5));
    }
    refs.backgrounds.push_back(b);
  }
  for (int c = 0; c < 3; ++c) {
    std::vector<int> hits(static_cast<std::size_t>(w * h), 0);
    for (int i = 0; i < n; ++i) {
      const auto mask = blurred_mask(frames[static_cast<std::size_t>(i)], w, h, c, sigma, tau);
      for (int p = 0; p < w * h; ++p) {
        hits[static_cast<std::size_t>(p)] += mask[static_cast<std::size_t>(p)];
      }
    }
    refs.grid[c].resize(static_cast<std::size_t>(w * h));
    for (int p = 0; p < w * h; ++p) {
      refs.grid[c][static_cast<std::size_t>(p)] = 2 * hits[static_cast<std::size_t>(p)] >= n ? 1 : 0;
    }
  }
  return refs;
}

inline double pearson(const std::vector<int>& a, const std::vector<int>& b)
{
  std::int64_t sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += static_cast<std::int64_t>(a[i]) * a[i];
    sbb += static_cast<std::int64_t>(b[i]) * b[i];
    sab += static_cast<std::int64_t>(a[i]) * b[i];
  }
  const auto n = static_cast<std::int64_t>(a.size());
  const std::int64_t va = n * saa - sa * sa;
  const std::int64_t vb = n * sbb - sb * sb;
  if (va == 0 || vb == 0) {
    return 0.0;
  }
  double r = static_cast<double>(n * sab - sa * sb) / std::sqrt(static_cast<double>(va) * static_cast<double>(vb));
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

inline Proximity proximity(const Bytes& f, const Refs& refs, int w, int h, double tau_e, double tau_c)
{
  const int n = w * h;
  std::vector<int> ch[3];
  for (int c = 0; c < 3; ++c) {
    ch[c].assign(static_cast<std::size_t>(n), 255);
    for (const auto& b : refs.backgrounds) {
      for (int p = 0; p < n; ++p) {
        const int d = f[static_cast<std::size_t>(p * 3 + c)] - b[static_cast<std::size_t>(p * 3 + c)];
        const int v = d > 0 ? d : 0;
        if (v < ch[c][static_cast<std::size_t>(p)]) {
          ch[c][static_cast<std::size_t>(p)] = v;
        }
      }
    }
  }
  std::vector<long> hist(256, 0);
  for (int p = 0; p < n; ++p) {
    const int s = ch[0][static_cast<std::size_t>(p)] + ch[1][static_cast<std::size_t>(p)] +
                  ch[2][static_cast<std::size_t>(p)];
    ++hist[static_cast<std::size_t>(std::lround(s / 3.0))];
  }
  Proximity out;
  for (long count : hist) {
    if (count > 0) {
      const double q = static_cast<double>(count) / n;
      out.e_total -= q * std::log2(q);
    }
  }
  out.c_total = (pearson(ch[0], ch[1]) + pearson(ch[0], ch[2]) + pearson(ch[1], ch[2])) / 3.0;
  if (out.e_total < tau_e) {
    out.state = 0;
  } else if (out.c_total < tau_c) {
    out.state = 1;
  } else {
    out.state = 2;
  }
  return out;
}

inline Contact contact(const Bytes& f, const Refs& refs, int w, int h, int tau, double sigma, double tau_g)
{
  double s[3];
  for (int c = 0; c < 3; ++c) {
    const auto mask = blurred_mask(f, w, h, c, sigma, tau);
    long on = 0;
    long both = 0;
    for (int p = 0; p < w * h; ++p) {
      on += refs.grid[c][static_cast<std::size_t>(p)];
      both += refs.grid[c][static_cast<std::size_t>(p)] & mask[static_cast<std::size_t>(p)];
    }
    s[c] = static_cast<double>(both) / static_cast<double>(on);
  }
  Contact out;
  out.s_total = (s[0] + s[1] + s[2]) / 3.0;
  out.state = out.s_total < tau_g ? 1 : 0;
  return out;
}

} // namespace oracle

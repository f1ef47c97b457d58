// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: gridtac_acceptance <scenarios-dir> <work-dir>

#include "gridtac/cli.hpp"
#include "oracle/algorithms.hpp"
#include "oracle/chain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace gridtac;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random 32 x 24 sequences: a grid over a dim background with per-frame
// noise, followed by test frames that add blobs, flashes or erase the grid.
std::vector<oracle::Bytes> random_sequence(std::mt19937_64& rng, int w, int h, int count)
{
  std::uniform_int_distribution<int> pick(0, 1 << 30);
  const int pitch = 4 + pick(rng) % 4;
  const int line = 110 + pick(rng) % 120;
  const int base = 5 + pick(rng) % 30;
  const int jitter = 1 + pick(rng) % 12;
  oracle::Bytes clean(static_cast<std::size_t>(w * h * 3));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool on = x % pitch == 0 || y % pitch == 0;
      for (int c = 0; c < 3; ++c) {
        clean[static_cast<std::size_t>((y * w + x) * 3 + c)] =
          static_cast<std::uint8_t>(on ? line - 15 * c : base + 3 * c);
      }
    }
  }
  auto noisy = [&](const oracle::Bytes& src, int amp) {
    oracle::Bytes out = src;
    for (auto& v : out) {
      v = static_cast<std::uint8_t>(std::clamp(v + pick(rng) % (2 * amp + 1) - amp, 0, 255));
    }
    return out;
  };

  std::vector<oracle::Bytes> seq;
  for (int i = 0; i < 30; ++i) {
    seq.push_back(noisy(clean, jitter));
  }
  for (int i = 30; i < count; ++i) {
    const int kind = pick(rng) % 6;
    auto f = noisy(clean, jitter);
    if (kind == 5) {
      // A slightly dimmer copy of the scene leaves nothing after filtering.
      for (auto& v : f) {
        v = static_cast<std::uint8_t>(std::max(0, v - 2 * jitter));
      }
    }
    const int cx = pick(rng) % w;
    const int cy = pick(rng) % h;
    const int r = (kind == 3 ? 8 : 3) + pick(rng) % 10;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) {
          continue;
        }
        for (int c = 0; c < 3; ++c) {
          auto& v = f[static_cast<std::size_t>((y * w + x) * 3 + c)];
          switch (kind) {
          case 1: v = static_cast<std::uint8_t>(std::min(255, v + (c == 0 ? 90 : c == 1 ? pick(rng) % 60 : 0))); break;
          case 2: v = static_cast<std::uint8_t>(std::min(255, v + 120)); break;
          case 3: v = static_cast<std::uint8_t>(base + pick(rng) % 8); break;
          case 4: v = static_cast<std::uint8_t>(pick(rng) % 256); break;
          default: break;
          }
        }
      }
    }
    seq.push_back(std::move(f));
  }
  return seq;
}

Outcome algorithm_fidelity()
{
  const int w = 32;
  const int h = 24;
  std::mt19937_64 rng(20240611);
  FusionParams fp;
  ProximityParams pp;
  ContactParams cp;
  std::size_t frames = 0;
  std::size_t mismatches = 0;
  int states[3] = {0, 0, 0};
  int touched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = random_sequence(rng, w, h, 42);
    std::vector<Frame> lib;
    for (const auto& b : seq) {
      lib.emplace_back(w, h, b);
    }
    const auto want = oracle::build(seq, w, h, fp.n_frames, fp.m_backgrounds, fp.tau_b, fp.blur_sigma);
    const auto got = build_references(std::span<const Frame>(lib).first(30), fp);
    for (int j = 0; j < fp.m_backgrounds; ++j) {
      const auto d = got.backgrounds[static_cast<std::size_t>(j)].data();
      if (!std::equal(d.begin(), d.end(), want.backgrounds[static_cast<std::size_t>(j)].begin())) {
        ++mismatches;
      }
    }
    for (int c = 0; c < 3; ++c) {
      const auto d = got.grid_ref[static_cast<std::size_t>(c)].data();
      if (!std::equal(d.begin(), d.end(), want.grid[c].begin())) {
        ++mismatches;
      }
    }
    for (std::size_t i = 30; i < seq.size(); ++i) {
      const auto po = oracle::proximity(seq[i], want, w, h, pp.tau_e, pp.tau_c);
      const auto co = oracle::contact(seq[i], want, w, h, fp.tau_b, fp.blur_sigma, cp.tau_g);
      const auto pl = classify_proximity(lib[i], got, pp);
      const auto cl = grid_similarity(lib[i], got, cp);
      ++frames;
      if (po.e_total != pl.e_total || po.c_total != pl.c_total || po.state != static_cast<int>(pl.state) ||
          co.s_total != cl.s_total || co.state != (cl.state == ContactState::Touched ? 1 : 0)) {
        ++mismatches;
      }
      ++states[po.state];
      touched += co.state;
    }
  }
  return {mismatches == 0, fmt("%zu frames, %zu mismatches; oracle states normal=%d approaching=%d noise=%d touched=%d",
                               frames, mismatches, states[0], states[1], states[2], touched)};
}

Outcome decision_table()
{
  const ProximityParams pp;
  const ContactParams cp;
  const double d = 0.01;
  using P = ProximityState;
  int wrong = 0;
  int cells = 0;
  const double es[] = {pp.tau_e - d, pp.tau_e, pp.tau_e + d};
  const double cs[] = {pp.tau_c - d, pp.tau_c, pp.tau_c + d};
  // Rows: E below, at, above threshold. Columns: C below, at, above.
  const P expect_p[3][3] = {
    {P::Normal, P::Normal, P::Normal},
    {P::Approaching, P::Noise, P::Noise},
    {P::Approaching, P::Noise, P::Noise},
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      ++cells;
      wrong += classify_proximity_state(es[i], cs[j], pp) != expect_p[i][j];
    }
  }
  const double ss[] = {cp.tau_g - d, cp.tau_g, cp.tau_g + d};
  const ContactState expect_c[3] = {ContactState::Touched, ContactState::Untouched, ContactState::Untouched};
  for (int i = 0; i < 3; ++i) {
    ++cells;
    wrong += classify_contact_state(ss[i], cp) != expect_c[i];
  }
  const P ps[] = {P::Normal, P::Approaching, P::Noise};
  const ContactState ct[] = {ContactState::Untouched, ContactState::Touched};
  const Verdict expect_v[3][2] = {
    {Verdict::Idle, Verdict::InContact},
    {Verdict::ObjectNear, Verdict::InContact},
    {Verdict::NoiseSuppressed, Verdict::NoiseSuppressed},
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      ++cells;
      wrong += fuse_verdict(ps[i], ct[j]) != expect_v[i][j];
    }
  }
  return {wrong == 0, fmt("%d/%d table cells correct", cells - wrong, cells)};
}

Outcome approach_lead(const ScenarioReport& r)
{
  if (r.attempts.empty() || !r.attempts.front().lead()) {
    return {false, "no attempt with both an approach and a touch"};
  }
  const long lead = *r.attempts.front().lead();
  return {lead > 0, fmt("lead %ld frames (target 10 to 15)", lead)};
}

Outcome noise_immunity(const PipelineConfig& cfg)
{
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> boost(1000.0, 5000.0), radius(25.0, 60.0), centre(0.2, 0.8);
  std::uniform_int_distribution<int> len(5, 20);
  std::size_t attempts = 0;
  std::size_t noise_frames = 0;
  std::size_t bad = 0;
  double min_c = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = len(rng);
    const int start = 40;
    const int end = start + n - 1;
    std::ostringstream script;
    script << "0 0 duration frames=" << end + 11 << "\n"
           << start << ' ' << end << " noise boost=" << boost(rng) << " radius=" << radius(rng)
           << " cx=" << centre(rng) << " cy=" << centre(rng) << "\n";
    PipelineConfig c = cfg;
    c.render.seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto r = run_scenario(parse_script(script.str()), c);
    attempts += r.summary.attempts;
    for (const auto& f : r.frames) {
      if (!f.noise_active) {
        continue;
      }
      ++noise_frames;
      min_c = std::min(min_c, f.fused.proximity.c_total);
      if (f.fused.verdict != Verdict::NoiseSuppressed || f.fused.proximity.c_total < 0.9) {
        ++bad;
      }
    }
  }
  return {attempts == 0 && bad == 0 && noise_frames > 0,
          fmt("50 scripts, %zu noise frames, %zu not suppressed, min C %.3f, %zu grasp attempts", noise_frames, bad,
              min_c, attempts)};
}

Outcome grasp_counts(const ScenarioReport& r)
{
  const auto& s = r.summary;
  const bool ok = s.attempts == 3 && s.slips == 2 && s.successes == 1 && s.misses == 0 && s.noise_triggered_grasps == 0;
  return {ok, fmt("attempts=%zu slips=%zu successes=%zu misses=%zu noise_triggered=%zu", s.attempts, s.slips,
                  s.successes, s.misses, s.noise_triggered_grasps)};
}

Outcome similarity_bands(const std::vector<const ScenarioReport*>& runs)
{
  double free_min = 1.0;
  double pressed_max = 0.0;
  double noise_max = 0.0;
  std::size_t nf = 0, np = 0, nn = 0;
  for (const auto* r : runs) {
    for (const auto& f : r->frames) {
      const double s = f.fused.contact.s_total;
      if (f.noise_active) {
        noise_max = std::max(noise_max, s);
        ++nn;
      } else if (!f.object_present) {
        free_min = std::min(free_min, s);
        ++nf;
      } else if (f.press_depth >= 0.5) {
        pressed_max = std::max(pressed_max, s);
        ++np;
      }
    }
  }
  const bool ok = nf > 0 && np > 0 && nn > 0 && free_min >= 0.82 && pressed_max < 0.83 && noise_max < 0.53;
  return {ok, fmt("untouched min %.3f (%zu), pressed >=0.5 mm max %.3f (%zu), flash max %.3f (%zu)", free_min, nf,
                  pressed_max, np, noise_max, nn)};
}

double max_abs(const std::vector<Vec3>& u)
{
  double m = 0.0;
  for (const auto& v : u) {
    m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  return m;
}

Outcome lattice_mechanics()
{
  std::vector<std::string> notes;
  bool ok = true;

  {
    const auto lat = build_lattice({});
    Indenter ind;
    ind.center = {lat.cfg.width_mm() / 2, lat.cfg.height_mm() / 2};
    const auto f = solve_static(lat, ind);
    const double m = max_abs(f.u);
    const double rz = reaction_force(lat, f).norm();
    ok = ok && m == 0.0 && rz == 0.0;
    notes.push_back(fmt("zero press |u|=%g |R|=%g", m, rz));
  }

  {
    LatticeConfig c;
    c.nx = 1;
    c.ny = 1;
    c.nz = 6;
    const auto lat = build_lattice(c);
    const double k = oracle::chain_stiffness(c.nz, c.dx, c.k_struct, c.k_diag);
    double worst = 0.0;
    for (double d : {0.005, 0.01, 0.02, 0.03, 0.04}) {
      Indenter ind;
      ind.shape = IndenterShape::Plane;
      ind.depth = d;
      const auto f = solve_static(lat, ind);
      worst = std::max(worst, std::abs(reaction_force(lat, f).z() - k * d) / (k * d));
    }
    ok = ok && worst < 0.01;
    notes.push_back(fmt("chain stiffness rel err %.2e", worst));
  }

  LatticeConfig c;
  c.nx = 12;
  c.ny = 12;
  c.nz = 8;
  const auto lat = build_lattice(c);
  Indenter ind;
  ind.radius = 5.0;
  ind.center = {c.width_mm() / 2, c.height_mm() / 2};
  std::optional<DeformationField> prev;
  std::optional<DeformationField> mid;
  double last_force = -1.0;
  std::size_t last_count = 0;
  bool monotone = true;
  std::string forces;
  for (int step = 1; step <= 10; ++step) {
    ind.depth = 0.2 * step;
    auto f = solve_static(lat, ind, {}, prev ? &*prev : nullptr);
    const double rz = reaction_force(lat, f).z();
    const auto strain = cell_strain(lat, f);
    const auto count =
      static_cast<std::size_t>(std::count_if(strain.begin(), strain.end(), [](double s) { return s > 0.01; }));
    monotone = monotone && rz >= last_force && count >= last_count;
    last_force = rz;
    last_count = count;
    forces += fmt("%s%.2f/%zu", forces.empty() ? "" : " ", rz, count);
    if (step == 5) {
      mid = f;
    }
    prev = std::move(f);
  }
  ok = ok && monotone;
  notes.push_back("sweep R/strained " + forces);

  const double scale = max_abs(mid->u);
  double worst = 0.0;
  for (int k = 0; k <= c.nz; ++k) {
    for (int j = 0; j <= c.ny; ++j) {
      for (int i = 0; i <= c.nx; ++i) {
        const auto& a = mid->u[static_cast<std::size_t>(lat.corner(i, j, k))];
        const auto& bx = mid->u[static_cast<std::size_t>(lat.corner(c.nx - i, j, k))];
        const auto& by = mid->u[static_cast<std::size_t>(lat.corner(i, c.ny - j, k))];
        worst = std::max({worst, std::abs(a.x() + bx.x()), std::abs(a.y() - bx.y()), std::abs(a.z() - bx.z()),
                          std::abs(a.x() - by.x()), std::abs(a.y() + by.y()), std::abs(a.z() - by.z())});
      }
    }
  }
  ok = ok && worst < 1e-6 * scale;
  notes.push_back(fmt("mirror residual %.2e of %.3f", worst, scale));

  std::string detail;
  for (const auto& n : notes) {
    detail += (detail.empty() ? "" : "; ") + n;
  }
  return {ok, detail};
}

Outcome primitives()
{
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> byte(0, 255);
  auto random_plane = [&](int w, int h, ChannelTag tag) {
    ChannelPlane p(w, h, tag);
    for (auto& v : p.data()) {
      v = static_cast<std::uint8_t>(byte(rng));
    }
    return p;
  };
  int wrong = 0;
  std::vector<std::string> notes;

  ChannelPlane flat(16, 16, ChannelTag::gray);
  wrong += entropy(flat) != 0.0;
  ChannelPlane two(16, 16, ChannelTag::gray);
  for (int i = 0; i < 128; ++i) {
    two.data()[static_cast<std::size_t>(i)] = 200;
  }
  wrong += std::abs(entropy(two) - 1.0) > 1e-12;
  ChannelPlane all(16, 16, ChannelTag::gray);
  for (int i = 0; i < 256; ++i) {
    all.data()[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  }
  wrong += std::abs(entropy(all) - 8.0) > 1e-12;

  for (int t = 0; t < 20; ++t) {
    const auto a = random_plane(12, 10, ChannelTag::r);
    auto b = a;
    for (auto& v : b.data()) {
      v = static_cast<std::uint8_t>(v / 2 + 10);
    }
    auto inv = a;
    for (auto& v : inv.data()) {
      v = static_cast<std::uint8_t>(255 - v);
    }
    wrong += std::abs(correlation(a, a) - 1.0) > 1e-12;
    wrong += correlation(a, b) < 0.99;
    wrong += std::abs(correlation(a, inv) + 1.0) > 1e-12;
    wrong += std::abs(ssim(a, a) - 1.0) > 1e-12;
    const auto c = random_plane(12, 10, ChannelTag::r);
    wrong += std::abs(ssim(a, c) - ssim(c, a)) > 1e-12;
  }
  wrong += correlation(flat, flat) != 0.0;
  notes.push_back(fmt("%d identity failures", wrong));

  // Blur against an unquantized dense convolution in floating point.
  int off = 0;
  for (int t = 0; t < 50; ++t) {
    const auto p = random_plane(8, 8, ChannelTag::g);
    const double sigma = 0.6 + 0.05 * t;
    const auto got = gaussian_blur(p, sigma);
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> g;
    double total = 0.0;
    for (int i = -r; i <= r; ++i) {
      g.push_back(std::exp(-(i * i) / (2.0 * sigma * sigma)));
      total += g.back();
    }
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) {
          for (int i = -r; i <= r; ++i) {
            const int sx = std::clamp(x + i, 0, 7);
            const int sy = std::clamp(y + j, 0, 7);
            acc += g[static_cast<std::size_t>(i + r)] * g[static_cast<std::size_t>(j + r)] * p(sx, sy);
          }
        }
        acc /= total * total;
        if (std::abs(got(x, y) - acc) > 1.0) {
          ++off;
        }
      }
    }
  }
  notes.push_back(fmt("%d blurred pixels off by more than 1 level", off));
  return {wrong == 0 && off == 0, notes[0] + "; " + notes[1]};
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome reproducibility(const fs::path& script, const fs::path& work, const RunConfig& cfg)
{
  const fs::path dirs[2] = {work / "repro_a", work / "repro_b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    cmd_simulate(script, d, cfg, true);
    std::ofstream os(d / "offline.csv", std::ios::binary);
    cmd_detect(d / "frames", d / "refs", cfg, os);
  }
  std::size_t files = 0;
  std::size_t differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file()) {
      continue;
    }
    ++files;
    const auto other = dirs[1] / fs::relative(e.path(), dirs[0]);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      ++differ;
    }
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[1])) {
    files_b += e.is_regular_file();
  }
  return {differ == 0 && files == files_b && files > 0, fmt("%zu files compared, %zu differ", files, differ)};
}

Outcome throughput(const fs::path& work, const RunConfig& cfg)
{
  const auto r = cmd_bench(work / "repro_a" / "frames", work / "repro_a" / "refs", cfg, 3);
  return {r.fps >= 30.0, fmt("%.1f fps over %zu frames (%dx%d), p95 %.2f ms", r.fps, r.frames, cfg.pipeline.render.width,
                             cfg.pipeline.render.height, r.total.p95_ms)};
}

} // namespace

int main(int argc, char** argv)
{
  if (argc != 3) {
    std::cerr << "usage: gridtac_acceptance <scenarios-dir> <work-dir>\n";
    return 2;
  }
  const fs::path scenarios = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);
  const RunConfig cfg;

  std::optional<ScenarioReport> approach;
  std::optional<ScenarioReport> three_items;
  auto approach_run = [&]() -> const ScenarioReport& {
    if (!approach) {
      approach = run_scenario(load_script(scenarios / "approach_touch.txt"), cfg.pipeline);
    }
    return *approach;
  };
  auto three_items_run = [&]() -> const ScenarioReport& {
    if (!three_items) {
      three_items = run_scenario(load_script(scenarios / "three_items.txt"), cfg.pipeline);
    }
    return *three_items;
  };

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
    {"detection matches brute-force transcription", algorithm_fidelity},
    {"threshold decision table", decision_table},
    {"approach precedes touch", [&] { return approach_lead(approach_run()); }},
    {"flash noise never starts a grasp", [&] { return noise_immunity(cfg.pipeline); }},
    {"grasp, slip and delivery counts", [&] { return grasp_counts(three_items_run()); }},
    {"grid similarity bands", [&] { return similarity_bands({&approach_run(), &three_items_run()}); }},
    {"lattice mechanics", lattice_mechanics},
    {"image primitives", primitives},
    {"seeded runs are byte identical", [&] { return reproducibility(scenarios / "approach_touch.txt", work, cfg); }},
    {"detection throughput", [&] { return throughput(work, cfg); }},
  };

  int failed = 0;
  int n = 0;
  for (const auto& [name, check] : criteria) {
    ++n;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << ", "
              << fmt("%.1f s", secs) << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

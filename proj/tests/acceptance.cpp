// Acceptance checks. Prints one PASS / FAIL / SKIP line per criterion and
// exits nonzero if any criterion fails.
//
// Environment:
//   BRAINNET_DATASET_ROOT   full dataset for criterion 9 (skipped when unset)
//   BRAINNET_FUZZ_SECONDS   header fuzzing budget for criterion 10 (default 600)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <new>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "brainnet/brainnet.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "support.hpp"

// ---------------------------------------------------------------------------
// Allocation tracking for the fuzz criterion: while `g_track` is set on a
// thread, the largest single request made by that thread is recorded.

namespace {
thread_local bool g_track = false;
thread_local std::size_t g_largest = 0;

void* tracked_alloc(std::size_t n) {
  if (g_track && n > g_largest) g_largest = n;
  if (void* p = std::malloc(n == 0 ? 1 : n)) return p;
  throw std::bad_alloc();
}
}  // namespace

void* operator new(std::size_t n) { return tracked_alloc(n); }
void* operator new[](std::size_t n) { return tracked_alloc(n); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }

using namespace brainnet;
using brainnet::testing::Rng;
using brainnet::testing::uniform_real;
using brainnet::testing::uniform_size;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// Collects the first few failure messages of a criterion.
struct Checker {
  std::size_t failures = 0;
  std::string first;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures++ == 0) first = what;
  }
  Outcome outcome(std::string detail) const {
    if (failures == 0) return {Status::Pass, std::move(detail)};
    return {Status::Fail, std::to_string(failures) + " violation(s); first: " + first};
  }
};

bool same_optional(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::fabs(*a - *b) <= tol;
}

Spacing random_spacing(Rng& rng) {
  return {uniform_real(rng, 0.5, 2.5), uniform_real(rng, 0.5, 2.5), uniform_real(rng, 0.5, 2.5)};
}

// Spacing that survives the float32 pixdim fields unchanged.
Spacing random_file_spacing(Rng& rng) {
  const Spacing s = random_spacing(rng);
  return {static_cast<float>(s.sx), static_cast<float>(s.sy), static_cast<float>(s.sz)};
}

// --- 1 ---------------------------------------------------------------------

Outcome metric_oracle_equivalence() {
  Rng rng(101);
  Checker c;
  const auto t0 = Clock::now();
  double worst_dice = 0.0, worst_hd = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Dims d = brainnet::testing::random_dims(rng, 1, 16);
    const Spacing s = i % 2 ? random_spacing(rng) : Spacing{};
    BinaryMask x = brainnet::testing::random_mask(rng, d, s);
    BinaryMask y = brainnet::testing::random_mask(rng, d, s);
    if (i % 50 == 7) std::fill(y.begin(), y.end(), 0);
    const double dc = dice_coefficient(x, y);
    const double want_dc = oracle::dice(x, y);
    worst_dice = std::max(worst_dice, std::fabs(dc - want_dc));
    c.expect(std::fabs(dc - want_dc) <= 1e-12, "dice pair " + std::to_string(i));
    const auto hd = hausdorff95(x, y);
    const auto want_hd = oracle::hausdorff(x, y, 95.0);
    if (hd && want_hd) worst_hd = std::max(worst_hd, std::fabs(*hd - *want_hd));
    c.expect(same_optional(hd, want_hd, 1e-9), "hd95 pair " + std::to_string(i));
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s >= 60 s");
  return c.outcome("500 pairs, max |dice err| " + fmt(worst_dice) + ", max |hd95 err| " + fmt(worst_hd) + ", " +
                   fmt(elapsed) + " s");
}

// --- 2 ---------------------------------------------------------------------

// Copies `m` into a grid of dims `d` at offset `o`.
BinaryMask place(const BinaryMask& m, Dims d, std::array<std::size_t, 3> o) {
  BinaryMask out(d, m.spacing());
  for (std::size_t z = 0; z < m.dims().nz; ++z)
    for (std::size_t y = 0; y < m.dims().ny; ++y)
      for (std::size_t x = 0; x < m.dims().nx; ++x) out(x + o[0], y + o[1], z + o[2]) = m(x, y, z);
  return out;
}

Outcome metric_identities() {
  Rng rng(202);
  Checker c;
  for (int i = 0; i < 100; ++i) {
    const Dims d = brainnet::testing::random_dims(rng, 1, 14);
    const Spacing s = random_spacing(rng);
    const BinaryMask x = brainnet::testing::random_nonempty_mask(rng, d, s);
    const BinaryMask y = brainnet::testing::random_nonempty_mask(rng, d, s);
    const std::string id = " (mask " + std::to_string(i) + ")";
    c.expect(dice_coefficient(x, x) == 1.0, "dice(X,X) != 1" + id);
    const auto self = hausdorff95(x, x);
    c.expect(self && *self == 0.0, "hd95(X,X) != 0" + id);
    c.expect(dice_coefficient(x, y) == dice_coefficient(y, x), "dice not symmetric" + id);
    c.expect(hausdorff95(x, y) == hausdorff95(y, x), "hd95 not symmetric" + id);

    // Translation: the pair is embedded with a zero margin at two different
    // offsets in a larger grid, so neither copy touches the grid edge.
    const Dims big{d.nx + 8, d.ny + 8, d.nz + 8};
    const std::array<std::size_t, 3> o1{1, 1, 1};
    const std::array<std::size_t, 3> o2{uniform_size(rng, 1, 7), uniform_size(rng, 1, 7), uniform_size(rng, 1, 7)};
    const auto x1 = place(x, big, o1), y1 = place(y, big, o1);
    const auto x2 = place(x, big, o2), y2 = place(y, big, o2);
    c.expect(dice_coefficient(x1, y1) == dice_coefficient(x2, y2), "dice changed under translation" + id);
    c.expect(hausdorff95(x1, y1) == hausdorff95(x2, y2), "hd95 changed under translation" + id);
  }
  return c.outcome("100 masks and pairs, exact equality");
}

// --- 3 ---------------------------------------------------------------------

Outcome ensemble_correctness() {
  Rng rng(303);
  Checker c;
  const std::vector<int> priority{4, 1, 2, 0};
  const std::array<std::size_t, 3> sizes{1, 3, 9};
  for (int i = 0; i < 200; ++i) {
    const Dims d = brainnet::testing::random_dims(rng, 1, 16);
    EnsembleSet es;
    for (std::size_t k = 0; k < sizes[static_cast<std::size_t>(i) % 3]; ++k)
      es.members.push_back(brainnet::testing::random_labels(rng, d));
    const auto voted = majority_vote(es);
    const std::string id = " (set " + std::to_string(i) + ")";
    c.expect(voted == oracle::vote(es.members, priority), "vote differs from oracle" + id);

    EnsembleSet copies;
    copies.members.assign(es.members.size(), es.members.front());
    c.expect(majority_vote(copies) == es.members.front(), "not idempotent" + id);

    EnsembleSet shuffled = es;
    std::shuffle(shuffled.members.begin(), shuffled.members.end(), rng);
    c.expect(majority_vote(shuffled) == voted, "not permutation invariant" + id);
  }
  return c.outcome("200 sets, N in {1,3,9}");
}

// --- 4 ---------------------------------------------------------------------

Outcome slicing_round_trip() {
  Rng rng(404);
  Checker c;
  for (int i = 0; i < 100; ++i) {
    Dims d = brainnet::testing::random_dims(rng, 1, 12);
    switch (i % 5) {  // degenerate shapes: one, two or all three extents equal to 1
      case 1: d.nx = 1; break;
      case 2: d.ny = 1; break;
      case 3: d.nz = 1; d.nx = 1; break;
      case 4: if (i % 20 == 4) d = {1, 1, 1}; break;
      default: break;
    }
    Volume v = brainnet::testing::random_volume(rng, d);
    v = Volume(d, random_spacing(rng), std::vector<float>(v.begin(), v.end()));
    v.modality = Modality::T1GD;
    for (Axis a : kAllAxes) {
      const auto back = reassemble(extract_slices(v, a));
      const bool same = back.dims() == v.dims() && back.spacing() == v.spacing() && back.modality == v.modality &&
                        std::memcmp(&*back.begin(), &*v.begin(), v.size() * sizeof(float)) == 0;
      c.expect(same, "volume " + std::to_string(i) + " axis " + std::string(to_string(a)));
    }
  }
  return c.outcome("100 volumes x 3 axes, bit-exact");
}

// --- 5 ---------------------------------------------------------------------

SoftPrediction random_prediction(Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
  SoftPrediction p(c, h, w);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += p.at(k, i) = uniform_real(rng, 0.0, 1.0);
    for (std::size_t k = 0; k < c; ++k) p.at(k, i) = 0.05 + (1.0 - 0.05 * static_cast<double>(c)) * p.at(k, i) / sum;
  }
  return p;
}

Outcome loss_gradients() {
  Rng rng(505);
  Checker c;
  const MaskLossParams defaults;
  c.expect(defaults.weights.ce == 1.0 && defaults.weights.focal == 20.0 && defaults.weights.dice == 20.0,
           "default weights are not 1/20/20");
  double worst = 0.0;
  auto check = [&](const std::vector<double>& analytic, const std::function<double(const std::vector<double>&)>& f,
                   const std::vector<double>& x, const std::string& what) {
    const double err = oracle::relative_error(analytic, oracle::numeric_gradient(f, x));
    worst = std::max(worst, err);
    c.expect(err < 1e-4, what + " relative error " + fmt(err));
  };
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = uniform_size(rng, 2, 5), h = uniform_size(rng, 1, 6), w = uniform_size(rng, 1, 6);
    const auto p = random_prediction(rng, k, h, w);
    ClassMap t(w, h);
    for (auto& v : t.data) v = static_cast<std::uint8_t>(uniform_size(rng, 0, k - 1));
    const FocalParams fp{uniform_real(rng, 0.0, 3.0), uniform_real(rng, 0.05, 1.0)};
    const double eps = uniform_real(rng, 1e-3, 2.0);
    auto at = [&](const std::vector<double>& x) {
      SoftPrediction q = p;
      q.p = x;
      return q;
    };
    const std::string id = " (instance " + std::to_string(i) + ")";
    check(cross_entropy_grad(p, t), [&](const auto& x) { return cross_entropy_loss(at(x), t); }, p.p, "CE" + id);
    check(focal_grad(p, t, fp), [&](const auto& x) { return focal_loss(at(x), t, fp); }, p.p, "focal" + id);

    Image2D<double> plane(w, h);
    for (auto& v : plane.data) v = uniform_real(rng, 0.0, 1.0);
    Image2D<std::uint8_t> fg(w, h);
    for (auto& v : fg.data) v = static_cast<std::uint8_t>(uniform_size(rng, 0, 1));
    check(soft_dice_grad(plane, fg, eps).data,
          [&](const auto& x) {
            Image2D<double> q = plane;
            q.data = x;
            return soft_dice_loss(q, fg, eps);
          },
          plane.data, "dice" + id);

    MaskLossParams params;
    params.focal = fp;
    params.eps_smooth = eps;
    check(combined_mask_grad(p, t, params), [&](const auto& x) { return combined_mask_loss(at(x), t, params).total; },
          p.p, "combined" + id);

    const double ce = cross_entropy_loss(p, t);
    const double fl = focal_loss(p, t, {0.0, 1.0});
    c.expect(std::fabs(ce - fl) <= 4 * std::numeric_limits<double>::epsilon() * std::fabs(ce),
             "focal(0,1) != CE" + id);
  }
  return c.outcome("100 instances, worst relative error " + fmt(worst));
}

// --- 6 ---------------------------------------------------------------------

Outcome lr_schedule() {
  Checker c;
  const auto s = LrSchedule::cosine_default();
  c.expect(s.kind == LrKind::CosineAnnealing && s.initial == 1e-4 && s.total_epochs == 15,
           "default cosine schedule is not 1e-4 over 15 epochs");
  Rng rng(606);
  std::vector<LrSchedule> schedules{s};
  for (int i = 0; i < 20; ++i) {
    const double init = uniform_real(rng, 1e-6, 1e-1);
    schedules.push_back({LrKind::CosineAnnealing, init, uniform_real(rng, 0.0, init), static_cast<int>(uniform_size(rng, 1, 200))});
  }
  double worst = 0.0;
  for (const auto& sch : schedules) {
    c.expect(lr_at_epoch(sch, 0) == sch.initial, "eta(0) != eta_initial");
    c.expect(lr_at_epoch(sch, sch.total_epochs) == sch.minimum, "eta(T) != eta_min");
    for (int t = 0; t <= sch.total_epochs; ++t) {
      const double want = sch.minimum + (sch.initial - sch.minimum) *
                                            (1.0 + std::cos(std::numbers::pi * t / sch.total_epochs)) / 2.0;
      const double err = std::fabs(lr_at_epoch(sch, t) - want);
      worst = std::max(worst, err);
      c.expect(err <= 1e-12, "eta(" + std::to_string(t) + ") off by " + fmt(err));
    }
  }
  return c.outcome("21 schedules incl. 1e-4/T=15, worst error " + fmt(worst));
}

// --- 7 ---------------------------------------------------------------------

Outcome preprocessing() {
  Rng rng(707);
  Checker c;
  brainnet::testing::TempDir tmp;
  for (int i = 0; i < 100; ++i) {
    const std::string id = " (volume " + std::to_string(i) + ")";
    // Random core padded with zeros on every side by a random amount.
    const Dims core = brainnet::testing::random_dims(rng, 1, 10);
    const std::array<std::size_t, 3> pad_lo{uniform_size(rng, 0, 5), uniform_size(rng, 0, 5), uniform_size(rng, 0, 5)};
    const Dims full{core.nx + pad_lo[0] + uniform_size(rng, 0, 5), core.ny + pad_lo[1] + uniform_size(rng, 0, 5),
                    core.nz + pad_lo[2] + uniform_size(rng, 0, 5)};
    Volume v(full);
    double total = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t z = 0; z < core.nz; ++z)
      for (std::size_t y = 0; y < core.ny; ++y)
        for (std::size_t x = 0; x < core.nx; ++x) {
          const float val = uniform_size(rng, 0, 3) == 0 ? 0.0f : static_cast<float>(uniform_real(rng, -50, 50));
          v(x + pad_lo[0], y + pad_lo[1], z + pad_lo[2]) = val;
        }
    v(pad_lo[0], pad_lo[1], pad_lo[2]) = 1.0f;  // never all zero
    for (float x : v)
      if (x != 0.0f) {
        total += std::fabs(x);
        ++nonzero;
      }
    const std::vector<Volume> vols{v};
    const CropBox box = compute_crop_box(vols);
    const Volume cropped = apply_crop(v, box);
    double kept_total = 0.0;
    std::size_t kept = 0;
    for (float x : cropped)
      if (x != 0.0f) {
        kept_total += std::fabs(x);
        ++kept;
      }
    c.expect(kept == nonzero && kept_total == total, "crop lost nonzero voxels" + id);

    if (std::equal(v.begin() + 1, v.end(), v.begin())) continue;
    const Volume n = normalize_minmax(v);
    const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
    c.expect(*lo == 0.0f && *hi == 1.0f, "normalised range is not exactly [0,1]" + id);
  }

  // Label masks go to PNG as raw values; RGB channels through q = floor(v*255 + 0.5).
  for (int i = 0; i < 20; ++i) {
    const std::size_t w = uniform_size(rng, 1, 40), h = uniform_size(rng, 1, 40);
    Image2D<std::uint8_t> mask(w, h);
    for (auto& x : mask.data) x = static_cast<std::uint8_t>(kAllLabels[uniform_size(rng, 0, 3)]);
    const auto path = tmp / ("m" + std::to_string(i) + ".png");
    png::write_mask(path, mask);
    c.expect(png::read_mask(path) == mask, "label PNG round trip " + std::to_string(i));

    RgbSlice rgb;
    rgb.width = w;
    rgb.height = h;
    for (auto& ch : rgb.channels) {
      ch.resize(w * h);
      for (auto& x : ch) x = static_cast<float>(uniform_real(rng, 0.0, 1.0));
    }
    const auto rgb_path = tmp / ("c" + std::to_string(i) + ".png");
    png::write_rgb(rgb_path, rgb);
    const auto px = png::read(rgb_path);
    bool ok = px.channels == 3 && px.width == w && px.height == h;
    for (std::size_t k = 0; ok && k < w * h; ++k)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const auto want = static_cast<std::uint8_t>(std::floor(static_cast<double>(rgb.channels[ch][k]) * 255.0 + 0.5));
        ok = ok && px.data[k * 3 + ch] == want;
      }
    c.expect(ok, "RGB PNG quantisation " + std::to_string(i));
  }
  for (int q = 0; q < 256; ++q)
    c.expect(quantize_unit(dequantize_unit(static_cast<std::uint8_t>(q))) == q, "quantise/dequantise " + std::to_string(q));
  return c.outcome("100 padded volumes, 20 label and 20 RGB PNGs");
}

// --- 8 ---------------------------------------------------------------------

Outcome report_fidelity() {
  Checker c;
  std::ifstream in(std::string(BRAINNET_TEST_DATA) + "/model_comparison.json");
  if (!in) return {Status::Fail, "cannot open model_comparison.json"};
  const auto rows = nlohmann::json::parse(in).get<std::vector<ModelSummary>>();
  const auto t = render_comparison_table(rows);
  // Bold cells per row for the three published rows.
  const std::map<std::string, std::array<bool, 6>> want{
      {"3D Autoencoder", {false, false, false, false, false, false}},
      {"nnU-Net", {false, true, true, false, true, false}},
      {"BRAINNET", {true, false, false, true, false, true}},
  };
  c.expect(t.rows.size() == 3, "expected 3 rows");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto it = want.find(t.rows[r].name);
    c.expect(it != want.end() && it->second == t.bold[r], "bold pattern for " + t.rows[r].name);
  }
  return c.outcome("6 bold cells of 18 match");
}

// --- 9 ---------------------------------------------------------------------

Outcome dataset_crop() {
  const char* root = std::getenv(cli::kDatasetRootEnv);
  if (!root || !*root) return {Status::Skip, std::string(cli::kDatasetRootEnv) + " not set"};
  if (!std::filesystem::is_directory(root)) return {Status::Skip, std::string(root) + " is not a directory"};
  const auto t0 = Clock::now();
  const auto subjects = cli::discover_subjects(root);
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  const auto g = cli::compute_global_crop(subjects, workers);
  const Dims e = g.box.extents();
  const double ratio = static_cast<double>(e.voxel_count()) / static_cast<double>(g.original.voxel_count());
  Checker c;
  c.expect(e == Dims{163, 193, 146}, "cropped dims " + std::to_string(e.nx) + "x" + std::to_string(e.ny) + "x" +
                                         std::to_string(e.nz));
  c.expect(std::fabs(ratio - 0.5144) <= 1e-4, "voxel ratio " + fmt(ratio, 6));
  std::string detail = std::to_string(subjects.size() - g.failures.size()) + " subjects, " + std::to_string(e.nx) +
                       "x" + std::to_string(e.ny) + "x" + std::to_string(e.nz) + ", ratio " + fmt(ratio, 6) + ", " +
                       fmt(seconds_since(t0)) + " s";
  if (!g.failures.empty()) detail += ", " + std::to_string(g.failures.size()) + " unreadable";
  auto out = c.outcome(detail);
  if (out.status == Status::Fail) out.detail += "; " + detail;
  return out;
}

// --- 10 --------------------------------------------------------------------

template <class T>
bool round_trips(const Grid<T>& g, const std::filesystem::path& p, nifti::DataType dt) {
  write_grid(g, p, dt);
  const auto back = read_grid<T>(p);
  return back.dims() == g.dims() && back.spacing() == g.spacing() && std::equal(back.begin(), back.end(), g.begin());
}

std::vector<std::vector<std::byte>> fuzz_seeds(Rng& rng) {
  std::vector<std::vector<std::byte>> seeds;
  for (auto dt : {nifti::DataType::UInt8, nifti::DataType::Int16, nifti::DataType::Int32, nifti::DataType::Float32}) {
    Volume v(brainnet::testing::random_dims(rng, 1, 6), random_spacing(rng));
    for (auto& x : v) x = static_cast<float>(uniform_size(rng, 0, 4));
    seeds.push_back(nifti::encode(v, dt));
  }
  // Same header written big-endian: swap every multi-byte field we know of.
  auto be = seeds[1];
  auto swap = [&](std::size_t off, std::size_t n) { std::reverse(be.begin() + off, be.begin() + off + n); };
  swap(0, 4);
  for (std::size_t i = 0; i < 8; ++i) swap(40 + 2 * i, 2);
  swap(70, 2);
  swap(72, 2);
  for (std::size_t i = 0; i < 8; ++i) swap(76 + 4 * i, 4);
  for (std::size_t off : {108u, 112u, 116u}) swap(off, 4);
  for (std::size_t k = 352; k + 2 <= be.size(); k += 2) swap(k, 2);
  seeds.push_back(be);
  return seeds;
}

void mutate(std::vector<std::byte>& b, Rng& rng, const std::vector<std::vector<std::byte>>& seeds) {
  static constexpr std::size_t kFields[] = {0, 40, 42, 44, 46, 48, 70, 72, 76, 80, 84, 88, 108, 112, 116, 252, 254, 344};
  const std::size_t rounds = uniform_size(rng, 1, 6);
  for (std::size_t r = 0; r < rounds; ++r) {
    switch (uniform_size(rng, 0, 7)) {
      case 0:
        if (!b.empty()) b[uniform_size(rng, 0, b.size() - 1)] ^= std::byte(1u << uniform_size(rng, 0, 7));
        break;
      case 1: {  // interesting 16-bit value at a header field
        static constexpr std::int16_t vals[] = {0, 1, -1, 2, 3, 4, 7, 8, 16, 32, 255, 256, 348, 32767, -32768};
        const std::size_t off = kFields[uniform_size(rng, 0, std::size(kFields) - 1)];
        const auto v = vals[uniform_size(rng, 0, std::size(vals) - 1)];
        if (off + 2 <= b.size()) std::memcpy(b.data() + off, &v, 2);
        break;
      }
      case 2: {  // interesting float at a header field
        static constexpr float vals[] = {0.0f, -0.0f, 1.0f, -1.0f, 348.0f, 352.0f, 352.5f, 1e30f, -1e30f, 4294967296.0f,
                                         std::numeric_limits<float>::infinity(), std::numeric_limits<float>::quiet_NaN()};
        const std::size_t off = kFields[uniform_size(rng, 0, std::size(kFields) - 1)];
        const auto v = vals[uniform_size(rng, 0, std::size(vals) - 1)];
        if (off + 4 <= b.size()) std::memcpy(b.data() + off, &v, 4);
        break;
      }
      case 3:
        b.resize(uniform_size(rng, 0, b.size()));
        break;
      case 4: {
        const std::size_t n = uniform_size(rng, 1, 64);
        for (std::size_t k = 0; k < n; ++k) b.push_back(std::byte(static_cast<unsigned char>(rng())));
        break;
      }
      case 5:
        if (!b.empty()) b[uniform_size(rng, 0, b.size() - 1)] = std::byte(static_cast<unsigned char>(rng()));
        break;
      case 6: {  // splice a random span from another seed
        const auto& s = seeds[uniform_size(rng, 0, seeds.size() - 1)];
        if (s.empty() || b.empty()) break;
        const std::size_t at = uniform_size(rng, 0, std::min(b.size(), s.size()) - 1);
        const std::size_t n = uniform_size(rng, 1, std::min(b.size(), s.size()) - at);
        std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(at), n, b.begin() + static_cast<std::ptrdiff_t>(at));
        break;
      }
      default: {  // random 32-bit value at a field
        const std::size_t off = kFields[uniform_size(rng, 0, std::size(kFields) - 1)];
        const auto v = static_cast<std::uint32_t>(rng());
        if (off + 4 <= b.size()) std::memcpy(b.data() + off, &v, 4);
        break;
      }
    }
  }
}

Outcome io_robustness() {
  Checker c;
  Rng rng(1010);
  brainnet::testing::TempDir tmp;

  // Round trips: every supported on-disk type, every container.
  std::size_t trips = 0;
  for (const char* ext : {".nii", ".nii.gz", ".mvol"}) {
    for (auto dt : {nifti::DataType::UInt8, nifti::DataType::Int16, nifti::DataType::Int32, nifti::DataType::Float32}) {
      const Dims d = brainnet::testing::random_dims(rng, 1, 9);
      Volume v(d, random_file_spacing(rng));
      // Values exactly representable both as float and in the target type.
      for (auto& x : v) {
        switch (dt) {
          case nifti::DataType::UInt8: x = static_cast<float>(uniform_size(rng, 0, 255)); break;
          case nifti::DataType::Int16: x = static_cast<float>(static_cast<long>(uniform_size(rng, 0, 65535)) - 32768); break;
          case nifti::DataType::Int32:
            x = static_cast<float>((static_cast<long>(uniform_size(rng, 0, 16777215)) - 8388608) * 256);
            break;
          case nifti::DataType::Float32: x = static_cast<float>(uniform_real(rng, -1e6, 1e6)); break;
        }
      }
      const auto p = tmp / ("v" + std::to_string(trips) + ext);
      c.expect(round_trips(v, p, dt), "volume " + std::string(to_string(dt)) + " " + ext);
      const auto labels = brainnet::testing::random_labels(rng, d, v.spacing());
      c.expect(round_trips(labels, tmp / ("l" + std::to_string(trips) + ext), dt),
               "labels " + std::string(to_string(dt)) + " " + ext);
      ++trips;
    }
    Grid<std::int16_t> i16(brainnet::testing::random_dims(rng, 1, 9));
    for (auto& x : i16) x = static_cast<std::int16_t>(uniform_size(rng, 0, 65535) - 32768);
    c.expect(round_trips(i16, tmp / (std::string("i16") + ext), nifti::DataType::Int16), std::string("int16 grid ") + ext);
    Grid<std::int32_t> i32(brainnet::testing::random_dims(rng, 1, 9));
    for (auto& x : i32) x = static_cast<std::int32_t>(rng());
    c.expect(round_trips(i32, tmp / (std::string("i32") + ext), nifti::DataType::Int32), std::string("int32 grid ") + ext);
  }

  // Mutation fuzzing of the header parser and decoder. Every input must either
  // decode or raise brainnet::Error; any single allocation is bounded by the
  // input size (a float grid is at most 4 bytes per input byte) plus slack.
  const char* env = std::getenv("BRAINNET_FUZZ_SECONDS");
  const double budget = env ? std::atof(env) : 600.0;
  const auto seeds = fuzz_seeds(rng);
  const auto t0 = Clock::now();
  std::size_t runs = 0, accepted = 0, max_alloc = 0;
  while (seconds_since(t0) < budget) {
    for (int batch = 0; batch < 256; ++batch, ++runs) {
      auto input = seeds[uniform_size(rng, 0, seeds.size() - 1)];
      mutate(input, rng, seeds);
      const auto bytes = std::span<const std::byte>(input);
      g_largest = 0;
      g_track = true;
      try {
        const auto h = nifti::parse_header(bytes, bytes.size());
        (void)nifti::decode_data<float>(h, bytes);
        (void)nifti::decode<Label>(bytes);
        ++accepted;
      } catch (const Error&) {
      } catch (const std::exception& e) {
        g_track = false;
        c.expect(false, std::string("unexpected exception: ") + e.what());
      }
      g_track = false;
      max_alloc = std::max(max_alloc, g_largest);
      c.expect(g_largest <= 4 * input.size() + 65536,
               "allocation of " + std::to_string(g_largest) + " bytes for a " + std::to_string(input.size()) + "-byte input");
    }
  }
  return c.outcome(std::to_string(trips * 2 + 6) + " round trips; " + std::to_string(runs) + " fuzz inputs in " +
                   fmt(seconds_since(t0), 4) + " s, " + std::to_string(accepted) + " decoded, largest allocation " +
                   std::to_string(max_alloc) + " bytes");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "metric oracle equivalence", metric_oracle_equivalence},
      {2, "metric identities", metric_identities},
      {3, "ensemble correctness", ensemble_correctness},
      {4, "slicing round trip", slicing_round_trip},
      {5, "loss gradient checks", loss_gradients},
      {6, "LR schedule", lr_schedule},
      {7, "preprocessing", preprocessing},
      {8, "report fidelity", report_fidelity},
      {9, "dataset global crop", dataset_crop},
      {10, "I/O robustness", io_robustness},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
    failed += o.status == Status::Fail;
    std::printf("%s  %2d  %s: %s\n", tag, cr.id, cr.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}


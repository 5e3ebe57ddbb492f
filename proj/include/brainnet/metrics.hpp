#pragma once

// Dice coefficient and percentile Hausdorff distance between binary masks.
//
// Conventions:
//  * distances are Euclidean, in mm, between boundary (surface) voxel
//    centres; a boundary voxel is a mask voxel with at least one of its six
//    face neighbours outside the mask or outside the grid;
//  * HD95 = max(P95 of directed distances X->Y, P95 of Y->X), with P95 the
//    linearly interpolated percentile of the sorted distances;
//  * both masks empty: dice 1, hd95 0; exactly one empty: dice 0, hd95
//    undefined.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet {

struct Point3 {
  double x, y, z;
};

inline constexpr std::string_view kPercentileMethod = "linear";

enum class DistanceMethod : std::uint8_t { DistanceTransform, BruteForce };

inline void require_same_geometry(const BinaryMask& x, const BinaryMask& y) {
  if (!(x.dims() == y.dims()) || !(x.spacing() == y.spacing()))
    fail(ErrorCode::ShapeMismatch, "mask pair differs in dims or spacing");
}

inline std::size_t count_nonzero(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

/// 2|X∩Y| / (|X|+|Y|); 1.0 when both are empty.
inline double dice_coefficient(const BinaryMask& x, const BinaryMask& y) {
  require_same_geometry(x, y);
  std::size_t inter = 0, nx = 0, ny = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool a = x[i] != 0;
    const bool b = y[i] != 0;
    nx += a;
    ny += b;
    inter += a && b;
  }
  if (nx + ny == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(nx + ny);
}

inline BinaryMask boundary_mask(const BinaryMask& m) {
  const auto& d = m.dims();
  BinaryMask out = m.like<std::uint8_t>();
  const std::array<std::size_t, 3> n{d.nx, d.ny, d.nz};
  std::size_t i = 0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x, ++i) {
        if (!m[i]) continue;
        const std::array<std::size_t, 3> p{x, y, z};
        bool edge = false;
        for (std::size_t a = 0; a < 3 && !edge; ++a) {
          if (p[a] == 0 || p[a] + 1 == n[a]) {
            edge = true;
            break;
          }
          auto q = p;
          q[a] = p[a] - 1;
          edge = !m(q[0], q[1], q[2]);
          q[a] = p[a] + 1;
          edge = edge || !m(q[0], q[1], q[2]);
        }
        out[i] = edge ? 1 : 0;
      }
  return out;
}

inline Point3 voxel_center_mm(const Spacing& s, std::size_t x, std::size_t y, std::size_t z) {
  return {static_cast<double>(x) * s.sx, static_cast<double>(y) * s.sy, static_cast<double>(z) * s.sz};
}

/// Boundary voxel centres in mm, in grid (x-fastest) order.
inline std::vector<Point3> boundary_voxels(const BinaryMask& m) {
  const BinaryMask b = boundary_mask(m);
  const auto& d = b.dims();
  std::vector<Point3> pts;
  std::size_t i = 0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x, ++i)
        if (b[i]) pts.push_back(voxel_center_mm(b.spacing(), x, y, z));
  return pts;
}

// ---------------------------------------------------------------------------
// Exact squared Euclidean distance transform (separable lower envelope of
// parabolas), anisotropic spacing supported.

namespace metrics_detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// In-place 1D pass over `f` (n samples, stride apart, sample spacing `w`).
inline void edt_1d(double* f, std::size_t n, std::size_t stride, double w, std::vector<double>& buf,
                   std::vector<std::size_t>& v, std::vector<double>& z) {
  buf.resize(n);
  v.resize(n);
  z.resize(n + 1);
  const double w2 = w * w;
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    buf[q] = f[q * stride];
    if (buf[q] == kInf) continue;
    if (!any) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      any = true;
      continue;
    }
    const double fq = buf[q] + w2 * static_cast<double>(q) * static_cast<double>(q);
    double s;
    while (true) {
      const double vk = static_cast<double>(v[k]);
      s = (fq - (buf[v[k]] + w2 * vk * vk)) / (2.0 * w2 * (static_cast<double>(q) - vk));
      if (s > z[k]) break;  // z[0] = -inf stops the walk
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (!any) return;  // column stays at +inf
  k = 0;
  for (std::size_t p = 0; p < n; ++p) {
    while (z[k + 1] < static_cast<double>(p)) ++k;
    const double dp = w * (static_cast<double>(p) - static_cast<double>(v[k]));
    f[p * stride] = buf[v[k]] + dp * dp;
  }
}

struct Box {
  std::array<std::size_t, 3> lo;
  std::array<std::size_t, 3> hi;  // exclusive
  std::array<std::size_t, 3> extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
};

inline std::optional<Box> nonzero_box(const BinaryMask& a, const BinaryMask& b) {
  const auto& d = a.dims();
  Box box{{d.nx, d.ny, d.nz}, {0, 0, 0}};
  bool any = false;
  std::size_t i = 0;
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t x = 0; x < d.nx; ++x, ++i)
        if (a[i] || b[i]) {
          any = true;
          const std::array<std::size_t, 3> p{x, y, z};
          for (std::size_t ax = 0; ax < 3; ++ax) {
            box.lo[ax] = std::min(box.lo[ax], p[ax]);
            box.hi[ax] = std::max(box.hi[ax], p[ax] + 1);
          }
        }
  if (!any) return std::nullopt;
  return box;
}

/// Squared mm distance from every voxel of `box` to the nearest set voxel of
/// `set` (which must lie inside `box`). Row-major over the box, x fastest.
inline std::vector<double> squared_edt(const BinaryMask& set, const Box& box) {
  const auto e = box.extent();
  std::vector<double> f(e[0] * e[1] * e[2]);
  std::size_t i = 0;
  for (std::size_t z = 0; z < e[2]; ++z)
    for (std::size_t y = 0; y < e[1]; ++y)
      for (std::size_t x = 0; x < e[0]; ++x, ++i)
        f[i] = set(x + box.lo[0], y + box.lo[1], z + box.lo[2]) ? 0.0 : kInf;

  std::vector<double> buf, z_;
  std::vector<std::size_t> v;
  const std::array<std::size_t, 3> stride{1, e[0], e[0] * e[1]};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const std::size_t a1 = axis == 0 ? 1 : 0;
    const std::size_t a2 = axis == 2 ? 1 : 2;
    for (std::size_t j = 0; j < e[a2]; ++j)
      for (std::size_t k = 0; k < e[a1]; ++k)
        edt_1d(f.data() + k * stride[a1] + j * stride[a2], e[axis], stride[axis], set.spacing()[axis], buf, v, z_);
  }
  return f;
}

inline double squared_mm(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace metrics_detail

/// Linearly interpolated percentile (q in [0,100]) of an ascending sequence.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) fail(ErrorCode::OutOfRange, "percentile must lie in [0,100]");
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Distances from each boundary voxel of `from` to the boundary of `to`,
/// sorted ascending. Both masks must be nonempty.
inline std::vector<double> directed_surface_distances(const BinaryMask& from, const BinaryMask& to,
                                                      DistanceMethod method = DistanceMethod::DistanceTransform) {
  require_same_geometry(from, to);
  const BinaryMask bf = boundary_mask(from);
  const BinaryMask bt = boundary_mask(to);
  std::vector<double> out;
  if (method == DistanceMethod::BruteForce) {
    const auto pf = boundary_voxels(from);
    const auto pt = boundary_voxels(to);
    if (pt.empty()) fail(ErrorCode::InvalidArgument, "target mask is empty");
    out.reserve(pf.size());
    for (const auto& p : pf) {
      double best = metrics_detail::kInf;
      for (const auto& q : pt) best = std::min(best, metrics_detail::squared_mm(p, q));
      out.push_back(std::sqrt(best));
    }
  } else {
    const auto box = metrics_detail::nonzero_box(bf, bt);
    if (!box || count_nonzero(bt) == 0) fail(ErrorCode::InvalidArgument, "target mask is empty");
    const auto dt = metrics_detail::squared_edt(bt, *box);
    const auto e = box->extent();
    std::size_t i = 0;
    for (std::size_t z = 0; z < e[2]; ++z)
      for (std::size_t y = 0; y < e[1]; ++y)
        for (std::size_t x = 0; x < e[0]; ++x, ++i)
          if (bf(x + box->lo[0], y + box->lo[1], z + box->lo[2])) out.push_back(std::sqrt(dt[i]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// max of the two directed `q`-th percentiles; nullopt if exactly one mask is
/// empty, 0 if both are.
inline std::optional<double> hausdorff_percentile(const BinaryMask& x, const BinaryMask& y, double q,
                                                  DistanceMethod method = DistanceMethod::DistanceTransform) {
  require_same_geometry(x, y);
  const bool ex = count_nonzero(x) == 0;
  const bool ey = count_nonzero(y) == 0;
  if (ex && ey) return 0.0;
  if (ex || ey) return std::nullopt;
  const auto xy = directed_surface_distances(x, y, method);
  const auto yx = directed_surface_distances(y, x, method);
  return std::max(percentile_sorted(xy, q), percentile_sorted(yx, q));
}

inline std::optional<double> hausdorff95(const BinaryMask& x, const BinaryMask& y,
                                         DistanceMethod method = DistanceMethod::DistanceTransform) {
  return hausdorff_percentile(x, y, 95.0, method);
}

inline std::optional<double> hausdorff_distance(const BinaryMask& x, const BinaryMask& y,
                                                DistanceMethod method = DistanceMethod::DistanceTransform) {
  return hausdorff_percentile(x, y, 100.0, method);
}

// ---------------------------------------------------------------------------

enum MetricFlags : std::uint8_t {
  kFlagNone = 0,
  kFlagGtEmpty = 1,
  kFlagPredEmpty = 2,
};

inline std::string flags_to_string(std::uint8_t f) {
  if ((f & kFlagGtEmpty) && (f & kFlagPredEmpty)) return "both_empty";
  if (f & kFlagGtEmpty) return "gt_empty";
  if (f & kFlagPredEmpty) return "pred_empty";
  return "";
}

struct RegionMetrics {
  Region region = Region::TC;
  double dice = 0.0;
  std::optional<double> hd95;  // nullopt = undefined (exactly one mask empty)
  std::uint8_t flags = kFlagNone;
};

using SubjectMetrics = std::array<RegionMetrics, 3>;  // TC, WT, ET

inline RegionMetrics evaluate_region(const BinaryMask& gt, const BinaryMask& pred, Region region,
                                     DistanceMethod method = DistanceMethod::DistanceTransform) {
  RegionMetrics r;
  r.region = region;
  r.dice = dice_coefficient(gt, pred);
  r.hd95 = hausdorff95(gt, pred, method);
  if (count_nonzero(gt) == 0) r.flags |= kFlagGtEmpty;
  if (count_nonzero(pred) == 0) r.flags |= kFlagPredEmpty;
  return r;
}

inline SubjectMetrics evaluate_subject(const LabelVolume& gt, const LabelVolume& pred,
                                       DistanceMethod method = DistanceMethod::DistanceTransform) {
  if (!(gt.dims() == pred.dims()) || !(gt.spacing() == pred.spacing()))
    fail(ErrorCode::ShapeMismatch, "ground truth and prediction differ in dims or spacing");
  SubjectMetrics out;
  for (std::size_t k = 0; k < 3; ++k)
    out[k] = evaluate_region(compose_region(gt, kAllRegions[k]), compose_region(pred, kAllRegions[k]), kAllRegions[k],
                             method);
  return out;
}

/// Per-region means. Dice averages every subject; HD95 averages the defined
/// values and reports how many were undefined.
struct RegionSummary {
  Region region = Region::TC;
  double mean_dice = 0.0;
  std::optional<double> mean_hd95;
  std::size_t subjects = 0;
  std::size_t hd95_undefined = 0;
};

inline std::array<RegionSummary, 3> aggregate(std::span<const SubjectMetrics> subjects) {
  std::array<RegionSummary, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k].region = kAllRegions[k];
    double dice_sum = 0.0, hd_sum = 0.0;
    std::size_t hd_n = 0;
    for (const auto& s : subjects) {
      dice_sum += s[k].dice;
      if (s[k].hd95) {
        hd_sum += *s[k].hd95;
        ++hd_n;
      } else {
        ++out[k].hd95_undefined;
      }
    }
    out[k].subjects = subjects.size();
    if (!subjects.empty()) out[k].mean_dice = dice_sum / static_cast<double>(subjects.size());
    if (hd_n > 0) out[k].mean_hd95 = hd_sum / static_cast<double>(hd_n);
  }
  return out;
}

}  // namespace brainnet

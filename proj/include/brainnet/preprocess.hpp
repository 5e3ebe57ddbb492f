#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet {

enum class CropMode : std::uint8_t { PerSubject, Global };

constexpr std::string_view to_string(CropMode m) noexcept { return m == CropMode::Global ? "global" : "per-subject"; }

inline CropMode parse_crop_mode(std::string_view s) {
  if (s == "global") return CropMode::Global;
  if (s == "per-subject") return CropMode::PerSubject;
  fail(ErrorCode::InvalidArgument, "unknown crop mode '" + std::string(s) + "'");
}

/// Inclusive voxel ranges per grid axis.
struct CropBox {
  std::array<std::size_t, 3> lo{0, 0, 0};
  std::array<std::size_t, 3> hi{0, 0, 0};

  Dims extents() const noexcept { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }

  bool fits(const Dims& d) const noexcept {
    for (std::size_t a = 0; a < 3; ++a)
      if (lo[a] > hi[a] || hi[a] >= d[a]) return false;
    return true;
  }

  static CropBox full(const Dims& d) { return {{0, 0, 0}, {d.nx - 1, d.ny - 1, d.nz - 1}}; }

  friend bool operator==(const CropBox&, const CropBox&) = default;
};

/// Running bounding box of nonzero voxels. Lets the global crop be computed
/// one volume at a time over a whole dataset.
class NonzeroBounds {
 public:
  template <class T>
  void add(const Grid<T>& g) {
    if (dims_ && !(*dims_ == g.dims())) fail(ErrorCode::ShapeMismatch, "volumes passed to crop box differ in dims");
    dims_ = g.dims();
    const auto& d = g.dims();
    std::size_t i = 0;
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x, ++i) {
          if (g[i] == T{}) continue;
          include({x, y, z});
        }
  }

  void merge(const NonzeroBounds& other) {
    if (!other.dims_) return;
    if (dims_ && !(*dims_ == *other.dims_)) fail(ErrorCode::ShapeMismatch, "volumes passed to crop box differ in dims");
    dims_ = other.dims_;
    if (other.any_) {
      include(other.box_.lo);
      include(other.box_.hi);
    }
  }

  bool empty() const noexcept { return !any_; }
  const std::optional<Dims>& dims() const noexcept { return dims_; }

  CropBox box() const {
    if (!dims_) fail(ErrorCode::InvalidArgument, "no volumes given");
    if (!any_) fail(ErrorCode::AllZero, "every voxel of every volume is zero");
    return box_;
  }

 private:
  void include(const std::array<std::size_t, 3>& p) {
    if (!any_) {
      box_.lo = p;
      box_.hi = p;
      any_ = true;
      return;
    }
    for (std::size_t a = 0; a < 3; ++a) {
      box_.lo[a] = std::min(box_.lo[a], p[a]);
      box_.hi[a] = std::max(box_.hi[a], p[a]);
    }
  }

  std::optional<Dims> dims_;
  CropBox box_{};
  bool any_ = false;
};

/// Smallest box holding every nonzero voxel of any input. A zero plane is one
/// where every voxel is exactly 0.0. `mode` only documents intent: PerSubject
/// callers pass one subject's modalities, Global callers pass every volume in
/// the dataset (or fold NonzeroBounds across subjects).
inline CropBox compute_crop_box(std::span<const Volume> vols, CropMode mode = CropMode::Global) {
  (void)mode;
  if (vols.empty()) fail(ErrorCode::InvalidArgument, "compute_crop_box needs at least one volume");
  NonzeroBounds bounds;
  for (const auto& v : vols) bounds.add(v);
  return bounds.box();
}

template <class T>
Grid<T> apply_crop(const Grid<T>& g, const CropBox& box) {
  if (!box.fits(g.dims())) fail(ErrorCode::OutOfBounds, "crop box exceeds volume dims");
  const Dims e = box.extents();
  Grid<T> out(e, g.spacing());
  out.modality = g.modality;
  out.source = g.source;
  std::size_t i = 0;
  for (std::size_t z = 0; z < e.nz; ++z)
    for (std::size_t y = 0; y < e.ny; ++y)
      for (std::size_t x = 0; x < e.nx; ++x, ++i) out[i] = g(x + box.lo[0], y + box.lo[1], z + box.lo[2]);
  return out;
}

/// Inverse of apply_crop: pads a cropped grid back into `original` dims with
/// `fill` outside the box.
template <class T>
Grid<T> uncrop(const Grid<T>& cropped, const CropBox& box, const Dims& original, T fill = T{}) {
  if (!box.fits(original)) fail(ErrorCode::OutOfBounds, "crop box exceeds original dims");
  if (!(cropped.dims() == box.extents())) fail(ErrorCode::ShapeMismatch, "cropped grid does not match box extents");
  Grid<T> out(original, cropped.spacing(), fill);
  out.modality = cropped.modality;
  out.source = cropped.source;
  const Dims e = box.extents();
  std::size_t i = 0;
  for (std::size_t z = 0; z < e.nz; ++z)
    for (std::size_t y = 0; y < e.ny; ++y)
      for (std::size_t x = 0; x < e.nx; ++x, ++i) out(x + box.lo[0], y + box.lo[1], z + box.lo[2]) = cropped[i];
  return out;
}

/// Min-max scaling to [0,1]. Constant volumes map to all zeros.
inline Volume normalize_minmax(const Volume& v) {
  const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  const double mn = *mn_it;
  const double mx = *mx_it;
  Volume out = v.like<float>();
  if (mx == mn) return out;
  const double range = mx - mn;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>((static_cast<double>(v[i]) - mn) / range);
  return out;
}

// ---------------------------------------------------------------------------
// RGB mapping

struct RgbSlice {
  std::size_t width = 0;
  std::size_t height = 0;
  std::array<std::vector<float>, 3> channels;  // R, G, B
  Axis axis = Axis::Axial;
  std::size_t index = 0;

  float& at(std::size_t c, std::size_t u, std::size_t v) noexcept { return channels[c][u + width * v]; }
  float at(std::size_t c, std::size_t u, std::size_t v) const noexcept { return channels[c][u + width * v]; }
  friend bool operator==(const RgbSlice&, const RgbSlice&) = default;
};

/// Modality feeding each of R, G, B. Must be a permutation of FLAIR/T1/T1GD.
struct ChannelOrder {
  std::array<Modality, 3> rgb{Modality::FLAIR, Modality::T1, Modality::T1GD};

  void validate() const {
    auto sorted = rgb;
    std::sort(sorted.begin(), sorted.end());
    std::array<Modality, 3> want{Modality::T1, Modality::T1GD, Modality::FLAIR};
    std::sort(want.begin(), want.end());
    if (sorted != want) fail(ErrorCode::InvalidArgument, "channel order must be a permutation of FLAIR, T1, T1GD");
  }
};

/// Builds one RGB slice per position along `axis`. T2 has no parameter here
/// on purpose: it is never mapped.
inline std::vector<RgbSlice> map_channels_rgb(const Volume& flair, const Volume& t1, const Volume& t1gd, Axis axis,
                                              const ChannelOrder& order = {}, const AxisMap& axes = {}) {
  order.validate();
  if (!(flair.dims() == t1.dims()) || !(flair.dims() == t1gd.dims()))
    fail(ErrorCode::ShapeMismatch, "FLAIR, T1 and T1GD volumes differ in dims");
  for (const Volume* v : {&flair, &t1, &t1gd})
    for (float x : *v)
      if (!(x >= 0.0f && x <= 1.0f)) fail(ErrorCode::RangeError, "channel value outside [0,1]; normalise first");

  auto source_for = [&](Modality m) -> const Volume& {
    switch (m) {
      case Modality::FLAIR: return flair;
      case Modality::T1: return t1;
      default: return t1gd;
    }
  };
  std::array<SlicePack<float>, 3> packs{extract_slices(source_for(order.rgb[0]), axis, axes),
                                        extract_slices(source_for(order.rgb[1]), axis, axes),
                                        extract_slices(source_for(order.rgb[2]), axis, axes)};
  std::vector<RgbSlice> out;
  out.reserve(packs[0].slices.size());
  for (std::size_t n = 0; n < packs[0].slices.size(); ++n) {
    RgbSlice s;
    s.width = packs[0].slices[n].width;
    s.height = packs[0].slices[n].height;
    s.axis = axis;
    s.index = packs[0].indices[n];
    for (std::size_t c = 0; c < 3; ++c) s.channels[c] = std::move(packs[c].slices[n].data);
    out.push_back(std::move(s));
  }
  return out;
}

/// Nearest-neighbour label resampling. Source index for output position o is
/// floor((o + 0.5) * in / out), evaluated in integers.
inline Image2D<std::uint8_t> resample_mask_nearest(const Image2D<std::uint8_t>& mask, std::size_t target_h,
                                                   std::size_t target_w) {
  if (target_h == 0 || target_w == 0) fail(ErrorCode::InvalidArgument, "target dims must be positive");
  if (mask.width == 0 || mask.height == 0) fail(ErrorCode::InvalidArgument, "empty input mask");
  Image2D<std::uint8_t> out(target_w, target_h);
  for (std::size_t v = 0; v < target_h; ++v) {
    const std::size_t sv = ((2 * v + 1) * mask.height) / (2 * target_h);
    for (std::size_t u = 0; u < target_w; ++u) {
      const std::size_t su = ((2 * u + 1) * mask.width) / (2 * target_w);
      out(u, v) = mask(su, sv);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// 8-bit quantisation used for PNG export: round half up, q = floor(v*255 + 0.5).

inline std::uint8_t quantize_unit(float v) {
  const double q = std::floor(static_cast<double>(std::clamp(v, 0.0f, 1.0f)) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(q);
}

inline float dequantize_unit(std::uint8_t q) { return static_cast<float>(q) / 255.0f; }

}  // namespace brainnet

#pragma once

// Voxel-grid data model, orthogonal slicing/reassembly and tumor-region
// composition.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "brainnet/error.hpp"

namespace brainnet {

struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  constexpr std::size_t voxel_count() const noexcept { return nx * ny * nz; }
  constexpr std::size_t operator[](std::size_t axis) const noexcept {
    return axis == 0 ? nx : (axis == 1 ? ny : nz);
  }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  constexpr double operator[](std::size_t axis) const noexcept {
    return axis == 0 ? sx : (axis == 1 ? sy : sz);
  }
  friend constexpr bool operator==(const Spacing&, const Spacing&) = default;
};

enum class Modality : std::uint8_t { T1, T1GD, T2, FLAIR, Other };

constexpr std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::T1: return "T1";
    case Modality::T1GD: return "T1GD";
    case Modality::T2: return "T2";
    case Modality::FLAIR: return "FLAIR";
    case Modality::Other: return "Other";
  }
  return "Other";
}

inline Modality parse_modality(std::string_view s) {
  for (auto m : {Modality::T1, Modality::T1GD, Modality::T2, Modality::FLAIR, Modality::Other})
    if (s == to_string(m)) return m;
  fail(ErrorCode::InvalidArgument, "unknown modality '" + std::string(s) + "'");
}

/// BraTS label encoding. The integer values are what ends up on disk.
enum class Label : std::uint8_t { Else = 0, NCR = 1, ED = 2, ET = 4 };

inline constexpr std::array<Label, 4> kAllLabels = {Label::Else, Label::NCR, Label::ED, Label::ET};

constexpr bool is_valid_label(long long v) noexcept { return v == 0 || v == 1 || v == 2 || v == 4; }

inline Label to_label(long long v) {
  if (!is_valid_label(v)) fail(ErrorCode::BadLabel, "label value " + std::to_string(v) + " not in {0,1,2,4}");
  return static_cast<Label>(v);
}

/// Dense slot 0..3 for a label, used by vote counters.
constexpr std::size_t label_slot(Label l) noexcept {
  switch (l) {
    case Label::Else: return 0;
    case Label::NCR: return 1;
    case Label::ED: return 2;
    case Label::ET: return 3;
  }
  return 0;
}

constexpr std::string_view to_string(Label l) noexcept {
  switch (l) {
    case Label::Else: return "Else";
    case Label::NCR: return "NCR";
    case Label::ED: return "ED";
    case Label::ET: return "ET";
  }
  return "Else";
}

inline Label parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (s == to_string(l)) return l;
  fail(ErrorCode::InvalidArgument, "unknown label '" + std::string(s) + "'");
}

/// Dense 3D grid, x fastest: index = x + nx * (y + ny * z).
///
/// `modality` is meaningful for intensity volumes, `source` records
/// provenance for label volumes ("ground-truth", a model id, "ensemble").
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  explicit Grid(Dims dims, Spacing spacing = {}, T fill = T{})
      : dims_(checked_dims(dims)), spacing_(checked_spacing(spacing)), data_(dims.voxel_count(), fill) {}

  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(checked_dims(dims)), spacing_(checked_spacing(spacing)), data_(std::move(data)) {
    if (data_.size() != dims_.voxel_count())
      fail(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) + " != " +
                                         std::to_string(dims_.voxel_count()) + " voxels");
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_.nx * (y + dims_.ny * z);
  }

  T& operator()(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[index(x, y, z)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept { return data_[index(x, y, z)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  /// Same geometry and metadata, new contents.
  template <class U>
  Grid<U> like(U fill = U{}) const {
    Grid<U> out(dims_, spacing_, fill);
    out.modality = modality;
    out.source = source;
    return out;
  }

  Modality modality = Modality::Other;
  std::string source;

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dims_ == b.dims_ && a.spacing_ == b.spacing_ && a.data_ == b.data_;
  }

 private:
  static Dims checked_dims(Dims d) {
    if (d.nx == 0 || d.ny == 0 || d.nz == 0) fail(ErrorCode::InvalidArgument, "grid dims must be positive");
    return d;
  }
  static Spacing checked_spacing(Spacing s) {
    for (std::size_t a = 0; a < 3; ++a)
      if (!(s[a] > 0.0) || !std::isfinite(s[a])) fail(ErrorCode::InvalidArgument, "spacing must be positive and finite");
    return s;
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_ = std::vector<T>(1);
};

using Volume = Grid<float>;
using LabelVolume = Grid<Label>;
/// Values in {0,1}.
using BinaryMask = Grid<std::uint8_t>;

inline void require_finite(const Volume& v) {
  for (float x : v)
    if (!std::isfinite(x)) fail(ErrorCode::NonFiniteValue, "volume contains a non-finite value");
}

inline LabelVolume to_label_volume(const Grid<std::uint8_t>& raw) {
  LabelVolume out = raw.like<Label>();
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = to_label(raw[i]);
  return out;
}

/// Row-major 2D image; `width` is the fast in-plane axis.
template <class T>
struct Image2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  Image2D() = default;
  Image2D(std::size_t w, std::size_t h, T fill = T{}) : width(w), height(h), data(w * h, fill) {}

  T& operator()(std::size_t u, std::size_t v) noexcept { return data[u + width * v]; }
  const T& operator()(std::size_t u, std::size_t v) const noexcept { return data[u + width * v]; }
  friend bool operator==(const Image2D&, const Image2D&) = default;
};

// ---------------------------------------------------------------------------
// Axes

enum class Axis : std::uint8_t { Axial, Sagittal, Coronal };

inline constexpr std::array<Axis, 3> kAllAxes = {Axis::Axial, Axis::Sagittal, Axis::Coronal};

constexpr std::string_view to_string(Axis a) noexcept {
  switch (a) {
    case Axis::Axial: return "axial";
    case Axis::Sagittal: return "sagittal";
    case Axis::Coronal: return "coronal";
  }
  return "axial";
}

inline Axis parse_axis(std::string_view s) {
  for (auto a : kAllAxes)
    if (s == to_string(a)) return a;
  fail(ErrorCode::InvalidArgument, "unknown axis '" + std::string(s) + "'");
}

/// Which grid axis (0=x, 1=y, 2=z) each anatomical plane is perpendicular to.
/// Default: axial⊥z, sagittal⊥x, coronal⊥y.
struct AxisMap {
  std::size_t axial = 2;
  std::size_t sagittal = 0;
  std::size_t coronal = 1;

  std::size_t normal(Axis a) const {
    validate();
    switch (a) {
      case Axis::Axial: return axial;
      case Axis::Sagittal: return sagittal;
      case Axis::Coronal: return coronal;
    }
    return axial;
  }

  void validate() const {
    if (axial > 2 || sagittal > 2 || coronal > 2 || axial == sagittal || axial == coronal || sagittal == coronal)
      fail(ErrorCode::InvalidArgument, "axis map must be a bijection onto {x,y,z}");
  }
};

/// In-plane layout for slices perpendicular to grid axis `normal`: the two
/// remaining grid axes in increasing order become (u = width, v = height).
struct PlaneLayout {
  std::size_t normal;
  std::size_t u;
  std::size_t v;

  static PlaneLayout for_normal(std::size_t normal) {
    switch (normal) {
      case 0: return {0, 1, 2};
      case 1: return {1, 0, 2};
      default: return {2, 0, 1};
    }
  }
};

namespace detail {
inline std::array<std::size_t, 3> strides(const Dims& d) { return {1, d.nx, d.nx * d.ny}; }
}  // namespace detail

template <class T>
struct SlicePack {
  Axis axis = Axis::Axial;
  std::size_t normal = 2;  // grid axis the slices are perpendicular to
  Dims origin_dims{};
  Spacing spacing{};
  Modality modality = Modality::Other;
  std::string source;
  std::vector<Image2D<T>> slices;
  std::vector<std::size_t> indices;  // 0-based position along `normal`
  bool partial = false;
};

template <class T>
SlicePack<T> extract_slices(const Grid<T>& vol, Axis axis, const AxisMap& map = {}) {
  const auto layout = PlaneLayout::for_normal(map.normal(axis));
  const auto& d = vol.dims();
  const auto s = detail::strides(d);
  const std::size_t extent = d[layout.normal];
  const std::size_t w = d[layout.u];
  const std::size_t h = d[layout.v];

  SlicePack<T> pack;
  pack.axis = axis;
  pack.normal = layout.normal;
  pack.origin_dims = d;
  pack.spacing = vol.spacing();
  pack.modality = vol.modality;
  pack.source = vol.source;
  pack.slices.reserve(extent);
  pack.indices.reserve(extent);
  for (std::size_t k = 0; k < extent; ++k) {
    Image2D<T> img(w, h);
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < w; ++i)
        img(i, j) = vol[k * s[layout.normal] + i * s[layout.u] + j * s[layout.v]];
    pack.slices.push_back(std::move(img));
    pack.indices.push_back(k);
  }
  return pack;
}

template <class T>
Grid<T> reassemble(const SlicePack<T>& pack) {
  const auto layout = PlaneLayout::for_normal(pack.normal);
  const auto& d = pack.origin_dims;
  const std::size_t extent = d[layout.normal];
  if (pack.indices.size() != pack.slices.size())
    fail(ErrorCode::ShapeMismatch, "slice count does not match index count");

  std::vector<bool> seen(extent, false);
  for (std::size_t idx : pack.indices) {
    if (idx >= extent) fail(ErrorCode::ShapeMismatch, "slice index " + std::to_string(idx) + " outside extent");
    if (seen[idx]) fail(ErrorCode::ShapeMismatch, "duplicate slice index " + std::to_string(idx));
    seen[idx] = true;
  }
  for (std::size_t k = 0; k < extent; ++k)
    if (!seen[k]) fail(ErrorCode::IncompletePack, "missing slice index " + std::to_string(k));

  const std::size_t w = d[layout.u];
  const std::size_t h = d[layout.v];
  for (const auto& img : pack.slices)
    if (img.width != w || img.height != h || img.data.size() != w * h)
      fail(ErrorCode::ShapeMismatch, "slice of shape " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                         " in pack expecting " + std::to_string(w) + "x" + std::to_string(h));

  Grid<T> out(d, pack.spacing);
  out.modality = pack.modality;
  out.source = pack.source;
  const auto s = detail::strides(d);
  for (std::size_t n = 0; n < pack.slices.size(); ++n) {
    const std::size_t k = pack.indices[n];
    const auto& img = pack.slices[n];
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < w; ++i) out[k * s[layout.normal] + i * s[layout.u] + j * s[layout.v]] = img(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tumor regions

enum class Region : std::uint8_t { TC, WT, ET };

inline constexpr std::array<Region, 3> kAllRegions = {Region::TC, Region::WT, Region::ET};

constexpr std::string_view to_string(Region r) noexcept {
  switch (r) {
    case Region::TC: return "TC";
    case Region::WT: return "WT";
    case Region::ET: return "ET";
  }
  return "TC";
}

constexpr bool in_region(Label l, Region r) noexcept {
  switch (r) {
    case Region::TC: return l == Label::NCR || l == Label::ET;
    case Region::WT: return l == Label::NCR || l == Label::ET || l == Label::ED;
    case Region::ET: return l == Label::ET;
  }
  return false;
}

inline BinaryMask compose_region(const LabelVolume& lv, Region region) {
  BinaryMask mask = lv.like<std::uint8_t>();
  for (std::size_t i = 0; i < lv.size(); ++i) mask[i] = in_region(lv[i], region) ? 1 : 0;
  return mask;
}

}  // namespace brainnet

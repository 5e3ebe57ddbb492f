#pragma once

// Seeded 2D augmentation for RGB training slices and their label masks.
//
// Photometric transforms (HSV jitter, gamma jitter) touch the image only.
// Geometric transforms (horizontal flip, random crop resized back to the
// original size) are applied identically to image and mask; the mask is
// resampled with nearest neighbour so label values are never altered.
//
// HSV uses the hexcone model with all components in [0,1]:
//   V = max(R,G,B), S = (V - min) / V (0 when V = 0),
//   H = sector offset of the dominant channel divided by 6, wrapped to [0,1).

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"
#include "brainnet/preprocess.hpp"

namespace brainnet {

struct AugmentPolicy {
  std::string name = "Custom";
  double hsv_jitter_prob = 0.0;
  double gamma_jitter_prob = 0.0;
  double hflip_prob = 0.0;
  double crop_prob = 0.0;
  double crop_min_area_fraction = 0.8;

  double hue_shift = 0.02;  // hue offset drawn from [-hue_shift, hue_shift]
  double saturation_scale_min = 0.9;
  double saturation_scale_max = 1.1;
  double value_scale_min = 0.9;
  double value_scale_max = 1.1;
  double gamma_min = 0.7;
  double gamma_max = 1.5;

  void validate() const {
    for (double p : {hsv_jitter_prob, gamma_jitter_prob, hflip_prob, crop_prob})
      if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidArgument, "probabilities must lie in [0,1]");
    if (!(crop_min_area_fraction > 0.0 && crop_min_area_fraction <= 1.0))
      fail(ErrorCode::InvalidArgument, "crop_min_area_fraction must lie in (0,1]");
    if (!(hue_shift >= 0.0 && hue_shift <= 0.5)) fail(ErrorCode::InvalidArgument, "hue_shift must lie in [0,0.5]");
    if (!(saturation_scale_min > 0.0 && saturation_scale_min <= saturation_scale_max) ||
        !(value_scale_min > 0.0 && value_scale_min <= value_scale_max) || !(gamma_min > 0.0 && gamma_min <= gamma_max))
      fail(ErrorCode::InvalidArgument, "jitter ranges must be positive and ordered");
  }

  friend bool operator==(const AugmentPolicy&, const AugmentPolicy&) = default;
};

inline AugmentPolicy builtin_policy(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  AugmentPolicy p;
  if (lower == "weak") {
    p.name = "Weak";
    p.hsv_jitter_prob = 1.0;
    p.hflip_prob = 0.5;
    p.crop_prob = 0.8;
  } else if (lower == "strong") {
    p.name = "Strong";
    p.gamma_jitter_prob = 0.5;
    p.hflip_prob = 0.3;
    p.crop_prob = 0.2;
  } else {
    fail(ErrorCode::UnknownPolicy, "no built-in augmentation policy named '" + std::string(name) + "'");
  }
  p.crop_min_area_fraction = 0.8;
  return p;
}

inline void to_json(nlohmann::json& j, const AugmentPolicy& p) {
  j = {{"name", p.name},
       {"hsv_jitter_prob", p.hsv_jitter_prob},
       {"gamma_jitter_prob", p.gamma_jitter_prob},
       {"hflip_prob", p.hflip_prob},
       {"crop_prob", p.crop_prob},
       {"crop_min_area_fraction", p.crop_min_area_fraction},
       {"hue_shift", p.hue_shift},
       {"saturation_scale", {p.saturation_scale_min, p.saturation_scale_max}},
       {"value_scale", {p.value_scale_min, p.value_scale_max}},
       {"gamma", {p.gamma_min, p.gamma_max}}};
}

/// Missing keys keep the defaults of the named built-in (or of a blank
/// policy when the name is not a built-in).
inline void from_json(const nlohmann::json& j, AugmentPolicy& p) {
  const std::string name = j.value("name", std::string("Custom"));
  try {
    p = builtin_policy(name);
  } catch (const Error&) {
    p = AugmentPolicy{};
    p.name = name;
  }
  p.hsv_jitter_prob = j.value("hsv_jitter_prob", p.hsv_jitter_prob);
  p.gamma_jitter_prob = j.value("gamma_jitter_prob", p.gamma_jitter_prob);
  p.hflip_prob = j.value("hflip_prob", p.hflip_prob);
  p.crop_prob = j.value("crop_prob", p.crop_prob);
  p.crop_min_area_fraction = j.value("crop_min_area_fraction", p.crop_min_area_fraction);
  p.hue_shift = j.value("hue_shift", p.hue_shift);
  auto range = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto r = j.at(key).get<std::array<double, 2>>();
    lo = r[0];
    hi = r[1];
  };
  range("saturation_scale", p.saturation_scale_min, p.saturation_scale_max);
  range("value_scale", p.value_scale_min, p.value_scale_max);
  range("gamma", p.gamma_min, p.gamma_max);
  p.validate();
}

// ---------------------------------------------------------------------------

struct Hsv {
  float h, s, v;
};

inline Hsv rgb_to_hsv(float r, float g, float b) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float delta = mx - mn;
  Hsv out{0.0f, mx > 0.0f ? delta / mx : 0.0f, mx};
  if (delta > 0.0f) {
    float h;
    if (mx == r) h = (g - b) / delta;
    else if (mx == g) h = 2.0f + (b - r) / delta;
    else h = 4.0f + (r - g) / delta;
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
    out.h = h >= 1.0f ? h - 1.0f : h;
  }
  return out;
}

inline std::array<float, 3> hsv_to_rgb(Hsv c) {
  const float h6 = c.h * 6.0f;
  const float sector = std::floor(h6);
  const float f = h6 - sector;
  const float p = c.v * (1.0f - c.s);
  const float q = c.v * (1.0f - c.s * f);
  const float t = c.v * (1.0f - c.s * (1.0f - f));
  switch (static_cast<int>(sector) % 6) {
    case 0: return {c.v, t, p};
    case 1: return {q, c.v, p};
    case 2: return {p, c.v, t};
    case 3: return {p, q, c.v};
    case 4: return {t, p, c.v};
    default: return {c.v, p, q};
  }
}

struct CropRect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

struct AugmentResult {
  RgbSlice image;
  Image2D<std::uint8_t> mask;
  bool hsv_applied = false;
  bool gamma_applied = false;
  bool flipped = false;
  bool cropped = false;
  CropRect crop;  // region of the input kept, in input pixel coordinates
};

namespace augment_detail {

/// Portable draws on top of mt19937_64 so results do not depend on the
/// standard library's distribution implementations.
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 rng_;
};

inline float bilinear(const std::vector<float>& ch, std::size_t w, const CropRect& r, double su, double sv) {
  su = std::clamp(su, 0.0, static_cast<double>(r.width - 1));
  sv = std::clamp(sv, 0.0, static_cast<double>(r.height - 1));
  const auto u0 = static_cast<std::size_t>(su);
  const auto v0 = static_cast<std::size_t>(sv);
  const std::size_t u1 = std::min(u0 + 1, r.width - 1);
  const std::size_t v1 = std::min(v0 + 1, r.height - 1);
  const double fu = su - static_cast<double>(u0);
  const double fv = sv - static_cast<double>(v0);
  auto px = [&](std::size_t u, std::size_t v) {
    return static_cast<double>(ch[(r.x0 + u) + w * (r.y0 + v)]);
  };
  const double top = px(u0, v0) * (1.0 - fu) + px(u1, v0) * fu;
  const double bot = px(u0, v1) * (1.0 - fu) + px(u1, v1) * fu;
  return static_cast<float>(std::clamp(top * (1.0 - fv) + bot * fv, 0.0, 1.0));
}

}  // namespace augment_detail

inline AugmentResult apply_augmentation(const RgbSlice& img, const Image2D<std::uint8_t>& mask,
                                        const AugmentPolicy& policy, std::uint64_t seed) {
  policy.validate();
  if (img.width != mask.width || img.height != mask.height)
    fail(ErrorCode::ShapeMismatch, "image and mask differ in spatial dims");
  for (const auto& ch : img.channels)
    if (ch.size() != img.width * img.height) fail(ErrorCode::ShapeMismatch, "channel size inconsistent with dims");

  // Fixed draw order: four decisions, then every parameter, whether used or not.
  augment_detail::Draws draw(seed);
  AugmentResult res;
  res.image = img;
  res.mask = mask;
  res.hsv_applied = draw.unit() < policy.hsv_jitter_prob;
  res.gamma_applied = draw.unit() < policy.gamma_jitter_prob;
  res.flipped = draw.unit() < policy.hflip_prob;
  res.cropped = draw.unit() < policy.crop_prob;
  const double hue = draw.uniform(-policy.hue_shift, policy.hue_shift);
  const double sat = draw.uniform(policy.saturation_scale_min, policy.saturation_scale_max);
  const double val = draw.uniform(policy.value_scale_min, policy.value_scale_max);
  const double gamma = draw.uniform(policy.gamma_min, policy.gamma_max);
  const double area = draw.uniform(policy.crop_min_area_fraction, 1.0);
  const double place_u = draw.unit();
  const double place_v = draw.unit();

  const std::size_t w = img.width;
  const std::size_t h = img.height;
  const std::size_t n = w * h;
  auto& ch = res.image.channels;

  if (res.hsv_applied) {
    for (std::size_t i = 0; i < n; ++i) {
      Hsv c = rgb_to_hsv(ch[0][i], ch[1][i], ch[2][i]);
      double hh = c.h + hue;
      hh -= std::floor(hh);
      c.h = static_cast<float>(hh >= 1.0 ? 0.0 : hh);
      c.s = static_cast<float>(std::clamp(c.s * sat, 0.0, 1.0));
      c.v = static_cast<float>(std::clamp(c.v * val, 0.0, 1.0));
      const auto rgb = hsv_to_rgb(c);
      for (std::size_t k = 0; k < 3; ++k) ch[k][i] = std::clamp(rgb[k], 0.0f, 1.0f);
    }
  }
  if (res.gamma_applied) {
    for (auto& c : ch)
      for (auto& x : c) x = static_cast<float>(std::clamp(std::pow(static_cast<double>(x), gamma), 0.0, 1.0));
  }
  if (res.flipped) {
    for (std::size_t v = 0; v < h; ++v) {
      for (auto& c : ch) std::reverse(c.begin() + v * w, c.begin() + (v + 1) * w);
      std::reverse(res.mask.data.begin() + v * w, res.mask.data.begin() + (v + 1) * w);
    }
  }
  res.crop = {0, 0, w, h};
  if (res.cropped) {
    // Same aspect ratio; rounding up keeps the kept area >= the drawn fraction.
    const double scale = std::sqrt(area);
    const std::size_t cw = std::min(w, static_cast<std::size_t>(std::ceil(scale * static_cast<double>(w))));
    const std::size_t chh = std::min(h, static_cast<std::size_t>(std::ceil(scale * static_cast<double>(h))));
    const std::size_t x0 = std::min(w - cw, static_cast<std::size_t>(place_u * static_cast<double>(w - cw + 1)));
    const std::size_t y0 = std::min(h - chh, static_cast<std::size_t>(place_v * static_cast<double>(h - chh + 1)));
    res.crop = {x0, y0, cw, chh};

    RgbSlice resized = res.image;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t v = 0; v < h; ++v)
        for (std::size_t u = 0; u < w; ++u) {
          const double su = (static_cast<double>(u) + 0.5) * static_cast<double>(cw) / static_cast<double>(w) - 0.5;
          const double sv = (static_cast<double>(v) + 0.5) * static_cast<double>(chh) / static_cast<double>(h) - 0.5;
          resized.channels[k][u + w * v] = augment_detail::bilinear(ch[k], w, res.crop, su, sv);
        }
    res.image = std::move(resized);

    Image2D<std::uint8_t> sub(cw, chh);
    for (std::size_t v = 0; v < chh; ++v)
      for (std::size_t u = 0; u < cw; ++u) sub(u, v) = res.mask(x0 + u, y0 + v);
    res.mask = resample_mask_nearest(sub, h, w);
  }
  return res;
}

}  // namespace brainnet

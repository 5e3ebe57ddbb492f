#pragma once

// Mask-classification training loss (weighted cross-entropy + focal + dice)
// and learning-rate schedules, as plain numeric functions with analytic
// gradients. Gradients are with respect to the probability entries of the
// prediction, each treated as an independent variable.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet {

inline constexpr double kProbEpsilon = 1e-7;

/// Per-pixel class probabilities, shape (classes, height, width).
/// Index: c * height * width + u + width * v.
struct SoftPrediction {
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> p;

  SoftPrediction() = default;
  SoftPrediction(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : classes(c), height(h), width(w), p(c * h * w, fill) {}

  std::size_t pixels() const noexcept { return height * width; }
  double& at(std::size_t c, std::size_t i) noexcept { return p[c * pixels() + i]; }
  double at(std::size_t c, std::size_t i) const noexcept { return p[c * pixels() + i]; }

  /// Probabilities in (0,1] and per-pixel sums equal to 1 within `tol`.
  void validate(double tol = 1e-6) const {
    if (classes == 0 || pixels() == 0 || p.size() != classes * pixels())
      fail(ErrorCode::ShapeMismatch, "prediction buffer inconsistent with shape");
    for (std::size_t i = 0; i < pixels(); ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const double v = at(c, i);
        if (!(v > 0.0 && v <= 1.0)) fail(ErrorCode::RangeError, "probability outside (0,1]");
        sum += v;
      }
      if (std::fabs(sum - 1.0) > tol) fail(ErrorCode::RangeError, "class probabilities do not sum to 1");
    }
  }

  /// Softmax over the class axis of a logit buffer of the same layout.
  static SoftPrediction from_logits(std::size_t c, std::size_t h, std::size_t w, const std::vector<double>& logits) {
    SoftPrediction out(c, h, w);
    if (logits.size() != out.p.size()) fail(ErrorCode::ShapeMismatch, "logit buffer inconsistent with shape");
    for (std::size_t i = 0; i < out.pixels(); ++i) {
      double mx = logits[i];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, logits[k * out.pixels() + i]);
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += out.at(k, i) = std::exp(logits[k * out.pixels() + i] - mx);
      for (std::size_t k = 0; k < c; ++k) out.at(k, i) = std::max(out.at(k, i) / sum, kProbEpsilon);
    }
    return out;
  }
};

/// Hard class index per pixel.
using ClassMap = Image2D<std::uint8_t>;

namespace loss_detail {

inline void check(const SoftPrediction& pred, const ClassMap& target) {
  if (pred.p.size() != pred.classes * pred.pixels() || pred.pixels() == 0)
    fail(ErrorCode::ShapeMismatch, "prediction buffer inconsistent with shape");
  if (target.width != pred.width || target.height != pred.height || target.data.size() != pred.pixels())
    fail(ErrorCode::ShapeMismatch, "target shape differs from prediction");
  for (auto t : target.data)
    if (t >= pred.classes) fail(ErrorCode::InvalidArgument, "target class index out of range");
}

inline void check(const Image2D<double>& pred, const Image2D<std::uint8_t>& target) {
  if (pred.width != target.width || pred.height != target.height || pred.data.size() != target.data.size() ||
      pred.data.size() != pred.width * pred.height || pred.data.empty())
    fail(ErrorCode::ShapeMismatch, "soft mask and target differ in shape");
}

inline double clamp_prob(double p) { return std::max(p, kProbEpsilon); }

}  // namespace loss_detail

// --- cross-entropy ---------------------------------------------------------

/// mean over pixels of -log p_true.
inline double cross_entropy_loss(const SoftPrediction& pred, const ClassMap& target) {
  loss_detail::check(pred, target);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.pixels(); ++i) sum += -std::log(loss_detail::clamp_prob(pred.at(target.data[i], i)));
  return sum / static_cast<double>(pred.pixels());
}

inline std::vector<double> cross_entropy_grad(const SoftPrediction& pred, const ClassMap& target) {
  loss_detail::check(pred, target);
  std::vector<double> g(pred.p.size(), 0.0);
  const double n = static_cast<double>(pred.pixels());
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const std::size_t c = target.data[i];
    const double p = pred.at(c, i);
    if (p > kProbEpsilon) g[c * pred.pixels() + i] = -1.0 / (n * p);
  }
  return g;
}

// --- focal -----------------------------------------------------------------

struct FocalParams {
  double gamma = 2.0;
  double alpha = 0.25;

  void validate() const {
    if (!(gamma >= 0.0)) fail(ErrorCode::InvalidArgument, "focal gamma must be >= 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidArgument, "focal alpha must lie in (0,1]");
  }
};

/// mean over pixels of -alpha (1 - p_t)^gamma log p_t.
inline double focal_loss(const SoftPrediction& pred, const ClassMap& target, FocalParams fp = {}) {
  loss_detail::check(pred, target);
  fp.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const double pt = loss_detail::clamp_prob(pred.at(target.data[i], i));
    sum += -fp.alpha * std::pow(1.0 - pt, fp.gamma) * std::log(pt);
  }
  return sum / static_cast<double>(pred.pixels());
}

inline std::vector<double> focal_grad(const SoftPrediction& pred, const ClassMap& target, FocalParams fp = {}) {
  loss_detail::check(pred, target);
  fp.validate();
  std::vector<double> g(pred.p.size(), 0.0);
  const double n = static_cast<double>(pred.pixels());
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const std::size_t c = target.data[i];
    const double pt = pred.at(c, i);
    if (pt <= kProbEpsilon) continue;
    const double q = 1.0 - pt;
    const double modulating = fp.gamma == 0.0 ? 0.0 : fp.gamma * std::pow(q, fp.gamma - 1.0) * std::log(pt);
    g[c * pred.pixels() + i] = fp.alpha * (modulating - std::pow(q, fp.gamma) / pt) / n;
  }
  return g;
}

// --- dice ------------------------------------------------------------------

/// 1 - (2 Σ p g + eps) / (Σ p + Σ g + eps) for a soft foreground mask.
inline double soft_dice_loss(const Image2D<double>& pred, const Image2D<std::uint8_t>& target, double eps_smooth = 1.0) {
  loss_detail::check(pred, target);
  if (!(eps_smooth > 0.0)) fail(ErrorCode::InvalidArgument, "dice smoothing must be positive");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double g = target.data[i] ? 1.0 : 0.0;
    inter += pred.data[i] * g;
    sp += pred.data[i];
    sg += g;
  }
  return 1.0 - (2.0 * inter + eps_smooth) / (sp + sg + eps_smooth);
}

inline Image2D<double> soft_dice_grad(const Image2D<double>& pred, const Image2D<std::uint8_t>& target,
                                      double eps_smooth = 1.0) {
  loss_detail::check(pred, target);
  if (!(eps_smooth > 0.0)) fail(ErrorCode::InvalidArgument, "dice smoothing must be positive");
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double g = target.data[i] ? 1.0 : 0.0;
    inter += pred.data[i] * g;
    sp += pred.data[i];
    sg += g;
  }
  const double num = 2.0 * inter + eps_smooth;
  const double den = sp + sg + eps_smooth;
  Image2D<double> out(pred.width, pred.height);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double g = target.data[i] ? 1.0 : 0.0;
    out.data[i] = -(2.0 * g * den - num) / (den * den);
  }
  return out;
}

// --- combined --------------------------------------------------------------

struct LossWeights {
  double ce = 1.0;
  double focal = 20.0;
  double dice = 20.0;

  void validate() const {
    if (!(ce >= 0.0 && focal >= 0.0 && dice >= 0.0)) fail(ErrorCode::InvalidArgument, "loss weights must be >= 0");
  }
};

struct MaskLossParams {
  LossWeights weights{};
  FocalParams focal{};
  double eps_smooth = 1.0;
};

struct LossBreakdown {
  double ce = 0.0;
  double focal = 0.0;
  double dice = 0.0;  // mean over classes of the per-class binary dice loss
  double total = 0.0;
};

namespace loss_detail {

inline Image2D<double> class_plane(const SoftPrediction& pred, std::size_t c) {
  Image2D<double> out(pred.width, pred.height);
  for (std::size_t i = 0; i < pred.pixels(); ++i) out.data[i] = pred.at(c, i);
  return out;
}

inline Image2D<std::uint8_t> class_target(const ClassMap& target, std::size_t c) {
  Image2D<std::uint8_t> out(target.width, target.height);
  for (std::size_t i = 0; i < target.data.size(); ++i) out.data[i] = target.data[i] == c ? 1 : 0;
  return out;
}

}  // namespace loss_detail

inline double mean_class_dice_loss(const SoftPrediction& pred, const ClassMap& target, double eps_smooth = 1.0) {
  loss_detail::check(pred, target);
  double sum = 0.0;
  for (std::size_t c = 0; c < pred.classes; ++c)
    sum += soft_dice_loss(loss_detail::class_plane(pred, c), loss_detail::class_target(target, c), eps_smooth);
  return sum / static_cast<double>(pred.classes);
}

inline std::vector<double> mean_class_dice_grad(const SoftPrediction& pred, const ClassMap& target,
                                                double eps_smooth = 1.0) {
  loss_detail::check(pred, target);
  std::vector<double> g(pred.p.size(), 0.0);
  for (std::size_t c = 0; c < pred.classes; ++c) {
    const auto gc = soft_dice_grad(loss_detail::class_plane(pred, c), loss_detail::class_target(target, c), eps_smooth);
    for (std::size_t i = 0; i < pred.pixels(); ++i)
      g[c * pred.pixels() + i] = gc.data[i] / static_cast<double>(pred.classes);
  }
  return g;
}

/// Weighted sum of the three components (default weights 1 / 20 / 20).
inline LossBreakdown combined_mask_loss(const SoftPrediction& pred, const ClassMap& target,
                                        const MaskLossParams& params = {}) {
  params.weights.validate();
  LossBreakdown b;
  b.ce = cross_entropy_loss(pred, target);
  b.focal = focal_loss(pred, target, params.focal);
  b.dice = mean_class_dice_loss(pred, target, params.eps_smooth);
  b.total = params.weights.ce * b.ce + params.weights.focal * b.focal + params.weights.dice * b.dice;
  return b;
}

inline std::vector<double> combined_mask_grad(const SoftPrediction& pred, const ClassMap& target,
                                              const MaskLossParams& params = {}) {
  params.weights.validate();
  auto g = cross_entropy_grad(pred, target);
  const auto gf = focal_grad(pred, target, params.focal);
  const auto gd = mean_class_dice_grad(pred, target, params.eps_smooth);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = params.weights.ce * g[i] + params.weights.focal * gf[i] + params.weights.dice * gd[i];
  return g;
}

// --- learning rate ---------------------------------------------------------

enum class LrKind : std::uint8_t { Constant, CosineAnnealing };

struct LrSchedule {
  LrKind kind = LrKind::Constant;
  double initial = 1e-5;
  double minimum = 0.0;
  int total_epochs = 20;

  void validate() const {
    if (!(initial > 0.0)) fail(ErrorCode::InvalidArgument, "initial learning rate must be > 0");
    if (!(minimum >= 0.0 && minimum <= initial)) fail(ErrorCode::InvalidArgument, "minimum must lie in [0, initial]");
    if (total_epochs < 1) fail(ErrorCode::InvalidArgument, "total_epochs must be >= 1");
  }

  /// The two schedules used for fine-tuning: constant 1e-5 for 20 epochs,
  /// and a single cosine anneal from 1e-4 over 15 epochs.
  static LrSchedule constant_default() { return {LrKind::Constant, 1e-5, 0.0, 20}; }
  static LrSchedule cosine_default() { return {LrKind::CosineAnnealing, 1e-4, 0.0, 15}; }
};

/// Per-epoch cosine annealing without restarts:
///   eta(t) = eta_min + (eta_0 - eta_min) (1 + cos(pi t / T)) / 2.
inline double lr_at_epoch(const LrSchedule& s, int epoch) {
  s.validate();
  if (epoch < 0 || epoch > s.total_epochs)
    fail(ErrorCode::OutOfRange, "epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(s.total_epochs) + "]");
  if (s.kind == LrKind::Constant) return s.initial;
  if (epoch == 0) return s.initial;
  if (epoch == s.total_epochs) return s.minimum;
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(s.total_epochs);
  return s.minimum + 0.5 * (s.initial - s.minimum) * (1.0 + std::cos(phase));
}

}  // namespace brainnet

#pragma once

// Deterministic subject-level train/validation/test split. Subjects (never
// slices) are the unit, so no subject contributes to more than one part.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "brainnet/error.hpp"

namespace brainnet {

struct SubjectSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

/// Sorts ids, shuffles them with a seeded Fisher-Yates (mt19937_64, index
/// drawn as floor(u * (i + 1)) from a 53-bit uniform), then cuts at
/// round(n * r0) and round(n * (r0 + r1)).
inline SubjectSplit split_subjects(std::vector<std::string> ids, std::uint64_t seed,
                                   std::array<double, 3> ratios = {0.6, 0.2, 0.2}) {
  for (double r : ratios)
    if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "split ratios must be >= 0");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0.0)) fail(ErrorCode::InvalidArgument, "split ratios must not all be 0");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    fail(ErrorCode::InvalidArgument, "duplicate subject id");

  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto j = std::min(i - 1, static_cast<std::size_t>(u * static_cast<double>(i)));
    std::swap(ids[i - 1], ids[j]);
  }

  const double n = static_cast<double>(ids.size());
  const auto cut1 = static_cast<std::size_t>(std::llround(n * ratios[0] / total));
  const auto cut2 = std::max(cut1, static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1]) / total)));
  SubjectSplit out;
  out.seed = seed;
  out.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut1));
  out.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut1), ids.begin() + static_cast<std::ptrdiff_t>(cut2));
  out.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(cut2), ids.end());
  return out;
}

}  // namespace brainnet

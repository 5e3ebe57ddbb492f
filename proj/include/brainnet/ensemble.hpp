#pragma once

// Per-voxel majority voting over aligned label volumes.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet {

struct MemberInfo {
  std::string model;
  std::optional<Axis> axis;
};

struct EnsembleSet {
  std::vector<LabelVolume> members;
  std::vector<MemberInfo> info;  // optional, parallel to members when present

  void validate() const {
    if (members.empty()) fail(ErrorCode::InvalidArgument, "ensemble has no members");
    if (members.size() > std::numeric_limits<std::uint16_t>::max())
      fail(ErrorCode::InvalidArgument, "too many ensemble members");
    if (!info.empty() && info.size() != members.size())
      fail(ErrorCode::InvalidArgument, "member info does not match member count");
    for (const auto& m : members)
      if (!(m.dims() == members.front().dims()) || !(m.spacing() == members.front().spacing()))
        fail(ErrorCode::ShapeMismatch, "ensemble members differ in dims or spacing");
  }
};

/// Total order used when two labels tie on votes; earlier wins.
struct TieBreak {
  std::array<Label, 4> priority{Label::ET, Label::NCR, Label::ED, Label::Else};

  void validate() const {
    std::array<bool, 4> seen{};
    for (Label l : priority) seen[label_slot(l)] = true;
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      fail(ErrorCode::InvalidArgument, "tie-break order must list each label exactly once");
  }

  /// rank[slot] = position in priority (0 = most preferred).
  std::array<std::uint8_t, 4> ranks() const {
    std::array<std::uint8_t, 4> r{};
    for (std::uint8_t i = 0; i < 4; ++i) r[label_slot(priority[i])] = i;
    return r;
  }
};

enum class VoteMode : std::uint8_t { Classes, Regions };

/// Vote counts per label slot (Else, NCR, ED, ET).
using VoteCounts = std::array<std::uint16_t, 4>;

namespace ensemble_detail {

template <class F>
void parallel_ranges(std::size_t n, unsigned workers, F&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, n / 4096))));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = std::min(n, w * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
}

}  // namespace ensemble_detail

inline Grid<VoteCounts> vote_histogram(const EnsembleSet& es, unsigned workers = 1) {
  es.validate();
  Grid<VoteCounts> out = es.members.front().like<VoteCounts>();
  ensemble_detail::parallel_ranges(out.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (const auto& m : es.members)
      for (std::size_t i = lo; i < hi; ++i) ++out[i][label_slot(m[i])];
  });
  return out;
}

/// Winner is the label with the most votes; ties go to the label ranked
/// first in `tie_break`. Result is independent of member order and of the
/// worker split.
inline LabelVolume majority_vote(const EnsembleSet& es, const TieBreak& tie_break = {}, unsigned workers = 1) {
  es.validate();
  tie_break.validate();
  const auto rank = tie_break.ranks();
  LabelVolume out = es.members.front().like<Label>();
  out.source = "ensemble";
  ensemble_detail::parallel_ranges(out.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      VoteCounts c{};
      for (const auto& m : es.members) ++c[label_slot(m[i])];
      std::size_t best = 0;
      for (std::size_t s = 1; s < 4; ++s)
        if (c[s] > c[best] || (c[s] == c[best] && rank[s] < rank[best])) best = s;
      out[i] = kAllLabels[best];
    }
  });
  return out;
}

/// Alternative: vote each nested region (WT ⊇ TC ⊇ ET) as a binary majority
/// (a tie counts as inside), then rebuild labels from the voted regions.
inline LabelVolume majority_vote_regions(const EnsembleSet& es, unsigned workers = 1) {
  es.validate();
  const std::size_t n = es.members.size();
  LabelVolume out = es.members.front().like<Label>();
  out.source = "ensemble";
  ensemble_detail::parallel_ranges(out.size(), workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      std::size_t et = 0, tc = 0, wt = 0;
      for (const auto& m : es.members) {
        et += in_region(m[i], Region::ET);
        tc += in_region(m[i], Region::TC);
        wt += in_region(m[i], Region::WT);
      }
      if (2 * et >= n) out[i] = Label::ET;
      else if (2 * tc >= n) out[i] = Label::NCR;
      else if (2 * wt >= n) out[i] = Label::ED;
      else out[i] = Label::Else;
    }
  });
  return out;
}

inline LabelVolume vote(const EnsembleSet& es, VoteMode mode, const TieBreak& tie_break = {}, unsigned workers = 1) {
  return mode == VoteMode::Classes ? majority_vote(es, tie_break, workers) : majority_vote_regions(es, workers);
}

}  // namespace brainnet

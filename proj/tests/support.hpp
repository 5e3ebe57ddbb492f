#pragma once

// Random generators shared by the unit and acceptance suites.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"

namespace brainnet::testing {

using Rng = std::mt19937_64;

/// Runs fn and returns the code of the brainnet::Error it throws; nullopt
/// if nothing (or something else) was thrown.
inline std::optional<ErrorCode> error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  } catch (...) {
  }
  return std::nullopt;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("brainnet-test-" + std::to_string((static_cast<std::uint64_t>(rd()) << 32) | rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Dims random_dims(Rng& rng, std::size_t lo, std::size_t hi) {
  return {uniform_size(rng, lo, hi), uniform_size(rng, lo, hi), uniform_size(rng, lo, hi)};
}

inline Volume random_volume(Rng& rng, Dims d, float lo = -100.0f, float hi = 100.0f) {
  Volume v(d);
  std::uniform_real_distribution<float> dist(lo, hi);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline LabelVolume random_labels(Rng& rng, Dims d, Spacing s = {}) {
  LabelVolume v(d, s);
  for (auto& x : v) x = kAllLabels[uniform_size(rng, 0, 3)];
  return v;
}

/// Random mask with a random fill density, optionally grown from blobs so
/// boundaries are not pure noise.
inline BinaryMask random_mask(Rng& rng, Dims d, Spacing s = {}) {
  BinaryMask m(d, s);
  const double density = uniform_real(rng, 0.0, 0.7);
  if (uniform_size(rng, 0, 1) == 0) {
    for (auto& x : m) x = uniform_real(rng, 0.0, 1.0) < density ? 1 : 0;
    return m;
  }
  const std::size_t blobs = uniform_size(rng, 1, 3);
  for (std::size_t b = 0; b < blobs; ++b) {
    const double cx = uniform_real(rng, 0, static_cast<double>(d.nx));
    const double cy = uniform_real(rng, 0, static_cast<double>(d.ny));
    const double cz = uniform_real(rng, 0, static_cast<double>(d.nz));
    const double r = uniform_real(rng, 0.5, static_cast<double>(std::max({d.nx, d.ny, d.nz})) / 2.0);
    for (std::size_t z = 0; z < d.nz; ++z)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy,
                       dz = static_cast<double>(z) - cz;
          if (dx * dx + dy * dy + dz * dz <= r * r) m(x, y, z) = 1;
        }
  }
  return m;
}

inline BinaryMask random_nonempty_mask(Rng& rng, Dims d, Spacing s = {}) {
  BinaryMask m = random_mask(rng, d, s);
  m(uniform_size(rng, 0, d.nx - 1), uniform_size(rng, 0, d.ny - 1), uniform_size(rng, 0, d.nz - 1)) = 1;
  return m;
}

}  // namespace brainnet::testing

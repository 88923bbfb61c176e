#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taxelsim/core.hpp"
#include "taxelsim/parallel.hpp"

namespace taxelsim {

class CatalogMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForceOptions {
  /// Contact is unilateral, so negative spring+damper sums are clamped to 0.
  /// false keeps the raw k*d + b*d_dot value.
  bool clamp = true;
};

/// f = k d + b (d[t] - d[t-1]) / dt, with the rate taken as 0 on the first row.
Trace displacements_to_forces(const Trace& trace, const World& world, ForceOptions options = {});

// ---------------------------------------------------------------------------
// Noise

inline constexpr std::string_view kNoiseAlgorithm = "splitmix64-boxmuller-cos";

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Standard normal draws. Uniforms come from SplitMix64; each normal consumes
/// two of them: z = sqrt(-2 ln u1) cos(2 pi u2), u1 in (0, 1], u2 in [0, 1).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double next_normal();

 private:
  std::uint64_t state_;
};

/// Row r of a trace draws from GaussianStream(seed ^ r), in catalog order.
Trace add_noise(const Trace& trace, const NoiseSpec& spec, const Executor* exec = nullptr);

/// A lone frame draws from the row-0 stream.
SignalFrame add_noise(const SignalFrame& frame, const NoiseSpec& spec);

// ---------------------------------------------------------------------------
// Smoothing

/// Normalized Gaussian kernel over a patch's rest centers. Weights below
/// 1e-12 are dropped.
class GaussianSmoother {
 public:
  GaussianSmoother(const SkinPatch& patch, double sigma);

  std::size_t size() const { return offsets_.size() - 1; }
  void apply(std::span<const double> in, std::span<double> out) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> neighbors_;
  std::vector<double> weights_;  // already divided by the row sum
};

SignalFrame gaussian_smooth(const SignalFrame& frame, const SkinPatch& patch, double sigma);

/// Smooths every row of every patch in the trace.
Trace smooth_trace(const Trace& trace, const World& world, double sigma);

// ---------------------------------------------------------------------------

/// Row nearest to t (ties go to the earlier row), restricted to one patch.
SignalFrame extract_frame(const Trace& trace, const std::string& patch_id, double t);

}  // namespace taxelsim

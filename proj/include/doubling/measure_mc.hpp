#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "doubling/sets.hpp"

namespace doubling {

/// Indicator-mean estimate of a normalized measure.
struct MeasureEstimate {
  double value = 0.0;
  double stderr_ = 0.0;  // sqrt(value (1 - value) / samples)
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  bool operator==(const MeasureEstimate&) const = default;
};

/// Minimum acceptance rate for rejection sampling.
inline constexpr double kRejectionFloor = 1e-4;
/// Draws used to estimate the acceptance rate before committing to rejection sampling.
inline constexpr std::uint64_t kRejectionPilot = 100000;
/// Hard stop on consecutive rejections.
inline constexpr std::uint64_t kMaxConsecutiveRejections = 1000000;

/// Fraction of Haar samples landing in s. Deterministic in (seed, samples) for any worker count.
MeasureEstimate estimate_measure(const SetSpec& s, std::uint64_t samples, std::uint64_t seed);

/// Same as estimate_measure for an arbitrary membership predicate (must be thread-safe).
MeasureEstimate estimate_indicator(const std::function<bool(const Rotation&)>& pred, std::uint64_t samples,
                                   std::uint64_t seed);

/// g in Cap(u, theta)^2, decided constructively: g counts when cap_square_factor splits it into two
/// factors that both pass the cap membership test.
bool in_cap_square(const Rotation& g, const UnitVec3& u, double theta);

/// Independent Haar-conditional samples in s by rejection. Throws SetTooSmall when the
/// acceptance rate over the pilot draws is below kRejectionFloor.
std::vector<Rotation> sample_in_set(const SetSpec& s, std::size_t count, std::uint64_t seed);

/// Unbiased estimate of mu(F B) for F a set of witness_count samples in A. F B is a subset of A B,
/// so the value estimates a lower bound on mu(A B).
MeasureEstimate estimate_product_lower(const SetSpec& a, const SetSpec& b, std::size_t witness_count,
                                       std::uint64_t samples, std::uint64_t seed);

/// Witness-union membership test: does some a in witnesses satisfy a^-1 g in b?
class WitnessUnion {
 public:
  WitnessUnion(std::vector<Rotation> witnesses, const SetSpec& b);
  bool contains(const Rotation& g) const;
  std::size_t size() const { return witnesses_.size(); }

 private:
  std::vector<Rotation> witnesses_;
  std::vector<Rotation> inverses_;
  const SetSpec& b_;
  // Fast path when b is a single cap: a^-1 g in Cap(u, t) iff angle(a u, g u) < t.
  bool cap_fast_ = false;
  Eigen::Vector3d cap_axis_;
  double cap_cos_ = 0.0;
  double cap_theta_ = 0.0;
  std::vector<Eigen::Vector3d> moved_axes_;   // a u
  std::vector<double> moved_angles_;          // angle(u, a u), for the triangle-inequality prune
};

}  // namespace doubling

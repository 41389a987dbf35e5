#include "doubling/measure_mc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doubling/errors.hpp"
#include "doubling/parallel.hpp"
#include "doubling/random.hpp"

namespace doubling {
namespace {

constexpr std::uint64_t kSaltWitness = 0x57495448;  // "WITH"
constexpr std::uint64_t kSaltEval = 0x4556414C;     // "EVAL"

MeasureEstimate from_count(std::uint64_t hits, std::uint64_t samples, std::uint64_t seed) {
  MeasureEstimate e;
  e.samples = samples;
  e.seed = seed;
  e.value = static_cast<double>(hits) / static_cast<double>(samples);
  e.stderr_ = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(samples));
  return e;
}

template <class Pred>
std::uint64_t count_hits(std::uint64_t samples, std::uint64_t seed, const Pred& pred) {
  const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
  std::vector<std::uint64_t> partial(chunks, 0);
  for_each_chunk(samples, kChunkSize, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::uint64_t hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      SampleStream rng(seed, i);
      if (pred(haar_sample(rng))) ++hits;
    }
    partial[c] = hits;
  });
  std::uint64_t total = 0;
  for (auto h : partial) total += h;
  return total;
}

}  // namespace

MeasureEstimate estimate_measure(const SetSpec& s, std::uint64_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("estimate_measure: samples must be >= 1");
  const std::uint64_t hits = count_hits(samples, seed, [&](const Rotation& g) { return membership(s, g); });
  return from_count(hits, samples, seed);
}

MeasureEstimate estimate_indicator(const std::function<bool(const Rotation&)>& pred, std::uint64_t samples,
                                   std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("estimate_indicator: samples must be >= 1");
  return from_count(count_hits(samples, seed, pred), samples, seed);
}

bool in_cap_square(const Rotation& g, const UnitVec3& u, double theta) {
  if (!(theta > 0.0 && theta <= 0.5 * std::numbers::pi)) throw InvalidArgument("in_cap_square: theta must lie in (0, pi/2]");
  // Points with angle(u, g u) >= 2 theta are outside; skip the throwing path for them.
  if (!(angle_between(u, act(g, u)) < std::min(2.0 * theta, std::numbers::pi))) return false;
  try {
    const auto [g1, g2] = cap_square_factor(g, u, theta);
    // Factors sit at angle(u, g u)/2 < theta by construction; allow rounding at the rim.
    const double t = theta + 1e-12;
    return angle_between(u, act(g1, u)) < t && angle_between(u, act(g2, u)) < t;
  } catch (const DomainError&) {
    return false;
  }
}

std::vector<Rotation> sample_in_set(const SetSpec& s, std::size_t count, std::uint64_t seed) {
  std::vector<Rotation> out;
  out.reserve(count);
  std::uint64_t accepted = 0;
  for (std::uint64_t i = 0; i < kRejectionPilot; ++i) {
    SampleStream rng(seed, i);
    const Rotation g = haar_sample(rng);
    if (membership(s, g)) {
      ++accepted;
      if (out.size() < count) out.push_back(g);
    }
  }
  const double rate = static_cast<double>(accepted) / static_cast<double>(kRejectionPilot);
  if (rate < kRejectionFloor) {
    std::ostringstream msg;
    msg << "set too small for rejection sampling: acceptance estimate " << rate << " < " << kRejectionFloor;
    throw SetTooSmall(msg.str());
  }
  std::uint64_t misses = 0;
  for (std::uint64_t i = kRejectionPilot; out.size() < count; ++i) {
    SampleStream rng(seed, i);
    const Rotation g = haar_sample(rng);
    if (membership(s, g)) {
      out.push_back(g);
      misses = 0;
    } else if (++misses >= kMaxConsecutiveRejections) {
      std::ostringstream msg;
      msg << "set too small for rejection sampling: " << misses
          << " consecutive rejections, acceptance estimate " << rate;
      throw SetTooSmall(msg.str());
    }
  }
  return out;
}

WitnessUnion::WitnessUnion(std::vector<Rotation> witnesses, const SetSpec& b)
    : witnesses_(std::move(witnesses)), b_(b) {
  inverses_.reserve(witnesses_.size());
  for (const auto& a : witnesses_) inverses_.push_back(inverse(a));
  if (const auto* cap = std::get_if<Cap>(&b.node)) {
    cap_fast_ = true;
    cap_axis_ = cap->axis.vec();
    cap_theta_ = cap->theta;
    cap_cos_ = std::cos(cap->theta);
    for (const auto& a : witnesses_) {
      const UnitVec3 au = act(a, cap->axis);
      moved_axes_.push_back(au.vec());
      moved_angles_.push_back(angle_between(cap->axis, au));
    }
  }
}

bool WitnessUnion::contains(const Rotation& g) const {
  if (cap_fast_) {
    if (cap_theta_ >= std::numbers::pi) return !witnesses_.empty();
    const UnitVec3 gu = act(g, UnitVec3::normalized(cap_axis_));
    const double ag = angle_between(UnitVec3::normalized(cap_axis_), gu);
    for (std::size_t i = 0; i < moved_axes_.size(); ++i) {
      // angle(a u, g u) >= |angle(u, g u) - angle(u, a u)|
      if (std::abs(ag - moved_angles_[i]) >= cap_theta_) continue;
      if (moved_axes_[i].dot(gu.vec()) > cap_cos_) return true;
    }
    return false;
  }
  for (const auto& ai : inverses_) {
    if (membership(b_, compose(ai, g))) return true;
  }
  return false;
}

MeasureEstimate estimate_product_lower(const SetSpec& a, const SetSpec& b, std::size_t witness_count,
                                       std::uint64_t samples, std::uint64_t seed) {
  if (witness_count == 0) throw InvalidArgument("estimate_product_lower: witness_count must be >= 1");
  if (samples == 0) throw InvalidArgument("estimate_product_lower: samples must be >= 1");
  WitnessUnion cover(sample_in_set(a, witness_count, derive_seed(seed, kSaltWitness)), b);
  const std::uint64_t hits =
      count_hits(samples, derive_seed(seed, kSaltEval), [&](const Rotation& g) { return cover.contains(g); });
  return from_count(hits, samples, seed);
}

}  // namespace doubling

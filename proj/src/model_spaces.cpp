#include "doubling/model_spaces.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "doubling/errors.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

double alpha_constant(int n) {
  if (n < 0) throw InvalidArgument("alpha_constant: n must be >= 0");
  const int k = n / 2;
  if (n % 2 == 0) {
    // 2^(2k+1) pi^k k! / (2k)! in log space, exact enough for any n that fits in a double.
    const double lg = (2.0 * k + 1.0) * std::log(2.0) + k * std::log(kPi) + std::lgamma(k + 1.0) -
                      std::lgamma(2.0 * k + 1.0);
    return std::exp(lg);
  }
  return 2.0 * std::pow(kPi, k + 1) / std::tgamma(k + 1.0);
}

double ball_volume_series(const BallSeriesQuery& q) {
  if (q.n < 1) throw InvalidArgument("ball_volume_series: n must be >= 1");
  if (!(q.r >= 0.0)) throw InvalidArgument("ball_volume_series: r must be >= 0");
  const double lead = alpha_constant(q.n - 1) * std::pow(q.r, q.n) / q.n;
  return lead * (1.0 - q.s * q.r * q.r / (6.0 * (q.n + 2)));
}

double sphere_cap_area(double r) {
  if (!(r >= 0.0 && r <= kPi)) throw InvalidArgument("sphere_cap_area: r must lie in [0, pi]");
  const double h = std::sin(0.5 * r);
  return 4.0 * kPi * h * h;  // 2 pi (1 - cos r) without cancellation
}

double doubling_ratio_limit(int d, int m) {
  if (m < 0 || d <= m) throw InvalidArgument("doubling_ratio_limit: need d > m >= 0");
  return std::ldexp(1.0, d - m);
}

double hyperbolic_ball_volume(double r, HyperbolicNormalization norm) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("hyperbolic_ball_volume: r must be > 0");
  const double s = std::sinh(0.5 * r);
  const double m = s * s;
  return norm == HyperbolicNormalization::corrected ? m : 2.0 * m;
}

HyperbolicCheck hyperbolic_double_check(double r, HyperbolicNormalization norm) {
  const double m = hyperbolic_ball_volume(r, norm);
  return {hyperbolic_ball_volume(2.0 * r, norm), 4.0 * m * (1.0 + m)};
}

}  // namespace doubling

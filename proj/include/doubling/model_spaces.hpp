#pragma once

namespace doubling {

/// alpha_n: even n = 2k gives 2^(2k+1) pi^k k!/(2k)!, odd n = 2k+1 gives 2 pi^(k+1)/k!.
/// alpha_{n-1}/n is the volume of the Euclidean unit n-ball.
double alpha_constant(int n);

struct BallSeriesQuery {
  int n = 1;       // dimension
  double s = 0.0;  // scalar curvature
  double r = 0.0;  // radius
};

/// Truncated small-ball volume (1/n) alpha_{n-1} r^n (1 - S r^2 / (6 (n + 2))). No cutoff on r.
double ball_volume_series(const BallSeriesQuery& q);

/// Area of a geodesic disc of radius r on the unit sphere: 2 pi (1 - cos r).
double sphere_cap_area(double r);

/// 2^(d - m).
double doubling_ratio_limit(int d, int m);

enum class HyperbolicNormalization {
  corrected,  // m = sinh^2(r/2) = (cosh r - 1)/2
  integral,   // m = cosh r - 1, the plain integral of sinh
};

struct HyperbolicCheck {
  double lhs;  // volume at radius 2r under the chosen normalization
  double rhs;  // 4 m (1 + m)
};

double hyperbolic_ball_volume(double r, HyperbolicNormalization norm = HyperbolicNormalization::corrected);

/// Only the corrected normalization makes lhs == rhs.
HyperbolicCheck hyperbolic_double_check(double r,
                                        HyperbolicNormalization norm = HyperbolicNormalization::corrected);

}  // namespace doubling

#include "doubling/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "doubling/errors.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector3d checked_unit(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) {
    throw InvalidArgument("axis must be a unit vector (norm " + std::to_string(n) + ")");
  }
  return v / n;
}

// x - sin(x) without cancellation near zero.
double x_minus_sin(double x) {
  if (std::abs(x) >= 0.3) return x - std::sin(x);
  const double x2 = x * x;
  double term = x * x2 / 6.0;
  double sum = 0.0;
  for (int k = 1; k <= 7; ++k) {
    sum += term;
    term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
  }
  return sum;
}

}  // namespace

UnitVec3::UnitVec3(double x, double y, double z) : v_(checked_unit({x, y, z})) {}

UnitVec3::UnitVec3(const Eigen::Vector3d& v) : v_(checked_unit(v)) {}

UnitVec3 UnitVec3::normalized(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n == 0.0) throw InvalidArgument("cannot normalize a zero or non-finite vector");
  return UnitVec3(v / n, Trusted{});
}

Rotation Rotation::from_canonical(double w, double x, double y, double z) {
  const Rotation r = from_quaternion(w, x, y, z);
  if (std::abs(std::sqrt(w * w + x * x + y * y + z * z) - 1.0) > 1e-12 || (r.w_ < 0) != (w < 0) ||
      (r.x_ < 0) != (x < 0) || (r.y_ < 0) != (y < 0) || (r.z_ < 0) != (z < 0)) {
    throw InvalidArgument("quaternion is not a canonical unit quaternion");
  }
  Rotation out;
  out.w_ = w;
  out.x_ = x;
  out.y_ = y;
  out.z_ = z;
  return out;
}

Rotation Rotation::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!std::isfinite(n) || n == 0.0) throw InvalidArgument("quaternion must be finite and nonzero");
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  bool flip = w < 0.0;
  if (w == 0.0) {
    const double lead = x != 0.0 ? x : (y != 0.0 ? y : z);
    flip = lead < 0.0;
  }
  Rotation r;
  const double s = flip ? -1.0 : 1.0;
  // +0.0 keeps -0.0 out of the stored fields so equality stays field equality.
  r.w_ = s * w + 0.0;
  r.x_ = s * x + 0.0;
  r.y_ = s * y + 0.0;
  r.z_ = s * z + 0.0;
  return r;
}

Rotation from_axis_angle(const UnitVec3& u, double phi) {
  const double half = 0.5 * std::remainder(phi, 2.0 * kPi);
  const double s = std::sin(half);
  return Rotation::from_quaternion(std::cos(half), s * u.x(), s * u.y(), s * u.z());
}

Rotation compose(const Rotation& g, const Rotation& h) {
  const double w = g.w() * h.w() - g.x() * h.x() - g.y() * h.y() - g.z() * h.z();
  const double x = g.w() * h.x() + g.x() * h.w() + g.y() * h.z() - g.z() * h.y();
  const double y = g.w() * h.y() - g.x() * h.z() + g.y() * h.w() + g.z() * h.x();
  const double z = g.w() * h.z() + g.x() * h.y() - g.y() * h.x() + g.z() * h.w();
  return Rotation::from_quaternion(w, x, y, z);
}

Rotation inverse(const Rotation& g) { return Rotation::from_quaternion(g.w(), -g.x(), -g.y(), -g.z()); }

UnitVec3 act(const Rotation& g, const UnitVec3& u) {
  const Eigen::Vector3d q(g.x(), g.y(), g.z());
  const Eigen::Vector3d t = 2.0 * q.cross(u.vec());
  return UnitVec3::normalized(u.vec() + g.w() * t + q.cross(t));
}

double rotation_angle(const Rotation& g) {
  const double v = std::sqrt(g.x() * g.x() + g.y() * g.y() + g.z() * g.z());
  return 2.0 * std::atan2(v, std::abs(g.w()));
}

double distance(const Rotation& g, const Rotation& h) { return rotation_angle(compose(inverse(g), h)); }

double quaternion_distance(const Rotation& g, const Rotation& h) {
  const Eigen::Vector4d a = g.coeffs();
  const Eigen::Vector4d b = h.coeffs();
  return std::min((a - b).norm(), (a + b).norm());
}

double angle_between(const UnitVec3& u, const UnitVec3& v) {
  // atan2 form: same value as arccos of the clamped dot product, but well conditioned near 0 and pi.
  const double c = std::clamp(u.vec().dot(v.vec()), -1.0, 1.0);
  return std::atan2(u.vec().cross(v.vec()).norm(), c);
}

UnitVec3 orthogonal_to(const UnitVec3& u) {
  const Eigen::Vector3d a = u.vec().cwiseAbs();
  Eigen::Index k = 0;
  a.minCoeff(&k);
  const Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
  return UnitVec3::normalized(u.vec().cross(e));
}

Rotation haar_sample(SampleStream& rng) {
  double a, b, c, d;
  for (;;) {
    rng.gaussian_pair(a, b);
    rng.gaussian_pair(c, d);
    if (a * a + b * b + c * c + d * d > 1e-300) break;
  }
  return Rotation::from_quaternion(a, b, c, d);
}

double ball_measure(double r) {
  if (!(r >= 0.0 && r <= kPi)) throw InvalidArgument("ball radius must lie in [0, pi]");
  return x_minus_sin(r) / kPi;
}

EulerDecomposition euler_decompose(const Rotation& g, const UnitVec3& u) {
  const UnitVec3 gu = act(g, u);
  const Eigen::Vector3d n = u.vec().cross(gu.vec());
  const double cos_a = u.vec().dot(gu.vec());

  EulerDecomposition out{orthogonal_to(u), 0.0, 0.0};
  if (n.norm() < 1e-9) {
    out.theta = cos_a > 0.0 ? 0.0 : kPi;
  } else {
    out.v = UnitVec3::normalized(n);
    out.theta = angle_between(u, gu);
  }

  // R_v^{-theta} g fixes u, so it is a rotation about u.
  const Rotation h = compose(from_axis_angle(out.v, -out.theta), g);
  const double along = h.x() * u.x() + h.y() * u.y() + h.z() * u.z();
  double phi = 2.0 * std::atan2(along, h.w());
  if (phi >= kPi) phi -= 2.0 * kPi;
  if (phi < -kPi) phi += 2.0 * kPi;
  out.phi = phi;
  return out;
}

}  // namespace doubling

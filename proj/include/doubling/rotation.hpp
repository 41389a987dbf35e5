#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "doubling/random.hpp"

namespace doubling {

/// Unit vector in R^3 (a point of S^2).
class UnitVec3 {
 public:
  /// Validates that (x, y, z) has norm within 1e-6 of one, then renormalizes.
  UnitVec3(double x, double y, double z);
  explicit UnitVec3(const Eigen::Vector3d& v);

  /// Normalizes any nonzero finite vector.
  static UnitVec3 normalized(const Eigen::Vector3d& v);

  static UnitVec3 ex() { return {1.0, 0.0, 0.0}; }
  static UnitVec3 ey() { return {0.0, 1.0, 0.0}; }
  static UnitVec3 ez() { return {0.0, 0.0, 1.0}; }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Eigen::Vector3d& vec() const { return v_; }

  UnitVec3 operator-() const { return UnitVec3(-v_, Trusted{}); }
  bool operator==(const UnitVec3& o) const { return v_ == o.v_; }

 private:
  struct Trusted {};
  UnitVec3(const Eigen::Vector3d& v, Trusted) : v_(v) {}
  Eigen::Vector3d v_;
};

/// A rotation of R^3 stored as a sign-canonical unit quaternion (w, x, y, z):
/// w > 0, or w == 0 and the first nonzero of (x, y, z) is positive. Both lifts of a
/// rotation to S^3 canonicalize to the same value, so equality is field equality.
class Rotation {
 public:
  Rotation() = default;  // identity

  /// Normalizes and canonicalizes an arbitrary nonzero quaternion.
  static Rotation from_quaternion(double w, double x, double y, double z);
  /// Keeps a quaternion that is already unit (to 1e-12) and canonical bit for bit; throws otherwise.
  static Rotation from_canonical(double w, double x, double y, double z);
  static Rotation identity() { return {}; }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  Eigen::Vector4d coeffs() const { return {w_, x_, y_, z_}; }
  Eigen::Quaterniond quaternion() const { return {w_, x_, y_, z_}; }
  Eigen::Matrix3d matrix() const { return quaternion().toRotationMatrix(); }

  bool operator==(const Rotation&) const = default;

 private:
  double w_ = 1.0, x_ = 0.0, y_ = 0.0, z_ = 0.0;
};

/// Decomposition g = R_v^theta * R_u^phi with v orthogonal to u.
struct EulerDecomposition {
  UnitVec3 v;
  double theta;  // [0, pi]
  double phi;    // [-pi, pi)
};

/// Counter-clockwise rotation about u by phi (right-hand rule).
Rotation from_axis_angle(const UnitVec3& u, double phi);

/// Rotation "h then g", i.e. the matrix product g*h.
Rotation compose(const Rotation& g, const Rotation& h);
inline Rotation operator*(const Rotation& g, const Rotation& h) { return compose(g, h); }
Rotation inverse(const Rotation& g);
UnitVec3 act(const Rotation& g, const UnitVec3& u);

/// Rotation angle in [0, pi]; the bi-invariant distance to the identity.
double rotation_angle(const Rotation& g);
/// Bi-invariant metric: rotation_angle(g^-1 h).
double distance(const Rotation& g, const Rotation& h);
/// Euclidean distance between the closer pair of quaternion lifts.
double quaternion_distance(const Rotation& g, const Rotation& h);

/// Angle between unit vectors in [0, pi].
double angle_between(const UnitVec3& u, const UnitVec3& v);

/// Deterministic unit vector orthogonal to u.
UnitVec3 orthogonal_to(const UnitVec3& u);

/// Haar-distributed rotation: four Gaussians normalized onto S^3.
Rotation haar_sample(SampleStream& rng);

/// Normalized Haar measure of {g : rotation_angle(g) <= r}, i.e. (r - sin r)/pi.
double ball_measure(double r);

/// Writes g = R_v^theta R_u^phi with v = normalize(u x g u).
EulerDecomposition euler_decompose(const Rotation& g, const UnitVec3& u);

}  // namespace doubling

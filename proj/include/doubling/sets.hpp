#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "doubling/rotation.hpp"

namespace doubling {

struct SetSpec;

/// Cap preimage {g : angle(axis, g axis) < theta}.
struct Cap {
  UnitVec3 axis;
  double theta;
};

/// Metric ball {g : rotation_angle(g) < radius} around the identity.
struct Ball {
  double radius;
};

struct Union {
  std::vector<SetSpec> parts;
};

struct Intersection {
  std::vector<SetSpec> parts;
};

/// Expression tree for a measurable subset of SO(3). Build through the make_* helpers,
/// which validate leaf parameters (strictly positive, at most pi) and non-empty node lists.
struct SetSpec {
  using Node = std::variant<Cap, Ball, Union, Intersection>;
  Node node;
};

SetSpec make_cap(const UnitVec3& axis, double theta);
SetSpec make_ball(double radius);
SetSpec make_union(std::vector<SetSpec> parts);
SetSpec make_intersection(std::vector<SetSpec> parts);

bool operator==(const SetSpec& a, const SetSpec& b);

bool membership(const SetSpec& s, const Rotation& g);

/// 1-Lipschitz (in the rotation-angle metric) function f with s = {f < 0}.
double lipschitz_eval(const SetSpec& s, const Rotation& g);

/// True when the tree is the whole group up to a null set.
bool covers_group(const SetSpec& s);

/// Closed-form normalized measure for single cap/ball leaves and whole-group trees.
std::optional<double> closed_form_measure(const SetSpec& s);

/// Normalized Haar measure of a cap preimage: (1 - cos theta)/2.
double cap_measure(double theta);

/// Cap(u, t1) * Cap(u, t2) = Cap(u, min(t1 + t2, pi)) for t1, t2 in (0, pi/2].
SetSpec cap_product_spec(double theta1, double theta2, const UnitVec3& axis = UnitVec3::ez());

/// Splits g with angle(u, g u) < min(2 theta, pi) into g1 g2 = g with both factors in Cap(u, theta).
std::pair<Rotation, Rotation> cap_square_factor(const Rotation& g, const UnitVec3& u, double theta);

struct CapDoubling {
  double m;   // mu(A)
  double m2;  // mu(A^2) = 4 m (1 - m)
};

/// Measure of a cap preimage and of its square.
CapDoubling cap_doubling(double theta);

}  // namespace doubling

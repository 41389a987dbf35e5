#include "doubling/sets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "doubling/errors.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_leaf_angle(double v, const char* what) {
  if (!std::isfinite(v) || !(v > 0.0 && v <= kPi)) {
    throw InvalidArgument(std::string(what) + " must lie in (0, pi]");
  }
}

// Cosine-free half-angle form avoids cancellation for small theta.
double sin2(double x) {
  const double s = std::sin(x);
  return s * s;
}

}  // namespace

SetSpec make_cap(const UnitVec3& axis, double theta) {
  check_leaf_angle(theta, "cap theta");
  return SetSpec{Cap{axis, theta}};
}

SetSpec make_ball(double radius) {
  check_leaf_angle(radius, "ball radius");
  return SetSpec{Ball{radius}};
}

SetSpec make_union(std::vector<SetSpec> parts) {
  if (parts.empty()) throw InvalidArgument("union needs at least one part");
  return SetSpec{Union{std::move(parts)}};
}

SetSpec make_intersection(std::vector<SetSpec> parts) {
  if (parts.empty()) throw InvalidArgument("intersection needs at least one part");
  return SetSpec{Intersection{std::move(parts)}};
}

bool operator==(const SetSpec& a, const SetSpec& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      Overloaded{
          [&](const Cap& c) {
            const auto& d = std::get<Cap>(b.node);
            return c.axis == d.axis && c.theta == d.theta;
          },
          [&](const Ball& c) { return c.radius == std::get<Ball>(b.node).radius; },
          [&](const Union& c) { return c.parts == std::get<Union>(b.node).parts; },
          [&](const Intersection& c) { return c.parts == std::get<Intersection>(b.node).parts; },
      },
      a.node);
}

bool membership(const SetSpec& s, const Rotation& g) {
  return std::visit(
      Overloaded{
          [&](const Cap& c) { return c.theta >= kPi || angle_between(c.axis, act(g, c.axis)) < c.theta; },
          [&](const Ball& b) { return b.radius >= kPi || rotation_angle(g) < b.radius; },
          [&](const Union& u) {
            return std::any_of(u.parts.begin(), u.parts.end(), [&](const SetSpec& p) { return membership(p, g); });
          },
          [&](const Intersection& u) {
            return std::all_of(u.parts.begin(), u.parts.end(), [&](const SetSpec& p) { return membership(p, g); });
          },
      },
      s.node);
}

double lipschitz_eval(const SetSpec& s, const Rotation& g) {
  return std::visit(
      Overloaded{
          [&](const Cap& c) { return angle_between(c.axis, act(g, c.axis)) - c.theta; },
          [&](const Ball& b) { return rotation_angle(g) - b.radius; },
          [&](const Union& u) {
            double v = std::numeric_limits<double>::infinity();
            for (const auto& p : u.parts) v = std::min(v, lipschitz_eval(p, g));
            return v;
          },
          [&](const Intersection& u) {
            double v = -std::numeric_limits<double>::infinity();
            for (const auto& p : u.parts) v = std::max(v, lipschitz_eval(p, g));
            return v;
          },
      },
      s.node);
}

bool covers_group(const SetSpec& s) {
  return std::visit(
      Overloaded{
          [](const Cap& c) { return c.theta >= kPi; },
          [](const Ball& b) { return b.radius >= kPi; },
          [](const Union& u) { return std::any_of(u.parts.begin(), u.parts.end(), covers_group); },
          [](const Intersection& u) { return std::all_of(u.parts.begin(), u.parts.end(), covers_group); },
      },
      s.node);
}

std::optional<double> closed_form_measure(const SetSpec& s) {
  if (covers_group(s)) return 1.0;
  if (const auto* c = std::get_if<Cap>(&s.node)) return cap_measure(c->theta);
  if (const auto* b = std::get_if<Ball>(&s.node)) return ball_measure(b->radius);
  return std::nullopt;
}

double cap_measure(double theta) {
  check_leaf_angle(theta, "cap theta");
  return sin2(0.5 * theta);
}

SetSpec cap_product_spec(double theta1, double theta2, const UnitVec3& axis) {
  for (double t : {theta1, theta2}) {
    if (!std::isfinite(t) || !(t > 0.0 && t <= 0.5 * kPi)) {
      throw InvalidArgument("cap_product_spec angles must lie in (0, pi/2]");
    }
  }
  return make_cap(axis, std::min(theta1 + theta2, kPi));
}

std::pair<Rotation, Rotation> cap_square_factor(const Rotation& g, const UnitVec3& u, double theta) {
  if (!std::isfinite(theta) || !(theta > 0.0 && theta <= 0.5 * kPi)) {
    throw DomainError("cap_square_factor: theta must lie in (0, pi/2]");
  }
  const EulerDecomposition d = euler_decompose(g, u);
  const double bound = std::min(2.0 * theta, kPi);
  if (!(d.theta < bound)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "cap_square_factor: g lies outside the square of the cap: angle(u, g u) = " << d.theta
        << " must be < min(2 theta, pi) = " << bound;
    throw DomainError(msg.str());
  }
  const Rotation half = from_axis_angle(d.v, 0.5 * d.theta);
  return {half, compose(half, from_axis_angle(u, d.phi))};
}

CapDoubling cap_doubling(double theta) {
  if (!std::isfinite(theta) || !(theta > 0.0 && theta <= 0.5 * kPi)) {
    throw InvalidArgument("cap_doubling: theta must lie in (0, pi/2]");
  }
  const double m = cap_measure(theta);
  const double m2 = 4.0 * m * (1.0 - m);
  const double check = sin2(theta);
  if (std::abs(m2 - check) > 1e-14) {
    throw DomainError("cap_doubling: 4m(1-m) and sin^2(theta) disagree beyond 1e-14");
  }
  return {m, m2};
}

}  // namespace doubling

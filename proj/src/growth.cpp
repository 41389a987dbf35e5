#include "doubling/growth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doubling/errors.hpp"
#include "doubling/random.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kSaltA = 0xA1;
constexpr std::uint64_t kSaltB = 0xB2;
constexpr std::uint64_t kSaltProduct = 0xAB;

// log of the generalized mean (x^s + y^s)^(1/s), written to stay finite for huge s.
double log_power_sum(double lx, double ly, double s) {
  const double hi = std::max(lx, ly);
  const double lo = std::min(lx, ly);
  return hi + std::log1p(std::exp(s * (lo - hi))) / s;
}

MeasureEstimate exact(double v) { return {v, 0.0, 0, 0}; }

bool same_axis(const UnitVec3& u, const UnitVec3& v) { return (u.vec() - v.vec()).norm() <= 1e-12; }

// mu(AB) for the pairs where the product is known in closed form.
std::optional<double> closed_form_product(const SetSpec& a, const SetSpec& b) {
  if (covers_group(a) || covers_group(b)) return 1.0;
  const auto* ca = std::get_if<Cap>(&a.node);
  const auto* cb = std::get_if<Cap>(&b.node);
  if (ca && cb && same_axis(ca->axis, cb->axis) && ca->theta <= 0.5 * kPi && cb->theta <= 0.5 * kPi) {
    return cap_measure(std::min(ca->theta + cb->theta, kPi));
  }
  const auto* ba = std::get_if<Ball>(&a.node);
  const auto* bb = std::get_if<Ball>(&b.node);
  if (ba && bb) return ball_measure(std::min(ba->radius + bb->radius, kPi));
  return std::nullopt;
}

std::optional<double> bm_or_floor(double a, double b, double ab) {
  if (!(a > 0.0) || !(b > 0.0)) return std::nullopt;  // unbounded
  try {
    return bm_growth(a, b, ab);
  } catch (const NoSolution&) {
    // The exponent tends to 0 as mu_ab approaches max(mu_a, mu_b).
    return 0.0;
  }
}

Json estimate_json(const MeasureEstimate& e) {
  Json j;
  j["value"] = e.value;
  j["stderr"] = e.stderr_;
  j["samples"] = e.samples;
  return j;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

double bm_growth(double mu_a, double mu_b, double mu_ab) {
  if (!(mu_a > 0.0) || !(mu_b > 0.0) || !std::isfinite(mu_a) || !std::isfinite(mu_b) || !std::isfinite(mu_ab)) {
    throw InvalidArgument("bm_growth: measures must be positive and finite");
  }
  if (!(mu_ab > std::max(mu_a, mu_b))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "bm_growth: no exponent exists, mu_ab = " << mu_ab << " <= max(mu_a, mu_b) = " << std::max(mu_a, mu_b);
    throw NoSolution(msg.str());
  }
  const double la = std::log(mu_a), lb = std::log(mu_b), target = std::log(mu_ab);
  double lo = std::log(1e-9), hi = std::log(1e9);  // bracket on log s; the mean decreases in s
  if (log_power_sum(la, lb, std::exp(hi)) >= target) {
    throw NoSolution("bm_growth: mu_ab is too close to max(mu_a, mu_b) for s <= 1e9");
  }
  if (log_power_sum(la, lb, std::exp(lo)) <= target) {
    throw NoSolution("bm_growth: mu_ab is too large for s >= 1e-9");
  }
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (log_power_sum(la, lb, std::exp(mid)) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 1.0 / std::exp(0.5 * (lo + hi));
}

double kemperman_slack(double mu_a, double mu_b, double mu_ab) { return mu_ab - std::min(mu_a + mu_b, 1.0); }

double bg_slack(double mu_a, double mu_a2) { return mu_a2 - std::min(1.0, 4.0 * mu_a * (1.0 - mu_a)); }

bool expansion_gap_check(double mu_a, double mu_a2) {
  if (!(mu_a > 0.0)) throw InvalidArgument("expansion_gap_check: mu_a must be > 0");
  return mu_a2 >= (2.0 + 1e-12) * mu_a;
}

std::string method_name(ReportMethod m) { return m == ReportMethod::closed_form ? "closed-form" : "mc+grid"; }

ReportMethod parse_method(const std::string& s) {
  if (s == "closed-form") return ReportMethod::closed_form;
  if (s == "mc+grid") return ReportMethod::mc_grid;
  throw InvalidArgument("unknown report method '" + s + "' (expected closed-form or mc+grid)");
}

GrowthReport build_report(const SetSpec& a, const SetSpec& b, ReportMethod method, const ReportParams& params) {
  GrowthReport r;
  r.method = method;
  r.seed = params.seed;
  r.params = params;
  r.specs = Json::object();
  r.specs["a"] = set_to_json(a);
  r.specs["b"] = set_to_json(b);
  const bool whole = covers_group(a) || covers_group(b);
  const bool square = a == b;

  if (method == ReportMethod::closed_form) {
    const auto ma = closed_form_measure(a);
    const auto mb = closed_form_measure(b);
    const auto mab = closed_form_product(a, b);
    if (!ma || !mb || !mab) {
      throw InvalidArgument(
          "closed-form reports support same-axis caps with theta <= pi/2, ball pairs and whole-group sets");
    }
    r.mu_a = exact(*ma);
    r.mu_b = exact(*mb);
    r.mu_ab_lower = exact(*mab);
    r.mu_ab_upper = *mab;
    if (!whole) {
      r.bm_lower = r.bm_upper = bm_or_floor(*ma, *mb, *mab);
    }
  } else {
    if (!params.grid) throw InvalidArgument("mc+grid reports need a grid");
    if (params.samples == 0) throw InvalidArgument("mc+grid reports need samples >= 1");
    r.grid = params.grid->dims();
    r.mu_a = estimate_measure(a, params.samples, derive_seed(params.seed, kSaltA));
    r.mu_b = estimate_measure(b, params.samples, derive_seed(params.seed, kSaltB));
    if (whole) {
      r.mu_ab_lower = exact(1.0);
      r.mu_ab_upper = 1.0;
    } else {
      r.mu_ab_lower =
          estimate_product_lower(a, b, params.witnesses, params.samples, derive_seed(params.seed, kSaltProduct));
      const CellSet ca = rasterize(a, params.grid);
      const CellSet cb = square ? ca : rasterize(b, params.grid);
      r.mu_ab_upper = product_outer(ca, cb, *params.grid).measure_upper();
      // Conservative sides: the lower exponent takes large mu_a, mu_b and small mu_ab.
      r.bm_lower = bm_or_floor(r.mu_a.value + 3.0 * r.mu_a.stderr_, r.mu_b.value + 3.0 * r.mu_b.stderr_,
                               r.mu_ab_lower.value - 3.0 * r.mu_ab_lower.stderr_);
      r.bm_upper = bm_or_floor(r.mu_a.value - 3.0 * r.mu_a.stderr_, r.mu_b.value - 3.0 * r.mu_b.stderr_,
                               r.mu_ab_upper);
      if (!r.bm_lower) r.bm_lower = 0.0;
    }
    r.kemperman_threshold = -3.0 * (r.mu_a.stderr_ + r.mu_b.stderr_);
  }
  r.kemperman_slack = kemperman_slack(r.mu_a.value, r.mu_b.value, r.mu_ab_upper);
  if (square) r.bg_slack = bg_slack(r.mu_a.value, r.mu_ab_upper);
  return r;
}

Json report_to_json(const GrowthReport& r) {
  Json j;
  j["method"] = method_name(r.method);
  j["mu_a"] = estimate_json(r.mu_a);
  j["mu_b"] = estimate_json(r.mu_b);
  j["mu_ab_lower"] = estimate_json(r.mu_ab_lower);
  j["mu_ab_upper"] = r.mu_ab_upper;
  j["bm_lower"] = optional_json(r.bm_lower);
  j["bm_upper"] = optional_json(r.bm_upper);
  j["kemperman_slack"] = r.kemperman_slack;
  j["kemperman_threshold"] = r.kemperman_threshold;
  j["bg_slack"] = optional_json(r.bg_slack);
  j["seed"] = r.seed;
  if (r.grid) {
    j["grid"] = Json::array({r.grid->n_eta, r.grid->n_xi1, r.grid->n_xi2});
  } else {
    j["grid"] = nullptr;
  }
  j["samples"] = r.params.samples;
  j["witnesses"] = r.params.witnesses;
  j["specs"] = r.specs;
  j["tool_version"] = DOUBLING_LAB_VERSION;
  return j;
}

}  // namespace doubling

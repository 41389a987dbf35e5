#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "doubling/grid.hpp"
#include "doubling/measure_mc.hpp"
#include "doubling/set_json.hpp"
#include "doubling/sets.hpp"

namespace doubling {

/// The r > 0 with mu_ab^(1/r) = mu_a^(1/r) + mu_b^(1/r). Throws NoSolution unless
/// mu_ab > max(mu_a, mu_b) and the root lies in s = 1/r in [1e-9, 1e9].
double bm_growth(double mu_a, double mu_b, double mu_ab);

/// mu_ab - min(mu_a + mu_b, 1).
double kemperman_slack(double mu_a, double mu_b, double mu_ab);

/// mu_a2 - min(1, 4 mu_a (1 - mu_a)).
double bg_slack(double mu_a, double mu_a2);

/// mu_a2 >= (2 + 1e-12) mu_a.
bool expansion_gap_check(double mu_a, double mu_a2);

enum class ReportMethod { closed_form, mc_grid };

struct ReportParams {
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;    // MC samples per estimate (mc_grid)
  std::size_t witnesses = 0;    // witness count for the product lower bound (mc_grid)
  GridPtr grid;                 // required for mc_grid
};

/// Estimated quantities carry stderr and sample count; exact ones have samples == 0.
struct GrowthReport {
  ReportMethod method = ReportMethod::closed_form;
  MeasureEstimate mu_a, mu_b, mu_ab_lower;
  double mu_ab_upper = 0.0;
  std::optional<double> bm_lower, bm_upper;  // empty when BM is undefined (whole group involved)
  double kemperman_slack = 0.0;              // from mu_ab_upper
  double kemperman_threshold = 0.0;          // -3 (stderr_a + stderr_b); 0 for exact reports
  std::optional<double> bg_slack;            // only when A == B, from mu_ab_upper
  std::uint64_t seed = 0;
  std::optional<GridDims> grid;
  Json specs;
  ReportParams params;
};

GrowthReport build_report(const SetSpec& a, const SetSpec& b, ReportMethod method, const ReportParams& params);

/// Field order is fixed so equal reports serialize to equal bytes.
Json report_to_json(const GrowthReport& r);

std::string method_name(ReportMethod m);
ReportMethod parse_method(const std::string& s);

}  // namespace doubling

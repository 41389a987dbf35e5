// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doubling/cli.hpp"
#include "doubling/errors.hpp"
#include "doubling/growth.hpp"
#include "doubling/measure_mc.hpp"
#include "doubling/model_spaces.hpp"
#include "doubling/parallel.hpp"
#include "doubling/random.hpp"
#include "doubling/search.hpp"

using namespace doubling;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

int failures = 0;

void report(const char* id, const char* title, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  const double t = seconds_since(t0);
  if (!c.ok) ++failures;
  std::printf("%s %s: %s (%.1f s)%s%s\n", c.ok ? "PASS" : "FAIL", id, title, t, c.ok ? "" : " -- ",
              c.ok ? "" : c.detail.str().c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

// Kept between AC4 and AC6.
std::vector<GrowthReport> mc_reports;

void ac1(Check& c) {
  const auto t0 = Clock::now();
  const UnitVec3 u = UnitVec3::ez();
  for (int i = 0; i < 16; ++i) {
    const double theta = 0.1 + (kPi / 2 - 0.1) * i / 15;
    const MeasureEstimate a = estimate_measure(make_cap(u, theta), 1000000, derive_seed(101, 2 * i));
    const MeasureEstimate a2 = estimate_indicator([&](const Rotation& g) { return in_cap_square(g, u, theta); },
                                                  1000000, derive_seed(101, 2 * i + 1));
    const double m = (1 - std::cos(theta)) / 2, m2 = std::sin(theta) * std::sin(theta);
    c.require(std::abs(a.value - m) <= 4 * a.stderr_, "mu(A) off at theta=" + fmt(theta));
    c.require(std::abs(a2.value - m2) <= 4 * a2.stderr_, "mu(A^2) off at theta=" + fmt(theta));
  }
  const double t = seconds_since(t0);
  c.require(t < 30.0, "runtime " + fmt(t) + " s");
}

void ac2(Check& c) {
  // m = mu(Cap(theta)) runs over (0, 0.0025] as theta runs over (0, acos(0.995)].
  const double theta_max = std::acos(1 - 2 * 0.0025);
  for (int i = 1; i <= 10000; ++i) {
    const CapDoubling d = cap_doubling(theta_max * i / 10000);
    c.require(d.m2 / d.m >= 3.99 - 1e-12, "closed-form ratio " + fmt(d.m2 / d.m));
  }
  const UnitVec3 u = UnitVec3::ez();
  const MeasureEstimate a = estimate_measure(make_cap(u, 0.1), 10000000, 202);
  const MeasureEstimate a2 =
      estimate_indicator([&](const Rotation& g) { return in_cap_square(g, u, 0.1); }, 10000000, 203);
  const double ratio = a2.value / a.value;
  c.require(std::abs(ratio / 3.99001 - 1) <= 0.02, "MC ratio " + fmt(ratio));
}

void ac3(Check& c) {
  for (int i = 1; i <= 1000; ++i) {
    const CapDoubling d = cap_doubling(0.05 * i / 1000);
    const double ratio = d.m2 / d.m;
    c.require(ratio >= 3.99 && ratio < 4.0, "cap ratio " + fmt(ratio));
    const double r = 0.05 * i / 1000;
    const double b = ball_measure(2 * r) / ball_measure(r);
    c.require(b >= 7.99 && b < 8.0, "ball ratio " + fmt(b) + " at r=" + fmt(r));
  }
}

void ac4(Check& c) {
  const SetSpec a = make_cap(UnitVec3::ez(), 0.4);
  const double truth = std::sin(0.4) * std::sin(0.4);
  double widths[2];
  int k = 0;
  for (std::uint32_t scale : {1u, 2u}) {
    const auto t0 = Clock::now();
    ReportParams p;
    p.seed = 404;
    p.samples = 1000000;
    p.witnesses = 200;
    p.grid = build_grid(24 * scale, 48 * scale, 96 * scale);
    const GrowthReport r = build_report(a, a, ReportMethod::mc_grid, p);
    const double t = seconds_since(t0);
    const double lo = r.mu_ab_lower.value - 3 * r.mu_ab_lower.stderr_;
    std::printf("  grid x%u: [%.6f, %.6f] in %.1f s\n", scale, lo, r.mu_ab_upper, t);
    c.require(lo <= truth && truth <= r.mu_ab_upper, "bracket misses sin^2 0.4 at scale " + std::to_string(scale));
    if (scale == 2) c.require(t < 300.0, "fine grid took " + fmt(t) + " s");
    widths[k++] = r.mu_ab_upper - lo;
    mc_reports.push_back(r);
  }
  c.require(widths[0] / widths[1] >= 1.5, "width ratio " + fmt(widths[0] / widths[1]));
}

void ac5(Check& c) {
  SampleStream rng(505, 0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = std::exp(-10.0 * rng.uniform()), b = std::exp(-10.0 * rng.uniform());
    const double ab = std::max(a, b) * (1.0 + 1e-6 + 10.0 * rng.uniform());
    const double r = bm_growth(a, b, ab);
    const double back = std::pow(std::pow(a, 1 / r) + std::pow(b, 1 / r), r);
    worst = std::max(worst, std::abs(back - ab) / ab);
  }
  c.require(worst <= 1e-12, "round trip error " + fmt(worst));

  const SetSpec cap = make_cap(UnitVec3::ez(), 0.2);
  const GrowthReport rep = build_report(cap, cap, ReportMethod::closed_form, {});
  const double expect = std::log2(4 * std::cos(0.1) * std::cos(0.1));
  c.require(rep.bm_lower && std::abs(*rep.bm_lower - expect) <= 1e-6, "BM(cap 0.2) = " + fmt(*rep.bm_lower));

  for (int i = 1; i <= 40; ++i)
    for (int j = 1; j <= 40; ++j) {
      const double t1 = kPi / 2 * i / 40, t2 = kPi / 2 * j / 40;
      const double ma = cap_measure(t1), mb = cap_measure(t2), mab = cap_measure(std::min(t1 + t2, kPi));
      if (!(mab > std::max(ma, mb))) continue;
      const double r = bm_growth(ma, mb, mab);
      c.require(r <= 2.0 + 1e-12, "BM " + fmt(r) + " for caps " + fmt(t1) + "," + fmt(t2));
    }
}

void ac6(Check& c) {
  for (int i = 1; i <= 200; ++i) {
    const CapDoubling d = cap_doubling(kPi / 2 * i / 200);
    c.require(kemperman_slack(d.m, d.m, d.m2) >= 0.0, "cap slack");
    const double r = kPi / 2 * i / 200;
    c.require(kemperman_slack(ball_measure(r), ball_measure(r), ball_measure(2 * r)) >= 0.0, "ball slack");
    const double t1 = kPi / 2 * i / 200, t2 = kPi / 2 * (201 - i) / 200;
    c.require(kemperman_slack(cap_measure(t1), cap_measure(t2), cap_measure(std::min(t1 + t2, kPi))) >= 0.0,
              "cap pair slack");
  }
  ReportParams p;
  p.seed = 606;
  p.samples = 200000;
  p.witnesses = 100;
  p.grid = build_grid(12, 24, 48);
  const UnitVec3 tilt = UnitVec3::normalized(Eigen::Vector3d(1, 0, 1));
  const std::vector<std::pair<SetSpec, SetSpec>> pairs{
      {make_ball(0.3), make_ball(0.4)},
      {make_cap(UnitVec3::ez(), 0.3), make_cap(tilt, 0.5)},
      {make_cap(UnitVec3::ez(), 0.5), make_ball(0.3)}};
  for (const auto& [a, b] : pairs) mc_reports.push_back(build_report(a, b, ReportMethod::mc_grid, p));
  for (const auto& r : mc_reports)
    c.require(r.kemperman_slack >= r.kemperman_threshold,
              "mc+grid slack " + fmt(r.kemperman_slack) + " < " + fmt(r.kemperman_threshold));
}

void ac7(Check& c) {
  int checked = 0;
  for (int i = 1; i <= 400; ++i) {
    const CapDoubling d = cap_doubling(kPi / 2 * i / 400);
    if (d.m <= 0.49) {
      c.require(expansion_gap_check(d.m, d.m2), "cap at m=" + fmt(d.m));
      ++checked;
    }
    const double r = kPi * i / 400;
    const double m = ball_measure(r);
    if (m <= 0.49) {
      c.require(expansion_gap_check(m, ball_measure(std::min(2 * r, kPi))), "ball at m=" + fmt(m));
      ++checked;
    }
  }
  // Unions from the search families: the witness lower bound on mu(A^2) against the
  // one-sided upper bound on mu(A).
  Eigen::VectorXd two(6), mixed(4);
  for (double theta : {0.2, 0.35, 0.5}) {
    two << 0.0, 0.0, theta, 1.2, 0.4, theta;
    mixed << 0.0, 0.0, theta, theta;
    for (const auto& [f, p] : {std::pair{Family::two_cap_union, two}, std::pair{Family::cap_ball_union, mixed}}) {
      const SetSpec s = family_set(f, p);
      const MeasureEstimate a = estimate_measure(s, 400000, derive_seed(707, checked));
      if (a.value > 0.49) continue;
      const MeasureEstimate a2 = estimate_product_lower(s, s, 200, 400000, derive_seed(708, checked));
      const double lo2 = a2.value - 3 * a2.stderr_, hi = a.value + 3 * a.stderr_;
      c.require(expansion_gap_check(hi, std::min(lo2, 1.0)),
                family_name(f) + " at theta=" + fmt(theta) + ": " + fmt(lo2) + " vs " + fmt(hi));
      ++checked;
    }
  }
  std::printf("  %d family points checked\n", checked);
}

void ac8(Check& c) {
  for (int i = 1; i <= 100; ++i) {
    const double r = 3.0 * i / 100;
    const HyperbolicCheck h = hyperbolic_double_check(r);
    const double s2 = std::sinh(r) * std::sinh(r);
    c.require(std::abs(s2 - h.rhs) / s2 < 1e-12, "identity residual at r=" + fmt(r));
    c.require(std::abs(h.lhs - h.rhs) / s2 < 1e-12, "lhs/rhs residual at r=" + fmt(r));
    const double hyp = hyperbolic_ball_volume(2 * r) / hyperbolic_ball_volume(r);
    c.require(hyp > 4.0, "hyperbolic ratio " + fmt(hyp));
    // Spherical discs on the unit sphere, radius scaled into (0, pi/2] so the doubled disc exists.
    const double rs = kPi / 2 * i / 100;
    const double sph = sphere_cap_area(2 * rs) / sphere_cap_area(rs);
    c.require(sph < 4.0, "spherical ratio " + fmt(sph));
  }
}

void ac9(Check& c) {
  for (int i = 1; i <= 1000; ++i) {
    const double r = 0.1 * i / 1000;
    const double series = ball_volume_series({2, 2.0, r});
    const double exact = sphere_cap_area(r);
    c.require(std::abs(series / exact - 1) <= r * r * r, "n=2 at r=" + fmt(r));
  }
  const double s3 = ball_volume_series({3, 1.5, 0.2}) / (8 * kPi * kPi);
  c.require(std::abs(s3 / ball_measure(0.2) - 1) <= 1e-3, "n=3 relative error " + fmt(s3 / ball_measure(0.2) - 1));
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::vector<const char*> argv{"doubling_lab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

void ac10(Check& c) {
  const fs::path dir = fs::temp_directory_path() / ("doubling_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string journal = (dir / "journal.jsonl").string();
  const std::string cache = (dir / "grid.bin").string(), set = (dir / "a.json").string();
  const std::string rep1 = (dir / "r1.json").string(), rep2 = (dir / "r2.json").string();
  std::ofstream(set) << R"({"type":"cap","axis":[0,0,1],"theta":0.3})";

  c.require(cli({"--journal", journal, "grid-build", "--n-eta", "8", "--n-xi1", "16", "--n-xi2", "32", "--cache",
                 cache}) == 0,
            "grid-build");
  c.require(cli({"--journal", journal, "product", "--a", set, "--b", set, "--grid", cache, "--samples", "100000",
                 "--witnesses", "50", "--seed", "9", "--report", rep1}) == 0,
            "product");
  c.require(cli({"--journal", journal, "cap-scan", "--theta-min", "0.1", "--theta-max", "1.0", "--steps", "4",
                 "--samples", "50000"}) == 0,
            "cap-scan");
  std::string out;
  c.require(cli({"--journal", "", "replay", "--from", journal}, &out) == 0, "replay mismatch: " + out);

  // Rerun the product record with a different report path and worker count.
  set_worker_count(1);
  cli({"--journal", "", "product", "--a", set, "--b", set, "--grid", cache, "--samples", "100000", "--witnesses",
       "50", "--seed", "9", "--report", rep2});
  set_worker_count(0);
  c.require(slurp(rep1) == slurp(rep2) && !slurp(rep1).empty(), "report bytes differ");

  const SetSpec s = make_cap(UnitVec3::ez(), 0.7);
  for (unsigned w : {1u, 2u, 3u, 8u}) {
    set_worker_count(w);
    const MeasureEstimate e = estimate_measure(s, 300000, 1010);
    const MeasureEstimate l = estimate_product_lower(s, s, 40, 150000, 1011);
    set_worker_count(1);
    const MeasureEstimate e1 = estimate_measure(s, 300000, 1010);
    const MeasureEstimate l1 = estimate_product_lower(s, s, 40, 150000, 1011);
    c.require(e == e1 && l == l1, "MC depends on worker count " + std::to_string(w));
  }
  set_worker_count(0);
  fs::remove_all(dir);
}

void ac11(Check& c) {
  {
    SearchConfig cfg;
    cfg.family = Family::single_cap;
    cfg.target_measure = 0.01;
    cfg.measure_tolerance = 1e-5;
    cfg.restarts = 4;
    cfg.seed = 1111;
    cfg.grid = {12, 24, 48};
    cfg.mc_samples = 100000;
    cfg.initial_step = 0.05;
    cfg.optimizer.max_evals = 80;
    const SearchResult r = random_restarts(cfg, build_grid(12, 24, 48));
    const double expect = std::acos(1 - 2 * 0.01);
    std::printf("  single-cap theta %.6f (expected %.6f), upper %.4f\n", r.best_params[2], expect, r.best.upper);
    c.require(std::abs(r.best_params[2] - expect) <= 1e-3, "single-cap theta " + fmt(r.best_params[2]));
    c.require(!r.bound_anomaly, "single-cap certified bound below 4m(1-m) - 2 gap");
  }
  {
    SearchConfig cfg;
    cfg.family = Family::two_cap_union;
    cfg.target_measure = 0.01;
    cfg.measure_tolerance = 1e-3;
    cfg.restarts = 16;
    cfg.seed = 2222;
    cfg.grid = {12, 24, 48};
    cfg.mc_samples = 100000;
    cfg.initial_step = 0.1;
    cfg.optimizer.max_evals = 60;
    const SearchResult r = random_restarts(cfg, build_grid(12, 24, 48));
    const double sep = axis_separation(r.best_params);
    std::printf("  two-cap separation %.4f rad, upper %.4f, feasible %d\n", sep, r.best.upper, int(r.feasible));
    c.require(!r.bound_anomaly, "two-cap certified bound below 4m(1-m) - 2 gap");
    c.require(sep < 0.05, "two-cap axis separation " + fmt(sep));
  }
}

}  // namespace

int main() {
  report("AC1", "cap measure and cap square match closed forms by MC", ac1);
  report("AC2", "ratio 4(1-m) >= 3.99 for m <= 0.0025 and MC ratio at theta=0.1", ac2);
  report("AC3", "cap and ball doubling ratios near the small-radius limits", ac3);
  report("AC4", "grid sandwich for Cap(0.4)^2 at two resolutions", ac4);
  report("AC5", "BM solver round trip, cap value and same-axis bound", ac5);
  report("AC6", "Kemperman slack on closed-form scans and mc+grid reports", ac6);
  report("AC7", "expansion gap on every family", ac7);
  report("AC8", "hyperbolic identity and curvature contrast", ac8);
  report("AC9", "ball-volume series", ac9);
  report("AC10", "journal replay and worker-count independence", ac10);
  report("AC11", "search recovers caps and keeps two-cap axes together", ac11);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

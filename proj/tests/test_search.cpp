#include <cmath>
#include <numbers>

#include "doctest.h"
#include "doubling/errors.hpp"
#include "doubling/search.hpp"

using namespace doubling;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Eigen::VectorXd> axis_simplex(const Eigen::VectorXd& x0, double step) {
  std::vector<Eigen::VectorXd> s{x0};
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Eigen::VectorXd x = x0;
    x[i] += step;
    s.push_back(x);
  }
  return s;
}

}  // namespace

TEST_CASE("nelder-mead on a quadratic") {
  auto f = [](const Eigen::VectorXd& x) { return (x[0] - 0.3) * (x[0] - 0.3); };
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  NelderMeadOptions opt;
  opt.tol = 1e-14;
  const NelderMeadResult r = nelder_mead(f, axis_simplex(x0, 0.07), opt);
  CHECK(r.best[0] == Approx(0.3).epsilon(1e-6));
  CHECK(r.evaluations <= 200);
  CHECK(r.trace.size() == r.evaluations);

  auto g = [](const Eigen::VectorXd& x) { return (x[0] - 1) * (x[0] - 1) + 4 * (x[1] + 0.5) * (x[1] + 0.5); };
  Eigen::VectorXd y0(2);
  y0 << 0.0, 0.0;
  const NelderMeadResult q = nelder_mead(g, axis_simplex(y0, 0.2), opt);
  CHECK(std::abs(q.best[0] - 1) < 1e-5);
  CHECK(std::abs(q.best[1] + 0.5) < 1e-5);
}

TEST_CASE("nelder-mead input validation") {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  Eigen::VectorXd a(2), b(2), c(2);
  a << 0, 0;
  b << 1, 1;
  c << 2, 2;
  CHECK_THROWS_AS(nelder_mead(f, {a, b, c}, {}), InvalidArgument);
  CHECK_THROWS_AS(nelder_mead(f, {a, b}, {}), InvalidArgument);
  NelderMeadOptions tiny;
  tiny.max_evals = 2;
  c << 0, 1;
  CHECK_THROWS_AS(nelder_mead(f, {a, b, c}, tiny), InvalidArgument);
  CHECK_NOTHROW(nelder_mead(f, {a, b, c}, {}));
}

TEST_CASE("family parameters") {
  CHECK(family_dim(Family::single_cap) == 3);
  CHECK(family_dim(Family::two_cap_union) == 6);
  CHECK(family_dim(Family::cap_ball_union) == 4);
  for (Family f : {Family::single_cap, Family::two_cap_union, Family::cap_ball_union})
    CHECK(parse_family(family_name(f)) == f);
  CHECK_THROWS_AS(parse_family("three-cap"), InvalidArgument);

  Eigen::VectorXd p(3);
  p << -0.3, 7.0, 5.0;
  const Eigen::VectorXd c = canonical_params(Family::single_cap, p);
  CHECK(c[0] >= 0.0);
  CHECK(c[0] <= kPi);
  CHECK(c[1] >= 0.0);
  CHECK(c[1] < 2 * kPi);
  CHECK(c[2] == Approx(kPi / 2));
  CHECK(canonical_params(Family::single_cap, c).isApprox(c, 1e-12));

  Eigen::VectorXd t(6);
  t << 0.0, 0.0, 0.2, kPi / 2, 0.0, 0.2;
  CHECK(axis_separation(t) == Approx(kPi / 2));
  t << 0.3, 0.0, 0.2, kPi - 0.3, kPi, 0.2;
  CHECK(axis_separation(t) < 1e-12);
}

TEST_CASE("coincident two-cap union matches the single cap") {
  const GridPtr grid = build_grid(8, 16, 32);
  MeasureConfig mc;
  mc.target = cap_measure(0.3);
  mc.tolerance = 1e-3;
  mc.samples = 20000;
  mc.seed = 5;
  Eigen::VectorXd one(3), two(6);
  one << 0.7, 1.1, 0.3;
  two << 0.7, 1.1, 0.3, 0.7, 1.1, 0.3;
  const ObjectiveValue a = objective(Family::single_cap, one, grid, mc);
  const ObjectiveValue b = objective(Family::two_cap_union, two, grid, mc);
  CHECK(std::abs(a.upper - b.upper) < 1e-12);
  CHECK(a.measure == Approx(cap_measure(0.3)).epsilon(1e-12));
  CHECK(a.penalty == 0.0);
  CHECK(a.upper >= cap_doubling(0.3).m2);
}

TEST_CASE("measure penalty") {
  const GridPtr grid = build_grid(4, 8, 16);
  MeasureConfig mc;
  mc.target = 0.02;
  mc.tolerance = 1e-3;
  Eigen::VectorXd p(3);
  p << 0.0, 0.0, std::acos(1 - 2 * 0.03);
  const ObjectiveValue v = objective(Family::single_cap, p, grid, mc);
  CHECK(v.penalty >= 0.9);
  CHECK(v.value == Approx(v.upper + v.penalty));
}

TEST_CASE("random restarts are deterministic and recover the cap radius") {
  SearchConfig cfg;
  cfg.family = Family::single_cap;
  cfg.target_measure = 0.02;
  cfg.measure_tolerance = 1e-5;
  cfg.restarts = 2;
  cfg.seed = 11;
  cfg.grid = {8, 16, 32};
  cfg.mc_samples = 1000;
  cfg.initial_step = 0.05;
  cfg.optimizer.max_evals = 60;
  const GridPtr grid = build_grid(8, 16, 32);
  const SearchResult r1 = random_restarts(cfg, grid);
  const SearchResult r2 = random_restarts(cfg, grid);
  CHECK(search_result_to_json(r1).dump() == search_result_to_json(r2).dump());
  CHECK(r1.feasible);
  CHECK(r1.best_params[2] == Approx(std::acos(1 - 2 * 0.02)).epsilon(1e-3));
  CHECK(r1.trace.size() == r1.evaluations);

  const Json j = search_config_to_json(cfg);
  CHECK(search_config_to_json(search_config_from_json(j)).dump() == j.dump());
  Json bad = j;
  bad.erase("restarts");
  CHECK_THROWS_AS(search_config_from_json(bad), InvalidArgument);
}

#include <cmath>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "doubling/errors.hpp"
#include "doubling/grid.hpp"
#include "doubling/measure_mc.hpp"
#include "oracles.hpp"

using namespace doubling;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Rotation rnd(std::uint64_t seed, std::uint64_t i) {
  SampleStream s(seed, i);
  return haar_sample(s);
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("doubling_grid_" + name)).string();
}

}  // namespace

TEST_CASE("build_grid sizes, weights and radii") {
  const GridPtr g = build_grid(4, 8, 8);
  CHECK(g->size() == 256);
  double sum = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) sum += g->weight(i);
  CHECK(sum == Approx(1.0).epsilon(1e-12));
  CHECK(g->max_radius() == Approx(1.570796).epsilon(1e-6));
  CHECK(g->min_radius() == g->max_radius());

  const GridPtr one = build_grid(1, 1, 1);
  CHECK(one->size() == 1);
  CHECK(one->weight(0) == Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(build_grid(0, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1, 0, 1), InvalidArgument);
}

TEST_CASE("weights equal the Hopf volume integral") {
  // Independent check: integrate sin(eta) cos(eta) over each eta slab numerically.
  const GridPtr g = build_grid(5, 3, 7);
  for (std::uint32_t e = 0; e < 5; ++e) {
    const double a = e * kPi / 10, b = (e + 1) * kPi / 10;
    const double slab = oracle::simpson([](double x) { return std::sin(x) * std::cos(x); }, a, b, 2000);
    const double expected = slab * (kPi / 3) * (2 * kPi / 7) / (kPi * kPi);
    CHECK(g->weight(g->index(e, 1, 2)) == Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("large grid builds quickly") {
  const auto t0 = std::chrono::steady_clock::now();
  const GridPtr g = build_grid(32, 64, 128);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(g->size() == 262144);
  CHECK(s < 1.0);
}

TEST_CASE("locate") {
  const GridPtr g = build_grid(8, 16, 32);
  CHECK(g->locate(Rotation::identity()) == g->index(0, 0, 0));
  for (std::size_t i = 0; i < g->size(); ++i) CHECK(g->locate(g->center(i)) == i);
  double worst = -1.0;
  for (int i = 0; i < 10000; ++i) {
    const Rotation r = rnd(5, i);
    const std::size_t c = g->locate(r);
    worst = std::max(worst, distance(g->center(c), r) - g->radius(c));
    CHECK(distance(g->center(c), r) <= g->cover_radius(c) + 1e-12);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("locate frequencies match weights") {
  const GridPtr g = build_grid(4, 4, 8);
  const int n = 1000000;
  std::vector<double> counts(g->size(), 0.0);
  for (int i = 0; i < n; ++i) counts[g->locate(rnd(6, i))] += 1.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double expected = n * g->weight(i);
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  CHECK(chi2 < oracle::chi2_quantile_upper(static_cast<int>(g->size()) - 1, 3.0902));
}

TEST_CASE("rasterize") {
  const GridPtr g = build_grid(16, 32, 64);
  const CellSet hemi = rasterize(make_cap(UnitVec3::ez(), kPi / 2), g);
  CHECK(hemi.measure_lower() <= 0.5);
  CHECK(hemi.measure_upper() >= 0.5);
  for (std::size_t i = 0; i < g->size(); ++i)
    if (hemi.inner(i)) CHECK(hemi.outer(i));

  const CellSet whole = rasterize(make_ball(kPi), g);
  CHECK(whole.inner_count() == g->size());
  CHECK(whole.outer_count() == g->size());

  const GridPtr coarse = build_grid(2, 4, 8);
  const CellSet tiny = rasterize(make_cap(UnitVec3::ez(), 0.05), coarse);
  CHECK(tiny.inner_count() == 0);
  CHECK(tiny.outer_count() > 0);
}

TEST_CASE("sandwich soundness against Monte Carlo") {
  const GridPtr g = build_grid(12, 24, 48);
  const std::vector<SetSpec> sets{
      make_cap(UnitVec3::ex(), 0.8), make_ball(1.1),
      make_union({make_cap(UnitVec3::ez(), 0.5), make_ball(0.6)}),
      make_intersection({make_cap(UnitVec3::ey(), 1.2), make_ball(1.5)})};
  for (const auto& s : sets) {
    const CellSet c = rasterize(s, g);
    const MeasureEstimate e = estimate_measure(s, 1000000, 8);
    CHECK(c.measure_lower() - 3.0 * e.stderr_ <= e.value);
    CHECK(e.value <= c.measure_upper() + 3.0 * e.stderr_);
  }
}

TEST_CASE("refinement convergence of the rasterized sandwich") {
  const SetSpec s = make_cap(UnitVec3::ez(), 0.5);
  const CellSet a = rasterize(s, build_grid(12, 24, 48));
  const CellSet b = rasterize(s, build_grid(24, 48, 96));
  const double wa = a.measure_upper() - a.measure_lower();
  const double wb = b.measure_upper() - b.measure_lower();
  CHECK(wa / wb >= 1.5);
}

TEST_CASE("product_outer certified bounds") {
  const GridPtr g = build_grid(12, 24, 48);
  {
    const CellSet a = rasterize(make_cap(UnitVec3::ez(), 0.4), g);
    CHECK(product_outer(a, a, *g).measure_upper() >= std::sin(0.4) * std::sin(0.4));
  }
  {
    const CellSet a = rasterize(make_cap(UnitVec3::ez(), 0.3), g);
    const CellSet b = rasterize(make_cap(UnitVec3::ez(), 0.6), g);
    CHECK(product_outer(a, b, *g).measure_upper() >= (1.0 - std::cos(0.9)) / 2.0);
  }
  {
    const CellSet a = rasterize(make_ball(0.35), g);
    CHECK(product_outer(a, a, *g).measure_upper() >= ball_measure(0.7));
  }
  {
    const CellSet whole = rasterize(make_ball(kPi), g);
    const CellSet a = rasterize(make_cap(UnitVec3::ez(), 0.3), g);
    CHECK(product_outer(whole, a, *g).outer_count() == g->size());
  }
  {
    const GridPtr other = build_grid(12, 24, 24);
    const CellSet a = rasterize(make_ball(0.5), g);
    const CellSet b = rasterize(make_ball(0.5), other);
    CHECK_THROWS_AS(product_outer(a, b, *g), InvalidArgument);
  }
}

TEST_CASE("product_outer covers sampled products") {
  // Every product of points drawn from A and B must land in an outer cell of the product cover.
  const GridPtr g = build_grid(10, 20, 40);
  const SetSpec a = make_union({make_cap(UnitVec3::ex(), 0.3), make_ball(0.2)});
  const SetSpec b = make_cap(UnitVec3::normalized({1, 1, 1}), 0.5);
  const CellSet p = product_outer(rasterize(a, g), rasterize(b, g), *g);
  const auto pa = sample_in_set(a, 3000, 1);
  const auto pb = sample_in_set(b, 3000, 2);
  const CellSet q = product_outer(rasterize(b, g), rasterize(a, g), *g);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(p.outer(g->locate(compose(pa[i], pb[i]))));
    CHECK(q.outer(g->locate(compose(pb[i], pa[i]))));
  }
}

TEST_CASE("product_outer refinement shrinks the bound") {
  const SetSpec s = make_cap(UnitVec3::ez(), 0.4);
  const GridPtr g1 = build_grid(12, 24, 48), g2 = build_grid(24, 48, 96);
  const double u1 = product_outer(rasterize(s, g1), rasterize(s, g1), *g1).measure_upper();
  const double u2 = product_outer(rasterize(s, g2), rasterize(s, g2), *g2).measure_upper();
  CHECK(u2 < u1);
  CHECK(u2 >= std::sin(0.4) * std::sin(0.4));
}

TEST_CASE("dilation symmetry for ball pairs") {
  const GridPtr g = build_grid(12, 24, 48);
  const CellSet a = rasterize(make_ball(0.3), g);
  const CellSet b = rasterize(make_ball(0.5), g);
  const double ab = product_outer(a, b, *g).measure_upper();
  const double ba = product_outer(b, a, *g).measure_upper();
  CHECK(std::abs(ab - ba) <= 1e-12);
}

TEST_CASE("grid cache round trip and corruption") {
  const GridPtr g = build_grid(6, 10, 14);
  const std::string path = tmp_path("ok.bin");
  save_grid(*g, path);
  const GridPtr h = load_grid(path);
  REQUIRE(h->size() == g->size());
  CHECK(h->dims() == g->dims());
  for (std::size_t i = 0; i < g->size(); ++i) {
    CHECK(h->center(i) == g->center(i));
    CHECK(h->weight(i) == g->weight(i));
    CHECK(h->radius(i) == g->radius(i));
  }
  CHECK(serialize_grid(*h) == serialize_grid(*g));

  const std::string bytes = serialize_grid(*g);
  const std::string trunc = tmp_path("trunc.bin");
  {
    std::ofstream out(trunc, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(load_grid(trunc), CorruptCache);

  const std::string bad = tmp_path("magic.bin");
  {
    std::string copy = bytes;
    copy[3] = 'X';
    std::ofstream out(bad, std::ios::binary);
    out.write(copy.data(), static_cast<std::streamsize>(copy.size()));
  }
  try {
    load_grid(bad);
    FAIL("expected CorruptCache");
  } catch (const CorruptCache& e) {
    CHECK(std::string(e.what()).find("SO3GRID1") != std::string::npos);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(trunc);
  std::filesystem::remove(bad);
}

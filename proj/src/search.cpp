#include "doubling/search.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/LU>

#include "doubling/errors.hpp"
#include "doubling/measure_mc.hpp"
#include "doubling/parallel.hpp"
#include "doubling/random.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinRadius = 1e-6;
constexpr double kPenaltyWeight = 100.0;
constexpr std::uint64_t kSaltRestart = 0x5E;

UnitVec3 axis_from(double pol, double az) {
  return UnitVec3::normalized({std::sin(pol) * std::cos(az), std::sin(pol) * std::sin(az), std::cos(pol)});
}

void put_axis(Eigen::VectorXd& p, Eigen::Index at) {
  const UnitVec3 u = axis_from(p[at], p[at + 1]);
  p[at] = std::acos(std::clamp(u.z(), -1.0, 1.0));
  double az = std::atan2(u.y(), u.x());
  if (az < 0.0) az += 2.0 * kPi;
  p[at + 1] = az;
}

double clamp_radius(double r) { return std::isfinite(r) ? std::clamp(r, kMinRadius, 0.5 * kPi) : kMinRadius; }

// Radius of the metric ball with measure m (bisection on the monotone closed form).
double ball_radius_for(double m) {
  double lo = 0.0, hi = kPi;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ball_measure(mid) < m ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd initial_point(const SearchConfig& c, std::size_t restart) {
  SampleStream rng(derive_seed(c.seed, kSaltRestart), restart);
  const double theta = std::acos(1.0 - 2.0 * std::min(c.target_measure, 0.5));
  auto axis = [&](Eigen::VectorXd& p, Eigen::Index at) {
    p[at] = std::acos(2.0 * rng.uniform() - 1.0);
    p[at + 1] = 2.0 * kPi * rng.uniform();
  };
  Eigen::VectorXd p(static_cast<Eigen::Index>(family_dim(c.family)));
  switch (c.family) {
    case Family::single_cap:
      axis(p, 0);
      p[2] = theta * (0.8 + 0.4 * rng.uniform());
      break;
    case Family::two_cap_union:
      axis(p, 0);
      p[2] = theta * (0.5 + 0.5 * rng.uniform());
      axis(p, 3);
      p[5] = theta * (0.5 + 0.5 * rng.uniform());
      break;
    case Family::cap_ball_union:
      axis(p, 0);
      p[2] = theta * (0.6 + 0.4 * rng.uniform());
      p[3] = ball_radius_for(c.target_measure) * (0.3 + 0.4 * rng.uniform());
      break;
  }
  return p;
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class T>
T required(const Json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("search config: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("search config: field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::single_cap:
      return "single-cap";
    case Family::two_cap_union:
      return "two-cap-union";
    case Family::cap_ball_union:
      return "cap-ball-union";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  for (Family f : {Family::single_cap, Family::two_cap_union, Family::cap_ball_union})
    if (family_name(f) == s) return f;
  throw InvalidArgument("unknown family '" + s + "' (expected single-cap, two-cap-union or cap-ball-union)");
}

std::size_t family_dim(Family f) {
  switch (f) {
    case Family::single_cap:
      return 3;
    case Family::two_cap_union:
      return 6;
    case Family::cap_ball_union:
      return 4;
  }
  return 0;
}

Eigen::VectorXd canonical_params(Family f, const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != family_dim(f)) {
    throw InvalidArgument(family_name(f) + " expects " + std::to_string(family_dim(f)) + " parameters");
  }
  Eigen::VectorXd q = p;
  put_axis(q, 0);
  q[2] = clamp_radius(q[2]);
  if (f == Family::two_cap_union) {
    put_axis(q, 3);
    q[5] = clamp_radius(q[5]);
  } else if (f == Family::cap_ball_union) {
    q[3] = clamp_radius(q[3]);
  }
  return q;
}

SetSpec family_set(Family f, const Eigen::VectorXd& p) {
  const Eigen::VectorXd q = canonical_params(f, p);
  SetSpec cap = make_cap(axis_from(q[0], q[1]), q[2]);
  switch (f) {
    case Family::single_cap:
      return cap;
    case Family::two_cap_union:
      return make_union({cap, make_cap(axis_from(q[3], q[4]), q[5])});
    case Family::cap_ball_union:
      return make_union({cap, make_ball(q[3])});
  }
  return cap;
}

double axis_separation(const Eigen::VectorXd& p) {
  if (p.size() != 6) throw InvalidArgument("axis_separation expects two-cap-union parameters");
  // Cap(-u, t) == Cap(u, t), so only the axis lines matter.
  const double a = angle_between(axis_from(p[0], p[1]), axis_from(p[3], p[4]));
  return std::min(a, kPi - a);
}

ObjectiveValue objective(Family f, const Eigen::VectorXd& p, const GridPtr& grid, const MeasureConfig& mc) {
  const SetSpec a = family_set(f, p);
  ObjectiveValue out;
  if (const auto exact = closed_form_measure(a)) {
    out.measure = *exact;
  } else {
    if (mc.samples == 0) throw InvalidArgument("objective: mc samples must be >= 1 for this family");
    out.measure = estimate_measure(a, mc.samples, mc.seed).value;
  }
  const CellSet cells = rasterize(a, grid);
  out.upper = product_outer(cells, cells, *grid).measure_upper();
  out.sandwich_gap = cells.measure_upper() - cells.measure_lower();
  out.penalty = kPenaltyWeight * std::max(0.0, std::abs(out.measure - mc.target) - mc.tolerance);
  out.value = out.upper + out.penalty;
  return out;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const std::vector<Eigen::VectorXd>& simplex, const NelderMeadOptions& opts) {
  if (simplex.empty()) throw InvalidArgument("nelder_mead: empty simplex");
  const Eigen::Index dim = simplex.front().size();
  if (dim < 1 || simplex.size() != static_cast<std::size_t>(dim) + 1) {
    throw InvalidArgument("nelder_mead: simplex needs dim + 1 vertices");
  }
  for (const auto& v : simplex)
    if (v.size() != dim) throw InvalidArgument("nelder_mead: vertices differ in dimension");
  if (opts.max_evals < static_cast<std::size_t>(dim) + 1) {
    throw InvalidArgument("nelder_mead: max_evals must be >= dim + 1");
  }
  if (!(opts.reflect > 0.0) || !(opts.expand > 1.0) || !(opts.contract > 0.0 && opts.contract < 1.0) ||
      !(opts.shrink > 0.0 && opts.shrink < 1.0)) {
    throw InvalidArgument("nelder_mead: coefficients need reflect > 0, expand > 1, contract and shrink in (0, 1)");
  }
  Eigen::MatrixXd edges(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) edges.col(i) = simplex[static_cast<std::size_t>(i) + 1] - simplex[0];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
  lu.setThreshold(1e-12);
  if (lu.rank() < dim) throw InvalidArgument("nelder_mead: initial simplex is degenerate (affinely dependent)");

  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    ++res.evaluations;
    res.trace.emplace_back(x, v);
    if (res.trace.size() == 1 || v < res.best_value) {
      res.best = x;
      res.best_value = v;
    }
    return v;
  };
  auto budget = [&] { return res.evaluations < opts.max_evals; };

  std::vector<Eigen::VectorXd> x = simplex;
  std::vector<double> fx;
  for (const auto& v : x) fx.push_back(eval(v));
  std::vector<std::size_t> order(x.size());

  while (budget()) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (fx[worst] - fx[best] < opts.tol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += x[order[i]];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = centroid + opts.reflect * (centroid - x[worst]);
    const double fr = eval(xr);
    if (fr < fx[best]) {
      if (!budget()) {
        x[worst] = xr, fx[worst] = fr;
        break;
      }
      const Eigen::VectorXd xe = centroid + opts.expand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        x[worst] = xe, fx[worst] = fe;
      } else {
        x[worst] = xr, fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[second]) {
      x[worst] = xr, fx[worst] = fr;
      continue;
    }
    if (!budget()) break;
    const bool outside = fr < fx[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + opts.contract * (xr - centroid))
                : Eigen::VectorXd(centroid + opts.contract * (x[worst] - centroid));
    const double fc = eval(xc);
    if (outside ? fc <= fr : fc < fx[worst]) {
      x[worst] = xc, fx[worst] = fc;
      continue;
    }
    for (std::size_t i : order) {
      if (i == best) continue;
      if (!budget()) break;
      x[i] = x[best] + opts.shrink * (x[i] - x[best]);
      fx[i] = eval(x[i]);
    }
  }
  return res;
}

SearchResult random_restarts(const SearchConfig& config, const GridPtr& grid) {
  if (config.restarts < 1) throw InvalidArgument("random_restarts: restarts must be >= 1");
  if (!(config.target_measure > 0.0 && config.target_measure < 1.0)) {
    throw InvalidArgument("random_restarts: target_measure must lie in (0, 1)");
  }
  if (!(config.initial_step > 0.0)) throw InvalidArgument("random_restarts: initial_step must be > 0");
  const MeasureConfig mc{config.target_measure, config.measure_tolerance, config.mc_samples,
                         derive_seed(config.seed, 0x3C)};
  const Family fam = config.family;

  struct Run {
    NelderMeadResult nm;
    std::vector<ObjectiveValue> values;
  };
  std::vector<Run> runs(config.restarts);
  for_each_chunk(config.restarts, 1, [&](std::size_t r, std::size_t, std::size_t) {
    Run& run = runs[r];
    const Eigen::VectorXd start = initial_point(config, r);
    std::vector<Eigen::VectorXd> simplex{start};
    for (Eigen::Index i = 0; i < start.size(); ++i) {
      Eigen::VectorXd v = start;
      v[i] += config.initial_step;
      simplex.push_back(v);
    }
    run.nm = nelder_mead(
        [&](const Eigen::VectorXd& p) {
          run.values.push_back(objective(fam, p, grid, mc));
          return run.values.back().value;
        },
        simplex, config.optimizer);
  });

  SearchResult out;
  out.family = fam;
  out.seed = config.seed;
  bool have = false;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    for (std::size_t e = 0; e < run.nm.trace.size(); ++e) {
      const Eigen::VectorXd p = canonical_params(fam, run.nm.trace[e].first);
      const ObjectiveValue& v = run.values[e];
      out.trace.push_back({r, p, v.value});
      if (!have || v.value < out.best.value) {
        have = true;
        out.best = v;
        out.best_params = p;
      }
    }
    out.evaluations += run.nm.evaluations;
  }
  out.feasible = std::abs(out.best.measure - config.target_measure) <= config.measure_tolerance;
  const double m = std::min(out.best.measure, 0.5);
  out.bound_anomaly = out.best.upper < 4.0 * m * (1.0 - m) - 2.0 * out.best.sandwich_gap;
  return out;
}

SearchConfig search_config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("search config must be a JSON object");
  SearchConfig c;
  c.family = parse_family(required<std::string>(j, "family"));
  c.target_measure = required<double>(j, "target_measure");
  c.measure_tolerance = required<double>(j, "measure_tolerance");
  c.restarts = required<std::size_t>(j, "restarts");
  c.seed = required<std::uint64_t>(j, "seed");
  const auto g = required<std::vector<std::uint32_t>>(j, "grid");
  if (g.size() != 3) throw InvalidArgument("search config: grid must be [n_eta, n_xi1, n_xi2]");
  c.grid = {g[0], g[1], g[2]};
  c.mc_samples = required<std::uint64_t>(j, "mc_samples");
  c.initial_step = required<double>(j, "initial_step");
  c.optimizer.max_evals = required<std::size_t>(j, "max_evals");
  c.optimizer.tol = required<double>(j, "tol");
  c.optimizer.reflect = required<double>(j, "reflect");
  c.optimizer.expand = required<double>(j, "expand");
  c.optimizer.contract = required<double>(j, "contract");
  c.optimizer.shrink = required<double>(j, "shrink");
  if (!(c.measure_tolerance >= 0.0)) throw InvalidArgument("search config: measure_tolerance must be >= 0");
  return c;
}

Json search_config_to_json(const SearchConfig& c) {
  Json j;
  j["family"] = family_name(c.family);
  j["target_measure"] = c.target_measure;
  j["measure_tolerance"] = c.measure_tolerance;
  j["restarts"] = c.restarts;
  j["seed"] = c.seed;
  j["grid"] = Json::array({c.grid.n_eta, c.grid.n_xi1, c.grid.n_xi2});
  j["mc_samples"] = c.mc_samples;
  j["initial_step"] = c.initial_step;
  j["max_evals"] = c.optimizer.max_evals;
  j["tol"] = c.optimizer.tol;
  j["reflect"] = c.optimizer.reflect;
  j["expand"] = c.optimizer.expand;
  j["contract"] = c.optimizer.contract;
  j["shrink"] = c.optimizer.shrink;
  return j;
}

Json search_result_to_json(const SearchResult& r) {
  Json j;
  j["family"] = family_name(r.family);
  j["best_params"] = vec_json(r.best_params);
  j["best_objective"] = r.best.value;
  j["best_upper"] = r.best.upper;
  j["best_measure"] = r.best.measure;
  j["best_penalty"] = r.best.penalty;
  j["sandwich_gap"] = r.best.sandwich_gap;
  if (r.family == Family::two_cap_union) {
    j["axis_separation"] = axis_separation(r.best_params);
  }
  j["feasible"] = r.feasible;
  j["bound_anomaly"] = r.bound_anomaly;
  j["evaluations"] = r.evaluations;
  j["seed"] = r.seed;
  Json trace = Json::array();
  for (const auto& t : r.trace) {
    Json e;
    e["restart"] = t.restart;
    e["params"] = vec_json(t.params);
    e["objective"] = t.objective;
    trace.push_back(std::move(e));
  }
  j["trace"] = std::move(trace);
  j["tool_version"] = DOUBLING_LAB_VERSION;
  return j;
}

}  // namespace doubling

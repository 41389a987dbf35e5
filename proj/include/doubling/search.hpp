#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "doubling/grid.hpp"
#include "doubling/set_json.hpp"
#include "doubling/sets.hpp"

namespace doubling {

/// Parameter layouts (axes as polar/azimuth angles, radii clamped to [1e-6, pi/2]):
///   single-cap     [pol, az, theta]
///   two-cap-union  [pol1, az1, theta1, pol2, az2, theta2]
///   cap-ball-union [pol, az, theta, r]
enum class Family { single_cap, two_cap_union, cap_ball_union };

std::string family_name(Family f);
Family parse_family(const std::string& s);
std::size_t family_dim(Family f);

/// Wraps angles into [0, pi] x [0, 2 pi) through the axis vector and clamps radii.
Eigen::VectorXd canonical_params(Family f, const Eigen::VectorXd& p);
SetSpec family_set(Family f, const Eigen::VectorXd& p);

/// Angle in [0, pi/2] between the two cap axis lines of a two-cap-union parameter vector.
double axis_separation(const Eigen::VectorXd& p);

struct MeasureConfig {
  double target = 0.0;
  double tolerance = 1e-3;      // allowed |mu(A) - target| before the penalty starts
  std::uint64_t samples = 0;    // MC samples when mu(A) has no closed form
  std::uint64_t seed = 0;       // fixed across evaluations so the objective is deterministic
};

struct ObjectiveValue {
  double value = 0.0;     // upper + penalty
  double upper = 0.0;     // certified upper bound on mu(A^2)
  double measure = 0.0;   // mu(A): closed form for single leaves, else MC
  double penalty = 0.0;   // 100 max(0, |measure - target| - tolerance)
  double sandwich_gap = 0.0;  // outer - inner measure of the rasterized A
};

ObjectiveValue objective(Family f, const Eigen::VectorXd& p, const GridPtr& grid, const MeasureConfig& mc);

struct NelderMeadOptions {
  std::size_t max_evals = 200;
  double tol = 1e-10;  // stop when max - min objective over the simplex falls below tol
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd best;
  double best_value = 0.0;
  std::size_t evaluations = 0;
  std::vector<std::pair<Eigen::VectorXd, double>> trace;  // every evaluation, in order
};

/// Throws InvalidArgument for a simplex of the wrong size, an affinely dependent simplex or
/// max_evals < dim + 1.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const std::vector<Eigen::VectorXd>& simplex, const NelderMeadOptions& opts);

struct SearchConfig {
  Family family = Family::single_cap;
  double target_measure = 0.0;
  double measure_tolerance = 1e-3;
  std::size_t restarts = 1;
  std::uint64_t seed = 0;
  GridDims grid;
  std::uint64_t mc_samples = 0;
  double initial_step = 0.05;
  NelderMeadOptions optimizer;
};

struct TraceEntry {
  std::size_t restart = 0;
  Eigen::VectorXd params;
  double objective = 0.0;
};

struct SearchResult {
  Family family = Family::single_cap;
  Eigen::VectorXd best_params;
  ObjectiveValue best;
  bool feasible = false;           // |mu(A) - target| <= tolerance at the optimum
  bool bound_anomaly = false; // certified upper < 4m(1-m) - 2 gap
  std::size_t evaluations = 0;
  std::uint64_t seed = 0;
  std::vector<TraceEntry> trace;
};

/// Nelder-Mead from `restarts` seeded random simplices; restarts run concurrently and merge in
/// index order, so the result depends only on (config, grid).
SearchResult random_restarts(const SearchConfig& config, const GridPtr& grid);

SearchConfig search_config_from_json(const Json& j);
Json search_config_to_json(const SearchConfig& c);
Json search_result_to_json(const SearchResult& r);

}  // namespace doubling

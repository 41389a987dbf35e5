#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "doubling/rotation.hpp"
#include "doubling/sets.hpp"

namespace doubling {

struct GridDims {
  std::uint32_t n_eta = 1;
  std::uint32_t n_xi1 = 1;
  std::uint32_t n_xi2 = 1;

  bool operator==(const GridDims&) const = default;
};

/// Partition of SO(3) into Hopf-coordinate boxes (eta, xi1, xi2) in [0, pi/2] x [0, pi) x [0, 2pi).
/// Restricting xi1 to [0, pi) selects one sheet of the double cover S^3 -> SO(3).
///
/// Quaternion chart: (w, x, y, z) = (cos eta cos xi1, cos eta sin xi1, sin eta cos xi2, sin eta sin xi2),
/// volume element sin(eta) cos(eta) d eta d xi1 d xi2. Every point of a box lies within
/// (d eta + d xi1 + d xi2) of the box midpoint in the rotation-angle metric: the chart has unit
/// Lipschitz constant per coordinate on S^3 and the rotation angle is at most twice the S^3 angle.
class HopfGrid {
 public:
  explicit HopfGrid(GridDims dims);

  /// Coarse-to-fine block hierarchy over the index box; level 0 is the cells themselves.
  /// Radii are cover radii (see cover_radius).
  struct Level {
    std::array<std::uint32_t, 3> dims;
    std::vector<Eigen::Vector4d> centers;  // raw unit quaternions
    std::vector<double> radii;
  };

  const GridDims& dims() const { return dims_; }
  std::size_t size() const { return centers_.size(); }
  std::size_t index(std::uint32_t ie, std::uint32_t i1, std::uint32_t i2) const {
    return (static_cast<std::size_t>(ie) * dims_.n_xi1 + i1) * dims_.n_xi2 + i2;
  }
  std::array<std::uint32_t, 3> coords(std::size_t cell) const;

  const Rotation& center(std::size_t cell) const { return centers_[cell]; }
  double radius(std::size_t cell) const { return radii_[cell]; }
  double weight(std::size_t cell) const { return weights_[cell]; }
  double max_radius() const { return max_radius_; }
  double min_radius() const { return min_radius_; }

  /// Tighter certified center-to-point bound from the Hopf metric d eta^2 + cos^2 eta d xi1^2 +
  /// sin^2 eta d xi2^2 along the straight coordinate path: sqrt(d eta^2 + c^2 d xi1^2 + s^2 d xi2^2)
  /// with c, s the largest cos eta, sin eta over the cell. Used by the product cover.
  double cover_radius(std::size_t cell) const { return levels_.front().radii[cell]; }
  double max_cover_radius() const { return max_cover_radius_; }

  /// Cell containing g, by analytic inversion of the chart. O(1).
  std::size_t locate(const Rotation& g) const;
  /// Same for an arbitrary (not necessarily canonical) unit quaternion.
  std::size_t locate_raw(const Eigen::Vector4d& q) const;

  const std::vector<Level>& levels() const { return levels_; }

  /// Rebuilds a grid from stored arrays (cache loading); arrays must have size() entries.
  static HopfGrid from_arrays(GridDims dims, std::vector<Rotation> centers, std::vector<double> radii,
                              std::vector<double> weights);

 private:
  HopfGrid() = default;
  void build_levels();

  GridDims dims_;
  double d_eta_ = 0.0, d_xi1_ = 0.0, d_xi2_ = 0.0;
  std::vector<Rotation> centers_;
  std::vector<double> radii_;
  std::vector<double> weights_;
  double max_radius_ = 0.0;
  double min_radius_ = 0.0;
  double max_cover_radius_ = 0.0;
  std::vector<Level> levels_;
};

using GridPtr = std::shared_ptr<const HopfGrid>;

GridPtr build_grid(std::uint32_t n_eta, std::uint32_t n_xi1, std::uint32_t n_xi2);

/// Cache layout: "SO3GRID1", little-endian u32 n_eta, n_xi1, n_xi2, then per cell in
/// row-major (eta, xi1, xi2) order six little-endian f64: w, x, y, z, radius, weight.
std::string serialize_grid(const HopfGrid& grid);
/// `origin` names the source in error messages.
GridPtr parse_grid(const std::string& bytes, const std::string& origin);
/// Writes to a temporary file and renames, so readers never see a partial cache.
void save_grid(const HopfGrid& grid, const std::string& path);
GridPtr load_grid(const std::string& path);

/// Certified rasterization: inner cells lie inside the set, outer cells cover it.
class CellSet {
 public:
  CellSet(GridPtr grid, std::vector<std::uint8_t> inner, std::vector<std::uint8_t> outer);

  const GridPtr& grid() const { return grid_; }
  bool inner(std::size_t cell) const { return inner_[cell] != 0; }
  bool outer(std::size_t cell) const { return outer_[cell] != 0; }
  const std::vector<std::uint8_t>& inner_mask() const { return inner_; }
  const std::vector<std::uint8_t>& outer_mask() const { return outer_; }

  double measure_lower() const { return lower_; }
  double measure_upper() const { return upper_; }
  std::size_t inner_count() const;
  std::size_t outer_count() const;

 private:
  GridPtr grid_;
  std::vector<std::uint8_t> inner_;
  std::vector<std::uint8_t> outer_;
  double lower_ = 0.0;
  double upper_ = 0.0;
};

/// With f = lipschitz_eval and rho the cell radius: f(c) <= -rho is inner, f(c) >= rho is outside,
/// anything else is a boundary cell (outer only). Whole-group trees rasterize to every cell.
CellSet rasterize(const SetSpec& s, const GridPtr& grid);

/// Certified outer cover of A_set * B_set (inner mask empty).
///
/// Let X, Y be the unions of the closed outer cells of a and b. The boundary of X*Y lies in
/// dX * dY, so cells within r_i + r_j + r_m + r_k of the cell m holding a boundary-pair product
/// c_i c_j cover every cell meeting the boundary. The remaining cells split into connected
/// components that are entirely inside or entirely outside X*Y; each is classified with a sound
/// point test (undecided components are kept).
CellSet product_outer(const CellSet& a, const CellSet& b, const HopfGrid& grid);

}  // namespace doubling

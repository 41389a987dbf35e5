#include "doubling/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <tuple>

#include "doubling/errors.hpp"
#include "doubling/parallel.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr char kMagic[8] = {'S', 'O', '3', 'G', 'R', 'I', 'D', '1'};
// Slack added on the conservative side of every distance comparison (acos near 1 loses ~1e-8).
constexpr double kEps = 1e-7;

Eigen::Vector4d hopf_point(double eta, double xi1, double xi2) {
  return {std::cos(eta) * std::cos(xi1), std::cos(eta) * std::sin(xi1), std::sin(eta) * std::cos(xi2),
          std::sin(eta) * std::sin(xi2)};
}

inline double qdist(const Eigen::Vector4d& p, const Eigen::Vector4d& q) {
  return 2.0 * std::acos(std::min(1.0, std::abs(p.dot(q))));
}

inline Eigen::Vector4d qmul(const Eigen::Vector4d& g, const Eigen::Vector4d& h) {
  return {g[0] * h[0] - g[1] * h[1] - g[2] * h[2] - g[3] * h[3],
          g[0] * h[1] + g[1] * h[0] + g[2] * h[3] - g[3] * h[2],
          g[0] * h[2] - g[1] * h[3] + g[2] * h[0] + g[3] * h[1],
          g[0] * h[3] + g[1] * h[2] - g[2] * h[1] + g[3] * h[0]};
}

inline Eigen::Vector4d qconj(const Eigen::Vector4d& g) { return {g[0], -g[1], -g[2], -g[3]}; }

std::uint32_t halve(std::uint32_t n) { return (n + 1) / 2; }

// Straight coordinate path from the box midpoint to a corner, measured in the rotation metric.
double box_cover_radius(double e0, double e1, double dx1, double dx2) {
  const double c = std::cos(e0);
  const double s = std::sin(std::min(e1, 0.5 * kPi));
  const double de = e1 - e0;
  return std::sqrt(de * de + c * c * dx1 * dx1 + s * s * dx2 * dx2);
}

// ---- occupancy pyramid and branch-and-bound queries ------------------------------------------

struct Occupancy {
  std::vector<std::vector<std::uint8_t>> levels;
};

std::size_t level_index(const HopfGrid::Level& lv, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  return (static_cast<std::size_t>(a) * lv.dims[1] + b) * lv.dims[2] + c;
}

Occupancy build_occupancy(const HopfGrid& grid, const std::vector<std::uint8_t>& mask) {
  const auto& levels = grid.levels();
  Occupancy occ;
  occ.levels.resize(levels.size());
  occ.levels[0] = mask;
  for (std::size_t L = 1; L < levels.size(); ++L) {
    const auto& lo = levels[L - 1];
    const auto& hi = levels[L];
    auto& out = occ.levels[L];
    out.assign(hi.centers.size(), 0);
    const auto& in = occ.levels[L - 1];
    for (std::uint32_t a = 0; a < lo.dims[0]; ++a)
      for (std::uint32_t b = 0; b < lo.dims[1]; ++b)
        for (std::uint32_t c = 0; c < lo.dims[2]; ++c)
          if (in[level_index(lo, a, b, c)]) out[level_index(hi, a / 2, b / 2, c / 2)] = 1;
  }
  return occ;
}

struct BlockRef {
  std::uint32_t level;
  std::size_t index;
};

template <class Fn>
void for_children(const HopfGrid& grid, BlockRef blk, Fn&& fn) {
  const auto& hi = grid.levels()[blk.level];
  const auto& lo = grid.levels()[blk.level - 1];
  const std::uint32_t c2 = static_cast<std::uint32_t>(blk.index % hi.dims[2]);
  const std::uint32_t c1 = static_cast<std::uint32_t>((blk.index / hi.dims[2]) % hi.dims[1]);
  const std::uint32_t c0 = static_cast<std::uint32_t>(blk.index / (static_cast<std::size_t>(hi.dims[2]) * hi.dims[1]));
  for (std::uint32_t a = 2 * c0; a < std::min(2 * c0 + 2, lo.dims[0]); ++a)
    for (std::uint32_t b = 2 * c1; b < std::min(2 * c1 + 2, lo.dims[1]); ++b)
      for (std::uint32_t c = 2 * c2; c < std::min(2 * c2 + 2, lo.dims[2]); ++c)
        fn(BlockRef{blk.level - 1, level_index(lo, a, b, c)});
}

/// Depth-first search over occupied blocks; `test(ref)` must return false only when no occupied
/// cell below `ref` can satisfy the query. Returns true at the first passing leaf.
template <class Test>
bool exists_cell(const HopfGrid& grid, const Occupancy& occ, Test&& test, std::size_t* hit = nullptr) {
  const std::uint32_t top = static_cast<std::uint32_t>(grid.levels().size() - 1);
  std::vector<BlockRef> stack;
  for (std::size_t i = 0; i < occ.levels[top].size(); ++i)
    if (occ.levels[top][i]) stack.push_back({top, i});
  while (!stack.empty()) {
    const BlockRef blk = stack.back();
    stack.pop_back();
    if (!test(blk)) continue;
    if (blk.level == 0) {
      if (hit) *hit = blk.index;
      return true;
    }
    for_children(grid, blk, [&](BlockRef ch) {
      if (occ.levels[ch.level][ch.index]) stack.push_back(ch);
    });
  }
  return false;
}

/// Is some occupied cell center within t of x?
bool any_within(const HopfGrid& grid, const Occupancy& occ, const Eigen::Vector4d& x, double t,
                std::size_t* hint = nullptr) {
  const auto& levels = grid.levels();
  if (hint && *hint < occ.levels[0].size() && occ.levels[0][*hint] &&
      qdist(x, levels[0].centers[*hint]) <= t + kEps) {
    return true;
  }
  return exists_cell(
      grid, occ,
      [&](BlockRef b) {
        const auto& lv = levels[b.level];
        const double spread = b.level == 0 ? 0.0 : lv.radii[b.index];
        return qdist(x, lv.centers[b.index]) - spread <= t + kEps;
      },
      hint);
}

/// Cells whose center lies within t of an occupied cell center.
std::vector<std::uint8_t> near_mask(const HopfGrid& grid, const Occupancy& occ, double t) {
  const auto& levels = grid.levels();
  std::vector<std::uint8_t> out(grid.size(), 0);
  const std::uint32_t coarse = static_cast<std::uint32_t>(std::min<std::size_t>(3, levels.size() - 1));
  const auto& cl = levels[coarse];
  const std::size_t blocks = cl.centers.size();
  for_each_chunk(blocks, 1, [&](std::size_t, std::size_t begin, std::size_t) {
    const BlockRef root{coarse, begin};
    if (!any_within(grid, occ, cl.centers[begin], t + (coarse == 0 ? 0.0 : cl.radii[begin]))) return;
    std::size_t hint = static_cast<std::size_t>(-1);
    std::vector<BlockRef> stack{root};
    while (!stack.empty()) {
      const BlockRef b = stack.back();
      stack.pop_back();
      if (b.level == 0) {
        if (any_within(grid, occ, levels[0].centers[b.index], t, &hint)) out[b.index] = 1;
        continue;
      }
      for_children(grid, b, [&](BlockRef ch) { stack.push_back(ch); });
    }
  });
  return out;
}

// ---- adjacency ----------------------------------------------------------------------------

/// Outer cells that may touch a non-outer cell. Chart seams and the degenerate eta faces are
/// handled with conservative (over-inclusive) neighbourhoods.
std::vector<std::uint8_t> boundary_cells(const HopfGrid& grid, const std::vector<std::uint8_t>& outer) {
  const GridDims d = grid.dims();
  const std::int64_t ne = d.n_eta, n1 = d.n_xi1, n2 = d.n_xi2;
  auto at = [&](std::int64_t e, std::int64_t a, std::int64_t b) {
    return outer[grid.index(static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(a),
                            static_cast<std::uint32_t>(b))];
  };
  auto wrap2 = [&](std::int64_t b) { return ((b % n2) + n2) % n2; };

  // Non-outer counts along xi2 for the eta = 0 circle, and along xi1 for eta = pi/2.
  std::vector<std::int64_t> miss_low(static_cast<std::size_t>(std::min<std::int64_t>(2, ne) * n1), 0);
  std::vector<std::int64_t> miss_high(static_cast<std::size_t>(std::min<std::int64_t>(2, ne) * n2), 0);
  for (std::int64_t e = 0; e < std::min<std::int64_t>(2, ne); ++e)
    for (std::int64_t a = 0; a < n1; ++a)
      for (std::int64_t b = 0; b < n2; ++b) {
        if (!at(e, a, b)) ++miss_low[static_cast<std::size_t>(e * n1 + a)];
        if (!at(ne - 1 - e, a, b)) ++miss_high[static_cast<std::size_t>(e * n2 + b)];
      }

  std::vector<std::uint8_t> out(grid.size(), 0);
  const std::int64_t shift = n2 / 2;
  for (std::int64_t e = 0; e < ne; ++e)
    for (std::int64_t a = 0; a < n1; ++a)
      for (std::int64_t b = 0; b < n2; ++b) {
        if (!at(e, a, b)) continue;
        bool edge = false;
        for (std::int64_t de = -1; de <= 1 && !edge; ++de)
          for (std::int64_t da = -1; da <= 1 && !edge; ++da)
            for (std::int64_t db = -1; db <= 1 && !edge; ++db) {
              const std::int64_t e2 = e + de, a2 = a + da;
              if (e2 < 0 || e2 >= ne || a2 < 0 || a2 >= n1) continue;
              if (!at(e2, a2, wrap2(b + db))) edge = true;
            }
        // xi1 seam: (eta, pi, xi2) is the rotation (eta, 0, xi2 - pi).
        if (!edge && (a == 0 || a == n1 - 1)) {
          const std::int64_t other = a == 0 ? n1 - 1 : 0;
          const std::int64_t base = a == 0 ? b + shift : b - shift;
          for (std::int64_t de = -1; de <= 1 && !edge; ++de)
            for (std::int64_t db = -2; db <= 2 && !edge; ++db) {
              const std::int64_t e2 = e + de;
              if (e2 < 0 || e2 >= ne) continue;
              if (!at(e2, other, wrap2(base + db))) edge = true;
            }
        }
        // eta = 0: all xi2 collapse; neighbours are adjacent xi1 slabs (wrapping across the seam).
        if (!edge && e <= 1) {
          for (std::int64_t e2 = 0; e2 < std::min<std::int64_t>(2, ne) && !edge; ++e2)
            for (std::int64_t da = -1; da <= 1 && !edge; ++da) {
              const std::int64_t a2 = ((a + da) % n1 + n1) % n1;
              if (miss_low[static_cast<std::size_t>(e2 * n1 + a2)] > 0) edge = true;
            }
        }
        // eta = pi/2: all xi1 collapse; neighbours are adjacent xi2 slabs.
        if (!edge && e >= ne - 2) {
          for (std::int64_t k = 0; k < std::min<std::int64_t>(2, ne) && !edge; ++k)
            for (std::int64_t db = -2; db <= 2 && !edge; ++db) {
              if (miss_high[static_cast<std::size_t>(k * n2 + wrap2(b + db))] > 0) edge = true;
            }
          // the pi/2 circle also meets the seam shifted by pi
          for (std::int64_t k = 0; k < std::min<std::int64_t>(2, ne) && !edge; ++k)
            for (std::int64_t db = -2; db <= 2 && !edge; ++db) {
              if (miss_high[static_cast<std::size_t>(k * n2 + wrap2(b + shift + db))] > 0) edge = true;
            }
        }
        if (edge) out[grid.index(static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(a),
                                 static_cast<std::uint32_t>(b))] = 1;
      }
  return out;
}

/// Connected components of unmarked cells under face adjacency inside the chart (xi2 wraps).
/// Only genuine adjacencies are used, so each component lies inside one true component.
std::vector<std::vector<std::size_t>> components(const HopfGrid& grid, const std::vector<std::uint8_t>& blocked) {
  const GridDims d = grid.dims();
  std::vector<std::uint8_t> seen(blocked);
  std::vector<std::vector<std::size_t>> comps;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp;
    seen[s] = 1;
    queue.push_back(s);
    while (!queue.empty()) {
      const std::size_t c = queue.front();
      queue.pop_front();
      comp.push_back(c);
      const auto [e, a, b] = grid.coords(c);
      auto visit = [&](std::uint32_t e2, std::uint32_t a2, std::uint32_t b2) {
        const std::size_t n = grid.index(e2, a2, b2);
        if (!seen[n]) {
          seen[n] = 1;
          queue.push_back(n);
        }
      };
      if (e > 0) visit(e - 1, a, b);
      if (e + 1 < d.n_eta) visit(e + 1, a, b);
      if (a > 0) visit(e, a - 1, b);
      if (a + 1 < d.n_xi1) visit(e, a + 1, b);
      visit(e, a, (b + 1) % d.n_xi2);
      visit(e, a, (b + d.n_xi2 - 1) % d.n_xi2);
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

// ---- little-endian cache helpers -----------------------------------------------------------

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& buf, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  return v;
}

}  // namespace

// ---- HopfGrid ---------------------------------------------------------------------------------

HopfGrid::HopfGrid(GridDims dims) : dims_(dims) {
  if (dims.n_eta == 0 || dims.n_xi1 == 0 || dims.n_xi2 == 0) {
    throw InvalidArgument("grid subdivision counts must all be >= 1");
  }
  d_eta_ = 0.5 * kPi / dims.n_eta;
  d_xi1_ = kPi / dims.n_xi1;
  d_xi2_ = 2.0 * kPi / dims.n_xi2;
  const std::size_t n = static_cast<std::size_t>(dims.n_eta) * dims.n_xi1 * dims.n_xi2;
  centers_.reserve(n);
  radii_.assign(n, d_eta_ + d_xi1_ + d_xi2_);
  weights_.reserve(n);
  const double norm = d_xi1_ * d_xi2_ / (kPi * kPi);
  for (std::uint32_t e = 0; e < dims.n_eta; ++e) {
    const double lo = std::sin(e * d_eta_);
    const double hi = std::sin(e + 1 == dims.n_eta ? 0.5 * kPi : (e + 1) * d_eta_);
    const double w = 0.5 * (hi * hi - lo * lo) * norm;
    const double eta = (e + 0.5) * d_eta_;
    for (std::uint32_t a = 0; a < dims.n_xi1; ++a) {
      for (std::uint32_t b = 0; b < dims.n_xi2; ++b) {
        const Eigen::Vector4d q = hopf_point(eta, (a + 0.5) * d_xi1_, (b + 0.5) * d_xi2_);
        centers_.push_back(Rotation::from_quaternion(q[0], q[1], q[2], q[3]));
        weights_.push_back(w);
      }
    }
  }
  max_radius_ = min_radius_ = radii_.front();
  build_levels();
}

HopfGrid HopfGrid::from_arrays(GridDims dims, std::vector<Rotation> centers, std::vector<double> radii,
                               std::vector<double> weights) {
  HopfGrid g(dims);
  if (centers.size() != g.size() || radii.size() != g.size() || weights.size() != g.size()) {
    throw CorruptCache("grid arrays do not match dimensions");
  }
  g.centers_ = std::move(centers);
  g.radii_ = std::move(radii);
  g.weights_ = std::move(weights);
  g.max_radius_ = *std::max_element(g.radii_.begin(), g.radii_.end());
  g.min_radius_ = *std::min_element(g.radii_.begin(), g.radii_.end());
  g.build_levels();
  return g;
}

void HopfGrid::build_levels() {
  levels_.clear();
  Level base;
  base.dims = {dims_.n_eta, dims_.n_xi1, dims_.n_xi2};
  base.centers.reserve(size());
  for (const auto& c : centers_) base.centers.push_back(c.coeffs());
  base.radii.reserve(size());
  max_cover_radius_ = 0.0;
  for (std::uint32_t e = 0; e < dims_.n_eta; ++e) {
    const double r = box_cover_radius(e * d_eta_, (e + 1) * d_eta_, d_xi1_, d_xi2_);
    max_cover_radius_ = std::max(max_cover_radius_, r);
    base.radii.insert(base.radii.end(), static_cast<std::size_t>(dims_.n_xi1) * dims_.n_xi2, r);
  }
  levels_.push_back(std::move(base));

  std::uint32_t span = 1;
  while (levels_.back().centers.size() > 1) {
    const auto& prev = levels_.back().dims;
    span *= 2;
    Level lv;
    lv.dims = {halve(prev[0]), halve(prev[1]), halve(prev[2])};
    for (std::uint32_t a = 0; a < lv.dims[0]; ++a) {
      const double e0 = a * span * d_eta_;
      const double e1 = std::min<std::uint32_t>((a + 1) * span, dims_.n_eta) * d_eta_;
      for (std::uint32_t b = 0; b < lv.dims[1]; ++b) {
        const double x0 = b * span * d_xi1_;
        const double x1 = std::min<std::uint32_t>((b + 1) * span, dims_.n_xi1) * d_xi1_;
        for (std::uint32_t c = 0; c < lv.dims[2]; ++c) {
          const double y0 = c * span * d_xi2_;
          const double y1 = std::min<std::uint32_t>((c + 1) * span, dims_.n_xi2) * d_xi2_;
          lv.centers.push_back(hopf_point(0.5 * (e0 + e1), 0.5 * (x0 + x1), 0.5 * (y0 + y1)));
          lv.radii.push_back(box_cover_radius(e0, e1, x1 - x0, y1 - y0));
        }
      }
    }
    levels_.push_back(std::move(lv));
  }
}

std::array<std::uint32_t, 3> HopfGrid::coords(std::size_t cell) const {
  const std::uint32_t b = static_cast<std::uint32_t>(cell % dims_.n_xi2);
  const std::uint32_t a = static_cast<std::uint32_t>((cell / dims_.n_xi2) % dims_.n_xi1);
  const std::uint32_t e = static_cast<std::uint32_t>(cell / (static_cast<std::size_t>(dims_.n_xi2) * dims_.n_xi1));
  return {e, a, b};
}

std::size_t HopfGrid::locate(const Rotation& g) const { return locate_raw(g.coeffs()); }

std::size_t HopfGrid::locate_raw(const Eigen::Vector4d& q) const {
  const double eta = std::atan2(std::hypot(q[2], q[3]), std::hypot(q[0], q[1]));
  double xi1 = std::atan2(q[1], q[0]);
  double xi2 = std::atan2(q[3], q[2]);
  // Move to the sheet xi1 in [0, pi); negating the quaternion shifts both angles by pi.
  if (xi1 < 0.0) {
    xi1 += kPi;
    xi2 += kPi;
  } else if (xi1 >= kPi) {
    xi1 -= kPi;
    xi2 += kPi;
  }
  xi2 = std::fmod(xi2, 2.0 * kPi);
  if (xi2 < 0.0) xi2 += 2.0 * kPi;
  auto bin = [](double v, double width, std::uint32_t n) {
    const double k = std::floor(v / width);
    if (!(k > 0.0)) return std::uint32_t{0};
    return static_cast<std::uint32_t>(std::min<double>(k, n - 1));
  };
  return index(bin(eta, d_eta_, dims_.n_eta), bin(xi1, d_xi1_, dims_.n_xi1), bin(xi2, d_xi2_, dims_.n_xi2));
}

GridPtr build_grid(std::uint32_t n_eta, std::uint32_t n_xi1, std::uint32_t n_xi2) {
  return std::make_shared<const HopfGrid>(GridDims{n_eta, n_xi1, n_xi2});
}

// ---- cache ------------------------------------------------------------------------------------

std::string serialize_grid(const HopfGrid& grid) {
  std::string buf(kMagic, sizeof(kMagic));
  put_u32(buf, grid.dims().n_eta);
  put_u32(buf, grid.dims().n_xi1);
  put_u32(buf, grid.dims().n_xi2);
  buf.reserve(buf.size() + grid.size() * 48);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Rotation& c = grid.center(i);
    put_f64(buf, c.w());
    put_f64(buf, c.x());
    put_f64(buf, c.y());
    put_f64(buf, c.z());
    put_f64(buf, grid.radius(i));
    put_f64(buf, grid.weight(i));
  }
  return buf;
}

GridPtr parse_grid(const std::string& buf, const std::string& origin) {
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptCache("corrupt grid cache " + origin + ": expected magic \"SO3GRID1\"");
  }
  if (buf.size() < sizeof(kMagic) + 12) {
    throw CorruptCache("corrupt grid cache " + origin + ": truncated SO3GRID1 header");
  }
  GridDims dims{static_cast<std::uint32_t>(get_le(buf, 8, 4)), static_cast<std::uint32_t>(get_le(buf, 12, 4)),
                static_cast<std::uint32_t>(get_le(buf, 16, 4))};
  if (dims.n_eta == 0 || dims.n_xi1 == 0 || dims.n_xi2 == 0) {
    throw CorruptCache("corrupt grid cache " + origin + ": zero subdivision count");
  }
  const std::size_t n = static_cast<std::size_t>(dims.n_eta) * dims.n_xi1 * dims.n_xi2;
  if (buf.size() != 20 + n * 48) {
    throw CorruptCache("corrupt grid cache " + origin + ": size " + std::to_string(buf.size()) +
                       " does not match " + std::to_string(20 + n * 48) + " for SO3GRID1 dimensions");
  }
  std::vector<Rotation> centers;
  std::vector<double> radii, weights;
  centers.reserve(n);
  radii.reserve(n);
  weights.reserve(n);
  auto f64 = [&](std::size_t pos) { return std::bit_cast<double>(get_le(buf, pos, 8)); };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = 20 + i * 48;
    try {
      centers.push_back(Rotation::from_canonical(f64(p), f64(p + 8), f64(p + 16), f64(p + 24)));
    } catch (const InvalidArgument&) {
      throw CorruptCache("corrupt grid cache " + origin + ": cell " + std::to_string(i) +
                         " center is not a unit quaternion (SO3GRID1)");
    }
    radii.push_back(f64(p + 32));
    weights.push_back(f64(p + 40));
  }
  return std::make_shared<const HopfGrid>(HopfGrid::from_arrays(dims, std::move(centers), std::move(radii),
                                                                std::move(weights)));
}

void save_grid(const HopfGrid& grid, const std::string& path) {
  const std::string buf = serialize_grid(grid);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write grid cache: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw InvalidArgument("cannot write grid cache: " + path);
  }
  std::filesystem::rename(tmp, path);
}

GridPtr load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open grid cache: " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_grid(buf, path);
}

// ---- CellSet ----------------------------------------------------------------------------------

CellSet::CellSet(GridPtr grid, std::vector<std::uint8_t> inner, std::vector<std::uint8_t> outer)
    : grid_(std::move(grid)), inner_(std::move(inner)), outer_(std::move(outer)) {
  if (!grid_ || inner_.size() != grid_->size() || outer_.size() != grid_->size()) {
    throw InvalidArgument("cell set masks must match the grid size");
  }
  for (std::size_t i = 0; i < inner_.size(); ++i) {
    if (inner_[i] && !outer_[i]) throw InvalidArgument("cell set: inner cells must be outer cells");
    if (inner_[i]) lower_ += grid_->weight(i);
    if (outer_[i]) upper_ += grid_->weight(i);
  }
}

std::size_t CellSet::inner_count() const { return static_cast<std::size_t>(std::count(inner_.begin(), inner_.end(), 1)); }
std::size_t CellSet::outer_count() const { return static_cast<std::size_t>(std::count(outer_.begin(), outer_.end(), 1)); }

CellSet rasterize(const SetSpec& s, const GridPtr& grid) {
  const std::size_t n = grid->size();
  if (covers_group(s)) return CellSet(grid, std::vector<std::uint8_t>(n, 1), std::vector<std::uint8_t>(n, 1));
  std::vector<std::uint8_t> inner(n, 0), outer(n, 0);
  for_each_chunk(n, kChunkSize, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double f = lipschitz_eval(s, grid->center(i));
      const double rho = grid->radius(i);
      if (f <= -rho) inner[i] = 1;
      if (f < rho) outer[i] = 1;
    }
  });
  return CellSet(grid, std::move(inner), std::move(outer));
}

namespace {

// g -> g^-1 sends the box of cell (e, a, b) exactly onto the box of cell (e, n_xi1 - 1 - a, b).
std::vector<std::uint8_t> invert_mask(const HopfGrid& grid, const std::vector<std::uint8_t>& m) {
  std::vector<std::uint8_t> out(m.size(), 0);
  const GridDims& d = grid.dims();
  for (std::uint32_t e = 0; e < d.n_eta; ++e)
    for (std::uint32_t a = 0; a < d.n_xi1; ++a)
      for (std::uint32_t b = 0; b < d.n_xi2; ++b) out[grid.index(e, d.n_xi1 - 1 - a, b)] = m[grid.index(e, a, b)];
  return out;
}

std::vector<std::uint8_t> product_mask(const std::vector<std::uint8_t>& a_out, const std::vector<std::uint8_t>& b_out,
                                       const HopfGrid& grid) {
  const std::size_t n = grid.size();
  const auto& cells = grid.levels()[0].centers;
  const double rho = grid.max_cover_radius();
  if (std::find(a_out.begin(), a_out.end(), 1) == a_out.end() || std::find(b_out.begin(), b_out.end(), 1) == b_out.end()) {
    return std::vector<std::uint8_t>(n, 0);
  }

  // 1. Cells holding a product of boundary-cell centers.
  const auto bd_a_mask = boundary_cells(grid, a_out);
  const auto bd_b_mask = boundary_cells(grid, b_out);
  std::vector<std::size_t> bd_a, bd_b;
  for (std::size_t i = 0; i < n; ++i) {
    if (bd_a_mask[i]) bd_a.push_back(i);
    if (bd_b_mask[i]) bd_b.push_back(i);
  }
  std::vector<std::uint8_t> seeds(n, 0);
  if (!bd_a.empty() && !bd_b.empty()) {
    const unsigned workers = std::max(1u, worker_count());
    const std::size_t chunk = (bd_a.size() + workers - 1) / workers;
    const std::size_t chunks = (bd_a.size() + chunk - 1) / chunk;
    std::vector<std::vector<std::uint8_t>> partial(chunks);
    for_each_chunk(bd_a.size(), chunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
      auto& mask = partial[c];
      mask.assign(n, 0);
      for (std::size_t ii = begin; ii < end; ++ii) {
        const Eigen::Vector4d& ci = cells[bd_a[ii]];
        for (std::size_t j : bd_b) mask[grid.locate_raw(qmul(ci, cells[j]))] = 1;
      }
    });
    for (const auto& mask : partial)
      for (std::size_t i = 0; i < n; ++i) seeds[i] |= mask[i];
  }

  // 2. Every cell meeting the boundary of X*Y is within r_i + r_j + r_m + r_k of a seed center.
  std::vector<std::uint8_t> marked = near_mask(grid, build_occupancy(grid, seeds), 4.0 * rho);

  // 3. Classify the remaining components.
  const Occupancy occ_a = build_occupancy(grid, a_out);
  const Occupancy occ_b = build_occupancy(grid, b_out);
  const auto& levels = grid.levels();
  auto certainly_out = [&](std::size_t k) {
    // c_k is outside X*Y when no pair of centers has d(c_k, c_i c_j) <= r_i + r_j.
    const Eigen::Vector4d& ck = cells[k];
    return !exists_cell(grid, occ_a, [&](BlockRef blk) {
      const auto& lv = levels[blk.level];
      const Eigen::Vector4d x = qmul(qconj(lv.centers[blk.index]), ck);
      const double spread = blk.level == 0 ? 0.0 : lv.radii[blk.index];
      return any_within(grid, occ_b, x, 2.0 * rho + spread);
    });
  };
  auto certainly_in = [&](std::size_t k) {
    // c_k = c_i (c_i^-1 c_k) with c_i in X and c_i^-1 c_k in an outer cell of b.
    const Eigen::Vector4d& ck = cells[k];
    return exists_cell(grid, occ_a, [&](BlockRef blk) {
      const auto& lv = levels[blk.level];
      const Eigen::Vector4d x = qmul(qconj(lv.centers[blk.index]), ck);
      if (blk.level == 0) return b_out[grid.locate_raw(x)] != 0;
      return any_within(grid, occ_b, x, lv.radii[blk.index] + rho);
    });
  };

  std::vector<std::uint8_t> result = marked;
  for (const auto& comp : components(grid, marked)) {
    std::vector<std::size_t> probes{comp.back(), comp.front()};
    constexpr std::size_t kProbes = 12;
    for (std::size_t p = 1; p + 1 < kProbes && comp.size() > kProbes; ++p) probes.push_back(comp[p * comp.size() / kProbes]);
    bool inside = true;  // undecided components stay in the cover
    for (std::size_t k : probes) {
      if (certainly_out(k)) {
        inside = false;
        break;
      }
      if (certainly_in(k)) break;
    }
    if (inside)
      for (std::size_t k : comp) result[k] = 1;
  }
  return result;
}

}  // namespace

// A B is covered either directly or as the inverse of a cover of B^-1 A^-1. Taking the order with
// the smaller mask pair makes the result depend on the pair up to inversion, so inversion-symmetric
// sets (balls, same-axis caps) give product_outer(A, B) == product_outer(B, A) cell for cell.
CellSet product_outer(const CellSet& a, const CellSet& b, const HopfGrid& grid) {
  if (a.grid()->dims() != grid.dims() || b.grid()->dims() != grid.dims()) {
    throw InvalidArgument("product_outer: cell sets must live on the given grid");
  }
  const std::size_t n = grid.size();
  auto b_inv = invert_mask(grid, b.outer_mask());
  auto a_inv = invert_mask(grid, a.outer_mask());
  const bool flip = std::tie(b_inv, a_inv) < std::tie(a.outer_mask(), b.outer_mask());
  std::vector<std::uint8_t> outer =
      flip ? invert_mask(grid, product_mask(b_inv, a_inv, grid)) : product_mask(a.outer_mask(), b.outer_mask(), grid);
  return CellSet(a.grid(), std::vector<std::uint8_t>(n, 0), std::move(outer));
}

}  // namespace doubling

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "gsnav/collide.hpp"
#include "gsnav/error.hpp"
#include "gsnav/math.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::voxgrid {

using collide::SphereBody;
using scene::Scene;


/// Axis-aligned occupancy grid with half-open cells
/// [origin + i*cell, origin + (i+1)*cell); points on a shared face bin upward.
/// Linear index runs x-fastest: idx = (k*ny + j)*nx + i.
struct OccupancyGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 cell = Vec3::Ones();
  Vec3i dims = Vec3i::Zero();
  std::vector<std::uint8_t> bits;  // bit-packed occupancy, LSB first
  int clipped_boxes = 0;           // AABBs that poked outside the bounds

  std::int64_t cell_count() const {
    return static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t linear(int i, int j, int k) const {
    return (static_cast<std::int64_t>(k) * dims[1] + j) * dims[0] + i;
  }
  bool in_bounds(const Vec3i& c) const {
    return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims[0] &&
           c[1] < dims[1] && c[2] < dims[2];
  }
  bool occupied(std::int64_t idx) const {
    return (bits[static_cast<std::size_t>(idx >> 3)] >> (idx & 7)) & 1;
  }
  bool occupied(const Vec3i& c) const { return occupied(linear(c[0], c[1], c[2])); }
  void set_occupied(std::int64_t idx) {
    bits[static_cast<std::size_t>(idx >> 3)] |=
        static_cast<std::uint8_t>(1u << (idx & 7));
  }
  Vec3 center(const Vec3i& c) const {
    return origin + ((c.cast<double>().array() + 0.5) * cell.array()).matrix();
  }
  /// Containing cell of a point, or nullopt-like out-of-range coordinates.
  Vec3i cell_of(const Vec3& p) const {
    Vec3i c;
    for (int a = 0; a < 3; ++a)
      c[a] = static_cast<int>(std::floor((p[a] - origin[a]) / cell[a]));
    return c;
  }
  std::int64_t occupied_count() const {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < cell_count(); ++i) n += occupied(i) ? 1 : 0;
    return n;
  }
};

namespace detail {

// Mark every cell intersecting the closed box [lo, hi]: bisect the box along
// its longest side (relative to the cell size) until no side exceeds a cell,
// then bin all eight corners.  Sub-boxes never straddle more than one cell
// boundary per axis, so corner binning covers exactly the intersected cells.
inline void mark_box(OccupancyGrid& g, Vec3 lo, Vec3 hi) {
  struct Box {
    Vec3 lo, hi;
  };
  std::vector<Box> stack{{lo, hi}};
  while (!stack.empty()) {
    const Box b = stack.back();
    stack.pop_back();
    int axis = -1;
    double worst = 1.0;
    for (int a = 0; a < 3; ++a) {
      const double ratio = (b.hi[a] - b.lo[a]) / g.cell[a];
      if (ratio > worst) {
        worst = ratio;
        axis = a;
      }
    }
    if (axis >= 0) {
      const double mid = 0.5 * (b.lo[axis] + b.hi[axis]);
      Box left = b, right = b;
      left.hi[axis] = mid;
      right.lo[axis] = mid;
      stack.push_back(left);
      stack.push_back(right);
      continue;
    }
    for (int corner = 0; corner < 8; ++corner) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = (corner >> a) & 1 ? b.hi[a] : b.lo[a];
      const Vec3i c = g.cell_of(p);
      if (g.in_bounds(c)) g.set_occupied(g.linear(c[0], c[1], c[2]));
    }
  }
}

}  // namespace detail

/// Rasterize the scene's ellipsoid bounding boxes into an occupancy grid.
/// Boxes reaching outside the bounds are clipped (counted in clipped_boxes).
inline OccupancyGrid build_grid(const Scene& s, const Vec3& bounds_min,
                                const Vec3& bounds_max, const Vec3i& resolution) {
  if (!(resolution.minCoeff() >= 2))
    fail(ErrorCode::kDomain, "build_grid: need at least 2 cells per axis");
  if (!((bounds_max - bounds_min).minCoeff() > 0.0))
    fail(ErrorCode::kDomain, "build_grid: empty bounds");
  OccupancyGrid g;
  g.origin = bounds_min;
  g.dims = resolution;
  g.cell = ((bounds_max - bounds_min).array() /
            resolution.cast<double>().array()).matrix();
  g.bits.assign(static_cast<std::size_t>((g.cell_count() + 7) / 8), 0);
  for (const scene::Ellipsoid& e : s.ellipsoids) {
    const Vec3 h = e.aabb_half();
    Vec3 lo = e.mu - h;
    Vec3 hi = e.mu + h;
    bool clipped = false;
    for (int a = 0; a < 3; ++a) {
      if (lo[a] < bounds_min[a]) {
        lo[a] = bounds_min[a];
        clipped = true;
      }
      if (hi[a] > bounds_max[a]) {
        hi[a] = bounds_max[a];
        clipped = true;
      }
      if (lo[a] > hi[a]) {  // fully outside along this axis
        clipped = true;
        lo = hi = Vec3::Zero();
        hi[0] = -1.0;  // sentinel: skip marking entirely
        break;
      }
    }
    if (clipped) ++g.clipped_boxes;
    if (hi[0] < lo[0]) continue;
    detail::mark_box(g, lo, hi);
  }
  return g;
}

/// Dilate occupancy by the robot: a cell is occupied in the result when any
/// input-occupied cell center lies within kappa + half cell diagonal, i.e. the
/// max-pool kernel of integer offsets o with ||o .* cell||_2 <= that radius.
/// Free output cells therefore admit the whole robot sphere at their center.
inline OccupancyGrid inflate(const OccupancyGrid& in, const SphereBody& body) {
  if (body.radius < 0.0) fail(ErrorCode::kDomain, "inflate: negative body radius");
  const double reach = body.radius + 0.5 * in.cell.norm();
  std::vector<Vec3i> kernel;
  const Vec3i span(static_cast<int>(reach / in.cell[0]),
                   static_cast<int>(reach / in.cell[1]),
                   static_cast<int>(reach / in.cell[2]));
  for (int dk = -span[2]; dk <= span[2]; ++dk)
    for (int dj = -span[1]; dj <= span[1]; ++dj)
      for (int di = -span[0]; di <= span[0]; ++di) {
        const Vec3 off(di * in.cell[0], dj * in.cell[1], dk * in.cell[2]);
        if (off.norm() <= reach) kernel.emplace_back(di, dj, dk);
      }
  OccupancyGrid out = in;
  std::fill(out.bits.begin(), out.bits.end(), 0);
  for (int k = 0; k < in.dims[2]; ++k)
    for (int j = 0; j < in.dims[1]; ++j)
      for (int i = 0; i < in.dims[0]; ++i) {
        if (!in.occupied(in.linear(i, j, k))) continue;
        for (const Vec3i& o : kernel) {
          const Vec3i c(i + o[0], j + o[1], k + o[2]);
          if (out.in_bounds(c)) out.set_occupied(out.linear(c[0], c[1], c[2]));
        }
      }
  return out;
}

/// Shortest grid path between two points through free cells.
/// 26-connected search with Euclidean step costs and a no-corner-cutting
/// rule: a move is admissible only when every cell of the axis-aligned
/// superbox spanned by source and target is free, so the straight segment
/// between the two cell centers stays inside free cells.  Implemented as A*
/// with a consistent straight-line heuristic; the returned path cost is
/// exactly the Dijkstra-optimal cost.  Equal-cost alternatives resolve
/// deterministically via the (priority, index) heap order and a lower-parent
/// tie-break.  Returns [start, cell centers..., goal].
inline std::vector<Vec3> shortest_path(const OccupancyGrid& g, const Vec3& start,
                                       const Vec3& goal) {
  const Vec3i cs = g.cell_of(start);
  const Vec3i cg = g.cell_of(goal);
  if (!g.in_bounds(cs))
    fail(ErrorCode::kBlockedEndpoint, "shortest_path: start outside grid bounds");
  if (!g.in_bounds(cg))
    fail(ErrorCode::kBlockedEndpoint, "shortest_path: goal outside grid bounds");
  if (g.occupied(cs))
    fail(ErrorCode::kBlockedEndpoint, "shortest_path: start cell occupied");
  if (g.occupied(cg))
    fail(ErrorCode::kBlockedEndpoint, "shortest_path: goal cell occupied");

  struct Move {
    Vec3i off;
    double cost;
  };
  std::vector<Move> moves;
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        const Vec3 step(di * g.cell[0], dj * g.cell[1], dk * g.cell[2]);
        moves.push_back({Vec3i(di, dj, dk), step.norm()});
      }

  auto admissible = [&](const Vec3i& from, const Vec3i& off) {
    for (int k = std::min(0, off[2]); k <= std::max(0, off[2]); ++k)
      for (int j = std::min(0, off[1]); j <= std::max(0, off[1]); ++j)
        for (int i = std::min(0, off[0]); i <= std::max(0, off[0]); ++i) {
          const Vec3i c(from[0] + i, from[1] + j, from[2] + k);
          if (!g.in_bounds(c) || g.occupied(c)) return false;
        }
    return true;
  };

  const std::int64_t n = g.cell_count();
  std::vector<double> dist(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> prev(static_cast<std::size_t>(n), -1);
  // Goal-directed search (A*) with the straight-line distance between cell
  // centers as heuristic.  The heuristic is consistent for Euclidean move
  // costs, so the result cost is identical to plain Dijkstra; the heuristic
  // only narrows the explored region.  Heap entries carry (f, g, index) and
  // staleness is decided on the exact g value, never on the rounded f.
  const Vec3 goal_center = g.center(cg);
  auto heuristic = [&](const Vec3i& c) { return (g.center(c) - goal_center).norm(); };
  using Entry = std::tuple<double, double, std::int64_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  const std::int64_t si = g.linear(cs[0], cs[1], cs[2]);
  const std::int64_t gi = g.linear(cg[0], cg[1], cg[2]);
  dist[static_cast<std::size_t>(si)] = 0.0;
  heap.emplace(heuristic(cs), 0.0, si);
  while (!heap.empty()) {
    const auto [f, d, idx] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(idx)]) continue;
    if (idx == gi) break;
    Vec3i c;
    c[0] = static_cast<int>(idx % g.dims[0]);
    c[1] = static_cast<int>((idx / g.dims[0]) % g.dims[1]);
    c[2] = static_cast<int>(idx / (static_cast<std::int64_t>(g.dims[0]) * g.dims[1]));
    for (const Move& m : moves) {
      const Vec3i t = c + m.off;
      if (!g.in_bounds(t) || !admissible(c, m.off)) continue;
      const std::int64_t ti = g.linear(t[0], t[1], t[2]);
      const double nd = d + m.cost;
      double& cur = dist[static_cast<std::size_t>(ti)];
      // Lexicographic tie-break: on equal cost keep the lower-index parent.
      if (nd < cur ||
          (nd == cur && prev[static_cast<std::size_t>(ti)] > idx)) {
        cur = nd;
        prev[static_cast<std::size_t>(ti)] = idx;
        heap.emplace(nd + heuristic(t), nd, ti);
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(gi)]))
    fail(ErrorCode::kDisconnected,
         "shortest_path: start and goal are not connected in the free space");

  std::vector<Vec3> waypoints;
  std::vector<std::int64_t> chain;
  for (std::int64_t at = gi; at != -1; at = prev[static_cast<std::size_t>(at)])
    chain.push_back(at);
  waypoints.reserve(chain.size() + 2);
  waypoints.push_back(start);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    Vec3i c;
    c[0] = static_cast<int>(*it % g.dims[0]);
    c[1] = static_cast<int>((*it / g.dims[0]) % g.dims[1]);
    c[2] = static_cast<int>(*it / (static_cast<std::int64_t>(g.dims[0]) * g.dims[1]));
    waypoints.push_back(g.center(c));
  }
  waypoints.push_back(goal);
  return waypoints;
}

/// True when the straight segment between two points stays inside free cells.
/// Conservative: the segment is sampled at quarter-cell steps and every
/// axis-aligned superbox between consecutive sample cells must be free — the
/// same no-corner-cutting rule the path search applies to its moves.
inline bool line_of_sight(const OccupancyGrid& g, const Vec3& a, const Vec3& b) {
  auto cell_free = [&](const Vec3i& c) {
    return g.in_bounds(c) && !g.occupied(g.linear(c[0], c[1], c[2]));
  };
  Vec3i prev = g.cell_of(a);
  if (!cell_free(prev)) return false;
  const Vec3 delta = b - a;
  const double step = std::max(1e-12, g.cell.minCoeff() / 4.0);
  const int steps = std::max(1, static_cast<int>(std::ceil(delta.norm() / step)));
  for (int i = 1; i <= steps; ++i) {
    const Vec3 x = a + (static_cast<double>(i) / steps) * delta;
    const Vec3i cur = g.cell_of(x);
    for (int k = std::min(prev[2], cur[2]); k <= std::max(prev[2], cur[2]); ++k)
      for (int j = std::min(prev[1], cur[1]); j <= std::max(prev[1], cur[1]); ++j)
        for (int ii = std::min(prev[0], cur[0]); ii <= std::max(prev[0], cur[0]);
             ++ii)
          if (!cell_free(Vec3i(ii, j, k))) return false;
    prev = cur;
  }
  return true;
}

/// Greedy shortcutting of a waypoint path: from each kept waypoint, jump to
/// the farthest later waypoint still in line of sight.  Collapses collinear
/// grid runs (a straight shot through free space reduces to [start, goal])
/// and never lengthens the path.  Consecutive input waypoints are assumed
/// connected, so the result always reaches the final waypoint.
inline std::vector<Vec3> simplify_path(const OccupancyGrid& g,
                                       const std::vector<Vec3>& waypoints) {
  if (waypoints.size() <= 2) return waypoints;
  std::vector<Vec3> out;
  out.push_back(waypoints.front());
  std::size_t i = 0;
  while (i + 1 < waypoints.size()) {
    std::size_t next = i + 1;
    for (std::size_t j = waypoints.size() - 1; j > i + 1; --j) {
      if (line_of_sight(g, waypoints[i], waypoints[j])) {
        next = j;
        break;
      }
    }
    out.push_back(waypoints[next]);
    i = next;
  }
  return out;
}

// ---- binary serialization -------------------------------------------------

inline constexpr std::array<char, 16> kGridMagic = {
    'G', 'S', 'N', 'A', 'V', 'G', 'R', 'I', 'D', '0', '0', '1', 0, 0, 0, 0};

/// Flat little-endian layout: 16-byte magic, origin + cell (6 x f64),
/// dims (3 x i32), then the bit-packed payload.
inline void save_grid(const OccupancyGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "save_grid: cannot open " + path);
  out.write(kGridMagic.data(), kGridMagic.size());
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_i32 = [&](std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  for (int a = 0; a < 3; ++a) put_f64(g.origin[a]);
  for (int a = 0; a < 3; ++a) put_f64(g.cell[a]);
  for (int a = 0; a < 3; ++a) put_i32(g.dims[a]);
  out.write(reinterpret_cast<const char*>(g.bits.data()),
            static_cast<std::streamsize>(g.bits.size()));
  if (!out) fail(ErrorCode::kIo, "save_grid: write failed for " + path);
}

inline OccupancyGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "load_grid: cannot open " + path);
  std::array<char, 16> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 16 || magic != kGridMagic)
    fail(ErrorCode::kSchema, "load_grid: " + path + ": bad magic");
  OccupancyGrid g;
  auto get_f64 = [&]() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto get_i32 = [&]() {
    std::int32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  for (int a = 0; a < 3; ++a) g.origin[a] = get_f64();
  for (int a = 0; a < 3; ++a) g.cell[a] = get_f64();
  for (int a = 0; a < 3; ++a) g.dims[a] = get_i32();
  if (!in) fail(ErrorCode::kIo, "load_grid: " + path + ": truncated header");
  if (g.dims.minCoeff() <= 0 || g.cell.minCoeff() <= 0.0)
    fail(ErrorCode::kSchema, "load_grid: " + path + ": invalid header values");
  g.bits.assign(static_cast<std::size_t>((g.cell_count() + 7) / 8), 0);
  in.read(reinterpret_cast<char*>(g.bits.data()),
          static_cast<std::streamsize>(g.bits.size()));
  if (static_cast<std::size_t>(in.gcount()) != g.bits.size())
    fail(ErrorCode::kIo, "load_grid: " + path + ": truncated payload");
  return g;
}

}  // namespace gsnav::voxgrid

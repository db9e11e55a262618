#pragma once

// Independent reference for grid shortest-path cost: a set-based Dijkstra
// with its own neighbor enumeration and its own superbox admissibility rule,
// sharing no code with the library's search.

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "gsnav/voxgrid.hpp"

namespace refdijkstra {

/// Optimal cell-center path cost between two cells, +infinity when not
/// connected.  A move between adjacent cells (Chebyshev distance 1) is
/// allowed only if every cell of the axis-aligned box spanned by the two
/// cells is free; its cost is the Euclidean distance between cell centers.
inline double cost(const gsnav::voxgrid::OccupancyGrid& g,
                   const gsnav::Vec3i& from, const gsnav::Vec3i& to) {
  using gsnav::Vec3i;
  const double inf = std::numeric_limits<double>::infinity();
  auto free_cell = [&](int i, int j, int k) {
    return g.in_bounds(Vec3i(i, j, k)) &&
           !g.occupied(g.linear(i, j, k));
  };
  if (!free_cell(from[0], from[1], from[2]) || !free_cell(to[0], to[1], to[2]))
    return inf;

  const std::int64_t n = g.cell_count();
  std::vector<double> dist(static_cast<std::size_t>(n), inf);
  std::set<std::pair<double, std::int64_t>> queue;
  const std::int64_t src = g.linear(from[0], from[1], from[2]);
  const std::int64_t dst = g.linear(to[0], to[1], to[2]);
  dist[static_cast<std::size_t>(src)] = 0.0;
  queue.insert({0.0, src});
  while (!queue.empty()) {
    const auto [d, idx] = *queue.begin();
    queue.erase(queue.begin());
    if (idx == dst) return d;
    const int ci = static_cast<int>(idx % g.dims[0]);
    const int cj = static_cast<int>((idx / g.dims[0]) % g.dims[1]);
    const int ck = static_cast<int>(
        idx / (static_cast<std::int64_t>(g.dims[0]) * g.dims[1]));
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0 && dk == 0) continue;
          const int ti = ci + di, tj = cj + dj, tk = ck + dk;
          bool ok = true;
          for (int k = std::min(ck, tk); k <= std::max(ck, tk) && ok; ++k)
            for (int j = std::min(cj, tj); j <= std::max(cj, tj) && ok; ++j)
              for (int i = std::min(ci, ti); i <= std::max(ci, ti) && ok; ++i)
                ok = free_cell(i, j, k);
          if (!ok) continue;
          const double step = std::sqrt(di * di * g.cell[0] * g.cell[0] +
                                        dj * dj * g.cell[1] * g.cell[1] +
                                        dk * dk * g.cell[2] * g.cell[2]);
          const std::int64_t t = g.linear(ti, tj, tk);
          if (d + step < dist[static_cast<std::size_t>(t)]) {
            queue.erase({dist[static_cast<std::size_t>(t)], t});
            dist[static_cast<std::size_t>(t)] = d + step;
            queue.insert({d + step, t});
          }
        }
  }
  return dist[static_cast<std::size_t>(dst)];
}

}  // namespace refdijkstra

#pragma once

// Minimum-cost bipartite assignment (Kuhn-Munkres with row potentials,
// O(n^3)). Rectangular inputs are padded to square with a constant that
// dominates any real cost.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace motr {

struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    for (const auto& row : init) {
      if (row.size() != cols)
        throw std::invalid_argument("CostMatrix: ragged initializer");
      values.insert(values.end(), row.begin(), row.end());
    }
  }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return values[r * cols + c];
  }
  bool empty() const { return rows == 0 || cols == 0; }
};

inline constexpr double kAssignmentPadding = 1e6;

struct MatchPair {
  std::size_t row;
  std::size_t col;
  bool operator==(const MatchPair&) const = default;
};

// Returns min(rows, cols) pairs sorted by row that minimize the total cost.
inline std::vector<MatchPair> hungarian(const CostMatrix& cost) {
  if (cost.empty()) return {};
  for (double v : cost.values)
    if (!std::isfinite(v))
      throw std::invalid_argument("hungarian: non-finite cost entry");
  const std::size_t n = std::max(cost.rows, cost.cols);
  auto at = [&](std::size_t r, std::size_t c) {
    return (r < cost.rows && c < cost.cols) ? cost(r, c) : kAssignmentPadding;
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<MatchPair> pairs;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t r = owner[j] - 1, c = j - 1;
    if (r < cost.rows && c < cost.cols) pairs.push_back({r, c});
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.row < b.row; });
  return pairs;
}

inline double total_cost(const CostMatrix& cost,
                         const std::vector<MatchPair>& pairs) {
  double total = 0;
  for (const auto& p : pairs) total += cost(p.row, p.col);
  return total;
}

}  // namespace motr

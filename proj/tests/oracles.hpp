#pragma once

// Independent reference implementations used as test oracles. They favour
// obviously-correct exhaustive search over speed.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "motr/evaluation.hpp"
#include "motr/hungarian.hpp"

namespace oracle {

// Minimum total cost over all injections of the smaller side into the larger.
inline double brute_force_assignment(const motr::CostMatrix& c) {
  const bool transpose = c.rows > c.cols;
  const std::size_t small = transpose ? c.cols : c.rows;
  const std::size_t large = transpose ? c.rows : c.cols;
  auto at = [&](std::size_t s, std::size_t l) { return transpose ? c(l, s) : c(s, l); };
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  // Every injection appears as the prefix of some permutation.
  do {
    double total = 0;
    for (std::size_t s = 0; s < small; ++s) total += at(s, perm[s]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Inference lifecycle of one track as a table: state c in [0, M) is the
// number of consecutive low scores; a low score moves c -> c + 1 and reaching
// M removes the track; a high score moves to 0. Returns per-step
// (alive, counter).
inline std::vector<std::pair<bool, int>> lifecycle_table(const std::vector<bool>& low, int m) {
  std::vector<std::vector<int>> next(static_cast<std::size_t>(m), std::vector<int>(2));
  for (int c = 0; c < m; ++c) {
    next[c][0] = 0;
    next[c][1] = c + 1;  // == m means removed
  }
  std::vector<std::pair<bool, int>> out;
  int state = 0;
  bool alive = true;
  for (bool l : low) {
    if (!alive) {
      out.emplace_back(false, state);
      continue;
    }
    state = next[static_cast<std::size_t>(state)][l ? 1 : 0];
    if (state == m) alive = false;
    out.emplace_back(alive, state);
  }
  return out;
}

// IDTP maximised over every partial bijection between gt and hypothesis
// trajectories, enumerated recursively.
inline std::size_t brute_force_idtp(const std::vector<std::vector<std::size_t>>& matched) {
  const std::size_t ng = matched.size();
  const std::size_t nh = ng ? matched[0].size() : 0;
  std::vector<bool> used(nh, false);
  std::function<std::size_t(std::size_t)> rec = [&](std::size_t g) -> std::size_t {
    if (g == ng) return 0;
    std::size_t best = rec(g + 1);  // g unmatched
    for (std::size_t h = 0; h < nh; ++h) {
      if (used[h]) continue;
      used[h] = true;
      best = std::max(best, matched[g][h] + rec(g + 1));
      used[h] = false;
    }
    return best;
  };
  return rec(0);
}

// Frame matching under the carry-over rule, by exhaustive search: previous
// correspondences that are still valid are kept, then the remaining pairs
// are chosen to maximise the number of matches and, among those, minimise
// total (1 - IoU). Returns (matches, total distance).
inline std::pair<std::size_t, double> brute_force_frame_match(
    const std::vector<motr::LabeledBox>& gt, const std::vector<motr::LabeledBox>& hyp,
    const std::map<std::int64_t, std::int64_t>& last, double thr) {
  std::vector<bool> gu(gt.size(), false), hu(hyp.size(), false);
  std::size_t kept = 0;
  double kept_cost = 0;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    auto it = last.find(gt[g].id);
    if (it == last.end()) continue;
    for (std::size_t h = 0; h < hyp.size(); ++h)
      if (!hu[h] && hyp[h].id == it->second) {
        const double o = motr::iou(gt[g].box, hyp[h].box);
        if (o >= thr) {
          gu[g] = hu[h] = true;
          ++kept;
          kept_cost += 1 - o;
        }
        break;
      }
  }
  std::size_t best_n = 0;
  double best_c = 0;
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t g, std::size_t n,
                                                                   double c) {
    if (g == gt.size()) {
      if (n > best_n || (n == best_n && c < best_c - 1e-12)) {
        best_n = n;
        best_c = c;
      }
      return;
    }
    rec(g + 1, n, c);
    if (gu[g]) return;
    for (std::size_t h = 0; h < hyp.size(); ++h) {
      if (hu[h]) continue;
      const double o = motr::iou(gt[g].box, hyp[h].box);
      if (o < thr) continue;
      hu[h] = true;
      rec(g + 1, n + 1, c + 1 - o);
      hu[h] = false;
    }
  };
  rec(0, 0, 0);
  return {kept + best_n, kept_cost + best_c};
}

}  // namespace oracle

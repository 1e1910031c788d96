#pragma once

// CLEAR MOT (MOTA, FP, FN, IDS) and identity F1 over per-frame labelled
// boxes.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "motr/geometry.hpp"
#include "motr/hungarian.hpp"

namespace motr {

struct LabeledBox {
  std::int64_t id = 0;
  Box box;
  bool operator==(const LabeledBox&) const = default;
};

// Frame index -> boxes present in that frame.
using FrameBoxes = std::map<std::size_t, std::vector<LabeledBox>>;

struct MotMetrics {
  double mota = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t matches = 0;
  std::size_t num_gt = 0;
  std::size_t num_hyp = 0;
};

struct IdMetrics {
  double idf1 = 0;
  std::size_t idtp = 0;
  std::size_t idfp = 0;
  std::size_t idfn = 0;
};

namespace detail {
inline constexpr double kForbiddenMatch = 1e3;

inline const std::vector<LabeledBox>& boxes_at(const FrameBoxes& fb, std::size_t frame) {
  static const std::vector<LabeledBox> empty;
  auto it = fb.find(frame);
  return it == fb.end() ? empty : it->second;
}
}  // namespace detail

// One frame of CLEAR matching. `last_match` maps gt id -> hypothesis id of
// its most recent match; matches that are still valid are kept before the
// remaining pairs are matched by minimum total (1 - IoU). Returns
// (gt index, hyp index) pairs.
inline std::vector<MatchPair> match_frame(
    const std::vector<LabeledBox>& gt, const std::vector<LabeledBox>& hyp,
    const std::unordered_map<std::int64_t, std::int64_t>& last_match, double iou_threshold) {
  std::vector<MatchPair> pairs;
  std::vector<bool> gt_used(gt.size(), false), hyp_used(hyp.size(), false);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    auto it = last_match.find(gt[g].id);
    if (it == last_match.end()) continue;
    for (std::size_t h = 0; h < hyp.size(); ++h) {
      if (hyp_used[h] || hyp[h].id != it->second) continue;
      if (iou(gt[g].box, hyp[h].box) >= iou_threshold) {
        pairs.push_back({g, h});
        gt_used[g] = hyp_used[h] = true;
      }
      break;
    }
  }
  std::vector<std::size_t> gs, hs;
  for (std::size_t g = 0; g < gt.size(); ++g)
    if (!gt_used[g]) gs.push_back(g);
  for (std::size_t h = 0; h < hyp.size(); ++h)
    if (!hyp_used[h]) hs.push_back(h);
  if (!gs.empty() && !hs.empty()) {
    CostMatrix cost(gs.size(), hs.size());
    for (std::size_t i = 0; i < gs.size(); ++i)
      for (std::size_t j = 0; j < hs.size(); ++j) {
        const double o = iou(gt[gs[i]].box, hyp[hs[j]].box);
        cost(i, j) = o >= iou_threshold ? 1 - o : detail::kForbiddenMatch;
      }
    for (auto [i, j] : hungarian(cost))
      if (cost(i, j) < detail::kForbiddenMatch) pairs.push_back({gs[i], hs[j]});
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.row < b.row; });
  return pairs;
}

inline MotMetrics clear_mot(const FrameBoxes& gt, const FrameBoxes& hyp,
                            double iou_threshold = 0.5) {
  std::vector<std::size_t> frames;
  for (const auto& [f, _] : gt) frames.push_back(f);
  for (const auto& [f, _] : hyp)
    if (!gt.count(f)) frames.push_back(f);
  std::sort(frames.begin(), frames.end());

  MotMetrics m;
  std::unordered_map<std::int64_t, std::int64_t> last_match;
  for (auto f : frames) {
    const auto& g = detail::boxes_at(gt, f);
    const auto& h = detail::boxes_at(hyp, f);
    auto pairs = match_frame(g, h, last_match, iou_threshold);
    for (auto [gi, hi] : pairs) {
      auto it = last_match.find(g[gi].id);
      if (it != last_match.end() && it->second != h[hi].id) ++m.ids;
      last_match[g[gi].id] = h[hi].id;
    }
    m.num_gt += g.size();
    m.num_hyp += h.size();
    m.matches += pairs.size();
    m.fn += g.size() - pairs.size();
    m.fp += h.size() - pairs.size();
  }
  const double denom = static_cast<double>(std::max<std::size_t>(m.num_gt, 1));
  m.mota = 1.0 - static_cast<double>(m.fn + m.fp + m.ids) / denom;
  return m;
}

// Frames in which each (gt trajectory, hyp trajectory) pair overlaps with
// IoU >= threshold, plus per-trajectory lengths.
struct TrajectoryOverlap {
  std::vector<std::int64_t> gt_ids, hyp_ids;
  std::vector<std::size_t> gt_len, hyp_len;
  std::vector<std::vector<std::size_t>> matched;  // [gt][hyp]
};

inline TrajectoryOverlap trajectory_overlap(const FrameBoxes& gt, const FrameBoxes& hyp,
                                            double iou_threshold) {
  TrajectoryOverlap t;
  std::map<std::int64_t, std::size_t> gi, hi;
  for (const auto& [f, boxes] : gt)
    for (const auto& b : boxes) gi.emplace(b.id, 0);
  for (const auto& [f, boxes] : hyp)
    for (const auto& b : boxes) hi.emplace(b.id, 0);
  for (auto& [id, idx] : gi) {
    idx = t.gt_ids.size();
    t.gt_ids.push_back(id);
  }
  for (auto& [id, idx] : hi) {
    idx = t.hyp_ids.size();
    t.hyp_ids.push_back(id);
  }
  t.gt_len.assign(t.gt_ids.size(), 0);
  t.hyp_len.assign(t.hyp_ids.size(), 0);
  t.matched.assign(t.gt_ids.size(), std::vector<std::size_t>(t.hyp_ids.size(), 0));
  for (const auto& [f, boxes] : gt)
    for (const auto& b : boxes) ++t.gt_len[gi[b.id]];
  for (const auto& [f, boxes] : hyp) {
    for (const auto& b : boxes) ++t.hyp_len[hi[b.id]];
    const auto& g = detail::boxes_at(gt, f);
    for (const auto& gb : g)
      for (const auto& hb : boxes)
        if (iou(gb.box, hb.box) >= iou_threshold) ++t.matched[gi[gb.id]][hi[hb.id]];
  }
  return t;
}

inline IdMetrics id_metrics_from_tp(std::size_t idtp, std::size_t n_gt, std::size_t n_hyp) {
  IdMetrics m;
  m.idtp = idtp;
  m.idfn = n_gt - idtp;
  m.idfp = n_hyp - idtp;
  const std::size_t denom = 2 * m.idtp + m.idfp + m.idfn;
  m.idf1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(m.idtp) / static_cast<double>(denom);
  return m;
}

// Trajectories are matched one-to-one to maximise the number of jointly
// matched frames, which is the same as minimising unmatched frames.
inline IdMetrics idf1(const FrameBoxes& gt, const FrameBoxes& hyp, double iou_threshold = 0.5) {
  auto t = trajectory_overlap(gt, hyp, iou_threshold);
  std::size_t n_gt = 0, n_hyp = 0;
  for (auto n : t.gt_len) n_gt += n;
  for (auto n : t.hyp_len) n_hyp += n;
  std::size_t idtp = 0;
  if (!t.gt_ids.empty() && !t.hyp_ids.empty()) {
    CostMatrix cost(t.gt_ids.size(), t.hyp_ids.size());
    for (std::size_t g = 0; g < t.gt_ids.size(); ++g)
      for (std::size_t h = 0; h < t.hyp_ids.size(); ++h)
        cost(g, h) = -static_cast<double>(t.matched[g][h]);
    for (auto [g, h] : hungarian(cost)) idtp += t.matched[g][h];
  }
  return id_metrics_from_tp(idtp, n_gt, n_hyp);
}

struct MetricsReport {
  MotMetrics mot;
  IdMetrics id;
};

inline MetricsReport evaluate(const FrameBoxes& gt, const FrameBoxes& hyp,
                              double iou_threshold = 0.5) {
  return {clear_mot(gt, hyp, iou_threshold), idf1(gt, hyp, iou_threshold)};
}

inline std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << "MOTA=" << r.mot.mota << '\n'
     << "IDF1=" << r.id.idf1 << '\n'
     << "IDS=" << r.mot.ids << '\n'
     << "FP=" << r.mot.fp << '\n'
     << "FN=" << r.mot.fn << '\n'
     << "matches=" << r.mot.matches << '\n'
     << "num_gt=" << r.mot.num_gt << '\n'
     << "num_hyp=" << r.mot.num_hyp << '\n'
     << "IDTP=" << r.id.idtp << '\n'
     << "IDFP=" << r.id.idfp << '\n'
     << "IDFN=" << r.id.idfn << '\n';
  return os.str();
}

}  // namespace motr

#pragma once

// Tracklet-aware label assignment. Detect queries are matched by Hungarian
// search against newborn ground truths only; track queries keep the
// identity they were bound to when they were created.

#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "motr/clip.hpp"
#include "motr/hungarian.hpp"
#include "motr/model.hpp"

namespace motr {

// Weights of the class, L1 and GIoU terms; shared by the matching cost and
// the single-frame loss.
struct LossWeights {
  double cls = 2.0;
  double l1 = 5.0;
  double giou = 2.0;

  void validate() const {
    if (cls < 0 || l1 < 0 || giou < 0 || (cls == 0 && l1 == 0 && giou == 0))
      throw std::invalid_argument(
          "LossWeights: weights must be nonnegative with at least one positive");
  }
};

// Per query slot: the bound ground-truth identity, or background.
struct Assignment {
  std::vector<std::optional<std::int64_t>> slots;

  static Assignment background(std::size_t n) {
    return {std::vector<std::optional<std::int64_t>>(n)};
  }
  std::size_t size() const { return slots.size(); }
  std::size_t matched_count() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.has_value();
    return n;
  }
  std::vector<std::pair<std::size_t, std::int64_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::int64_t>> out;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slots[i]) out.emplace_back(i, *slots[i]);
    return out;
  }
  std::set<std::int64_t> identities() const {
    std::set<std::int64_t> ids;
    for (const auto& s : slots)
      if (s) ids.insert(*s);
    return ids;
  }
  bool one_to_one() const { return identities().size() == matched_count(); }

  std::string describe() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (auto [slot, id] : pairs()) {
      os << (first ? "" : ", ") << slot << "->" << id;
      first = false;
    }
    os << '}';
    return os.str();
  }
  bool operator==(const Assignment&) const = default;
};

// Class probabilities and boxes of a block of queries, as plain values.
struct ScoredBoxes {
  std::vector<std::vector<double>> probs;
  std::vector<Box> boxes;
  std::size_t size() const { return boxes.size(); }
};

template <class T>
ScoredBoxes scored_boxes(const FramePredictions<T>& preds, std::size_t begin,
                         std::size_t end) {
  ScoredBoxes out;
  for (std::size_t i = begin; i < end; ++i) {
    std::vector<double> p(preds.probs.dim(1));
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = preds.probs.at(i, c);
    out.probs.push_back(std::move(p));
    out.boxes.push_back(preds.box(i));
  }
  return out;
}

// cost(q, t) = -w.cls * p_q(class_t) + w.l1 * L1(q, t) - w.giou * GIoU(q, t)
inline CostMatrix build_match_cost(const ScoredBoxes& preds,
                                   const std::vector<GtObject>& targets,
                                   const LossWeights& w) {
  CostMatrix cost(preds.size(), targets.size());
  for (std::size_t q = 0; q < preds.size(); ++q)
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto label = static_cast<std::size_t>(targets[t].label);
      const double p = label < preds.probs[q].size() ? preds.probs[q][label] : 0.0;
      cost(q, t) = -w.cls * p + w.l1 * l1_box(preds.boxes[q], targets[t].box) -
                   w.giou * giou(preds.boxes[q], targets[t].box);
    }
  return cost;
}

// Matches detect queries against the targets whose identity is not already
// carried by a track query. Unmatched detect queries are background.
inline Assignment assign_newborn(const ScoredBoxes& detect_preds,
                                 const std::vector<GtObject>& targets,
                                 const std::set<std::int64_t>& already_tracked,
                                 const LossWeights& w) {
  std::vector<GtObject> newborn;
  for (const auto& t : targets)
    if (!already_tracked.count(t.identity)) newborn.push_back(t);
  Assignment a = Assignment::background(detect_preds.size());
  if (newborn.empty() || detect_preds.size() == 0) return a;
  for (const auto& [q, t] : hungarian(build_match_cost(detect_preds, newborn, w)))
    a.slots[q] = newborn[t].identity;
  return a;
}

// Next frame's track-query assignment: the surviving track assignment
// followed by the newborn assignment, re-indexed to consecutive slots.
// Background slots of either input are not carried over.
inline Assignment propagate_assignment(const Assignment& prev_track,
                                       const Assignment& prev_detect) {
  Assignment next;
  std::set<std::int64_t> seen;
  auto append = [&](const Assignment& a) {
    for (const auto& s : a.slots) {
      if (!s) continue;
      if (!seen.insert(*s).second)
        throw InvariantError("propagate_assignment: identity " + std::to_string(*s) +
                             " is bound to more than one query");
      next.slots.push_back(s);
    }
  };
  append(prev_track);
  append(prev_detect);
  return next;
}

}  // namespace motr

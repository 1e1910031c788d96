#pragma once

// Query interaction: decides which hidden states become next-frame track
// queries (entrance/exit) and refines the surviving ones with the temporal
// aggregation layer.
//
// Training keeps track queries whose bound identity is still present with
// IoU >= iou_keep, plus detect queries matched to newborn objects.
// Inference admits detect queries scoring above tau_en and removes a track
// after M consecutive frames scoring below tau_ex.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/matching.hpp"
#include "motr/model.hpp"

namespace motr {

struct LifecycleConfig {
  double tau_en = 0.8;
  double tau_ex = 0.6;
  int miss_tolerance = 5;  // M
  double iou_keep = 0.5;
  bool emit_during_grace = false;

  void validate() const {
    if (!(0 < tau_ex && tau_ex <= tau_en && tau_en < 1))
      throw std::invalid_argument("LifecycleConfig: need 0 < tau_ex <= tau_en < 1");
    if (miss_tolerance < 1)
      throw std::invalid_argument("LifecycleConfig: miss_tolerance (M) must be >= 1");
    if (!(iou_keep > 0 && iou_keep < 1))
      throw std::invalid_argument("LifecycleConfig: iou_keep must lie in (0,1)");
  }
};

struct TrainFilterResult {
  std::vector<std::size_t> survivors;  // track slots kept
  std::vector<std::size_t> newborns;   // detect slots kept
  Assignment survivor_assignment;      // identities of `survivors`, in order
  Assignment newborn_assignment;       // identities of `newborns`, in order
};

inline TrainFilterResult filter_train(const std::vector<Box>& pred_boxes,
                                      const Assignment& assignment,
                                      std::size_t n_detect,
                                      const std::vector<GtObject>& targets,
                                      double iou_keep) {
  if (assignment.size() != pred_boxes.size())
    throw InvariantError("filter_train: assignment and predictions disagree in size");
  TrainFilterResult r;
  for (std::size_t slot = 0; slot < pred_boxes.size(); ++slot) {
    const auto& id = assignment.slots[slot];
    if (!id) continue;
    if (slot < n_detect) {
      r.newborns.push_back(slot);
      r.newborn_assignment.slots.push_back(id);
      continue;
    }
    const auto* gt = find_identity(targets, *id);
    if (!gt || iou(pred_boxes[slot], gt->box) < iou_keep) continue;
    r.survivors.push_back(slot);
    r.survivor_assignment.slots.push_back(id);
  }
  return r;
}

struct InferFilterResult {
  std::vector<std::size_t> entrants;          // detect slots admitted
  std::vector<std::size_t> survivors;         // track slots kept
  std::vector<QueryRecord> survivor_records;  // with updated counters
  std::vector<std::size_t> removed;           // track slots dropped
};

// `records` describes every query slot of the frame ([detect; track]).
inline InferFilterResult filter_infer(const std::vector<double>& scores,
                                      const std::vector<QueryRecord>& records,
                                      const LifecycleConfig& cfg) {
  if (scores.size() != records.size())
    throw InvariantError("filter_infer: scores and query records disagree in size");
  InferFilterResult r;
  for (std::size_t slot = 0; slot < records.size(); ++slot) {
    const double s = scores[slot];
    if (records[slot].kind == QueryKind::kDetect) {
      if (s > cfg.tau_en) r.entrants.push_back(slot);
      continue;
    }
    QueryRecord rec = records[slot];
    rec.disappear_count = s < cfg.tau_ex ? rec.disappear_count + 1 : 0;
    rec.last_score = static_cast<float>(s);
    if (rec.disappear_count >= cfg.miss_tolerance) {
      r.removed.push_back(slot);
    } else {
      r.survivors.push_back(slot);
      r.survivor_records.push_back(rec);
    }
  }
  return r;
}

// Next-frame track embeddings: survivors refined by attention over
// (previous query + hidden) with the hidden state as value, then a
// feed-forward block; newborn hidden states are appended unchanged.
// Either input may be undefined (empty); the result is undefined when both
// are.
template <class T>
Tensor<T> tan_forward(const TanParams<T>& tan, std::size_t n_heads,
                      const Tensor<T>& kept_hidden,
                      const Tensor<T>& prev_track_queries,
                      const Tensor<T>& newborn_hidden) {
  if (kept_hidden.defined() != prev_track_queries.defined() ||
      (kept_hidden.defined() && kept_hidden.shape() != prev_track_queries.shape()))
    throw DimensionError("tan_forward: survivors and their previous queries are not aligned");
  if (!kept_hidden.defined()) return newborn_hidden;
  auto qk = tan.norm_attn(add(kept_hidden, prev_track_queries));
  auto x = add(kept_hidden, multi_head_attention(qk, qk, kept_hidden, tan.attn, n_heads));
  x = add(x, tan.ffn(tan.norm_ffn(x)));
  if (!newborn_hidden.defined()) return x;
  return concat<T>({x, newborn_hidden}, 0);
}

// Builds the next track set from the chosen slots of this frame's queries.
template <class T>
QuerySet<T> next_track_set(const Model<T>& model, const FramePredictions<T>& preds,
                           const QuerySet<T>& queries,
                           const std::vector<std::size_t>& survivors,
                           std::vector<QueryRecord> survivor_records,
                           const std::vector<std::size_t>& newborns,
                           std::vector<QueryRecord> newborn_records) {
  Tensor<T> kept, prev, fresh;
  if (!survivors.empty()) {
    kept = take_rows(preds.hidden, survivors);
    prev = take_rows(queries.embeddings, survivors);
  }
  if (!newborns.empty()) fresh = take_rows(preds.hidden, newborns);
  QuerySet<T> next;
  next.embeddings = tan_forward(model.tan, model.config.n_heads, kept, prev, fresh);
  next.records = std::move(survivor_records);
  next.records.insert(next.records.end(), newborn_records.begin(), newborn_records.end());
  return next;
}

template <class T>
struct LifecycleStep {
  QuerySet<T> next;
  InferFilterResult filter;
  // Fresh track ids given to entrants, aligned with filter.entrants.
  std::vector<std::int64_t> entrant_ids;
};

// Inference-time transition: entrance/exit filtering, then aggregation.
// Entrants receive ids next_id, next_id + 1, ... and next_id is advanced.
template <class T>
LifecycleStep<T> step_lifecycle(const Model<T>& model, const FramePredictions<T>& preds,
                                const QuerySet<T>& queries,
                                const LifecycleConfig& cfg, std::int64_t& next_id) {
  std::vector<double> scores(preds.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = preds.score(i);
  LifecycleStep<T> step;
  step.filter = filter_infer(scores, queries.records, cfg);
  std::vector<QueryRecord> entrant_records;
  for (auto slot : step.filter.entrants) {
    QueryRecord rec;
    rec.kind = QueryKind::kTrack;
    rec.track_id = next_id;
    rec.last_score = static_cast<float>(scores[slot]);
    step.entrant_ids.push_back(next_id++);
    entrant_records.push_back(rec);
  }
  step.next = next_track_set(model, preds, queries, step.filter.survivors,
                             step.filter.survivor_records, step.filter.entrants,
                             std::move(entrant_records));
  return step;
}

}  // namespace motr

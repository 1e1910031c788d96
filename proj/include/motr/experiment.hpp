#pragma once

// Tracking evaluation over a set of sequences, with counts pooled across
// sequences before the ratios are formed.

#include <vector>

#include "motr/evaluation.hpp"
#include "motr/mot_format.hpp"
#include "motr/tracker.hpp"

namespace motr {

inline MetricsReport pool_reports(const std::vector<MetricsReport>& reports) {
  MetricsReport r;
  for (const auto& x : reports) {
    r.mot.fp += x.mot.fp;
    r.mot.fn += x.mot.fn;
    r.mot.ids += x.mot.ids;
    r.mot.matches += x.mot.matches;
    r.mot.num_gt += x.mot.num_gt;
    r.mot.num_hyp += x.mot.num_hyp;
    r.id.idtp += x.id.idtp;
    r.id.idfp += x.id.idfp;
    r.id.idfn += x.id.idfn;
  }
  const double denom = static_cast<double>(std::max<std::size_t>(r.mot.num_gt, 1));
  r.mot.mota = 1.0 - static_cast<double>(r.mot.fn + r.mot.fp + r.mot.ids) / denom;
  r.id = id_metrics_from_tp(r.id.idtp, r.id.idtp + r.id.idfn, r.id.idtp + r.id.idfp);
  return r;
}

template <class T>
MetricsReport evaluate_tracking(const Model<T>& model, const std::vector<Clip>& sequences,
                                const LifecycleConfig& lifecycle, double iou_threshold = 0.5) {
  std::vector<MetricsReport> reports;
  for (const auto& seq : sequences)
    reports.push_back(evaluate(gt_frame_boxes(seq),
                               to_frame_boxes(track_sequence(model, seq, lifecycle)),
                               iou_threshold));
  return pool_reports(reports);
}

}  // namespace motr

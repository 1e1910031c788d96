#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "motr/matching.hpp"

namespace motr {

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

// Positive: -alpha (1-p)^gamma log p.  Negative: -(1-alpha) p^gamma log(1-p).
inline double focal_loss(double p, int target, const FocalParams& f = {}) {
  const double floor = 1e-12;
  if (target)
    return -f.alpha * std::pow(1 - p, f.gamma) * std::log(std::max(p, floor));
  return -(1 - f.alpha) * std::pow(p, f.gamma) * std::log(std::max(1 - p, floor));
}

// Elementwise focal loss for probabilities against 0/1 targets of the same
// shape.
template <class T>
Tensor<T> focal_loss(const Tensor<T>& probs, const Tensor<T>& targets,
                     const FocalParams& f = {}) {
  if (probs.shape() != targets.shape())
    throw DimensionError("focal_loss: probabilities " + to_string(probs.shape()) +
                         " vs targets " + to_string(targets.shape()));
  const T gamma = static_cast<T>(f.gamma);
  auto pos = scale(mul(pow_scalar(one_minus(probs), gamma), log(probs)),
                   static_cast<T>(-f.alpha));
  auto negs = scale(mul(pow_scalar(probs, gamma), log(one_minus(probs))),
                    static_cast<T>(-(1 - f.alpha)));
  return add(mul(pos, targets), mul(negs, one_minus(targets)));
}

template <class T>
Tensor<T> sum_all(const std::vector<Tensor<T>>& terms) {
  if (terms.empty()) return Tensor<T>::scalar(T(0));
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

// Single-frame loss, split into the track block and the detect block.
template <class T>
struct FrameLoss {
  Tensor<T> track;
  Tensor<T> detect;
  std::size_t v_track = 0;
  std::size_t v_detect = 0;

  Tensor<T> total() const { return add(track, detect); }
  std::size_t v() const { return v_track + v_detect; }
};

// Weighted loss of query rows [begin, end): class focal over every row,
// L1 and (1 - GIoU) over rows bound to a target.
template <class T>
Tensor<T> block_loss(const FramePredictions<T>& preds, const Tensor<T>& focal,
                     const Assignment& assignment,
                     const std::vector<GtObject>& targets, std::size_t begin,
                     std::size_t end, const LossWeights& w, std::size_t& matched) {
  matched = 0;
  if (begin >= end) return Tensor<T>::scalar(T(0));
  std::vector<Tensor<T>> terms;
  terms.push_back(scale(sum(slice(focal, 0, begin, end)), static_cast<T>(w.cls)));
  std::vector<std::size_t> rows;
  std::vector<Box> target_boxes;
  for (std::size_t i = begin; i < end; ++i) {
    if (!assignment.slots[i]) continue;
    const auto* gt = find_identity(targets, *assignment.slots[i]);
    rows.push_back(i);
    target_boxes.push_back(gt->box);
  }
  matched = rows.size();
  if (!rows.empty()) {
    auto pred = take_rows(preds.boxes, rows);
    auto tgt = boxes_tensor<T>(target_boxes);
    terms.push_back(scale(sum(box_l1(pred, tgt)), static_cast<T>(w.l1)));
    terms.push_back(
        scale(sum(one_minus(box_giou(pred, tgt))), static_cast<T>(w.giou)));
  }
  return sum_all(terms);
}

template <class T>
FrameLoss<T> frame_loss(const FramePredictions<T>& preds,
                        const Assignment& assignment,
                        const std::vector<GtObject>& targets,
                        std::size_t n_detect, const LossWeights& w,
                        const FocalParams& focal_params = {}) {
  const std::size_t n = preds.size();
  const std::size_t classes = preds.probs.dim(1);
  if (assignment.size() != n)
    throw InvariantError("frame_loss: assignment covers " +
                         std::to_string(assignment.size()) + " slots, predictions " +
                         std::to_string(n));
  if (n_detect > n) throw InvariantError("frame_loss: detect block exceeds predictions");
  if (!assignment.one_to_one())
    throw InvariantError("frame_loss: assignment is not one-to-one " +
                         assignment.describe());
  std::vector<T> target_values(n * classes, T(0));
  for (auto [slot, id] : assignment.pairs()) {
    const auto* gt = find_identity(targets, id);
    if (!gt)
      throw InvariantError("frame_loss: identity " + std::to_string(id) +
                           " is not among this frame's targets");
    const auto label = static_cast<std::size_t>(gt->label);
    if (label >= classes)
      throw InvariantError("frame_loss: label " + std::to_string(label) +
                           " outside the class head");
    target_values[slot * classes + label] = T(1);
  }
  auto focal = focal_loss(preds.probs, Tensor<T>::from({n, classes}, std::move(target_values)),
                          focal_params);
  FrameLoss<T> out;
  out.detect = block_loss(preds, focal, assignment, targets, 0, n_detect, w, out.v_detect);
  out.track = block_loss(preds, focal, assignment, targets, n_detect, n, w, out.v_track);
  return out;
}

template <class T>
struct ClipLossAccumulator {
  std::vector<FrameLoss<T>> frames;

  void add(FrameLoss<T> f) { frames.push_back(std::move(f)); }
  std::size_t total_v() const {
    std::size_t v = 0;
    for (const auto& f : frames) v += f.v();
    return v;
  }
};

// Sum of every frame's track and detect loss over the clip's total object
// count (at least 1).
template <class T>
Tensor<T> collective_average_loss(const ClipLossAccumulator<T>& acc) {
  if (acc.frames.empty())
    throw std::invalid_argument("collective_average_loss: no frames accumulated");
  std::vector<Tensor<T>> terms;
  for (const auto& f : acc.frames) {
    terms.push_back(f.track);
    terms.push_back(f.detect);
  }
  const auto denom = static_cast<T>(std::max<std::size_t>(acc.total_v(), 1));
  return div_scalar(sum_all(terms), denom);
}

}  // namespace motr

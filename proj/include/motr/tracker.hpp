#pragma once

#include <cstdint>
#include <vector>

#include "motr/qim.hpp"

namespace motr {

struct TrackOutput {
  std::size_t frame = 0;  // 1-based
  std::int64_t track_id = 0;
  Box box;
  double confidence = 0;

  bool operator==(const TrackOutput&) const = default;
};

// Online tracker for one sequence. Each call to step() reads exactly one
// frame and returns the tracks alive after it.
template <class T>
class OnlineTracker {
 public:
  OnlineTracker(const Model<T>& model, LifecycleConfig cfg) : model_(model), cfg_(cfg) {
    cfg_.validate();
  }

  std::vector<TrackOutput> step(const Image& image) {
    NoGradGuard no_grad;
    auto memory = encode(model_, image);
    auto queries = compose_queries(model_, tracks_);
    return advance(queries, decode(model_, queries, memory));
  }

  // Lifecycle update from predictions already decoded for `queries`.
  std::vector<TrackOutput> advance(const QuerySet<T>& queries, const FramePredictions<T>& preds) {
    NoGradGuard no_grad;
    ++frame_;
    auto lc = step_lifecycle(model_, preds, queries, cfg_, next_id_);
    std::vector<TrackOutput> out;
    for (std::size_t i = 0; i < lc.filter.survivors.size(); ++i) {
      const auto slot = lc.filter.survivors[i];
      const auto& rec = lc.filter.survivor_records[i];
      if (rec.disappear_count > 0 && !cfg_.emit_during_grace) continue;
      out.push_back({frame_, *rec.track_id, preds.box(slot), preds.score(slot)});
    }
    for (std::size_t i = 0; i < lc.filter.entrants.size(); ++i) {
      const auto slot = lc.filter.entrants[i];
      out.push_back({frame_, lc.entrant_ids[i], preds.box(slot), preds.score(slot)});
    }
    tracks_ = std::move(lc.next);
    return out;
  }

  const QuerySet<T>& tracks() const { return tracks_; }
  std::size_t frames_seen() const { return frame_; }

 private:
  const Model<T>& model_;
  LifecycleConfig cfg_;
  QuerySet<T> tracks_;
  std::int64_t next_id_ = 1;
  std::size_t frame_ = 0;
};

template <class T>
std::vector<TrackOutput> track_sequence(const Model<T>& model, const std::vector<Image>& frames,
                                        const LifecycleConfig& cfg) {
  OnlineTracker<T> tracker(model, cfg);
  std::vector<TrackOutput> all;
  for (const auto& img : frames) {
    auto out = tracker.step(img);
    all.insert(all.end(), out.begin(), out.end());
  }
  return all;
}

template <class T>
std::vector<TrackOutput> track_sequence(const Model<T>& model, const Clip& clip,
                                        const LifecycleConfig& cfg) {
  std::vector<Image> frames;
  for (const auto& f : clip.frames) frames.push_back(f.image);
  return track_sequence(model, frames, cfg);
}

}  // namespace motr

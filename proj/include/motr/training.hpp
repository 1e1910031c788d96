#pragma once

// Clip-level training. Each clip starts with an empty track set; per frame
// the decoder sees [detect; track] queries, labels come from newborn-only
// matching plus the identities carried by track queries, and the hidden
// states that pass the training filter become the next frame's track
// queries. The losses of all frames are combined by the collective average
// and back-propagated once, so gradients flow through track queries across
// the whole clip.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/losses.hpp"
#include "motr/optim.hpp"
#include "motr/qim.hpp"
#include "motr/simulator.hpp"

namespace motr {

struct CurriculumStage {
  std::size_t start_epoch = 0;
  std::size_t clip_len = 2;
  bool operator==(const CurriculumStage&) const = default;
};

struct TrainConfig {
  double p_drop = 0.1;
  double p_insert = 0.3;
  std::size_t max_false_positives = 1;
  std::vector<CurriculumStage> curriculum{{0, 2}, {50, 3}, {90, 4}, {150, 5}};
  std::size_t max_interval = 10;
  double learning_rate = 2e-4;
  std::size_t lr_decay_epoch = 100;
  double lr_decay_factor = 0.1;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip_norm = 0.1;
  std::size_t epochs = 200;
  // Clips per epoch; 0 means one per training sequence.
  std::size_t clips_per_epoch = 0;
  // Clips whose mean loss forms one optimizer step.
  std::size_t batch_clips = 1;
  std::size_t warmup_iterations = 0;
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw std::invalid_argument("TrainConfig: " + m);
    };
    if (p_drop < 0 || p_drop > 1) fail("p_drop must lie in [0,1]");
    if (p_insert < 0 || p_insert > 1) fail("p_insert must lie in [0,1]");
    if (curriculum.empty()) fail("curriculum must not be empty");
    for (std::size_t i = 0; i < curriculum.size(); ++i) {
      if (curriculum[i].clip_len < 1) fail("curriculum clip lengths must be >= 1");
      if (i && (curriculum[i].start_epoch < curriculum[i - 1].start_epoch ||
                curriculum[i].clip_len < curriculum[i - 1].clip_len))
        fail("curriculum must be sorted with nondecreasing clip lengths");
    }
    if (max_interval < 1) fail("max_interval must be >= 1");
    if (batch_clips < 1) fail("batch_clips must be >= 1");
    if (learning_rate <= 0) fail("learning_rate must be positive");
    if (weight_decay < 0 || grad_clip_norm < 0) fail("weight_decay and grad_clip_norm must be >= 0");
  }
};

// Largest scheduled clip length whose start epoch is <= epoch.
inline std::size_t curriculum_len(std::size_t epoch,
                                  const std::vector<CurriculumStage>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("curriculum_len: empty schedule");
  std::size_t len = schedule.front().clip_len;
  for (const auto& s : schedule)
    if (s.start_epoch <= epoch) len = std::max(len, s.clip_len);
  return len;
}

inline double learning_rate_at(std::size_t epoch, const TrainConfig& cfg) {
  return epoch >= cfg.lr_decay_epoch ? cfg.learning_rate * cfg.lr_decay_factor
                                     : cfg.learning_rate;
}

// Independent Bernoulli(1 - p_drop) keep decisions.
inline std::vector<bool> keep_mask(std::size_t n, double p_drop, Rng& rng) {
  std::vector<bool> keep(n, true);
  if (p_drop <= 0) return keep;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) keep[i] = !(unit(rng) < p_drop);
  return keep;
}

template <class T>
QuerySet<T> erase_track_queries(const QuerySet<T>& qs, double p_drop, Rng& rng) {
  if (qs.empty() || p_drop <= 0) return qs;
  auto keep = keep_mask(qs.size(), p_drop, rng);
  std::vector<std::size_t> rows;
  QuerySet<T> out;
  for (std::size_t i = 0; i < qs.size(); ++i)
    if (keep[i]) {
      rows.push_back(i);
      out.records.push_back(qs.records[i]);
    }
  if (!rows.empty()) out.embeddings = take_rows(qs.embeddings, rows);
  return out;
}

// With probability p_insert, the highest-scoring background detect slots
// (at most k) are chosen as false-positive track queries.
template <class T>
std::vector<std::size_t> pick_false_positives(const FramePredictions<T>& preds,
                                              const Assignment& assignment,
                                              std::size_t n_detect, double p_insert,
                                              std::size_t k, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (p_insert <= 0 || k == 0 || !(unit(rng) < p_insert)) return {};
  std::vector<std::size_t> background;
  for (std::size_t i = 0; i < n_detect; ++i)
    if (!assignment.slots[i]) background.push_back(i);
  std::stable_sort(background.begin(), background.end(),
                   [&](std::size_t a, std::size_t b) { return preds.score(a) > preds.score(b); });
  if (background.size() > k) background.resize(k);
  return background;
}

template <class T>
QuerySet<T> insert_false_positives(const QuerySet<T>& qs,
                                   const FramePredictions<T>& preds,
                                   const Assignment& assignment, std::size_t n_detect,
                                   double p_insert, std::size_t k, Rng& rng,
                                   std::int64_t& next_track_id) {
  auto slots = pick_false_positives(preds, assignment, n_detect, p_insert, k, rng);
  if (slots.empty()) return qs;
  QuerySet<T> out = qs;
  auto rows = take_rows(preds.hidden, slots);
  out.embeddings = qs.empty() ? rows : concat<T>({qs.embeddings, rows}, 0);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    QueryRecord rec;
    rec.kind = QueryKind::kTrack;
    rec.track_id = next_track_id++;
    out.records.push_back(rec);
  }
  return out;
}

struct ClipOptions {
  LossWeights weights;
  FocalParams focal;
  double iou_keep = 0.5;
  double p_drop = 0.0;
  double p_insert = 0.0;
  std::size_t max_false_positives = 1;
};

template <class T>
struct FrameTrace {
  Assignment assignment;              // every slot of this frame
  std::vector<QueryRecord> records;   // every slot of this frame
  std::set<std::int64_t> tracked_ids; // identities carried into this frame
  Assignment newborn;                 // detect block only
  std::vector<double> scores;
};

template <class T>
struct ClipForward {
  ClipLossAccumulator<T> losses;
  Tensor<T> loss;
  std::vector<FrameTrace<T>> frames;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optional perturbation of a frame's hidden states before they are
// propagated (the prediction heads have already consumed them).
template <class T>
using HiddenHook = std::function<Tensor<T>(const Tensor<T>&, std::size_t frame)>;

template <class T>
ClipForward<T> forward_clip(const Model<T>& model, const Clip& clip,
                            const ClipOptions& opts, Rng& rng,
                            const HiddenHook<T>& hook = {}) {
  if (clip.size() == 0) throw std::invalid_argument("forward_clip: empty clip");
  const std::size_t n_det = model.config.n_detect_queries;
  ClipForward<T> out;
  QuerySet<T> tracks;
  std::int64_t next_track_id = 1;

  for (std::size_t f = 0; f < clip.size(); ++f) {
    const auto targets = visible_objects(clip.frames[f]);
    auto memory = encode(model, clip.frames[f].image);
    auto queries = compose_queries(model, tracks);
    auto preds = decode(model, queries, memory);
    const std::size_t n = preds.size();

    FrameTrace<T> trace;
    trace.records = queries.records;
    trace.assignment = Assignment::background(n);
    for (std::size_t j = n_det; j < n; ++j) {
      const auto& id = queries.records[j].gt_identity;
      if (!id) continue;
      trace.tracked_ids.insert(*id);
      if (find_identity(targets, *id)) trace.assignment.slots[j] = id;
    }
    trace.newborn = assign_newborn(scored_boxes(preds, 0, n_det), targets,
                                   trace.tracked_ids, opts.weights);
    for (std::size_t i = 0; i < n_det; ++i) trace.assignment.slots[i] = trace.newborn.slots[i];
    for (std::size_t i = 0; i < n; ++i) trace.scores.push_back(preds.score(i));

    out.losses.add(frame_loss(preds, trace.assignment, targets, n_det, opts.weights, opts.focal));

    if (f + 1 < clip.size()) {
      std::vector<Box> boxes(n);
      for (std::size_t i = 0; i < n; ++i) boxes[i] = preds.box(i);
      auto filt = filter_train(boxes, trace.assignment, n_det, targets, opts.iou_keep);

      // Erase survivors and newborns alike so erased objects are newborn
      // candidates in the next frame.
      auto keep_s = keep_mask(filt.survivors.size(), opts.p_drop, rng);
      auto keep_n = keep_mask(filt.newborns.size(), opts.p_drop, rng);
      std::vector<std::size_t> survivors, newborns;
      Assignment survivor_ids, newborn_ids;
      std::vector<QueryRecord> survivor_records, newborn_records;
      for (std::size_t i = 0; i < filt.survivors.size(); ++i) {
        if (!keep_s[i]) continue;
        survivors.push_back(filt.survivors[i]);
        survivor_ids.slots.push_back(filt.survivor_assignment.slots[i]);
        survivor_records.push_back(queries.records[filt.survivors[i]]);
      }
      for (std::size_t i = 0; i < filt.newborns.size(); ++i) {
        if (!keep_n[i]) continue;
        newborns.push_back(filt.newborns[i]);
        newborn_ids.slots.push_back(filt.newborn_assignment.slots[i]);
      }
      const auto next_ids = propagate_assignment(survivor_ids, newborn_ids);
      for (std::size_t i = 0; i < newborns.size(); ++i) {
        QueryRecord rec;
        rec.kind = QueryKind::kTrack;
        rec.track_id = next_track_id++;
        rec.gt_identity = next_ids.slots[survivors.size() + i];
        newborn_records.push_back(rec);
      }
      for (auto slot : pick_false_positives(preds, trace.assignment, n_det, opts.p_insert,
                                            opts.max_false_positives, rng)) {
        QueryRecord rec;
        rec.kind = QueryKind::kTrack;
        rec.track_id = next_track_id++;
        newborns.push_back(slot);
        newborn_records.push_back(rec);
      }
      FramePredictions<T> propagated = preds;
      if (hook) propagated.hidden = hook(preds.hidden, f);
      tracks = next_track_set(model, propagated, queries, survivors, std::move(survivor_records),
                              newborns, std::move(newborn_records));
    }
    out.frames.push_back(std::move(trace));
  }
  out.loss = collective_average_loss(out.losses);
  return out;
}

struct StepStats {
  double loss = 0;
  std::size_t objects = 0;
  double grad_norm = 0;
};

template <class T>
std::string describe_failure(const ClipForward<T>& fwd) {
  std::ostringstream os;
  for (std::size_t f = 0; f < fwd.frames.size(); ++f) {
    const auto& tr = fwd.frames[f];
    double lo = 1, hi = 0, mean = 0;
    for (double s : tr.scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      mean += s;
    }
    if (!tr.scores.empty()) mean /= static_cast<double>(tr.scores.size());
    os << "frame " << f << ": assignment " << tr.assignment.describe() << ", scores min "
       << lo << " mean " << mean << " max " << hi << ", frame loss "
       << fwd.losses.frames[f].total().item() << '\n';
  }
  return os.str();
}

template <class T>
class Trainer {
 public:
  Trainer(Model<T>& model, TrainConfig cfg, ClipOptions opts)
      : model_(model),
        cfg_(std::move(cfg)),
        opts_(opts),
        optimizer_(model.parameters(),
                   AdamWConfig{cfg_.beta1, cfg_.beta2, 1e-8, cfg_.weight_decay}),
        rng_(cfg_.seed) {
    cfg_.validate();
    opts_.p_drop = cfg_.p_drop;
    opts_.p_insert = cfg_.p_insert;
    opts_.max_false_positives = cfg_.max_false_positives;
  }

  StepStats train_clip(const Clip& clip, double lr) { return train_batch({clip}, lr); }

  // One optimizer step on the mean of the clips' losses.
  StepStats train_batch(const std::vector<Clip>& clips, double lr) {
    if (clips.empty()) throw std::invalid_argument("train_batch: no clips");
    optimizer_.zero_grad();
    StepStats s;
    const T inv = static_cast<T>(1.0 / static_cast<double>(clips.size()));
    for (const auto& clip : clips) {
      auto fwd = forward_clip(model_, clip, opts_, rng_);
      const double loss = static_cast<double>(fwd.loss.item());
      if (!std::isfinite(loss))
        throw NonFiniteLossError("non-finite clip loss\n" + describe_failure(fwd));
      backward(scale(fwd.loss, inv));
      s.loss += loss / static_cast<double>(clips.size());
      s.objects += fwd.losses.total_v();
    }
    s.grad_norm = optimizer_.clip_grad_norm(cfg_.grad_clip_norm);
    optimizer_.step(lr);
    optimizer_.zero_grad();
    return s;
  }

  const TrainConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }
  AdamW<T>& optimizer() { return optimizer_; }

 private:
  Model<T>& model_;
  TrainConfig cfg_;
  ClipOptions opts_;
  AdamW<T> optimizer_;
  Rng rng_;
};

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  std::size_t clip_len = 0;
  double loss = 0;
  std::size_t objects = 0;
  double grad_norm = 0;
};

struct TrainHooks {
  std::function<void(const IterationLog&)> on_iteration;
  // Returning true stops training after the current iteration.
  std::function<bool(const IterationLog&)> should_stop;
};

inline std::size_t iterations_per_epoch(const TrainConfig& cfg, std::size_t n_sequences) {
  const std::size_t clips = cfg.clips_per_epoch ? cfg.clips_per_epoch : n_sequences;
  return std::max<std::size_t>(1, (clips + cfg.batch_clips - 1) / cfg.batch_clips);
}

// Learning rate at an iteration: linear warmup, then the epoch schedule.
inline double scheduled_lr(std::size_t iteration, std::size_t epoch, const TrainConfig& cfg) {
  double lr = learning_rate_at(epoch, cfg);
  if (iteration < cfg.warmup_iterations)
    lr *= static_cast<double>(iteration + 1) / static_cast<double>(cfg.warmup_iterations);
  return lr;
}

// Runs cfg.epochs epochs (or `max_iterations` iterations when nonzero) over
// the given sequences. Each iteration draws batch_clips sequences without
// replacement from a reshuffled order. Returns the iterations performed.
template <class T>
std::size_t train(Model<T>& model, const std::vector<Clip>& sequences,
                  const TrainConfig& cfg, const ClipOptions& opts,
                  const TrainHooks& hooks = {}, std::size_t max_iterations = 0) {
  if (sequences.empty()) throw std::invalid_argument("train: no training sequences");
  Trainer<T> trainer(model, cfg, opts);
  const std::size_t per_epoch = iterations_per_epoch(cfg, sequences.size());
  const std::size_t total = max_iterations ? max_iterations : cfg.epochs * per_epoch;
  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  for (std::size_t it = 0; it < total; ++it) {
    const std::size_t epoch = it / per_epoch;
    const std::size_t len = curriculum_len(epoch, cfg.curriculum);
    std::vector<Clip> batch;
    for (std::size_t b = 0; b < cfg.batch_clips; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), trainer.rng());
        cursor = 0;
      }
      const auto& seq = sequences[order[cursor++]];
      batch.push_back(
          sample_clip(seq, std::min(len, seq.size()), cfg.max_interval, trainer.rng()));
    }
    auto stats = trainer.train_batch(batch, scheduled_lr(it, epoch, cfg));
    IterationLog log{it, epoch, batch.front().size(), stats.loss, stats.objects, stats.grad_norm};
    if (hooks.on_iteration) hooks.on_iteration(log);
    if (hooks.should_stop && hooks.should_stop(log)) return it + 1;
  }
  return total;
}

}  // namespace motr

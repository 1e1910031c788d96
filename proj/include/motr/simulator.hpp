#pragma once

// Synthetic multi-object video: filled rectangles with constant-velocity
// motion plus Gaussian acceleration noise, reflecting at the borders, with
// per-frame births and deaths. Deterministic given the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/clip.hpp"

namespace motr {

struct WorldConfig {
  std::size_t max_objects = 4;
  std::size_t image_size = 64;
  std::size_t channels = 1;
  // Initial speed range, normalized image units per frame.
  double min_speed = 0.005;
  double max_speed = 0.03;
  double accel_noise_sigma = 0.002;
  double birth_rate = 0.05;
  double death_rate = 0.02;
  double min_box = 0.15;
  double max_box = 0.3;
  std::size_t initial_objects = 3;
  double pixel_noise = 0.05;
  double min_intensity = 0.3;
  double max_intensity = 1.0;
  // Fraction of an object's pixels that must remain uncovered for it to
  // count as visible.
  double min_visible_fraction = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) {
      throw std::invalid_argument("WorldConfig: " + m);
    };
    if (birth_rate < 0 || birth_rate > 1) fail("birth_rate must lie in [0,1]");
    if (death_rate < 0 || death_rate > 1) fail("death_rate must lie in [0,1]");
    if (image_size == 0 || channels == 0) fail("image extents must be positive");
    if (!(min_box > 0 && min_box <= max_box && max_box <= 1))
      fail("box size range must satisfy 0 < min_box <= max_box <= 1");
    if (min_speed < 0 || min_speed > max_speed) fail("bad speed range");
    if (initial_objects > max_objects) fail("initial_objects > max_objects");
    if (min_visible_fraction < 0 || min_visible_fraction > 1)
      fail("min_visible_fraction must lie in [0,1]");
  }
};

namespace detail {

struct SimObject {
  std::int64_t identity;
  Box box;
  double vx, vy;
  float intensity;
};

inline void reflect(double& c, double& v, double half) {
  const double lo = half, hi = 1.0 - half;
  if (c < lo) {
    c = 2 * lo - c;
    v = -v;
  }
  if (c > hi) {
    c = 2 * hi - c;
    v = -v;
  }
  c = std::clamp(c, lo, hi);
}

// Pixel range [begin, end) whose centers fall inside [lo, hi) of [0,1].
inline std::pair<std::size_t, std::size_t> pixel_span(double lo, double hi,
                                                      std::size_t extent) {
  const double n = static_cast<double>(extent);
  auto first = static_cast<long>(std::ceil(lo * n - 0.5));
  auto last = static_cast<long>(std::ceil(hi * n - 0.5));
  first = std::clamp(first, 0L, static_cast<long>(extent));
  last = std::clamp(last, 0L, static_cast<long>(extent));
  return {static_cast<std::size_t>(first),
          static_cast<std::size_t>(std::max(first, last))};
}

}  // namespace detail

struct RenderObject {
  std::int64_t identity;
  Box box;
  float intensity;
};

struct RenderResult {
  Image image;
  // Uncovered fraction of each object's pixels, aligned with the input.
  std::vector<double> visible_fraction;
};

// Paints objects in the given order (later ones on top) over Gaussian noise.
template <class Rng>
RenderResult render_frame(const std::vector<RenderObject>& objects,
                          std::size_t size, std::size_t channels,
                          double noise_sigma, Rng& rng) {
  RenderResult out;
  out.image = Image(size, size, channels, 0.0f);
  std::vector<int> owner(size * size, -1);
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const Box& b = objects[k].box;
    auto [x0, x1] = detail::pixel_span(b.left(), b.right(), size);
    auto [y0, y1] = detail::pixel_span(b.top(), b.bottom(), size);
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = x0; x < x1; ++x) owner[y * size + x] = static_cast<int>(k);
  }
  std::vector<std::size_t> owned(objects.size(), 0), total(objects.size(), 0);
  for (std::size_t k = 0; k < objects.size(); ++k) {
    const Box& b = objects[k].box;
    auto [x0, x1] = detail::pixel_span(b.left(), b.right(), size);
    auto [y0, y1] = detail::pixel_span(b.top(), b.bottom(), size);
    total[k] = (x1 - x0) * (y1 - y0);
  }
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const int k = owner[y * size + x];
      const float base = k >= 0 ? objects[static_cast<std::size_t>(k)].intensity : 0.0f;
      if (k >= 0) ++owned[static_cast<std::size_t>(k)];
      for (std::size_t c = 0; c < channels; ++c)
        out.image.at(y, x, c) =
            base + (noise_sigma > 0 ? static_cast<float>(noise(rng)) : 0.0f);
    }
  for (std::size_t k = 0; k < objects.size(); ++k)
    out.visible_fraction.push_back(
        total[k] ? static_cast<double>(owned[k]) / static_cast<double>(total[k])
                 : 0.0);
  return out;
}

inline Clip simulate_sequence(const WorldConfig& cfg, std::size_t length) {
  cfg.validate();
  if (length == 0) throw std::invalid_argument("simulate_sequence: length must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> accel(0.0, cfg.accel_noise_sigma);
  std::int64_t next_identity = 1;
  std::vector<detail::SimObject> live;

  auto spawn = [&]() {
    detail::SimObject o;
    o.identity = next_identity++;
    o.box.w = cfg.min_box + (cfg.max_box - cfg.min_box) * unit(rng);
    o.box.h = cfg.min_box + (cfg.max_box - cfg.min_box) * unit(rng);
    o.box.cx = o.box.w / 2 + (1 - o.box.w) * unit(rng);
    o.box.cy = o.box.h / 2 + (1 - o.box.h) * unit(rng);
    const double speed = cfg.min_speed + (cfg.max_speed - cfg.min_speed) * unit(rng);
    const double angle = 2 * std::numbers::pi * unit(rng);
    o.vx = speed * std::cos(angle);
    o.vy = speed * std::sin(angle);
    o.intensity = static_cast<float>(
        cfg.min_intensity + (cfg.max_intensity - cfg.min_intensity) * unit(rng));
    live.push_back(o);
  };

  Clip clip;
  for (std::size_t t = 0; t < length; ++t) {
    if (t == 0) {
      for (std::size_t i = 0; i < cfg.initial_objects; ++i) spawn();
    } else {
      for (auto& o : live) {
        if (cfg.accel_noise_sigma > 0) {
          o.vx += accel(rng);
          o.vy += accel(rng);
        }
        o.box.cx += o.vx;
        o.box.cy += o.vy;
        detail::reflect(o.box.cx, o.vx, o.box.w / 2);
        detail::reflect(o.box.cy, o.vy, o.box.h / 2);
      }
      std::vector<detail::SimObject> survivors;
      for (const auto& o : live)
        if (!(unit(rng) < cfg.death_rate)) survivors.push_back(o);
      live = std::move(survivors);
      if (unit(rng) < cfg.birth_rate && live.size() < cfg.max_objects) spawn();
    }
    std::vector<RenderObject> draw;
    for (const auto& o : live) draw.push_back({o.identity, o.box, o.intensity});
    auto rendered = render_frame(draw, cfg.image_size, cfg.channels, cfg.pixel_noise, rng);
    Frame frame;
    frame.image = std::move(rendered.image);
    frame.source_index = t;
    for (std::size_t k = 0; k < live.size(); ++k)
      frame.objects.push_back(
          {live[k].identity, live[k].box, 0,
           rendered.visible_fraction[k] >= cfg.min_visible_fraction &&
               rendered.visible_fraction[k] > 0});
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

// Picks `clip_len` keyframes with i.i.d. uniform gaps in [1, max_interval].
// When the sequence is too short for the full gap range the range shrinks to
// the longest one that still fits.
template <class Rng>
Clip sample_clip(const Clip& sequence, std::size_t clip_len,
                 std::size_t max_interval, Rng& rng) {
  if (clip_len < 1 || max_interval < 1)
    throw std::invalid_argument("sample_clip: clip_len and max_interval must be >= 1");
  if (sequence.size() < clip_len)
    throw std::invalid_argument("sample_clip: sequence of " +
                                std::to_string(sequence.size()) +
                                " frames is shorter than clip length " +
                                std::to_string(clip_len));
  std::size_t interval = max_interval;
  if (clip_len > 1)
    interval = std::min(interval, (sequence.size() - 1) / (clip_len - 1));
  std::uniform_int_distribution<std::size_t> gap_dist(1, std::max<std::size_t>(interval, 1));
  std::vector<std::size_t> gaps;
  std::size_t span = 0;
  for (std::size_t i = 1; i < clip_len; ++i) {
    gaps.push_back(gap_dist(rng));
    span += gaps.back();
  }
  std::uniform_int_distribution<std::size_t> start_dist(0, sequence.size() - 1 - span);
  std::size_t at = start_dist(rng);
  Clip clip;
  clip.frames.push_back(sequence.frames[at]);
  for (auto g : gaps) {
    at += g;
    clip.frames.push_back(sequence.frames[at]);
  }
  return clip;
}

}  // namespace motr

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/geometry.hpp"

namespace motr {

// Row-major H x W x C image with float pixels.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t ch = 0) {
    return pixels[(y * width + x) * channels + ch];
  }
  float at(std::size_t y, std::size_t x, std::size_t ch = 0) const {
    return pixels[(y * width + x) * channels + ch];
  }
  bool operator==(const Image&) const = default;
};

struct GtObject {
  std::int64_t identity = 0;
  Box box;
  int label = 0;
  bool visible = true;
  bool operator==(const GtObject&) const = default;
};

struct Frame {
  Image image;
  std::vector<GtObject> objects;
  // Index of this frame in the sequence it was drawn from.
  std::size_t source_index = 0;
  bool operator==(const Frame&) const = default;
};

struct Clip {
  std::vector<Frame> frames;
  std::size_t size() const { return frames.size(); }
  bool operator==(const Clip&) const = default;
};

// Objects that count as supervision/evaluation targets in a frame.
inline std::vector<GtObject> visible_objects(const Frame& frame) {
  std::vector<GtObject> out;
  for (const auto& o : frame.objects)
    if (o.visible) out.push_back(o);
  return out;
}

inline const GtObject* find_identity(const std::vector<GtObject>& objs,
                                     std::int64_t id) {
  for (const auto& o : objs)
    if (o.identity == id) return &o;
  return nullptr;
}

}  // namespace motr

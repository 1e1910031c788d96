#pragma once

// Center-size boxes (cx, cy, w, h) in normalized image coordinates, with
// overlap measures both as plain functions and as differentiable tensor ops
// over row-stacked boxes of shape (n, 4).

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "motr/ops.hpp"

namespace motr {

struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double left() const { return cx - 0.5 * w; }
  double right() const { return cx + 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return std::max(w, 0.0) * std::max(h, 0.0); }

  static Box from_corners(double x0, double y0, double x1, double y1) {
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }
  bool operator==(const Box&) const = default;
};

inline bool is_valid(const Box& b) {
  return b.w >= 0 && b.h >= 0 && b.w <= 2 && b.h <= 2 && std::isfinite(b.cx) &&
         std::isfinite(b.cy);
}

inline double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih =
      std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  return std::max(iw, 0.0) * std::max(ih, 0.0);
}

inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline double giou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  const double iou_v = uni > 0 ? inter / uni : 0.0;
  const double cw = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
  const double ch =
      std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
  const double enclosing = std::max(cw * ch, 1e-12);
  return iou_v - (enclosing - uni) / enclosing;
}

inline double l1_box(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

template <class T>
Box box_row(const Tensor<T>& boxes, std::size_t row) {
  return {static_cast<double>(boxes.at(row, 0)),
          static_cast<double>(boxes.at(row, 1)),
          static_cast<double>(boxes.at(row, 2)),
          static_cast<double>(boxes.at(row, 3))};
}

template <class T>
Tensor<T> boxes_tensor(const std::vector<Box>& boxes) {
  std::vector<T> v;
  v.reserve(boxes.size() * 4);
  for (const auto& b : boxes) {
    v.push_back(static_cast<T>(b.cx));
    v.push_back(static_cast<T>(b.cy));
    v.push_back(static_cast<T>(b.w));
    v.push_back(static_cast<T>(b.h));
  }
  return Tensor<T>::from({boxes.size(), 4}, std::move(v));
}

// Row-wise L1 distance between (n,4) box tensors -> (n).
template <class T>
Tensor<T> box_l1(const Tensor<T>& a, const Tensor<T>& b) {
  return sum_last(abs(sub(a, b)));
}

// Row-wise generalized IoU between (n,4) box tensors -> (n,1).
template <class T>
Tensor<T> box_giou(const Tensor<T>& a, const Tensor<T>& b) {
  const T half = T(0.5);
  auto corners = [half](const Tensor<T>& t) {
    auto cx = column(t, 0), cy = column(t, 1);
    auto hw = scale(column(t, 2), half), hh = scale(column(t, 3), half);
    return std::array<Tensor<T>, 4>{sub(cx, hw), sub(cy, hh), add(cx, hw),
                                    add(cy, hh)};
  };
  auto ca = corners(a);
  auto cb = corners(b);
  auto area_a = mul(column(a, 2), column(a, 3));
  auto area_b = mul(column(b, 2), column(b, 3));
  auto iw = relu(sub(minimum(ca[2], cb[2]), maximum(ca[0], cb[0])));
  auto ih = relu(sub(minimum(ca[3], cb[3]), maximum(ca[1], cb[1])));
  auto inter = mul(iw, ih);
  auto uni = sub(add(area_a, area_b), inter);
  auto iou_t = div(inter, uni);
  auto cw = sub(maximum(ca[2], cb[2]), minimum(ca[0], cb[0]));
  auto ch = sub(maximum(ca[3], cb[3]), minimum(ca[1], cb[1]));
  auto enclosing = mul(cw, ch);
  return sub(iou_t, div(sub(enclosing, uni), enclosing));
}

}  // namespace motr

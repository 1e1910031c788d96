#pragma once

// Differentiable operations on Tensor<T>.
//
// Binary elementwise ops accept either equal shapes or a right operand whose
// shape is a suffix of the left operand's shape (leading-axis expansion, e.g.
// a bias row added to every row of a matrix). No other broadcasting.

#include <Eigen/Core>

#include <cmath>
#include <limits>

#include "motr/tensor.hpp"

namespace motr {

template <class T>
inline constexpr T kClampFloor = T(1e-12);

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<std::shared_ptr<Node<T>>> parents,
                      const char* op, std::function<void(Node<T>&)> rule) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (grad_enabled())
    for (auto& p : parents) any = any || p->requires_grad;
  if (any) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(rule);
  }
  return Tensor<T>(std::move(node));
}

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

inline bool is_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <class T>
void check_expandable(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!is_suffix(a.shape(), b.shape()))
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) +
                         " and " + to_string(b.shape()) + " are incompatible");
}

// Elementwise op with a derivative expressed from (input, output).
template <class T, class F, class D>
Tensor<T> unary(const Tensor<T>& x, const char* name, F f, D df) {
  std::vector<T> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(x.shape(), std::move(out), {x.node_ptr()}, name,
                        [df](Node<T>& self) {
                          auto& p = *self.parents[0];
                          auto g = p.grad_buffer();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += self.grad[i] * df(p.value[i], self.value[i]);
                        });
}

// Elementwise binary op with leading-axis expansion of b. The derivative
// functors receive (a, b) and return d/da, d/db.
template <class T, class F, class DA, class DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f,
                 DA da, DB db) {
  check_expandable(a, b, name);
  const std::size_t n = a.numel(), m = b.numel();
  std::vector<T> out(n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i % m]);
  return make_result<T>(
      a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, name,
      [da, db, n, m](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          auto g = pa.grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            g[i] += self.grad[i] * da(pa.value[i], pb.value[i % m]);
        }
        if (pb.requires_grad) {
          auto g = pb.grad_buffer();
          for (std::size_t i = 0; i < n; ++i)
            g[i % m] += self.grad[i] * db(pa.value[i], pb.value[i % m]);
        }
      });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " are incompatible");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  detail::MatMap<T>(out.data(), m, n).noalias() =
      detail::ConstMatMap<T>(a.data().data(), m, k) *
      detail::ConstMatMap<T>(b.data().data(), k, n);
  return detail::make_result<T>(
      {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, "matmul",
      [m, k, n](detail::Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        detail::ConstMatMap<T> g(self.grad.data(), m, n);
        if (pa.requires_grad) {
          auto ga = pa.grad_buffer();
          detail::MatMap<T>(ga.data(), m, k).noalias() +=
              g * detail::ConstMatMap<T>(pb.value.data(), k, n).transpose();
        }
        if (pb.requires_grad) {
          auto gb = pb.grad_buffer();
          detail::MatMap<T>(gb.data(), k, n).noalias() +=
              detail::ConstMatMap<T>(pa.value.data(), m, k).transpose() * g;
        }
      });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose expects a matrix, got " +
                         to_string(a.shape()));
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<T> out(m * n);
  auto v = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return detail::make_result<T>({n, m}, std::move(out), {a.node_ptr()},
                                "transpose", [m, n](detail::Node<T>& self) {
                                  auto g = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j)
                                      g[i * n + j] += self.grad[j * m + i];
                                });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

// a / max(b, 1e-12). The guard only matters for non-negative denominators
// (areas), which is the only way it is used.
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "div", [](T x, T y) { return x / std::max(y, kClampFloor<T>); },
      [](T, T y) { return T(1) / std::max(y, kClampFloor<T>); },
      [](T x, T y) {
        return y > kClampFloor<T> ? -x / (y * y) : T(0);
      });
}

template <class T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "minimum", [](T x, T y) { return std::min(x, y); },
      [](T x, T y) { return x <= y ? T(1) : T(0); },
      [](T x, T y) { return x <= y ? T(0) : T(1); });
}

template <class T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(
      a, b, "maximum", [](T x, T y) { return std::max(x, y); },
      [](T x, T y) { return x >= y ? T(1) : T(0); },
      [](T x, T y) { return x >= y ? T(0) : T(1); });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return detail::unary(
      x, "scale", [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> div_scalar(const Tensor<T>& x, T d) {
  return detail::unary(
      x, "div_scalar", [d](T v) { return v / d; }, [d](T, T) { return T(1) / d; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return detail::unary(
      x, "add_scalar", [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> neg(const Tensor<T>& x) {
  return scale(x, T(-1));
}

// 1 - x
template <class T>
Tensor<T> one_minus(const Tensor<T>& x) {
  return detail::unary(
      x, "one_minus", [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> abs(const Tensor<T>& x) {
  return detail::unary(
      x, "abs", [](T v) { return std::abs(v); },
      [](T v, T) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); });
}

// max(x, 0)^p for p >= 1.
template <class T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
  return detail::unary(
      x, "pow",
      [p](T v) { return v > 0 ? std::pow(v, p) : T(0); },
      [p](T v, T) { return v > 0 ? p * std::pow(v, p - 1) : T(0); });
}

// ---------------------------------------------------------------------------
// Nonlinearities

template <class T>
T sigmoid_value(T v) {
  return v >= 0 ? T(1) / (T(1) + std::exp(-v))
                : std::exp(v) / (T(1) + std::exp(v));
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      x, "sigmoid", [](T v) { return sigmoid_value(v); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(
      x, "relu", [](T v) { return v > 0 ? v : T(0); },
      [](T v, T) { return v > 0 ? T(1) : T(0); });
}

// tanh approximation of GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  return detail::unary(
      x, "gelu",
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v))); },
      [](T v, T) {
        const T u = c * (v + k * v * v * v);
        const T t = std::tanh(u);
        const T du = c * (T(1) + T(3) * k * v * v);
        return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * du;
      });
}

enum class Activation { kRelu, kGelu };

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  return kind == Activation::kGelu ? gelu(x) : relu(x);
}

// log(max(x, 1e-12))
template <class T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary(
      x, "log", [](T v) { return std::log(std::max(v, kClampFloor<T>)); },
      [](T v, T) { return v > kClampFloor<T> ? T(1) / v : T(0); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

// Numerically stable softmax along `axis` (negative counts from the back).
template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1) {
  const int r = static_cast<int>(x.rank());
  const int ax = axis < 0 ? axis + r : axis;
  if (ax < 0 || ax >= r)
    throw DimensionError("softmax: axis out of range for " +
                         to_string(x.shape()));
  std::size_t outer = 1, inner = 1;
  const std::size_t len = x.dim(static_cast<std::size_t>(ax));
  for (int i = 0; i < ax; ++i) outer *= x.dim(static_cast<std::size_t>(i));
  for (int i = ax + 1; i < r; ++i) inner *= x.dim(static_cast<std::size_t>(i));
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * len * inner + j;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, in[base + i * inner]);
      T total = 0;
      for (std::size_t i = 0; i < len; ++i) {
        const T e = std::exp(in[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] /= total;
    }
  return detail::make_result<T>(
      x.shape(), std::move(out), {x.node_ptr()}, "softmax",
      [outer, inner, len](detail::Node<T>& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < inner; ++j) {
            const std::size_t base = o * len * inner + j;
            T dot = 0;
            for (std::size_t i = 0; i < len; ++i)
              dot += self.grad[base + i * inner] * self.value[base + i * inner];
            for (std::size_t i = 0; i < len; ++i) {
              const std::size_t at = base + i * inner;
              g[at] += self.value[at] * (self.grad[at] - dot);
            }
          }
      });
}

// Normalizes each row over the last axis, then applies gain and bias.
// Population variance.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = T(1e-5)) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d)
    throw DimensionError("layer_norm: gain/bias " + to_string(gain.shape()) +
                         "/" + to_string(bias.shape()) + " do not match " +
                         to_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  auto in = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  std::vector<T> out(in.size()), xhat(in.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * d;
    T mean = 0;
    for (std::size_t i = 0; i < d; ++i) mean += row[i];
    mean /= T(d);
    T var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const T h = (row[i] - mean) * is;
      xhat[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return detail::make_result<T>(
      x.shape(), std::move(out), {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      "layer_norm",
      [rows, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](detail::Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        if (pg.requires_grad) {
          auto gg = pg.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i)
              gg[i] += self.grad[r * d + i] * xhat[r * d + i];
        }
        if (pb.requires_grad) {
          auto gb = pb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) gb[i] += self.grad[r * d + i];
        }
        if (px.requires_grad) {
          auto gx = px.grad_buffer();
          std::vector<T> dh(d);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dh = 0, mean_dh_h = 0;
            for (std::size_t i = 0; i < d; ++i) {
              dh[i] = self.grad[r * d + i] * pg.value[i];
              mean_dh += dh[i];
              mean_dh_h += dh[i] * xhat[r * d + i];
            }
            mean_dh /= T(d);
            mean_dh_h /= T(d);
            for (std::size_t i = 0; i < d; ++i)
              gx[r * d + i] +=
                  inv_std[r] * (dh[i] - mean_dh - xhat[r * d + i] * mean_dh_h);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and structural ops

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return detail::make_result<T>({1}, {total}, {x.node_ptr()}, "sum",
                                [](detail::Node<T>& self) {
                                  auto g = self.parents[0]->grad_buffer();
                                  for (auto& e : g) e += self.grad[0];
                                });
}

// Sum over the last axis: (..., n) -> (...).
template <class T>
Tensor<T> sum_last(const Tensor<T>& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  if (shape.empty()) shape = {1};
  std::vector<T> out(rows, T(0));
  auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) out[r] += v[r * n + i];
  return detail::make_result<T>(std::move(shape), std::move(out),
                                {x.node_ptr()}, "sum_last",
                                [rows, n](detail::Node<T>& self) {
                                  auto g = self.parents[0]->grad_buffer();
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t i = 0; i < n; ++i)
                                      g[r * n + i] += self.grad[r];
                                });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) +
                         " as " + to_string(shape));
  return detail::make_result<T>(std::move(shape), x.values(), {x.node_ptr()},
                                "reshape", [](detail::Node<T>& self) {
                                  auto g = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                    g[i] += self.grad[i];
                                });
}

namespace detail {
inline void split_axis(const Shape& s, std::size_t axis, std::size_t& outer,
                       std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}
}  // namespace detail

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  if (parts.size() == 1) return parts.front();
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size())
    throw DimensionError("concat: axis out of range for " + to_string(ref));
  Shape shape = ref;
  shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      ok = i == axis || s[i] == ref[i];
    if (!ok)
      throw DimensionError("concat: shape " + to_string(s) +
                           " does not match " + to_string(ref) +
                           " off axis " + std::to_string(axis));
    shape[axis] += s[axis];
  }
  std::size_t outer, inner;
  detail::split_axis(shape, axis, outer, inner);
  const std::size_t total = shape[axis];
  std::vector<T> out(numel(shape));
  std::vector<std::size_t> offsets;
  std::vector<std::shared_ptr<detail::Node<T>>> nodes;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    auto v = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * len * inner, len * inner,
                  out.data() + (o * total + off) * inner);
    offsets.push_back(off);
    nodes.push_back(p.node_ptr());
    off += len;
  }
  return detail::make_result<T>(
      std::move(shape), std::move(out), std::move(nodes), "concat",
      [outer, inner, total, axis, offsets](detail::Node<T>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          auto& p = *self.parents[k];
          if (!p.requires_grad) continue;
          const std::size_t len = p.shape[axis];
          auto g = p.grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            const T* src = self.grad.data() + (o * total + offsets[k]) * inner;
            T* dst = g.data() + o * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
      });
}

// Elements [begin, end) along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin,
                std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.dim(axis))
    throw DimensionError("slice [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + to_string(x.shape()));
  Shape shape = x.shape();
  const std::size_t total = shape[axis];
  const std::size_t len = end - begin;
  shape[axis] = len;
  std::size_t outer, inner;
  detail::split_axis(shape, axis, outer, inner);
  std::vector<T> out(numel(shape));
  auto v = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(v.data() + (o * total + begin) * inner, len * inner,
                out.data() + o * len * inner);
  return detail::make_result<T>(
      std::move(shape), std::move(out), {x.node_ptr()}, "slice",
      [outer, inner, total, begin, len](detail::Node<T>& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * len * inner;
          T* dst = g.data() + (o * total + begin) * inner;
          for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      });
}

// Gathers rows (axis 0) in the given order; indices may repeat.
template <class T>
Tensor<T> take_rows(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw DimensionError("take_rows with no indices");
  const std::size_t n = x.dim(0);
  const std::size_t width = x.numel() / n;
  for (auto r : rows)
    if (r >= n)
      throw DimensionError("take_rows: index " + std::to_string(r) +
                           " out of range for " + to_string(x.shape()));
  Shape shape = x.shape();
  shape[0] = rows.size();
  std::vector<T> out(rows.size() * width);
  auto v = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(v.data() + rows[i] * width, width, out.data() + i * width);
  return detail::make_result<T>(std::move(shape), std::move(out),
                                {x.node_ptr()}, "take_rows",
                                [rows, width](detail::Node<T>& self) {
                                  auto g = self.parents[0]->grad_buffer();
                                  for (std::size_t i = 0; i < rows.size(); ++i)
                                    for (std::size_t j = 0; j < width; ++j)
                                      g[rows[i] * width + j] +=
                                          self.grad[i * width + j];
                                });
}

template <class T>
Tensor<T> column(const Tensor<T>& x, std::size_t j) {
  return slice(x, 1, j, j + 1);
}

}  // namespace motr

#pragma once

// Parameter blocks shared by the encoder, decoder and the temporal
// aggregation layer. Weight matrices are stored (in, out) so a layer is
// x * W + b on row-stacked inputs.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "motr/ops.hpp"

namespace motr {

using Rng = std::mt19937_64;

template <class T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  std::vector<T> v(fan_in * fan_out);
  for (auto& e : v) e = static_cast<T>(dist(rng));
  return Tensor<T>::param({fan_in, fan_out}, std::move(v));
}

template <class T>
struct Linear {
  Tensor<T> weight;  // (in, out)
  Tensor<T> bias;    // (out)

  static Linear init(std::size_t in, std::size_t out, Rng& rng) {
    return {xavier_uniform<T>(in, out, rng), Tensor<T>::zeros({out}, true)};
  }
  Tensor<T> operator()(const Tensor<T>& x) const {
    return add(matmul(x, weight), bias);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <class T>
struct Norm {
  Tensor<T> gain;
  Tensor<T> bias;

  static Norm init(std::size_t d) {
    return {Tensor<T>::full({d}, T(1), true), Tensor<T>::zeros({d}, true)};
  }
  Tensor<T> operator()(const Tensor<T>& x) const {
    return layer_norm(x, gain, bias);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }
};

template <class T>
struct AttentionParams {
  Linear<T> query, key, value, out;

  static AttentionParams init(std::size_t d, Rng& rng) {
    return {Linear<T>::init(d, d, rng), Linear<T>::init(d, d, rng),
            Linear<T>::init(d, d, rng), Linear<T>::init(d, d, rng)};
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    out.visit(prefix + ".out", f);
  }
};

template <class T>
struct FeedForward {
  Linear<T> expand, contract;
  Activation activation = Activation::kRelu;

  static FeedForward init(std::size_t d, std::size_t hidden, Activation act,
                          Rng& rng) {
    return {Linear<T>::init(d, hidden, rng), Linear<T>::init(hidden, d, rng), act};
  }
  Tensor<T> operator()(const Tensor<T>& x) const {
    return contract(activate(expand(x), activation));
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    expand.visit(prefix + ".expand", f);
    contract.visit(prefix + ".contract", f);
  }
};

// Scaled dot-product attention per head; head outputs are concatenated and
// projected. When `weights` is non-null it receives one (a, b) row-stochastic
// matrix per head.
template <class T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const AttentionParams<T>& p,
                               std::size_t n_heads,
                               std::vector<Tensor<T>>* weights = nullptr) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw DimensionError("attention inputs must be matrices");
  const std::size_t d = q.dim(1);
  if (k.dim(1) != d || v.dim(1) != d || k.dim(0) != v.dim(0))
    throw DimensionError("attention: query " + to_string(q.shape()) + ", key " +
                         to_string(k.shape()) + ", value " +
                         to_string(v.shape()) + " are inconsistent");
  if (n_heads == 0 || d % n_heads != 0)
    throw DimensionError("attention: width " + std::to_string(d) +
                         " is not divisible by " + std::to_string(n_heads) +
                         " heads");
  const std::size_t dh = d / n_heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));
  auto qp = p.query(q);
  auto kp = p.key(k);
  auto vp = p.value(v);
  std::vector<Tensor<T>> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    auto qh = n_heads == 1 ? qp : slice(qp, 1, h * dh, (h + 1) * dh);
    auto kh = n_heads == 1 ? kp : slice(kp, 1, h * dh, (h + 1) * dh);
    auto vh = n_heads == 1 ? vp : slice(vp, 1, h * dh, (h + 1) * dh);
    auto att = softmax(scale(matmul(qh, transpose(kh)), scale_factor), -1);
    if (weights) weights->push_back(att);
    heads.push_back(matmul(att, vh));
  }
  return p.out(concat(heads, 1));
}

}  // namespace motr

#pragma once

// Finite-difference checks over every differentiable op and the composite
// loss, interaction and decoder paths, at double precision.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "motr/grad_check.hpp"
#include "motr/losses.hpp"
#include "motr/qim.hpp"

namespace motr {

struct GradCase {
  std::string name;
  std::function<GradCheckReport()> run;
};

namespace detail {

inline Tensor<double> uniform_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& e : v) e = d(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), true);
}

// Values at least `gap` away from zero so kinked ops are smooth under the
// central difference.
inline Tensor<double> signed_tensor(Shape shape, Rng& rng, double gap = 0.1) {
  std::uniform_real_distribution<double> d(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(numel(shape));
  for (auto& e : v) e = sign(rng) ? d(rng) : -d(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), true);
}

inline ModelConfig grad_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.n_detect_queries = 3;
  c.patch_size = 4;
  c.image_size = 8;
  c.d_ffn = 12;
  c.activation = seed % 2 ? Activation::kGelu : Activation::kRelu;
  return c;
}

}  // namespace detail

// Elementary op checks on random shapes drawn from `seed`.
inline std::vector<GradCase> op_gradient_cases(std::uint64_t seed) {
  using T = Tensor<double>;
  auto rng = std::make_shared<Rng>(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  const std::size_t m = dim(*rng), n = dim(*rng), k = dim(*rng);
  auto a = detail::uniform_tensor({m, n}, *rng), b = detail::uniform_tensor({m, n}, *rng);
  auto c = detail::uniform_tensor({n, k}, *rng);
  auto pos = detail::uniform_tensor({m, n}, *rng, 0.2, 2.0);
  auto kinked = detail::signed_tensor({m, n}, *rng);
  auto w = detail::uniform_tensor({m, n}, *rng);
  auto gain = detail::uniform_tensor({n}, *rng), bias = detail::uniform_tensor({n}, *rng);
  auto row = detail::uniform_tensor({n}, *rng);
  auto proj = [w](const T& y) { return sum(mul(y, w)); };
  auto check = [](std::function<T()> f, std::vector<T> inputs) {
    return [f = std::move(f), inputs = std::move(inputs)] { return grad_check<double>(f, inputs); };
  };
  return {
      {"add", check([=] { return proj(add(a, b)); }, {a, b})},
      {"add_row", check([=] { return proj(add(a, row)); }, {a, row})},
      {"sub", check([=] { return proj(sub(a, b)); }, {a, b})},
      {"mul", check([=] { return proj(mul(a, b)); }, {a, b})},
      {"div", check([=] { return proj(div(a, pos)); }, {a, pos})},
      {"minimum", check([=] { return proj(minimum(kinked, scale(kinked, -1.0))); }, {kinked})},
      {"maximum", check([=] { return proj(maximum(kinked, scale(kinked, -1.0))); }, {kinked})},
      {"matmul", check([=] { return sum(matmul(a, c)); }, {a, c})},
      {"transpose", check([=] { return sum(matmul(transpose(a), b)); }, {a, b})},
      {"scale", check([=] { return proj(scale(a, -1.7)); }, {a})},
      {"div_scalar", check([=] { return proj(div_scalar(a, 3.0)); }, {a})},
      {"add_scalar", check([=] { return proj(add_scalar(a, 0.5)); }, {a})},
      {"neg", check([=] { return proj(neg(a)); }, {a})},
      {"one_minus", check([=] { return proj(one_minus(a)); }, {a})},
      {"abs", check([=] { return proj(abs(kinked)); }, {kinked})},
      {"pow", check([=] { return proj(pow_scalar(pos, 2.5)); }, {pos})},
      {"sigmoid", check([=] { return proj(sigmoid(a)); }, {a})},
      {"relu", check([=] { return proj(relu(kinked)); }, {kinked})},
      {"gelu", check([=] { return proj(gelu(a)); }, {a})},
      {"log", check([=] { return proj(log(pos)); }, {pos})},
      {"exp", check([=] { return proj(exp(a)); }, {a})},
      {"softmax", check([=] { return proj(softmax(a)); }, {a})},
      {"softmax0", check([=] { return proj(softmax(a, 0)); }, {a})},
      {"layer_norm", check([=] { return proj(layer_norm(a, gain, bias)); }, {a, gain, bias})},
      {"sum_last", check([=] { return sum(mul(sum_last(a), sum_last(b))); }, {a, b})},
      {"reshape", check([=] { return sum(mul(reshape(a, {m * n}), reshape(b, {m * n}))); }, {a, b})},
      {"concat",
       check([=] { return sum(mul(concat<double>({a, b}, 1), concat<double>({b, a}, 1))); }, {a, b})},
      {"slice", check([=] { return sum(mul(slice(a, 1, 0, 1), slice(b, 1, 0, 1))); }, {a, b})},
      {"take_rows", check([=] { return sum(mul(take_rows(a, {0, 0}), take_rows(b, {0, 0}))); }, {a, b})},
      {"column", check([=] { return sum(mul(column(a, 0), column(b, 0))); }, {a, b})},
  };
}

// Box losses, frame loss, collective average, interaction layer, encoder and
// decoder on a tiny model drawn from `seed`.
inline std::vector<GradCase> composite_gradient_cases(std::uint64_t seed) {
  using T = Tensor<double>;
  Rng rng(seed);
  std::uniform_real_distribution<double> centre(0.3, 0.7), size(0.15, 0.35), prob(0.1, 0.9);
  auto boxes = [&](std::size_t n) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) v.insert(v.end(), {centre(rng), centre(rng), size(rng), size(rng)});
    return T::from({n, 4}, std::move(v), true);
  };
  std::vector<GradCase> out;

  auto pa = boxes(3), pb = boxes(3);
  out.push_back({"box_giou", [=] { return grad_check<double>([=] { return sum(box_giou(pa, pb)); }, {pa, pb}); }});
  out.push_back({"box_l1", [=] { return grad_check<double>([=] { return sum(box_l1(pa, pb)); }, {pa, pb}); }});

  const std::size_t n = 4;
  std::vector<double> pv(n);
  for (auto& p : pv) p = prob(rng);
  auto probs = T::from({n, 1}, pv, true);
  auto pred_boxes = boxes(n);
  std::vector<GtObject> gt{{1, {centre(rng), centre(rng), size(rng), size(rng)}, 0, true},
                           {2, {centre(rng), centre(rng), size(rng), size(rng)}, 0, true}};
  Assignment assignment{{std::nullopt, 1, std::nullopt, 2}};
  out.push_back({"frame_loss", [=] {
                   return grad_check<double>(
                       [=] {
                         FramePredictions<double> fp{probs, pred_boxes, T::zeros({n, 2})};
                         return frame_loss(fp, assignment, gt, 2, LossWeights{}).total();
                       },
                       {probs, pred_boxes});
                 }});
  out.push_back({"collective_average_loss", [=] {
                   return grad_check<double>(
                       [=] {
                         FramePredictions<double> fp{probs, pred_boxes, T::zeros({n, 2})};
                         ClipLossAccumulator<double> acc;
                         acc.add(frame_loss(fp, assignment, gt, 2, LossWeights{}));
                         acc.add(frame_loss(fp, Assignment::background(n), {}, 2, LossWeights{}));
                         return collective_average_loss(acc);
                       },
                       {probs, pred_boxes});
                 }});

  auto model = std::make_shared<Model<double>>(init_model<double>(detail::grad_model_config(seed), seed));
  auto kept = detail::uniform_tensor({2, 8}, rng), prev = detail::uniform_tensor({2, 8}, rng);
  auto newborn = detail::uniform_tensor({1, 8}, rng);
  auto w_tan = detail::uniform_tensor({3, 8}, rng);
  std::vector<T> tan_inputs{kept, prev, newborn};
  model->tan.visit("tan", [&](const std::string&, T& p) { tan_inputs.push_back(p); });
  out.push_back({"tan", [=] {
                   return grad_check<double>(
                       [=] { return sum(mul(tan_forward(model->tan, 2, kept, prev, newborn), w_tan)); },
                       tan_inputs);
                 }});

  auto memory = detail::uniform_tensor({4, 8}, rng);
  auto track = detail::uniform_tensor({2, 8}, rng);
  auto w_box = detail::uniform_tensor({5, 4}, rng);
  std::vector<T> dec_inputs{memory, track};
  model->visit([&](const std::string& name, T& p) {
    if (name.rfind("decoder", 0) == 0 || name == "detect_queries" || name.rfind("class_head", 0) == 0 ||
        name.rfind("box_", 0) == 0)
      dec_inputs.push_back(p);
  });
  out.push_back({"decoder", [=] {
                   return grad_check<double>(
                       [=] {
                         QuerySet<double> tracks{track, {}};
                         for (std::int64_t id : {1, 2}) {
                           QueryRecord rec;
                           rec.kind = QueryKind::kTrack;
                           rec.track_id = id;
                           tracks.records.push_back(rec);
                         }
                         auto p = decode(*model, compose_queries(*model, tracks), memory);
                         return add(sum(p.probs), sum(mul(p.boxes, w_box)));
                       },
                       dec_inputs);
                 }});

  Image img(8, 8, 1);
  std::uniform_real_distribution<float> px(0, 1);
  for (auto& p : img.pixels) p = px(rng);
  auto w_enc = detail::uniform_tensor({4, 8}, rng);
  std::vector<T> enc_inputs;
  model->visit([&](const std::string& name, T& p) {
    if (name.rfind("patch", 0) == 0 || name.rfind("encoder", 0) == 0) enc_inputs.push_back(p);
  });
  out.push_back({"encoder", [=] {
                   return grad_check<double>([=] { return sum(mul(encode(*model, img), w_enc)); },
                                             enc_inputs);
                 }});
  return out;
}

struct GradSuiteResult {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0;
};

inline std::vector<GradSuiteResult> run_gradient_suite(std::size_t op_seeds,
                                                       std::size_t composite_seeds) {
  std::vector<GradSuiteResult> out;
  for (std::uint64_t s = 0; s < op_seeds; ++s)
    for (auto& c : op_gradient_cases(s)) out.push_back({c.name, s, c.run().max_rel_error});
  for (std::uint64_t s = 0; s < composite_seeds; ++s)
    for (auto& c : composite_gradient_cases(s)) out.push_back({c.name, s, c.run().max_rel_error});
  return out;
}

}  // namespace motr

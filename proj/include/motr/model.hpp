#pragma once

// Toy-scale encoder/decoder. A frame is cut into non-overlapping patches,
// projected, given sine positional encodings and refined by self-attention
// layers. The decoder runs the concatenation [detect block; track block] of
// queries through self-attention, cross-attention to the frame memory and a
// feed-forward block, then sigmoid heads produce class scores and
// center-size boxes. Query order is preserved end to end.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/clip.hpp"
#include "motr/layers.hpp"

namespace motr {

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 3;
  std::size_t n_detect_queries = 16;
  std::size_t patch_size = 8;
  std::size_t image_size = 64;
  std::size_t image_channels = 1;
  std::size_t n_classes = 1;
  std::size_t d_ffn = 128;
  Activation activation = Activation::kRelu;
  bool positional_encoding = true;
  // Initial class prior; the class bias starts at logit(prior).
  double class_prior = 0.01;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t n_tokens() const { return grid() * grid(); }
  std::size_t patch_features() const {
    return patch_size * patch_size * image_channels;
  }

  void validate() const {
    auto fail = [](const std::string& m) {
      throw std::invalid_argument("ModelConfig: " + m);
    };
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
      fail("d_model must be a positive multiple of n_heads");
    if (d_model % 4 != 0) fail("d_model must be divisible by 4 (2-D sine encoding)");
    if (patch_size == 0 || image_size % patch_size != 0)
      fail("image_size must be divisible by patch_size");
    if (n_detect_queries == 0) fail("n_detect_queries must be positive");
    if (n_classes == 0 || d_ffn == 0 || image_channels == 0)
      fail("n_classes, d_ffn and image_channels must be positive");
    if (!(class_prior > 0 && class_prior < 1)) fail("class_prior must lie in (0,1)");
  }
};

template <class T>
struct EncoderLayer {
  AttentionParams<T> self_attn;
  Norm<T> norm_attn;
  FeedForward<T> ffn;
  Norm<T> norm_ffn;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    self_attn.visit(prefix + ".self_attn", f);
    norm_attn.visit(prefix + ".norm_attn", f);
    ffn.visit(prefix + ".ffn", f);
    norm_ffn.visit(prefix + ".norm_ffn", f);
  }
};

template <class T>
struct DecoderLayer {
  AttentionParams<T> self_attn;
  Norm<T> norm_self;
  AttentionParams<T> cross_attn;
  Norm<T> norm_cross;
  FeedForward<T> ffn;
  Norm<T> norm_ffn;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    self_attn.visit(prefix + ".self_attn", f);
    norm_self.visit(prefix + ".norm_self", f);
    cross_attn.visit(prefix + ".cross_attn", f);
    norm_cross.visit(prefix + ".norm_cross", f);
    ffn.visit(prefix + ".ffn", f);
    norm_ffn.visit(prefix + ".norm_ffn", f);
  }
};

// Temporal aggregation layer (pre-norm): attention whose query and key are
// (previous track query + hidden state) and whose value is the hidden state,
// followed by a feed-forward block.
template <class T>
struct TanParams {
  AttentionParams<T> attn;
  Norm<T> norm_attn;
  FeedForward<T> ffn;
  Norm<T> norm_ffn;

  static TanParams init(std::size_t d, std::size_t d_ffn, Activation act,
                        Rng& rng) {
    return {AttentionParams<T>::init(d, rng), Norm<T>::init(d),
            FeedForward<T>::init(d, d_ffn, act, rng), Norm<T>::init(d)};
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) {
    attn.visit(prefix + ".attn", f);
    norm_attn.visit(prefix + ".norm_attn", f);
    ffn.visit(prefix + ".ffn", f);
    norm_ffn.visit(prefix + ".norm_ffn", f);
  }
};

template <class T>
struct Model {
  ModelConfig config;
  Linear<T> patch_embed;
  std::vector<EncoderLayer<T>> encoder;
  Tensor<T> detect_queries;  // (n_detect_queries, d_model)
  std::vector<DecoderLayer<T>> decoder;
  Linear<T> class_head;
  Linear<T> box_hidden;
  Linear<T> box_out;
  TanParams<T> tan;

  // Visits every parameter as (name, Tensor&) in a fixed order.
  template <class F>
  void visit(F&& f) {
    patch_embed.visit("patch_embed", f);
    for (std::size_t i = 0; i < encoder.size(); ++i)
      encoder[i].visit("encoder." + std::to_string(i), f);
    f(std::string("detect_queries"), detect_queries);
    for (std::size_t i = 0; i < decoder.size(); ++i)
      decoder[i].visit("decoder." + std::to_string(i), f);
    class_head.visit("class_head", f);
    box_hidden.visit("box_hidden", f);
    box_out.visit("box_out", f);
    tan.visit("tan", f);
  }

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> out;
    visit([&](const std::string&, Tensor<T>& t) { out.push_back(t); });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Tensor<T>& t) { n += t.numel(); });
    return n;
  }
};

template <class T>
Model<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t d = cfg.d_model;
  Model<T> m;
  m.config = cfg;
  m.patch_embed = Linear<T>::init(cfg.patch_features(), d, rng);
  for (std::size_t i = 0; i < cfg.n_encoder_layers; ++i)
    m.encoder.push_back({AttentionParams<T>::init(d, rng), Norm<T>::init(d),
                         FeedForward<T>::init(d, cfg.d_ffn, cfg.activation, rng),
                         Norm<T>::init(d)});
  std::normal_distribution<double> gauss(0.0, 0.02);
  std::vector<T> q(cfg.n_detect_queries * d);
  for (auto& e : q) e = static_cast<T>(gauss(rng));
  m.detect_queries = Tensor<T>::param({cfg.n_detect_queries, d}, std::move(q));
  for (std::size_t i = 0; i < cfg.n_decoder_layers; ++i)
    m.decoder.push_back({AttentionParams<T>::init(d, rng), Norm<T>::init(d),
                         AttentionParams<T>::init(d, rng), Norm<T>::init(d),
                         FeedForward<T>::init(d, cfg.d_ffn, cfg.activation, rng),
                         Norm<T>::init(d)});
  m.class_head = Linear<T>::init(d, cfg.n_classes, rng);
  const T prior_logit =
      static_cast<T>(std::log(cfg.class_prior / (1 - cfg.class_prior)));
  for (auto& b : m.class_head.bias.mutable_data()) b = prior_logit;
  m.box_hidden = Linear<T>::init(d, d, rng);
  m.box_out = Linear<T>::init(d, 4, rng);
  m.tan = TanParams<T>::init(d, cfg.d_ffn, cfg.activation, rng);
  return m;
}

// (grid*grid, d) two-dimensional sine encoding; first half encodes the row,
// second half the column.
template <class T>
Tensor<T> sine_position_encoding(std::size_t grid, std::size_t d) {
  const std::size_t half = d / 2;
  std::vector<T> v(grid * grid * d);
  for (std::size_t r = 0; r < grid; ++r)
    for (std::size_t c = 0; c < grid; ++c) {
      const double coords[2] = {
          (static_cast<double>(r) + 0.5) / static_cast<double>(grid) * 2 * std::numbers::pi,
          (static_cast<double>(c) + 0.5) / static_cast<double>(grid) * 2 * std::numbers::pi};
      T* row = v.data() + (r * grid + c) * d;
      for (std::size_t axis = 0; axis < 2; ++axis)
        for (std::size_t i = 0; i < half; ++i) {
          const double freq = std::pow(
              10000.0, 2.0 * static_cast<double>(i / 2) / static_cast<double>(half));
          const double arg = coords[axis] / freq;
          row[axis * half + i] = static_cast<T>(i % 2 == 0 ? std::sin(arg) : std::cos(arg));
        }
    }
  return Tensor<T>::from({grid * grid, d}, std::move(v));
}

// (tokens, patch*patch*channels) matrix of flattened patches, row-major over
// the patch grid.
template <class T>
Tensor<T> patchify(const Image& image, std::size_t patch) {
  if (patch == 0 || image.height % patch != 0 || image.width % patch != 0)
    throw DimensionError("patchify: image " + std::to_string(image.height) + "x" +
                         std::to_string(image.width) +
                         " is not divisible by patch size " + std::to_string(patch));
  const std::size_t gh = image.height / patch, gw = image.width / patch;
  const std::size_t feat = patch * patch * image.channels;
  std::vector<T> v(gh * gw * feat);
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      T* out = v.data() + (py * gw + px) * feat;
      std::size_t k = 0;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t c = 0; c < image.channels; ++c)
            out[k++] = static_cast<T>(image.at(py * patch + y, px * patch + x, c));
    }
  return Tensor<T>::from({gh * gw, feat}, std::move(v));
}

template <class T>
Tensor<T> encode(const Model<T>& model, const Image& image) {
  const auto& cfg = model.config;
  if (image.height != cfg.image_size || image.width != cfg.image_size ||
      image.channels != cfg.image_channels)
    throw DimensionError("encode: frame " + std::to_string(image.height) + "x" +
                         std::to_string(image.width) + "x" +
                         std::to_string(image.channels) +
                         " does not match model input " +
                         std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_channels));
  auto x = model.patch_embed(patchify<T>(image, cfg.patch_size));
  if (cfg.positional_encoding)
    x = add(x, sine_position_encoding<T>(cfg.grid(), cfg.d_model));
  for (const auto& layer : model.encoder) {
    x = layer.norm_attn(add(x, multi_head_attention(x, x, x, layer.self_attn, cfg.n_heads)));
    x = layer.norm_ffn(add(x, layer.ffn(x)));
  }
  return x;
}

enum class QueryKind { kDetect, kTrack };

struct QueryRecord {
  QueryKind kind = QueryKind::kDetect;
  // Present iff kind == kTrack; unique within a set.
  std::optional<std::int64_t> track_id;
  int disappear_count = 0;
  // Training only: ground-truth identity bound to this track query, empty for
  // inserted false positives.
  std::optional<std::int64_t> gt_identity;
  float last_score = 0.0f;
};

template <class T>
struct QuerySet {
  Tensor<T> embeddings;  // (size, d_model); undefined when empty
  std::vector<QueryRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

// Detect block followed by the given track block.
template <class T>
QuerySet<T> compose_queries(const Model<T>& model, const QuerySet<T>& tracks) {
  QuerySet<T> qs;
  qs.records.assign(model.config.n_detect_queries, QueryRecord{});
  if (tracks.empty()) {
    qs.embeddings = model.detect_queries;
  } else {
    qs.embeddings = concat<T>({model.detect_queries, tracks.embeddings}, 0);
    qs.records.insert(qs.records.end(), tracks.records.begin(), tracks.records.end());
  }
  return qs;
}

template <class T>
struct FramePredictions {
  Tensor<T> probs;   // (n, n_classes), sigmoid
  Tensor<T> boxes;   // (n, 4), sigmoid (cx, cy, w, h)
  Tensor<T> hidden;  // (n, d_model)

  std::size_t size() const { return probs.dim(0); }
  double score(std::size_t i) const {
    double best = 0;
    for (std::size_t c = 0; c < probs.dim(1); ++c)
      best = std::max(best, static_cast<double>(probs.at(i, c)));
    return best;
  }
  Box box(std::size_t i) const { return box_row(boxes, i); }
};

template <class T>
FramePredictions<T> prediction_heads(const Model<T>& model, const Tensor<T>& hidden) {
  FramePredictions<T> p;
  p.hidden = hidden;
  p.probs = sigmoid(model.class_head(hidden));
  p.boxes = sigmoid(model.box_out(relu(model.box_hidden(hidden))));
  return p;
}

template <class T>
Tensor<T> decoder_layer(const DecoderLayer<T>& layer, const Tensor<T>& x,
                        const Tensor<T>& memory, std::size_t n_heads) {
  auto h = layer.norm_self(add(x, multi_head_attention(x, x, x, layer.self_attn, n_heads)));
  h = layer.norm_cross(
      add(h, multi_head_attention(h, memory, memory, layer.cross_attn, n_heads)));
  return layer.norm_ffn(add(h, layer.ffn(h)));
}

template <class T>
FramePredictions<T> decode(const Model<T>& model, const QuerySet<T>& queries,
                           const Tensor<T>& memory) {
  if (queries.empty() || !queries.embeddings.defined())
    throw DimensionError("decode: empty query set");
  const std::size_t d = model.config.d_model;
  if (queries.embeddings.rank() != 2 || queries.embeddings.dim(1) != d ||
      queries.embeddings.dim(0) != queries.size())
    throw DimensionError("decode: query embeddings " +
                         to_string(queries.embeddings.shape()) +
                         " do not match " + std::to_string(queries.size()) +
                         " records of width " + std::to_string(d));
  if (memory.rank() != 2 || memory.dim(1) != d)
    throw DimensionError("decode: memory " + to_string(memory.shape()) +
                         " does not have width " + std::to_string(d));
  auto x = queries.embeddings;
  for (const auto& layer : model.decoder)
    x = decoder_layer(layer, x, memory, model.config.n_heads);
  return prediction_heads(model, x);
}

}  // namespace motr

#pragma once

// Run configuration as a nested JSON document. Unknown keys are rejected so
// typos do not silently fall back to defaults.

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "motr/qim.hpp"
#include "motr/simulator.hpp"
#include "motr/training.hpp"

namespace motr {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::size_t train_sequences = 8;
  std::size_t val_sequences = 8;
  std::size_t sequence_length = 20;
  std::string data_dir = "data";
  std::string output_dir = "runs";
};

struct RunConfig {
  WorldConfig world;
  ModelConfig model;
  TrainConfig train;
  LifecycleConfig lifecycle;
  LossWeights loss;
  FocalParams focal;
  DataConfig data;
  std::uint64_t seed = 0;

  void validate() const {
    world.validate();
    model.validate();
    train.validate();
    lifecycle.validate();
    loss.validate();
    if (world.max_objects > model.n_detect_queries)
      throw ConfigError("world.max_objects (" + std::to_string(world.max_objects) +
                        ") exceeds model.n_detect_queries (" +
                        std::to_string(model.n_detect_queries) + ")");
    if (world.image_size != model.image_size)
      throw ConfigError("world.image_size (" + std::to_string(world.image_size) +
                        ") differs from model.image_size (" +
                        std::to_string(model.image_size) + ")");
    if (world.channels != model.image_channels)
      throw ConfigError("world.channels differs from model.image_channels");
    if (model.n_classes != 1)
      throw ConfigError("model.n_classes must be 1 for the synthetic world");
    if (data.sequence_length < 1) throw ConfigError("data.sequence_length must be >= 1");
  }
};

namespace detail {

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  template <class V>
  ObjectReader& field(const char* key, V& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
    return *this;
  }
  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path_ + ": unknown key \"" + k + "\"");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string activation_name(Activation a) { return a == Activation::kGelu ? "gelu" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "gelu") return Activation::kGelu;
  throw ConfigError("model.activation: expected \"relu\" or \"gelu\", got \"" + s + "\"");
}

}  // namespace detail

inline Json to_json(const WorldConfig& c) {
  return {{"max_objects", c.max_objects},
          {"image_size", c.image_size},
          {"channels", c.channels},
          {"min_speed", c.min_speed},
          {"max_speed", c.max_speed},
          {"accel_noise_sigma", c.accel_noise_sigma},
          {"birth_rate", c.birth_rate},
          {"death_rate", c.death_rate},
          {"min_box", c.min_box},
          {"max_box", c.max_box},
          {"initial_objects", c.initial_objects},
          {"pixel_noise", c.pixel_noise},
          {"min_intensity", c.min_intensity},
          {"max_intensity", c.max_intensity},
          {"min_visible_fraction", c.min_visible_fraction},
          {"seed", c.seed}};
}

inline void from_json_strict(const Json& j, WorldConfig& c, const std::string& path) {
  detail::ObjectReader r(j, path);
  r.field("max_objects", c.max_objects)
      .field("image_size", c.image_size)
      .field("channels", c.channels)
      .field("min_speed", c.min_speed)
      .field("max_speed", c.max_speed)
      .field("accel_noise_sigma", c.accel_noise_sigma)
      .field("birth_rate", c.birth_rate)
      .field("death_rate", c.death_rate)
      .field("min_box", c.min_box)
      .field("max_box", c.max_box)
      .field("initial_objects", c.initial_objects)
      .field("pixel_noise", c.pixel_noise)
      .field("min_intensity", c.min_intensity)
      .field("max_intensity", c.max_intensity)
      .field("min_visible_fraction", c.min_visible_fraction)
      .field("seed", c.seed);
  r.finish();
}

inline Json to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"n_encoder_layers", c.n_encoder_layers},
          {"n_decoder_layers", c.n_decoder_layers},
          {"n_detect_queries", c.n_detect_queries},
          {"patch_size", c.patch_size},
          {"image_size", c.image_size},
          {"image_channels", c.image_channels},
          {"n_classes", c.n_classes},
          {"d_ffn", c.d_ffn},
          {"activation", detail::activation_name(c.activation)},
          {"positional_encoding", c.positional_encoding},
          {"class_prior", c.class_prior}};
}

inline void from_json_strict(const Json& j, ModelConfig& c, const std::string& path) {
  detail::ObjectReader r(j, path);
  std::string act = detail::activation_name(c.activation);
  r.field("d_model", c.d_model)
      .field("n_heads", c.n_heads)
      .field("n_encoder_layers", c.n_encoder_layers)
      .field("n_decoder_layers", c.n_decoder_layers)
      .field("n_detect_queries", c.n_detect_queries)
      .field("patch_size", c.patch_size)
      .field("image_size", c.image_size)
      .field("image_channels", c.image_channels)
      .field("n_classes", c.n_classes)
      .field("d_ffn", c.d_ffn)
      .field("activation", act)
      .field("positional_encoding", c.positional_encoding)
      .field("class_prior", c.class_prior);
  r.finish();
  c.activation = detail::parse_activation(act);
}

inline Json to_json(const TrainConfig& c) {
  Json curriculum = Json::array();
  for (const auto& s : c.curriculum) curriculum.push_back({s.start_epoch, s.clip_len});
  return {{"p_drop", c.p_drop},
          {"p_insert", c.p_insert},
          {"max_false_positives", c.max_false_positives},
          {"curriculum", curriculum},
          {"max_interval", c.max_interval},
          {"learning_rate", c.learning_rate},
          {"lr_decay_epoch", c.lr_decay_epoch},
          {"lr_decay_factor", c.lr_decay_factor},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"grad_clip_norm", c.grad_clip_norm},
          {"epochs", c.epochs},
          {"clips_per_epoch", c.clips_per_epoch},
          {"batch_clips", c.batch_clips},
          {"warmup_iterations", c.warmup_iterations},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed}};
}

inline void from_json_strict(const Json& j, TrainConfig& c, const std::string& path) {
  detail::ObjectReader r(j, path);
  std::vector<std::pair<std::size_t, std::size_t>> curriculum;
  for (const auto& s : c.curriculum) curriculum.emplace_back(s.start_epoch, s.clip_len);
  r.field("p_drop", c.p_drop)
      .field("p_insert", c.p_insert)
      .field("max_false_positives", c.max_false_positives)
      .field("curriculum", curriculum)
      .field("max_interval", c.max_interval)
      .field("learning_rate", c.learning_rate)
      .field("lr_decay_epoch", c.lr_decay_epoch)
      .field("lr_decay_factor", c.lr_decay_factor)
      .field("weight_decay", c.weight_decay)
      .field("beta1", c.beta1)
      .field("beta2", c.beta2)
      .field("grad_clip_norm", c.grad_clip_norm)
      .field("epochs", c.epochs)
      .field("clips_per_epoch", c.clips_per_epoch)
      .field("batch_clips", c.batch_clips)
      .field("warmup_iterations", c.warmup_iterations)
      .field("checkpoint_every", c.checkpoint_every)
      .field("seed", c.seed);
  r.finish();
  c.curriculum.clear();
  for (auto [e, l] : curriculum) c.curriculum.push_back({e, l});
}

inline Json to_json(const LifecycleConfig& c) {
  return {{"tau_en", c.tau_en},
          {"tau_ex", c.tau_ex},
          {"miss_tolerance", c.miss_tolerance},
          {"iou_keep", c.iou_keep},
          {"emit_during_grace", c.emit_during_grace}};
}

inline void from_json_strict(const Json& j, LifecycleConfig& c, const std::string& path) {
  detail::ObjectReader r(j, path);
  r.field("tau_en", c.tau_en)
      .field("tau_ex", c.tau_ex)
      .field("miss_tolerance", c.miss_tolerance)
      .field("iou_keep", c.iou_keep)
      .field("emit_during_grace", c.emit_during_grace);
  r.finish();
}

inline Json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"world", to_json(c.world)},
          {"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"lifecycle", to_json(c.lifecycle)},
          {"loss",
           {{"cls", c.loss.cls},
            {"l1", c.loss.l1},
            {"giou", c.loss.giou},
            {"focal_alpha", c.focal.alpha},
            {"focal_gamma", c.focal.gamma}}},
          {"data",
           {{"train_sequences", c.data.train_sequences},
            {"val_sequences", c.data.val_sequences},
            {"sequence_length", c.data.sequence_length},
            {"data_dir", c.data.data_dir},
            {"output_dir", c.data.output_dir}}}};
}

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  detail::ObjectReader r(j, "config");
  r.field("seed", c.seed);
  if (auto* s = r.child("world")) from_json_strict(*s, c.world, "world");
  if (auto* s = r.child("model")) from_json_strict(*s, c.model, "model");
  if (auto* s = r.child("train")) from_json_strict(*s, c.train, "train");
  if (auto* s = r.child("lifecycle")) from_json_strict(*s, c.lifecycle, "lifecycle");
  if (auto* s = r.child("loss")) {
    detail::ObjectReader l(*s, "loss");
    l.field("cls", c.loss.cls)
        .field("l1", c.loss.l1)
        .field("giou", c.loss.giou)
        .field("focal_alpha", c.focal.alpha)
        .field("focal_gamma", c.focal.gamma);
    l.finish();
  }
  if (auto* s = r.child("data")) {
    detail::ObjectReader d(*s, "data");
    d.field("train_sequences", c.data.train_sequences)
        .field("val_sequences", c.data.val_sequences)
        .field("sequence_length", c.data.sequence_length)
        .field("data_dir", c.data.data_dir)
        .field("output_dir", c.data.output_dir);
    d.finish();
  }
  r.finish();
  c.validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_run_config(text);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string dump_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path);
  out << dump_config(c);
}

inline ClipOptions clip_options(const RunConfig& c) {
  ClipOptions o;
  o.weights = c.loss;
  o.focal = c.focal;
  o.iou_keep = c.lifecycle.iou_keep;
  o.p_drop = c.train.p_drop;
  o.p_insert = c.train.p_insert;
  o.max_false_positives = c.train.max_false_positives;
  return o;
}

inline ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  from_json_strict(j, c, "model");
  c.validate();
  return c;
}

}  // namespace motr

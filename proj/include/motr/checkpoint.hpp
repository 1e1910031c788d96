#pragma once

// Checkpoint container (little-endian):
//   magic "MOTRCKPT", u32 version = 1
//   u64 length, model config as JSON text
//   u64 tensor count, then per tensor:
//     u32 name length, name, u32 rank, u64 dims[rank], f64 values[numel]
// Tensors appear in the model's parameter order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/config.hpp"

namespace motr {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'M', 'O', 'T', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class V>
void write_pod(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V read_pod(std::istream& in, const char* what) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

inline std::string read_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (1ull << 32)) throw CheckpointError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return s;
}

}  // namespace detail

template <class T>
void save_checkpoint(Model<T>& model, std::ostream& out) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = to_json(model.config).dump();
  detail::write_pod<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  std::uint64_t count = 0;
  model.visit([&](const std::string&, Tensor<T>&) { ++count; });
  detail::write_pod<std::uint64_t>(out, count);
  model.visit([&](const std::string& name, Tensor<T>& t) {
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::write_pod<std::uint64_t>(out, d);
    for (T v : t.values()) detail::write_pod<double>(out, static_cast<double>(v));
  });
}

template <class T>
void save_checkpoint(Model<T>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  save_checkpoint(model, out);
  if (!out) throw CheckpointError("error while writing checkpoint " + path);
}

template <class T>
Model<T> load_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = detail::read_pod<std::uint64_t>(in, "config length");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(Json::parse(detail::read_bytes(in, cfg_len, "config")));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  auto model = init_model<T>(cfg, 0);
  std::map<std::string, Tensor<T>*> slots;
  model.visit([&](const std::string& name, Tensor<T>& t) { slots[name] = &t; });
  const auto count = detail::read_pod<std::uint64_t>(in, "tensor count");
  if (count != slots.size())
    throw CheckpointError("checkpoint holds " + std::to_string(count) +
                          " tensors, the model has " + std::to_string(slots.size()));
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = detail::read_pod<std::uint32_t>(in, "name length");
    const auto name = detail::read_bytes(in, name_len, "tensor name");
    auto it = slots.find(name);
    if (it == slots.end()) throw CheckpointError("unexpected tensor \"" + name + "\"");
    Tensor<T>& dst = *it->second;
    const auto rank = detail::read_pod<std::uint32_t>(in, "rank");
    Shape shape(rank);
    for (auto& d : shape) d = detail::read_pod<std::uint64_t>(in, "dims");
    if (shape != dst.shape())
      throw CheckpointError("tensor \"" + name + "\" has shape " + to_string(shape) +
                            ", expected " + to_string(dst.shape()));
    auto data = dst.mutable_data();
    for (auto& v : data) v = static_cast<T>(detail::read_pod<double>(in, "values"));
    slots.erase(it);
  }
  return model;
}

template <class T>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  try {
    return load_checkpoint<T>(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

template <class T>
std::string checkpoint_bytes(Model<T>& model) {
  std::ostringstream os(std::ios::binary);
  save_checkpoint(model, os);
  return os.str();
}

}  // namespace motr

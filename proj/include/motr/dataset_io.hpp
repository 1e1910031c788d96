#pragma once

// Dataset dump layout:
//   <root>/<split>/seq-0000/gt/gt.txt     MOTChallenge ground truth
//   <root>/<split>/seq-0000/frames.bin    raw frames
// frames.bin (little-endian): magic "MOTRFRM1", u32 version = 1,
// u32 n_frames, u32 height, u32 width, u32 channels, then
// n_frames * height * width * channels float32 pixels, row-major HWC.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/mot_format.hpp"

namespace motr {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kFramesMagic[8] = {'M', 'O', 'T', 'R', 'F', 'R', 'M', '1'};

namespace fs = std::filesystem;

inline void write_frames(const std::vector<Image>& frames, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path);
  const std::uint32_t h = frames.empty() ? 0 : static_cast<std::uint32_t>(frames[0].height);
  const std::uint32_t w = frames.empty() ? 0 : static_cast<std::uint32_t>(frames[0].width);
  const std::uint32_t c = frames.empty() ? 0 : static_cast<std::uint32_t>(frames[0].channels);
  const std::uint32_t header[5] = {1, static_cast<std::uint32_t>(frames.size()), h, w, c};
  out.write(kFramesMagic, sizeof kFramesMagic);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  for (const auto& f : frames) {
    if (f.height != h || f.width != w || f.channels != c)
      throw DatasetError("write_frames: frames differ in size");
    out.write(reinterpret_cast<const char*>(f.pixels.data()),
              static_cast<std::streamsize>(f.pixels.size() * sizeof(float)));
  }
  if (!out) throw DatasetError("error while writing " + path);
}

inline std::vector<Image> read_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open frame container " + path);
  char magic[8];
  std::uint32_t header[5];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, kFramesMagic, sizeof magic) != 0)
    throw DatasetError(path + ": not a frame container");
  if (header[0] != 1) throw DatasetError(path + ": unsupported version " + std::to_string(header[0]));
  std::vector<Image> frames;
  for (std::uint32_t i = 0; i < header[1]; ++i) {
    Image img(header[2], header[3], header[4]);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size() * sizeof(float)));
    if (!in) throw DatasetError(path + ": truncated at frame " + std::to_string(i + 1));
    frames.push_back(std::move(img));
  }
  return frames;
}

inline std::string sequence_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq-%04zu", index);
  return buf;
}

inline void write_sequence(const Clip& seq, const fs::path& dir) {
  fs::create_directories(dir / "gt");
  std::vector<Image> frames;
  for (const auto& f : seq.frames) frames.push_back(f.image);
  write_frames(frames, (dir / "frames.bin").string());
  const std::size_t size = seq.size() ? seq.frames[0].image.width : 0;
  write_mot_file(gt_mot_lines(seq, size), (dir / "gt" / "gt.txt").string());
}

// Ground truth is optional; without it the frames carry no objects.
inline Clip read_sequence(const fs::path& dir) {
  auto images = read_frames((dir / "frames.bin").string());
  Clip seq;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Frame f;
    f.image = std::move(images[i]);
    f.source_index = i;
    seq.frames.push_back(std::move(f));
  }
  const auto gt = dir / "gt" / "gt.txt";
  if (!fs::exists(gt)) return seq;
  const std::size_t size = seq.size() ? seq.frames[0].image.width : 1;
  for (const auto& l : read_mot_file(gt.string())) {
    if (l.frame < 1 || static_cast<std::size_t>(l.frame) > seq.size())
      throw DatasetError(gt.string() + ": frame " + std::to_string(l.frame) + " out of range");
    seq.frames[static_cast<std::size_t>(l.frame - 1)].objects.push_back(
        {l.id, from_mot_line(l, size), 0, l.conf != 0});
  }
  return seq;
}

inline std::vector<fs::path> sequence_dirs(const fs::path& split_dir) {
  if (!fs::is_directory(split_dir))
    throw DatasetError("dataset directory " + split_dir.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(split_dir))
    if (e.is_directory() && fs::exists(e.path() / "frames.bin")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

inline std::vector<Clip> read_split(const fs::path& split_dir) {
  std::vector<Clip> out;
  for (const auto& d : sequence_dirs(split_dir)) out.push_back(read_sequence(d));
  if (out.empty()) throw DatasetError("no sequences found under " + split_dir.string());
  return out;
}

// Sequence i of a split is simulated with seed base_seed + i.
inline std::vector<Clip> simulate_split(WorldConfig world, std::size_t count,
                                        std::size_t length, std::uint64_t base_seed) {
  std::vector<Clip> out;
  for (std::size_t i = 0; i < count; ++i) {
    world.seed = base_seed + i;
    out.push_back(simulate_sequence(world, length));
  }
  return out;
}

}  // namespace motr

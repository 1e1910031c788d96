#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "motr/checkpoint.hpp"
#include "motr/config.hpp"
#include "motr/dataset_io.hpp"
#include "motr/mot_format.hpp"

using namespace motr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("motr-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.n_detect_queries = 3;
  c.patch_size = 4;
  c.image_size = 8;
  c.d_ffn = 12;
  return c;
}

}  // namespace

TEST(MotFormat, ParsesExampleLine) {
  auto lines = parse_mot_string("1,3,10.5,20,30,40,0.9,-1,-1,-1\n");
  ASSERT_EQ(lines.size(), 1u);
  const auto& m = lines[0];
  EXPECT_EQ(m.frame, 1);
  EXPECT_EQ(m.id, 3);
  EXPECT_DOUBLE_EQ(m.bb_left, 10.5);
  EXPECT_DOUBLE_EQ(m.bb_top, 20);
  EXPECT_DOUBLE_EQ(m.bb_width, 30);
  EXPECT_DOUBLE_EQ(m.bb_height, 40);
  EXPECT_DOUBLE_EQ(m.conf, 0.9);
  EXPECT_DOUBLE_EQ(m.x, -1);
}

TEST(MotFormat, ShortLineNamesLineNumber) {
  try {
    parse_mot_string("1,3,10,20\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1,3,10,20"), std::string::npos);
  }
  try {
    parse_mot_string("1,1,0,0,1,1\n\n2,x,0,0,1,1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_mot_string("0,1,0,0,1,1"), ParseError);
  EXPECT_THROW(parse_mot_string("1,1,0,0,-1,1"), ParseError);
}

TEST(MotFormat, OptionalFieldsDefault) {
  auto m = parse_mot_string("2,5,1,2,3,4")[0];
  EXPECT_DOUBLE_EQ(m.conf, 1);
  EXPECT_DOUBLE_EQ(m.z, -1);
}

TEST(MotFormat, RoundTripIsCanonical) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 64);
  std::uniform_int_distribution<std::int64_t> f(1, 50), id(1, 20);
  std::vector<MotLine> lines;
  for (int i = 0; i < 500; ++i)
    lines.push_back({f(rng), id(rng), u(rng), u(rng), u(rng), u(rng), u(rng) / 64, -1, -1, -1});
  auto text = write_mot_string(lines);
  auto parsed = parse_mot_string(text);
  ASSERT_EQ(parsed.size(), lines.size());
  std::vector<MotLine> expected;
  for (const auto& l : lines) expected.push_back(canonical(l));
  std::stable_sort(expected.begin(), expected.end(), mot_less);
  EXPECT_EQ(parsed, expected);
  EXPECT_EQ(write_mot_string(parsed), text);
}

TEST(MotFormat, PixelConversion) {
  Box b{0.25, 0.5, 0.1, 0.2};
  auto m = to_mot_line(3, 9, b, 0.7, 64);
  EXPECT_DOUBLE_EQ(m.bb_left, 0.2 * 64);
  EXPECT_DOUBLE_EQ(m.bb_top, 0.4 * 64);
  auto back = from_mot_line(m, 64);
  EXPECT_NEAR(back.cx, b.cx, 1e-12);
  EXPECT_NEAR(back.cy, b.cy, 1e-12);
  EXPECT_NEAR(back.w, b.w, 1e-12);
  EXPECT_NEAR(back.h, b.h, 1e-12);
}

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  auto text = dump_config(c);
  auto parsed = parse_run_config(text);
  EXPECT_EQ(dump_config(parsed), text);
}

TEST(Config, PartialOverrides) {
  auto c = parse_run_config(R"({"seed": 4, "train": {"learning_rate": 0.001, "curriculum": [[0, 3]]}})");
  EXPECT_EQ(c.seed, 4u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 1e-3);
  ASSERT_EQ(c.train.curriculum.size(), 1u);
  EXPECT_EQ(c.train.curriculum[0].clip_len, 3u);
  EXPECT_EQ(c.model.d_model, 64u);
}

TEST(Config, Strictness) {
  EXPECT_THROW(parse_run_config(R"({"model": {"d_modle": 32}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"extra": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"d_model": "wide"}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"activation": "tanh"}})"), std::exception);
}

TEST(Config, CrossValidation) {
  EXPECT_THROW(parse_run_config(R"({"world": {"max_objects": 20}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"world": {"image_size": 32}})"), ConfigError);
  EXPECT_NO_THROW(
      parse_run_config(R"({"world": {"image_size": 32}, "model": {"image_size": 32}})"));
  EXPECT_THROW(parse_run_config(R"({"lifecycle": {"tau_ex": 0.9}})"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAndDoubleSave) {
  auto model = init_model<double>(tiny_config(), 5);
  const auto bytes = checkpoint_bytes(model);
  std::istringstream in(bytes);
  auto loaded = load_checkpoint<double>(in);
  EXPECT_EQ(checkpoint_bytes(loaded), bytes);
  auto a = model.parameters(), b = loaded.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values(), b[i].values());
  EXPECT_EQ(loaded.config.d_model, 8u);
}

TEST(Checkpoint, FloatModelsRoundTrip) {
  auto model = init_model<float>(tiny_config(), 5);
  const auto bytes = checkpoint_bytes(model);
  std::istringstream in(bytes);
  auto loaded = load_checkpoint<float>(in);
  EXPECT_EQ(checkpoint_bytes(loaded), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto model = init_model<double>(tiny_config(), 5);
  auto bytes = checkpoint_bytes(model);
  {
    auto bad = bytes;
    bad[0] = 'X';
    std::istringstream in(bad);
    EXPECT_THROW(load_checkpoint<double>(in), CheckpointError);
  }
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 7));
    EXPECT_THROW(load_checkpoint<double>(in), CheckpointError);
  }
  EXPECT_THROW(load_checkpoint<double>("/nonexistent/model.ckpt"), CheckpointError);
}

TEST(Dataset, SequenceRoundTrip) {
  WorldConfig w;
  w.image_size = 16;
  w.max_objects = 4;
  w.seed = 3;
  auto seq = simulate_sequence(w, 6);
  auto dir = temp_dir("dataset");
  write_sequence(seq, dir / sequence_name(0));
  auto back = read_split(dir);
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].size(), seq.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    EXPECT_EQ(back[0].frames[f].image, seq.frames[f].image);
    ASSERT_EQ(back[0].frames[f].objects.size(), seq.frames[f].objects.size());
    for (std::size_t k = 0; k < seq.frames[f].objects.size(); ++k) {
      const auto& a = seq.frames[f].objects[k];
      const auto& b = back[0].frames[f].objects[k];
      EXPECT_EQ(a.identity, b.identity);
      EXPECT_EQ(a.visible, b.visible);
      EXPECT_NEAR(a.box.cx, b.box.cx, 1e-5);
      EXPECT_NEAR(a.box.w, b.box.w, 1e-5);
    }
  }
  fs::remove_all(dir);
}

TEST(Dataset, FramesRejectBadMagic) {
  auto dir = temp_dir("frames");
  {
    std::ofstream out(dir / "frames.bin", std::ios::binary);
    out << "NOTFRAMESATALL";
  }
  EXPECT_THROW(read_frames((dir / "frames.bin").string()), DatasetError);
  EXPECT_THROW(read_split(dir / "missing"), DatasetError);
  fs::remove_all(dir);
}

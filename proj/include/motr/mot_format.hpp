#pragma once

// MOTChallenge text records:
//   frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z
// Boxes are in pixels. Trailing fields beyond the tenth are ignored; conf and
// x, y, z default to 1 and -1 when absent.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "motr/evaluation.hpp"
#include "motr/tracker.hpp"

namespace motr {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& text, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what + ": \"" + text + "\""),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct MotLine {
  std::int64_t frame = 1;
  std::int64_t id = 0;
  double bb_left = 0;
  double bb_top = 0;
  double bb_width = 0;
  double bb_height = 0;
  double conf = 1;
  double x = -1;
  double y = -1;
  double z = -1;

  bool operator==(const MotLine&) const = default;
};

inline bool mot_less(const MotLine& a, const MotLine& b) {
  return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& field, std::size_t line, const std::string& text) {
  const auto f = trim(field);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(f.c_str(), &end);
  if (f.empty() || end != f.c_str() + f.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError(line, text, "field \"" + f + "\" is not a finite number");
  return v;
}

inline std::int64_t parse_integer(const std::string& field, std::size_t line,
                                  const std::string& text) {
  const double v = parse_real(field, line, text);
  if (v != std::floor(v) || std::fabs(v) > 9e15)
    throw ParseError(line, text, "field \"" + trim(field) + "\" is not an integer");
  return static_cast<std::int64_t>(v);
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline MotLine parse_mot_line(const std::string& text, std::size_t line_no) {
  std::vector<std::string> fields;
  std::stringstream ss(text);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!text.empty() && text.back() == ',') fields.emplace_back();
  if (fields.size() < 6)
    throw ParseError(line_no, text,
                     "expected at least 6 comma-separated fields, got " +
                         std::to_string(fields.size()));
  MotLine m;
  m.frame = detail::parse_integer(fields[0], line_no, text);
  m.id = detail::parse_integer(fields[1], line_no, text);
  m.bb_left = detail::parse_real(fields[2], line_no, text);
  m.bb_top = detail::parse_real(fields[3], line_no, text);
  m.bb_width = detail::parse_real(fields[4], line_no, text);
  m.bb_height = detail::parse_real(fields[5], line_no, text);
  if (fields.size() > 6) m.conf = detail::parse_real(fields[6], line_no, text);
  if (fields.size() > 7) m.x = detail::parse_real(fields[7], line_no, text);
  if (fields.size() > 8) m.y = detail::parse_real(fields[8], line_no, text);
  if (fields.size() > 9) m.z = detail::parse_real(fields[9], line_no, text);
  if (m.frame < 1) throw ParseError(line_no, text, "frame must be >= 1");
  if (m.bb_width < 0 || m.bb_height < 0)
    throw ParseError(line_no, text, "box width and height must be >= 0");
  return m;
}

// Blank lines are skipped.
inline std::vector<MotLine> parse_mot(std::istream& in) {
  std::vector<MotLine> out;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (detail::trim(text).empty()) continue;
    out.push_back(parse_mot_line(text, line_no));
  }
  return out;
}

inline std::vector<MotLine> parse_mot_string(const std::string& s) {
  std::istringstream in(s);
  return parse_mot(in);
}

inline std::vector<MotLine> read_mot_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open MOT file " + path);
  try {
    return parse_mot(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

inline std::map<std::int64_t, std::vector<MotLine>> group_by_frame(
    const std::vector<MotLine>& lines) {
  std::map<std::int64_t, std::vector<MotLine>> out;
  for (const auto& l : lines) out[l.frame].push_back(l);
  for (auto& [f, v] : out) std::sort(v.begin(), v.end(), mot_less);
  return out;
}

inline std::string format_mot_line(const MotLine& m) {
  using detail::format_real;
  return std::to_string(m.frame) + ',' + std::to_string(m.id) + ',' + format_real(m.bb_left) +
         ',' + format_real(m.bb_top) + ',' + format_real(m.bb_width) + ',' +
         format_real(m.bb_height) + ',' + format_real(m.conf) + ',' + format_real(m.x) + ',' +
         format_real(m.y) + ',' + format_real(m.z);
}

// Writes records sorted by frame, then id.
inline void write_mot(std::vector<MotLine> lines, std::ostream& out) {
  std::stable_sort(lines.begin(), lines.end(), mot_less);
  for (const auto& l : lines) out << format_mot_line(l) << '\n';
}

inline std::string write_mot_string(const std::vector<MotLine>& lines) {
  std::ostringstream os;
  write_mot(lines, os);
  return os.str();
}

inline void write_mot_file(const std::vector<MotLine>& lines, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write MOT file " + path);
  write_mot(lines, out);
  if (!out) throw std::runtime_error("error while writing " + path);
}

// Value as it reads back after a write.
inline double round_significant(double v) { return std::strtod(detail::format_real(v).c_str(), nullptr); }

inline MotLine canonical(const MotLine& m) {
  MotLine c = m;
  for (double* v : {&c.bb_left, &c.bb_top, &c.bb_width, &c.bb_height, &c.conf, &c.x, &c.y, &c.z})
    *v = round_significant(*v);
  return c;
}

inline MotLine to_mot_line(std::int64_t frame, std::int64_t id, const Box& b, double conf,
                           std::size_t image_size) {
  const double s = static_cast<double>(image_size);
  return {frame, id, b.left() * s, b.top() * s, b.w * s, b.h * s, conf, -1, -1, -1};
}

inline Box from_mot_line(const MotLine& m, std::size_t image_size) {
  const double s = static_cast<double>(image_size);
  return {(m.bb_left + m.bb_width / 2) / s, (m.bb_top + m.bb_height / 2) / s, m.bb_width / s,
          m.bb_height / s};
}

inline std::vector<MotLine> to_mot_lines(const std::vector<TrackOutput>& tracks,
                                         std::size_t image_size) {
  std::vector<MotLine> out;
  for (const auto& t : tracks)
    out.push_back(to_mot_line(static_cast<std::int64_t>(t.frame), t.track_id, t.box,
                              t.confidence, image_size));
  return out;
}

// Ground truth of a sequence. Objects below the visibility cut are kept with
// conf 0, which evaluation ignores.
inline std::vector<MotLine> gt_mot_lines(const Clip& seq, std::size_t image_size) {
  std::vector<MotLine> out;
  for (std::size_t f = 0; f < seq.size(); ++f)
    for (const auto& o : seq.frames[f].objects)
      out.push_back(to_mot_line(static_cast<std::int64_t>(f + 1), o.identity, o.box,
                                o.visible ? 1.0 : 0.0, image_size));
  return out;
}

// Evaluation input; records with conf 0 are skipped.
inline FrameBoxes to_frame_boxes(const std::vector<MotLine>& lines, std::size_t image_size) {
  FrameBoxes out;
  for (const auto& l : lines) {
    if (l.conf == 0) continue;
    out[static_cast<std::size_t>(l.frame)].push_back({l.id, from_mot_line(l, image_size)});
  }
  return out;
}

inline FrameBoxes to_frame_boxes(const std::vector<TrackOutput>& tracks) {
  FrameBoxes out;
  for (const auto& t : tracks) out[t.frame].push_back({t.track_id, t.box});
  return out;
}

inline FrameBoxes gt_frame_boxes(const Clip& seq) {
  FrameBoxes out;
  for (std::size_t f = 0; f < seq.size(); ++f)
    for (const auto& o : seq.frames[f].objects)
      if (o.visible) out[f + 1].push_back({o.identity, o.box});
  return out;
}

}  // namespace motr

#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ggen/common.hpp"
#include "ggen/rotation.hpp"

namespace ggen {

enum class Channel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

inline const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Xposition: return "Xposition";
    case Channel::Yposition: return "Yposition";
    case Channel::Zposition: return "Zposition";
    case Channel::Xrotation: return "Xrotation";
    case Channel::Yrotation: return "Yrotation";
    default: return "Zrotation";
  }
}

inline bool is_rotation(Channel c) {
  return c == Channel::Xrotation || c == Channel::Yrotation || c == Channel::Zrotation;
}

inline int rotation_axis(Channel c) {
  if (c == Channel::Xrotation) return 0;
  if (c == Channel::Yrotation) return 1;
  return 2;
}

struct Joint {
  std::string name;
  int parent = -1;  // index into Skeleton::joints, -1 for the root
  Vec3 offset = Vec3::Zero();
  std::vector<Channel> channels;  // file order
  bool has_end_site = false;
  Vec3 end_site = Vec3::Zero();
};

struct Skeleton {
  std::vector<Joint> joints;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (joints[i].name == name) return static_cast<int>(i);
    return -1;
  }

  int channel_count() const {
    int n = 0;
    for (const auto& j : joints) n += static_cast<int>(j.channels.size());
    return n;
  }

  // First channel column of each joint.
  std::vector<int> channel_offsets() const {
    std::vector<int> off(joints.size());
    int n = 0;
    for (std::size_t i = 0; i < joints.size(); ++i) {
      off[i] = n;
      n += static_cast<int>(joints[i].channels.size());
    }
    return off;
  }
};

struct MotionClip {
  Skeleton skeleton;
  double frame_time = 1.0 / 30.0;
  Mat frames;  // F x channel_count, rotations in degrees

  int frame_count() const { return static_cast<int>(frames.rows()); }
  double fps() const { return 1.0 / frame_time; }
};

namespace detail {

struct TokenStream {
  std::istringstream in;
  explicit TokenStream(std::string text) : in(std::move(text)) {}

  std::string next(const char* what) {
    std::string tok;
    if (!(in >> tok)) throw input_error(std::string("bvh: unexpected end of file, expected ") + what);
    return tok;
  }

  void expect(const char* literal) {
    const std::string tok = next(literal);
    if (tok != literal)
      throw input_error(std::string("bvh: expected '") + literal + "', got '" + tok + "'");
  }

  double number(const char* what) {
    const std::string tok = next(what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size())
      throw input_error(std::string("bvh: expected a number for ") + what + ", got '" + tok + "'");
    return v;
  }
};

inline Channel parse_channel(const std::string& s) {
  if (s == "Xposition") return Channel::Xposition;
  if (s == "Yposition") return Channel::Yposition;
  if (s == "Zposition") return Channel::Zposition;
  if (s == "Xrotation") return Channel::Xrotation;
  if (s == "Yrotation") return Channel::Yrotation;
  if (s == "Zrotation") return Channel::Zrotation;
  throw input_error("bvh: unknown channel '" + s + "'");
}

// OFFSET + CHANNELS + children for one joint; recurses into nested JOINTs.
inline void parse_joint_body(TokenStream& ts, Skeleton& skel, int index) {
  ts.expect("{");
  ts.expect("OFFSET");
  for (int k = 0; k < 3; ++k) skel.joints[index].offset[k] = ts.number("OFFSET");
  ts.expect("CHANNELS");
  const int n = static_cast<int>(ts.number("channel count"));
  if (n != 3 && n != 6)
    throw input_error("bvh: joint '" + skel.joints[index].name + "' declares " +
                      std::to_string(n) + " channels, expected 3 or 6");
  for (int k = 0; k < n; ++k)
    skel.joints[index].channels.push_back(parse_channel(ts.next("channel name")));

  for (;;) {
    const std::string tok = ts.next("JOINT, End Site or }");
    if (tok == "}") return;
    if (tok == "JOINT") {
      Joint child;
      child.name = ts.next("joint name");
      child.parent = index;
      skel.joints.push_back(child);
      parse_joint_body(ts, skel, static_cast<int>(skel.joints.size()) - 1);
    } else if (tok == "End") {
      ts.expect("Site");
      ts.expect("{");
      ts.expect("OFFSET");
      for (int k = 0; k < 3; ++k) skel.joints[index].end_site[k] = ts.number("End Site OFFSET");
      skel.joints[index].has_end_site = true;
      ts.expect("}");
    } else {
      throw input_error("bvh: expected JOINT, End Site or '}', got '" + tok + "'");
    }
  }
}

}  // namespace detail

inline MotionClip parse_bvh(std::istream& input) {
  std::ostringstream slurp;
  slurp << input.rdbuf();
  std::string text = slurp.str();
  // Tolerate CRLF files.
  std::string clean;
  clean.reserve(text.size());
  for (char ch : text)
    if (ch != '\r') clean.push_back(ch);

  detail::TokenStream ts(clean);
  ts.expect("HIERARCHY");
  ts.expect("ROOT");

  MotionClip clip;
  Joint root;
  root.name = ts.next("root name");
  clip.skeleton.joints.push_back(root);
  detail::parse_joint_body(ts, clip.skeleton, 0);

  ts.expect("MOTION");
  ts.expect("Frames:");
  const int frame_count = static_cast<int>(ts.number("frame count"));
  if (frame_count < 0) throw input_error("bvh: negative frame count");
  ts.expect("Frame");
  ts.expect("Time:");
  clip.frame_time = ts.number("frame time");
  if (!(clip.frame_time > 0)) throw input_error("bvh: frame time must be positive");

  const int columns = clip.skeleton.channel_count();
  clip.frames.resize(frame_count, columns);

  // Motion rows are line-oriented; a row with the wrong number of values is
  // rejected rather than silently re-flowed.
  std::string line;
  std::getline(ts.in, line);  // rest of the "Frame Time:" line
  int row = 0;
  while (std::getline(ts.in, line)) {
    const char* p = line.c_str();
    int col = 0;
    for (;;) {
      while (*p && std::isspace(static_cast<unsigned char>(*p))) ++p;
      if (!*p) break;
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p)
        throw input_error("bvh: non-numeric motion data in frame " + std::to_string(row));
      if (row >= frame_count)
        throw input_error("bvh: more motion rows than the declared frame count");
      if (col >= columns)
        throw input_error("bvh: column mismatch in frame " + std::to_string(row) + ": got more than " +
                          std::to_string(columns) + " values");
      clip.frames(row, col++) = v;
      p = end;
    }
    if (col == 0) continue;  // blank line
    if (col != columns)
      throw input_error("bvh: column mismatch in frame " + std::to_string(row) + ": got " +
                        std::to_string(col) + " values, expected " + std::to_string(columns));
    ++row;
  }
  if (row != frame_count)
    throw input_error("bvh: declared " + std::to_string(frame_count) + " frames but found " +
                      std::to_string(row));
  return clip;
}

inline MotionClip load_bvh(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open bvh file: " + path);
  try {
    return parse_bvh(f);
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

namespace detail {

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void write_joint(std::ostream& out, const Skeleton& skel,
                        const std::vector<std::vector<int>>& children, int index, int depth) {
  const Joint& j = skel.joints[index];
  const std::string pad(static_cast<std::size_t>(depth), '\t');
  out << pad << (j.parent < 0 ? "ROOT " : "JOINT ") << j.name << "\n" << pad << "{\n";
  out << pad << "\tOFFSET " << format_value(j.offset[0]) << " " << format_value(j.offset[1])
      << " " << format_value(j.offset[2]) << "\n";
  out << pad << "\tCHANNELS " << j.channels.size();
  for (Channel c : j.channels) out << " " << channel_name(c);
  out << "\n";
  for (int child : children[static_cast<std::size_t>(index)])
    write_joint(out, skel, children, child, depth + 1);
  if (j.has_end_site) {
    out << pad << "\tEnd Site\n" << pad << "\t{\n";
    out << pad << "\t\tOFFSET " << format_value(j.end_site[0]) << " "
        << format_value(j.end_site[1]) << " " << format_value(j.end_site[2]) << "\n";
    out << pad << "\t}\n";
  }
  out << pad << "}\n";
}

}  // namespace detail

inline void write_bvh(std::ostream& out, const MotionClip& clip) {
  const auto& joints = clip.skeleton.joints;
  if (joints.empty()) throw input_error("write_bvh: empty skeleton");
  std::vector<std::vector<int>> children(joints.size());
  for (std::size_t i = 1; i < joints.size(); ++i)
    children[static_cast<std::size_t>(joints[i].parent)].push_back(static_cast<int>(i));

  out << "HIERARCHY\n";
  detail::write_joint(out, clip.skeleton, children, 0, 0);
  out << "MOTION\n";
  out << "Frames: " << clip.frames.rows() << "\n";
  char ft[64];
  std::snprintf(ft, sizeof(ft), "%g", clip.frame_time);
  out << "Frame Time: " << ft << "\n";
  for (Eigen::Index r = 0; r < clip.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < clip.frames.cols(); ++c) {
      if (c) out << " ";
      out << detail::format_value(clip.frames(r, c));
    }
    out << "\n";
  }
}

inline void save_bvh(const std::string& path, const MotionClip& clip) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write bvh file: " + path);
  write_bvh(f, clip);
}

// Local translation of one joint for one frame: offset plus any position
// channels. Rotations compose about the channel axes in file order.
inline Vec3 local_translation(const Joint& j, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                              int channel_offset) {
  Vec3 t = j.offset;
  for (std::size_t k = 0; k < j.channels.size(); ++k) {
    const Channel c = j.channels[k];
    const double v = row[channel_offset + static_cast<int>(k)];
    if (c == Channel::Xposition) t[0] += v;
    else if (c == Channel::Yposition) t[1] += v;
    else if (c == Channel::Zposition) t[2] += v;
  }
  return t;
}

inline Quaternion local_rotation(const Joint& j, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                 int channel_offset) {
  Quaternion q;
  for (std::size_t k = 0; k < j.channels.size(); ++k) {
    const Channel c = j.channels[k];
    if (!is_rotation(c)) continue;
    const double rad = row[channel_offset + static_cast<int>(k)] * kPi / 180.0;
    q = q * quaternion_about(rotation_axis(c), rad);
  }
  return q;
}

inline Mat3 local_rotation_matrix(const Joint& j, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                                  int channel_offset) {
  Mat3 r = Mat3::Identity();
  for (std::size_t k = 0; k < j.channels.size(); ++k) {
    const Channel c = j.channels[k];
    if (!is_rotation(c)) continue;
    const double rad = row[channel_offset + static_cast<int>(k)] * kPi / 180.0;
    r = r * detail::axis_rotation(rotation_axis(c), rad);
  }
  return r;
}

struct Pose {
  std::vector<Vec3> positions;        // global, one per joint
  std::vector<Quaternion> rotations;  // global, one per joint
};

inline Pose forward_kinematics(const Skeleton& skel,
                               const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const auto offsets = skel.channel_offsets();
  Pose pose;
  pose.positions.resize(skel.joints.size());
  pose.rotations.resize(skel.joints.size());
  for (std::size_t i = 0; i < skel.joints.size(); ++i) {
    const Joint& j = skel.joints[i];
    const Vec3 t = local_translation(j, row, offsets[i]);
    const Quaternion q = local_rotation(j, row, offsets[i]);
    if (j.parent < 0) {
      pose.positions[i] = t;
      pose.rotations[i] = q;
    } else {
      const auto p = static_cast<std::size_t>(j.parent);
      pose.positions[i] = pose.positions[p] + pose.rotations[p].rotate(t);
      pose.rotations[i] = pose.rotations[p] * q;
    }
  }
  return pose;
}

struct PoseMatrices {
  std::vector<Vec3> positions;
  std::vector<Mat3> rotations;
};

// Matrix-algebra twin of forward_kinematics, kept as an independent route
// for validating the quaternion path.
inline PoseMatrices forward_kinematics_matrix(const Skeleton& skel,
                                              const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const auto offsets = skel.channel_offsets();
  PoseMatrices pose;
  pose.positions.resize(skel.joints.size());
  pose.rotations.resize(skel.joints.size());
  for (std::size_t i = 0; i < skel.joints.size(); ++i) {
    const Joint& j = skel.joints[i];
    const Vec3 t = local_translation(j, row, offsets[i]);
    const Mat3 r = local_rotation_matrix(j, row, offsets[i]);
    if (j.parent < 0) {
      pose.positions[i] = t;
      pose.rotations[i] = r;
    } else {
      const auto p = static_cast<std::size_t>(j.parent);
      pose.positions[i] = pose.positions[p] + pose.rotations[p] * t;
      pose.rotations[i] = pose.rotations[p] * r;
    }
  }
  return pose;
}

}  // namespace ggen

#pragma once

#include <string>
#include <vector>

#include "ggen/bvh.hpp"
#include "ggen/common.hpp"
#include "ggen/rotation.hpp"

namespace ggen {

// Per-frame gesture vector, laid out as
//   [ root position (3) | root quaternion (4) | root linear velocity (3)
//   | root angular velocity (3) | joint positions (3n) | joint 6D rotations (6n)
//   | joint linear velocities (3n) | joint angular velocities (3n) | gaze (3) ]
// Joint blocks run over every joint including the root; positions are world
// space, rotations are local. n = 75 gives the standard width 1141.
struct FeatureLayout {
  int joint_count = 75;

  int width() const { return 13 + 15 * joint_count + 3; }

  int root_position() const { return 0; }
  int root_quaternion() const { return 3; }
  int root_linear_velocity() const { return 7; }
  int root_angular_velocity() const { return 10; }
  int joint_positions() const { return 13; }
  int joint_rotations() const { return 13 + 3 * joint_count; }
  int joint_linear_velocities() const { return 13 + 9 * joint_count; }
  int joint_angular_velocities() const { return 13 + 12 * joint_count; }
  int gaze() const { return 13 + 15 * joint_count; }
};

namespace detail {

// Index of the joint whose world +Z serves as the gaze direction.
inline int gaze_joint(const Skeleton& skel, const std::string& name) {
  const int idx = skel.index_of(name);
  return idx >= 0 ? idx : 0;
}

}  // namespace detail

// Extracts the gesture feature matrix (frames x width). Velocities are
// forward differences scaled by the clip frame rate; the last frame repeats
// the previous difference. Quaternions are kept on one hemisphere across
// frames so velocity blocks stay continuous.
inline Mat build_features(const MotionClip& clip, int expected_joint_count = 75,
                          const std::string& gaze_joint_name = "Head") {
  const Skeleton& skel = clip.skeleton;
  const int n = static_cast<int>(skel.joints.size());
  if (expected_joint_count > 0 && n != expected_joint_count)
    throw input_error("build_features: clip has " + std::to_string(n) + " joints, expected " +
                      std::to_string(expected_joint_count));
  const int frames = clip.frame_count();
  if (frames < 2) throw input_error("build_features: need at least 2 frames for velocities");

  const FeatureLayout layout{n};
  const double fps = clip.fps();
  const int gaze_idx = detail::gaze_joint(skel, gaze_joint_name);
  const auto offsets = skel.channel_offsets();

  Mat g(frames, layout.width());
  // Rotation vectors per joint per frame, for the angular velocity blocks.
  Mat rotvec(frames, 3 * n);
  std::vector<Quaternion> prev(static_cast<std::size_t>(n));

  for (int m = 0; m < frames; ++m) {
    const auto row = clip.frames.row(m);
    const Pose pose = forward_kinematics(skel, row);
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      Quaternion lq = local_rotation(skel.joints[ju], row, offsets[ju]);
      if (m > 0 && lq.dot(prev[ju]) < 0) lq = lq.negated();
      prev[ju] = lq;

      g.block<1, 3>(m, layout.joint_positions() + 3 * j) = pose.positions[ju].transpose();
      g.block<1, 6>(m, layout.joint_rotations() + 6 * j) =
          matrix_to_sixd(quaternion_to_matrix(lq)).transpose();
      rotvec.block<1, 3>(m, 3 * j) = quaternion_to_rotation_vector(lq).transpose();

      if (j == 0) {
        g.block<1, 3>(m, layout.root_position()) = pose.positions[0].transpose();
        g(m, layout.root_quaternion() + 0) = lq.w;
        g(m, layout.root_quaternion() + 1) = lq.x;
        g(m, layout.root_quaternion() + 2) = lq.y;
        g(m, layout.root_quaternion() + 3) = lq.z;
      }
    }
    Vec3 gaze = pose.rotations[static_cast<std::size_t>(gaze_idx)].rotate(Vec3(0, 0, 1));
    const double gn = gaze.norm();
    if (gn > 1e-12) gaze /= gn;
    g.block<1, 3>(m, layout.gaze()) = gaze.transpose();
  }

  // v[m] = (x[m+1] - x[m]) * fps, final row copies the previous one.
  auto fill_velocity = [&](int src, int dst, int width) {
    for (int m = 0; m + 1 < frames; ++m)
      g.block(m, dst, 1, width) =
          (g.block(m + 1, src, 1, width) - g.block(m, src, 1, width)) * fps;
    g.block(frames - 1, dst, 1, width) = g.block(frames - 2, dst, 1, width);
  };
  fill_velocity(layout.root_position(), layout.root_linear_velocity(), 3);
  fill_velocity(layout.joint_positions(), layout.joint_linear_velocities(), 3 * n);
  for (int m = 0; m + 1 < frames; ++m)
    g.block(m, layout.joint_angular_velocities(), 1, 3 * n) =
        (rotvec.row(m + 1) - rotvec.row(m)) * fps;
  g.block(frames - 1, layout.joint_angular_velocities(), 1, 3 * n) =
      g.block(frames - 2, layout.joint_angular_velocities(), 1, 3 * n);
  g.block(0, layout.root_angular_velocity(), frames, 3) =
      g.block(0, layout.joint_angular_velocities(), frames, 3);
  return g;
}

namespace detail {

// Euler order implied by a joint's rotation channels in file order.
inline EulerOrder rotation_order_of(const Joint& j) {
  std::vector<int> axes;
  for (Channel c : j.channels)
    if (is_rotation(c)) axes.push_back(rotation_axis(c));
  if (axes.size() != 3)
    throw input_error("joint '" + j.name + "' does not have three rotation channels");
  if (axes == std::vector<int>{2, 1, 0}) return EulerOrder::Zyx;
  if (axes == std::vector<int>{0, 1, 2}) return EulerOrder::Xyz;
  if (axes == std::vector<int>{2, 0, 1}) return EulerOrder::Zxy;
  if (axes == std::vector<int>{1, 0, 2}) return EulerOrder::Yxz;
  if (axes == std::vector<int>{1, 2, 0}) return EulerOrder::Yzx;
  if (axes == std::vector<int>{0, 2, 1}) return EulerOrder::Xzy;
  throw input_error("joint '" + j.name + "' uses a repeated-axis rotation order");
}

}  // namespace detail

// Rebuilds channel data from feature rows: root translation and quaternion
// from the root blocks, every other joint from its 6D block. Non-root
// position channels, if any, are left at the rest offset. Velocity and gaze
// blocks are not consulted.
inline MotionClip features_to_motion(const Mat& features, const Skeleton& skeleton, double fps) {
  const int n = static_cast<int>(skeleton.joints.size());
  const FeatureLayout layout{n};
  if (features.cols() != layout.width())
    throw input_error("features_to_motion: feature width " + std::to_string(features.cols()) +
                      " does not match skeleton width " + std::to_string(layout.width()));
  if (!(fps > 0)) throw input_error("features_to_motion: fps must be positive");

  MotionClip clip;
  clip.skeleton = skeleton;
  clip.frame_time = 1.0 / fps;
  const int frames = static_cast<int>(features.rows());
  clip.frames = Mat::Zero(frames, skeleton.channel_count());
  const auto offsets = skeleton.channel_offsets();

  for (int m = 0; m < frames; ++m) {
    for (int j = 0; j < n; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const Joint& joint = skeleton.joints[ju];
      Mat3 r;
      if (j == 0) {
        Quaternion q(features(m, layout.root_quaternion() + 0),
                     features(m, layout.root_quaternion() + 1),
                     features(m, layout.root_quaternion() + 2),
                     features(m, layout.root_quaternion() + 3));
        r = quaternion_to_matrix(q);
      } else {
        r = sixd_to_matrix(features.block<1, 6>(m, layout.joint_rotations() + 6 * j).transpose());
      }
      const Vec3 euler = euler_from_matrix(r, detail::rotation_order_of(joint));
      int rot_slot = 0;
      for (std::size_t k = 0; k < joint.channels.size(); ++k) {
        const Channel c = joint.channels[k];
        const int col = offsets[ju] + static_cast<int>(k);
        if (is_rotation(c)) {
          clip.frames(m, col) = euler[rot_slot++] * 180.0 / kPi;
        } else if (j == 0) {
          const Vec3 p =
              features.block<1, 3>(m, layout.root_position()).transpose() - joint.offset;
          if (c == Channel::Xposition) clip.frames(m, col) = p[0];
          else if (c == Channel::Yposition) clip.frames(m, col) = p[1];
          else clip.frames(m, col) = p[2];
        }
      }
    }
  }
  return clip;
}

// Per-dimension mean and standard deviation over a set of frames.
struct Normalizer {
  Vec mean, std;

  static Normalizer fit(const Mat& rows) {
    if (rows.rows() < 2) throw input_error("normalizer: need at least 2 frames");
    Normalizer nz;
    nz.mean = rows.colwise().mean();
    Vec var = (rows.rowwise() - nz.mean.transpose()).array().square().colwise().mean();
    nz.std = var.array().sqrt();
    // Constant dimensions pass through unscaled.
    for (Eigen::Index i = 0; i < nz.std.size(); ++i)
      if (nz.std[i] < 1e-8) nz.std[i] = 1.0;
    return nz;
  }

  Mat normalize(const Mat& rows) const {
    check(rows);
    return (rows.rowwise() - mean.transpose()).array().rowwise() /
           std.transpose().array();
  }

  Mat denormalize(const Mat& rows) const {
    check(rows);
    return (rows.array().rowwise() * std.transpose().array()).matrix().rowwise() +
           mean.transpose();
  }

 private:
  void check(const Mat& rows) const {
    if (rows.cols() != mean.size())
      throw input_error("normalizer: width " + std::to_string(rows.cols()) +
                        " does not match fitted width " + std::to_string(mean.size()));
  }
};

// Euler-angle view of the rotation blocks (frames x 3n, radians), the
// reduced representation used by evaluation.
inline Mat feature_rotations_euler(const Mat& features, int joint_count) {
  const FeatureLayout layout{joint_count};
  if (features.cols() != layout.width())
    throw input_error("feature_rotations_euler: width mismatch");
  Mat out(features.rows(), 3 * joint_count);
  for (Eigen::Index m = 0; m < features.rows(); ++m)
    for (int j = 0; j < joint_count; ++j) {
      const Mat3 r =
          sixd_to_matrix(features.block<1, 6>(m, layout.joint_rotations() + 6 * j).transpose());
      out.block<1, 3>(m, 3 * j) = euler_from_matrix(r, EulerOrder::Zyx).transpose();
    }
  return out;
}

}  // namespace ggen

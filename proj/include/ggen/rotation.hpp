#pragma once

#include <array>
#include <cmath>
#include <string>

#include "ggen/common.hpp"

namespace ggen {

// Axis order of an Euler triple, listed left to right as the matrices are
// multiplied: Zyx means R = R_Z(a) * R_Y(b) * R_X(c).
enum class EulerOrder { Zyx, Xyz, Zxy, Yxz, Yzx, Xzy };

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return r;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return r;
}

namespace detail {

inline Mat3 axis_rotation(int axis, double angle) {
  switch (axis) {
    case 0: return rot_x(angle);
    case 1: return rot_y(angle);
    default: return rot_z(angle);
  }
}

// Axis indices (x=0, y=1, z=2) in multiplication order.
inline std::array<int, 3> order_axes(EulerOrder order) {
  switch (order) {
    case EulerOrder::Zyx: return {2, 1, 0};
    case EulerOrder::Xyz: return {0, 1, 2};
    case EulerOrder::Zxy: return {2, 0, 1};
    case EulerOrder::Yxz: return {1, 0, 2};
    case EulerOrder::Yzx: return {1, 2, 0};
    default: return {0, 2, 1};  // Xzy
  }
}

}  // namespace detail

// R = R_axis1(a1) * R_axis2(a2) * R_axis3(a3), angles in radians.
inline Mat3 matrix_from_euler(const Vec3& angles, EulerOrder order) {
  const auto ax = detail::order_axes(order);
  return detail::axis_rotation(ax[0], angles[0]) *
         detail::axis_rotation(ax[1], angles[1]) *
         detail::axis_rotation(ax[2], angles[2]);
}

// R = R_Z(alpha) * R_Y(beta) * R_X(gamma).
inline Mat3 euler_zyx_to_matrix(double alpha, double beta, double gamma) {
  return matrix_from_euler(Vec3(alpha, beta, gamma), EulerOrder::Zyx);
}

// Recovers (a1, a2, a3) with the middle angle in [-pi/2, pi/2]. Near gimbal
// lock the third angle is pinned to zero and the remaining freedom goes to
// the first.
inline Vec3 euler_from_matrix(const Mat3& r, EulerOrder order) {
  const double kLock = 1.0 - 1e-12;
  auto asin_clamped = [](double v) {
    return std::asin(std::min(1.0, std::max(-1.0, v)));
  };
  double a = 0, b = 0, c = 0;
  switch (order) {
    case EulerOrder::Zyx:
      b = asin_clamped(-r(2, 0));
      if (std::abs(r(2, 0)) < kLock) {
        a = std::atan2(r(1, 0), r(0, 0));
        c = std::atan2(r(2, 1), r(2, 2));
      } else {
        a = std::atan2(-r(0, 1), r(1, 1));
      }
      break;
    case EulerOrder::Xyz:
      b = asin_clamped(r(0, 2));
      if (std::abs(r(0, 2)) < kLock) {
        a = std::atan2(-r(1, 2), r(2, 2));
        c = std::atan2(-r(0, 1), r(0, 0));
      } else {
        a = std::atan2(r(1, 0), r(1, 1));
      }
      break;
    case EulerOrder::Zxy:
      b = asin_clamped(r(2, 1));
      if (std::abs(r(2, 1)) < kLock) {
        a = std::atan2(-r(0, 1), r(1, 1));
        c = std::atan2(-r(2, 0), r(2, 2));
      } else {
        a = std::atan2(r(0, 2), r(0, 0));
      }
      break;
    case EulerOrder::Yxz:
      b = asin_clamped(-r(1, 2));
      if (std::abs(r(1, 2)) < kLock) {
        a = std::atan2(r(0, 2), r(2, 2));
        c = std::atan2(r(1, 0), r(1, 1));
      } else {
        a = std::atan2(-r(2, 0), r(0, 0));
      }
      break;
    case EulerOrder::Yzx:
      b = asin_clamped(r(1, 0));
      if (std::abs(r(1, 0)) < kLock) {
        a = std::atan2(-r(2, 0), r(0, 0));
        c = std::atan2(-r(1, 2), r(1, 1));
      } else {
        a = std::atan2(r(2, 1), r(2, 2));
      }
      break;
    case EulerOrder::Xzy:
      b = asin_clamped(-r(0, 1));
      if (std::abs(r(0, 1)) < kLock) {
        a = std::atan2(r(2, 1), r(1, 1));
        c = std::atan2(r(0, 2), r(0, 0));
      } else {
        a = std::atan2(-r(1, 2), r(2, 2));
      }
      break;
  }
  return Vec3(a, b, c);
}

struct Quaternion {
  double w = 1, x = 0, y = 0, z = 0;

  Quaternion() = default;
  Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion normalized() const {
    const double n = norm();
    if (n == 0.0) throw internal_error("cannot normalize a zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  // Hamilton product. q1 * q2 rotates by q2 first, matching R1 * R2.
  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  double dot(const Quaternion& o) const {
    return w * o.w + x * o.x + y * o.y + z * o.z;
  }

  Quaternion negated() const { return {-w, -x, -y, -z}; }

  Vec3 rotate(const Vec3& v) const {
    // q v q*, expanded to avoid building the 3x3 matrix.
    const Vec3 u(x, y, z);
    const Vec3 t = 2.0 * u.cross(v);
    return v + w * t + u.cross(t);
  }
};

// From a ZYX Euler triple (angles about Z, Y, X applied in that order).
inline Quaternion euler_to_quaternion(double alpha, double beta, double gamma) {
  const double ca = std::cos(alpha / 2), sa = std::sin(alpha / 2);
  const double cb = std::cos(beta / 2), sb = std::sin(beta / 2);
  const double cg = std::cos(gamma / 2), sg = std::sin(gamma / 2);
  return {ca * cb * cg + sa * sb * sg,
          ca * cb * sg - sa * sb * cg,
          ca * sb * cg + sa * cb * sg,
          sa * cb * cg - ca * sb * sg};
}

inline Quaternion quaternion_about(int axis, double angle) {
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  Quaternion q(c, 0, 0, 0);
  if (axis == 0) q.x = s;
  else if (axis == 1) q.y = s;
  else q.z = s;
  return q;
}

// Quaternion for R_axis1(a1) * R_axis2(a2) * R_axis3(a3).
inline Quaternion quaternion_from_euler(const Vec3& angles, EulerOrder order) {
  const auto ax = detail::order_axes(order);
  return quaternion_about(ax[0], angles[0]) *
         quaternion_about(ax[1], angles[1]) *
         quaternion_about(ax[2], angles[2]);
}

// Input must be unit-norm to ~1e-6; it is renormalized before use.
inline Mat3 quaternion_to_matrix(const Quaternion& q_in) {
  const double n = q_in.norm();
  if (!(n > 1e-12)) throw input_error("quaternion_to_matrix: zero-norm input");
  const Quaternion q{q_in.w / n, q_in.x / n, q_in.y / n, q_in.z / n};
  const double ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  Mat3 r;
  r << ww + xx - yy - zz, 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y),
       2 * (q.x * q.y + q.w * q.z), ww - xx + yy - zz, 2 * (q.y * q.z - q.w * q.x),
       2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), ww - xx - yy + zz;
  return r;
}

inline Quaternion matrix_to_quaternion(const Mat3& r) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  const double tr = r(0, 0) + r(1, 1) + r(2, 2);
  Quaternion q;
  if (tr > 0) {
    double s = std::sqrt(tr + 1.0) * 2;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

// Rotation vector (axis * angle) of a unit quaternion; the log map.
inline Vec3 quaternion_to_rotation_vector(const Quaternion& q) {
  const Vec3 v(q.x, q.y, q.z);
  const double vn = v.norm();
  if (vn < 1e-12) return Vec3::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w);
  return v * (angle / vn);
}

// First two columns of the rotation matrix, stacked column-first into R^6.
inline Eigen::Matrix<double, 6, 1> matrix_to_sixd(const Mat3& r) {
  Eigen::Matrix<double, 6, 1> out;
  out << r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1);
  return out;
}

// Gram-Schmidt on the two stored columns; the third is their cross product.
inline Mat3 sixd_to_matrix(const Eigen::Matrix<double, 6, 1>& v) {
  Vec3 a = v.head<3>();
  Vec3 b = v.tail<3>();
  const double an = a.norm();
  if (an < 1e-12) throw input_error("sixd_to_matrix: degenerate first column");
  a /= an;
  b -= a.dot(b) * a;
  const double bn = b.norm();
  if (bn < 1e-12) throw input_error("sixd_to_matrix: columns are collinear");
  b /= bn;
  Mat3 r;
  r.col(0) = a;
  r.col(1) = b;
  r.col(2) = a.cross(b);
  return r;
}

}  // namespace ggen

#include "kinflow/rotation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace kinflow {

namespace {
std::atomic<long> g_warnings{0};
}

long rotation_warning_count() { return g_warnings.load(); }

Mat3 rot6d_to_matrix(const Vec6& r) {
  Vec3 a1 = r.head<3>();
  Vec3 a2 = r.tail<3>();
  const double n1 = a1.norm();
  if (n1 < 1e-8) throw std::invalid_argument("rot6d_to_matrix: degenerate first column");
  Vec3 c1 = a1 / n1;
  Vec3 u2 = a2 - c1.dot(a2) * c1;
  const double n2 = u2.norm();
  if (n2 < 1e-8) throw std::invalid_argument("rot6d_to_matrix: near-parallel columns");
  Vec3 c2 = u2 / n2;
  Mat3 m;
  m.col(0) = c1;
  m.col(1) = c2;
  m.col(2) = c1.cross(c2);
  return m;
}

Vec6 matrix_to_rot6d(const Mat3& m) {
  Vec6 r;
  r.head<3>() = m.col(0);
  r.tail<3>() = m.col(1);
  return r;
}

Mat3 rotation_about(const Vec3& unit_axis, double angle) {
  return rotation_about(unit_axis, TwistAngle{std::cos(angle), std::sin(angle)});
}

Mat3 rotation_about(const Vec3& unit_axis, const TwistAngle& t) {
  const Vec3& a = unit_axis;
  Mat3 k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return t.c * Mat3::Identity() + t.s * k + (1.0 - t.c) * (a * a.transpose());
}

Mat3 min_rotation_between(const Vec3& a, const Vec3& b) {
  const double c = a.dot(b);
  if (c < -1.0 + 1e-12)
    throw std::invalid_argument("min_rotation_between: antipodal directions");
  // Half-angle (quaternion) form, with 1 + c evaluated as |a+b|^2 / 2 so
  // no cancellation occurs near the antipode. The Rodrigues expression
  // k^2 / (1 + c) loses eps / (1 + c) there; this form only
  // eps / sqrt(1 + c).
  const double half_norm = (a + b).norm();  // = 2 cos(theta/2)
  double q0 = half_norm / 2.0;
  Vec3 qv = a.cross(b) / half_norm;
  const double qn = std::sqrt(q0 * q0 + qv.squaredNorm());
  q0 /= qn;
  qv /= qn;
  Mat3 k;
  k << 0, -qv.z(), qv.y(), qv.z(), 0, -qv.x(), -qv.y(), qv.x(), 0;
  return Mat3::Identity() + 2.0 * q0 * k + 2.0 * k * k;
}

TwistSwing twist_swing_decompose(const Mat3& R, const Vec3& axis) {
  const Vec3 v = R * axis;
  // The swing is undefined at the antipode and numerically explosive next
  // to it (error grows like eps / (1 + axis.v)); refuse the whole
  // ill-conditioned cap so the round-trip contract stays at 1e-12.
  if (axis.dot(v) < -1.0 + 1e-5)
    throw std::invalid_argument("twist_swing_decompose: rotated axis (near-)antipodal");
  TwistSwing out;
  out.swing = min_rotation_between(axis, v);
  const Mat3 T = out.swing.transpose() * R;  // rotation about axis
  out.twist.c = (T.trace() - 1.0) / 2.0;
  const Vec3 vee(T(2, 1) - T(1, 2), T(0, 2) - T(2, 0), T(1, 0) - T(0, 1));
  out.twist.s = axis.dot(vee) / 2.0;
  const double n = std::hypot(out.twist.c, out.twist.s);
  out.twist.c /= n;
  out.twist.s /= n;
  return out;
}

Mat3 twist_swing_compose(const Mat3& swing, const TwistAngle& twist, const Vec3& axis) {
  TwistAngle t = twist;
  const double n = std::hypot(t.c, t.s);
  if (std::abs(n - 1.0) > 1e-9) {
    ++g_warnings;
    if (n < 1e-12) throw std::invalid_argument("twist_swing_compose: zero twist vector");
  }
  t.c /= n;
  t.s /= n;
  return swing * rotation_about(axis, t);
}

double geodesic_deg(const Mat3& a, const Mat3& b) {
  const double tr = (a.transpose() * b).trace();
  double c = (tr - 1.0) / 2.0;
  if (c > 1.0 + 1e-9 || c < -1.0 - 1e-9) ++g_warnings;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

void orthonormal_basis(const Vec3& unit_axis, Vec3& e1, Vec3& e2) {
  const Vec3 ref = std::abs(unit_axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  e1 = unit_axis.cross(ref).normalized();
  e2 = unit_axis.cross(e1);
}

}  // namespace kinflow

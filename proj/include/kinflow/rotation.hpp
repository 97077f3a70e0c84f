#pragma once

#include <Eigen/Core>

namespace kinflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// (cos, sin) of a rotation angle about a known axis.
struct TwistAngle {
  double c = 1.0;
  double s = 0.0;
};

// 6D rotation representation: the first two columns of a rotation matrix,
// stacked [c1; c2]. Decoding runs Gram-Schmidt, so any pair of
// non-degenerate vectors maps to a proper rotation and the codec is
// scale-invariant in its inputs.
Mat3 rot6d_to_matrix(const Vec6& r);  // throws on degenerate input
Vec6 matrix_to_rot6d(const Mat3& m);

Mat3 rotation_about(const Vec3& unit_axis, double angle);
Mat3 rotation_about(const Vec3& unit_axis, const TwistAngle& t);

// Minimal rotation mapping unit vector a onto unit vector b (axis a x b).
// Throws when a and b are antipodal.
Mat3 min_rotation_between(const Vec3& a, const Vec3& b);

struct TwistSwing {
  Mat3 swing;        // minimal rotation taking axis to R*axis
  TwistAngle twist;  // rotation about axis; R = swing * twist
};

// R = swing ∘ twist about `axis` (unit). Throws when R*axis is antipodal
// to axis (swing undefined).
TwistSwing twist_swing_decompose(const Mat3& R, const Vec3& axis);

// Exact inverse of the decomposition. A non-unit (cos, sin) input is
// normalized before use and a warning is counted.
Mat3 twist_swing_compose(const Mat3& swing, const TwistAngle& twist, const Vec3& axis);

// Geodesic distance acos((tr(R1^T R2) - 1) / 2) in degrees. A trace outside
// [-1, 3] by more than 1e-9 is clamped with a warning.
double geodesic_deg(const Mat3& a, const Mat3& b);

// Deterministic orthonormal basis completion: returns (e1, e2) with
// (e1, e2, axis) right-handed.
void orthonormal_basis(const Vec3& unit_axis, Vec3& e1, Vec3& e2);

// Count of soft-recovered inputs (non-unit twists, clamped traces) since
// process start; used by tests.
long rotation_warning_count();

}  // namespace kinflow

#pragma once

#include <Eigen/Dense>

namespace relimu {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Hamilton, scalar-first quaternion kernel with right-multiplicative
/// (local) attitude error. All products compose rotation matrices as
/// C(a*b) = C(a)*C(b), and a unit quaternion rotates a vector as
/// C(q)*v = vec(q x (0,v) x q^-1).
namespace geom {

constexpr double kUnitNormTol = 1e-9;

// Scalar-first flattening (w, x, y, z). Eigen stores (x, y, z, w)
// internally, so all 4-vector interfaces go through these two helpers.
inline Vec4 to_vec4(const Quat& q) { return Vec4(q.w(), q.x(), q.y(), q.z()); }
inline Quat from_vec4(const Vec4& v) { return Quat(v(0), v(1), v(2), v(3)); }

Mat3 skew(const Vec3& v);

/// Hamilton product, renormalized.
Quat quat_multiply(const Quat& a, const Quat& b);

Mat3 quat_to_rot(const Quat& q);

/// Quaternion exponential of a full rotation vector (axis * angle).
/// Uses a Taylor fallback below 1e-8 rad so omega = 0 is exact.
Quat quat_exp(const Vec3& rotvec);

/// Zeroth-order integration: q x exp(omega * dt), unit norm on return.
Quat quat_integrate(const Quat& q, const Vec3& omega, double dt);

/// Right-multiplicative error injection: q_hat x normalize([1, dtheta/2]).
Quat quat_error_inject(const Quat& q_hat, const Vec3& dtheta);

/// Inverse of quat_error_inject: dtheta = 2 * vec(dq) / w(dq) with
/// dq = q_hat^-1 x q, sign-canonicalized to w >= 0.
Vec3 quat_error_extract(const Quat& q_hat, const Quat& q);

/// Left multiplication matrix: to_vec4(q x r) = quat_left(q) * to_vec4(r).
Mat4 quat_left(const Quat& q);

/// Right multiplication matrix: to_vec4(r x q) = quat_right(q) * to_vec4(r).
Mat4 quat_right(const Quat& q);

/// w >= 0 representative of {q, -q}.
Quat quat_canonical(const Quat& q);

inline Quat pure(const Vec3& v) { return Quat(0.0, v.x(), v.y(), v.z()); }

}  // namespace geom
}  // namespace relimu

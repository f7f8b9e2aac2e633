#include "relimu/geometry.hpp"

#include <cmath>

namespace relimu {
namespace geom {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  Quat q = a * b;
  q.normalize();
  return q;
}

Mat3 quat_to_rot(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 r;
  r << w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
       2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
       2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return r;
}

Quat quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  double w, k;
  if (angle < 1e-8) {
    // sin(a/2)/a and cos(a/2) expanded around zero
    const double a2 = angle * angle;
    w = 1.0 - a2 / 8.0;
    k = 0.5 - a2 / 48.0;
  } else {
    w = std::cos(0.5 * angle);
    k = std::sin(0.5 * angle) / angle;
  }
  Quat q(w, k * rotvec.x(), k * rotvec.y(), k * rotvec.z());
  q.normalize();
  return q;
}

Quat quat_integrate(const Quat& q, const Vec3& omega, double dt) {
  return quat_multiply(q, quat_exp(omega * dt));
}

Quat quat_error_inject(const Quat& q_hat, const Vec3& dtheta) {
  Quat dq(1.0, 0.5 * dtheta.x(), 0.5 * dtheta.y(), 0.5 * dtheta.z());
  dq.normalize();
  return quat_multiply(q_hat, dq);
}

Vec3 quat_error_extract(const Quat& q_hat, const Quat& q) {
  Quat dq = q_hat.conjugate() * q;
  if (dq.w() < 0.0) dq.coeffs() *= -1.0;
  return 2.0 * dq.vec() / dq.w();
}

Mat4 quat_left(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat4 m;
  m << w, -x, -y, -z,
       x, w, -z, y,
       y, z, w, -x,
       z, -y, x, w;
  return m;
}

Mat4 quat_right(const Quat& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat4 m;
  m << w, -x, -y, -z,
       x, w, z, -y,
       y, -z, w, x,
       z, y, -x, w;
  return m;
}

Quat quat_canonical(const Quat& q) {
  Quat out = q;
  if (out.w() < 0.0) out.coeffs() *= -1.0;
  return out;
}

}  // namespace geom
}  // namespace relimu

#include "relimu/state.hpp"

namespace relimu {

bool SystemState::is_finite() const {
  return p_rel.allFinite() && v_rel.allFinite() && q_rel.coeffs().allFinite() &&
         bg1.allFinite() && bg2.allFinite() && ba1.allFinite() && ba2.allFinite();
}

SystemState state_retract(const SystemState& x_hat, const ErrorVec& dx) {
  SystemState x = x_hat;
  x.p_rel += dx.segment<3>(idx::dp);
  x.v_rel += dx.segment<3>(idx::dv);
  x.q_rel = geom::quat_error_inject(x_hat.q_rel, dx.segment<3>(idx::dth));
  x.bg1 += dx.segment<3>(idx::dbg1);
  x.bg2 += dx.segment<3>(idx::dbg2);
  x.ba1 += dx.segment<3>(idx::dba1);
  x.ba2 += dx.segment<3>(idx::dba2);
  return x;
}

ErrorVec state_difference(const SystemState& x, const SystemState& x_hat) {
  ErrorVec dx;
  dx.segment<3>(idx::dp) = x.p_rel - x_hat.p_rel;
  dx.segment<3>(idx::dv) = x.v_rel - x_hat.v_rel;
  dx.segment<3>(idx::dth) = geom::quat_error_extract(x_hat.q_rel, x.q_rel);
  dx.segment<3>(idx::dbg1) = x.bg1 - x_hat.bg1;
  dx.segment<3>(idx::dbg2) = x.bg2 - x_hat.bg2;
  dx.segment<3>(idx::dba1) = x.ba1 - x_hat.ba1;
  dx.segment<3>(idx::dba2) = x.ba2 - x_hat.ba2;
  return dx;
}

void symmetrize(Mat21& p) {
  p = 0.5 * (p + p.transpose()).eval();
}

Mat21 default_initial_covariance() {
  Mat21 p = Mat21::Zero();
  p.block<3, 3>(idx::dp, idx::dp) = 1e-4 * Mat3::Identity();
  p.block<3, 3>(idx::dv, idx::dv) = 1e-4 * Mat3::Identity();
  p.block<3, 3>(idx::dth, idx::dth) = 1e-4 * Mat3::Identity();
  p.block<3, 3>(idx::dbg1, idx::dbg1) = 1e-4 * Mat3::Identity();
  p.block<3, 3>(idx::dbg2, idx::dbg2) = 1e-4 * Mat3::Identity();
  p.block<3, 3>(idx::dba1, idx::dba1) = 1e-2 * Mat3::Identity();
  p.block<3, 3>(idx::dba2, idx::dba2) = 1e-2 * Mat3::Identity();
  return p;
}

}  // namespace relimu

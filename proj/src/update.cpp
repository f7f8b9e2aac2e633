#include "relimu/update.hpp"

#include <limits>

#include "relimu/errors.hpp"

namespace relimu {

ResidualH residual_and_H_dp(const SystemState& x_hat, const RelPositionMeas& m) {
  ResidualH out;
  out.residual = m.dp - x_hat.p_rel;
  out.H.setZero();
  out.H.block<3, 3>(0, idx::dp) = Mat3::Identity();
  return out;
}

ResidualH residual_and_H_dq(const SystemState& x_hat, const RelOrientationMeas& m) {
  ResidualH out;
  const Quat e = geom::quat_canonical(m.dq * x_hat.q_rel.conjugate());
  out.residual = 2.0 * e.vec();
  out.H.setZero();
  out.H.block<3, 3>(0, idx::dth) = geom::quat_to_rot(x_hat.q_rel);
  return out;
}

UpdateResult ekf_update(const SystemState& x_hat, const Covariance& P,
                        const Eigen::VectorXd& residual,
                        const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                        double gate_threshold) {
  const Eigen::MatrixXd PHt = P * H.transpose();
  Eigen::MatrixXd S = H * PHt + R;
  S = 0.5 * (S + S.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double ev_min = es.eigenvalues().minCoeff();
  const double ev_max = es.eigenvalues().maxCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > 1e14) {
    const double cond = ev_min > 0.0 ? ev_max / ev_min
                                     : std::numeric_limits<double>::infinity();
    throw NumericalError("ekf_update: singular innovation covariance", cond);
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  const Eigen::VectorXd s_inv_r = llt.solve(residual);

  UpdateResult out;
  out.stats.nis = residual.dot(s_inv_r);
  if (gate_threshold > 0.0 && out.stats.nis > gate_threshold) {
    out.x = x_hat;
    out.P = P;
    out.stats.gated = true;
    return out;
  }

  const Eigen::MatrixXd K = llt.solve(PHt.transpose()).transpose();  // P H^T S^-1
  const ErrorVec dx = K * residual;
  out.x = state_retract(x_hat, dx);

  const Mat21 ikh = Mat21::Identity() - K * H;
  out.P = ikh * P * ikh.transpose() + K * R * K.transpose();
  symmetrize(out.P);
  return out;
}

}  // namespace relimu

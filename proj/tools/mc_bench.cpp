// Benchmark of the OpenMP Monte Carlo path against the serial reference,
// with a bit-exactness check between the two.

#include <chrono>
#include <cstdio>

#include "relimu/harness.hpp"

using namespace relimu;

namespace {

double run_timed(const MotionProfile& profile, const NoiseParams& noise, int runs,
                 const RunOptions& opt, ExecPolicy policy, RunMetrics* out) {
  const auto t0 = std::chrono::steady_clock::now();
  *out = run_monte_carlo(profile, noise, runs, 1234, opt, policy);
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

bool bit_identical(const RunMetrics& a, const RunMetrics& b) {
  if (a.rmse.rows() != b.rmse.rows()) return false;
  for (int k = 0; k < a.rmse.rows(); ++k) {
    for (int j = 0; j < a.rmse.cols(); ++j)
      if (a.rmse(k, j) != b.rmse(k, j) || a.sigma3(k, j) != b.sigma3(k, j)) return false;
    if (a.nees[k] != b.nees[k]) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int runs = 24;
  if (argc > 1) runs = std::atoi(argv[1]);

  ProfileParams params;
  params.duration = 10.0;
  const MotionProfile profile = make_profile(cell_from_string("I-S"), params, 7);
  NoiseParams noise;
  RunOptions opt;
  opt.mode = MeasMode::dpdq;

  RunMetrics serial, parallel;
  const double t_serial = run_timed(profile, noise, runs, opt, ExecPolicy::serial, &serial);
  const double t_openmp = run_timed(profile, noise, runs, opt, ExecPolicy::openmp, &parallel);

  std::printf("runs:            %d\n", runs);
  std::printf("serial:          %.3f s\n", t_serial);
  std::printf("openmp:          %.3f s\n", t_openmp);
  std::printf("speedup:         %.2fx\n", t_serial / t_openmp);
  std::printf("outputs match:   %s\n", bit_identical(serial, parallel) ? "yes" : "NO");
  return bit_identical(serial, parallel) ? 0 : 1;
}

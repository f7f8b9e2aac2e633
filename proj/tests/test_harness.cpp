#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "test_utils.hpp"

#include "relimu/errors.hpp"
#include "relimu/harness.hpp"

using namespace relimu;

namespace {

NoiseParams zero_noise_params() {
  NoiseParams n{};
  n.sigma_g1 = n.sigma_g2 = n.sigma_a1 = n.sigma_a2 = 0;
  n.sigma_wg1 = n.sigma_wg2 = n.sigma_wa1 = n.sigma_wa2 = 0;
  return n;
}

bool records_equal(const FilterRunRecord& a, const FilterRunRecord& b) {
  if (a.t.size() != b.t.size()) return false;
  for (size_t k = 0; k < a.t.size(); ++k) {
    if (a.t[k] != b.t[k]) return false;
    if ((a.error[k].array() != b.error[k].array()).any()) return false;
    if ((a.sigma3[k].array() != b.sigma3[k].array()).any()) return false;
    if (a.nees[k] != b.nees[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("same seed reproduces a run bit-exactly") {
  ProfileParams params;
  params.duration = 2.0;
  const MotionProfile p = make_profile(cell_from_string("I-S"), params, 2);
  RunOptions opt;
  opt.horizon = 2.0;
  const FilterRunRecord a = run_filter_once(p, NoiseParams{}, 99, opt);
  const FilterRunRecord b = run_filter_once(p, NoiseParams{}, 99, opt);
  CHECK(records_equal(a, b));
  const FilterRunRecord c = run_filter_once(p, NoiseParams{}, 100, opt);
  CHECK(!records_equal(a, c));
}

TEST_CASE("single-run consistency on the fully observable cell") {
  ProfileParams params;
  params.duration = 10.0;
  const MotionProfile p = make_profile(cell_from_string("I-S"), params, 21);
  RunOptions opt;
  const FilterRunRecord r = run_filter_once(p, NoiseParams{}, 5, opt);
  const size_t last = r.t.size() - 1;
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(r.error[last](idx::dp + j)) < r.sigma3[last](idx::dp + j));
}

TEST_CASE("monte carlo with N=1 reduces to the absolute single-run error") {
  ProfileParams params;
  params.duration = 1.0;
  const MotionProfile p = make_profile(cell_from_string("I-K"), params, 3);
  RunOptions opt;
  opt.horizon = 1.0;
  const RunMetrics m = run_monte_carlo(p, NoiseParams{}, 1, 77, opt);
  const FilterRunRecord r = run_filter_once(p, NoiseParams{}, seed_hash(77, 0), opt);
  for (size_t k = 0; k < r.t.size(); ++k)
    CHECK((m.rmse.row(k).transpose() - r.error[k].cwiseAbs()).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("serial and OpenMP executions produce identical metrics") {
  ProfileParams params;
  params.duration = 1.5;
  const MotionProfile p = make_profile(cell_from_string("V-K"), params, 4);
  RunOptions opt;
  opt.horizon = 1.5;
  const RunMetrics a =
      run_monte_carlo(p, NoiseParams{}, 8, 123, opt, ExecPolicy::serial);
  const RunMetrics b =
      run_monte_carlo(p, NoiseParams{}, 8, 123, opt, ExecPolicy::openmp);
  CHECK((a.rmse.array() == b.rmse.array()).all());
  CHECK((a.sigma3.array() == b.sigma3.array()).all());
  CHECK((a.proj_rmse.array() == b.proj_rmse.array()).all());
  for (size_t k = 0; k < a.nees.size(); ++k) CHECK(a.nees[k] == b.nees[k]);
}

TEST_CASE("composite projections of exact estimates vanish") {
  Rng rng(5);
  const SystemState x = relimu::test::random_state(rng);
  const ProjVec v = composite_bias_errors(x, x, x.q_rel, Quat::Identity());
  CHECK(v.norm() == 0.0);
}

TEST_CASE("rotated-pair bias error loads only the composite combination") {
  Rng rng(6);
  const Quat q0 = relimu::test::random_unit_quat(rng);
  const Mat3 c0 = geom::quat_to_rot(q0);
  SystemState truth;
  truth.q_rel = q0;
  SystemState est = truth;
  const Vec3 b1 = rng.gaussian_vec3();
  // target-side error chosen as the initial-attitude transport of the
  // reference-side error: the relative combination cancels at t0
  est.bg1 = -b1;
  est.bg2 = -(c0.transpose() * b1);
  const ProjVec v = composite_bias_errors(truth, est, q0, q0);
  CHECK(v.segment<3>(0).norm() < 1e-12);          // b_g-
  CHECK((v.segment<3>(6) - 2.0 * b1).norm() < 1e-12);  // b_g+ captures it fully
}

TEST_CASE("mean NEES stays in the chi-square band on observable scenarios") {
  const double lo = chi2_quantile(0.025, 21.0 * 25) / 25.0;
  const double hi = chi2_quantile(0.975, 21.0 * 25) / 25.0;
  for (const char* tag : {"I-S", "V-M"}) {
    for (MeasMode mode : {MeasMode::dpdq, MeasMode::dp}) {
      ProfileParams params;
      params.duration = 10.0;
      const MotionProfile prof = make_profile(cell_from_string(tag), params, 11);
      RunOptions opt;
      opt.mode = mode;
      const RunMetrics m = run_monte_carlo(prof, NoiseParams{}, 25, 4242, opt);
      const int n = static_cast<int>(m.t.size());
      double mean = 0;
      for (int k = n / 2; k < n; ++k) mean += m.nees[k];
      mean /= n - n / 2;
      INFO(tag, " ", mode_to_string(mode), " mean NEES ", mean);
      CHECK(mean >= lo);
      CHECK(mean <= hi);
    }
  }
}

TEST_CASE("relative gyro combination converges while composite wanders") {
  // displaced rigid target under straight-line reference motion
  ProfileParams params;
  params.duration = 10.0;
  const MotionProfile p = make_profile(cell_from_string("III-K"), params, 7);
  RunOptions opt;
  const RunMetrics m = run_monte_carlo(p, NoiseParams{}, 20, 2024, opt);
  const int last = static_cast<int>(m.t.size()) - 1;
  for (int j = 0; j < 3; ++j) {
    CHECK(m.proj_sigma3(last, j) < 0.3 * m.proj_sigma3(0, j));        // b_g-
    CHECK(m.proj_sigma3(last, 6 + j) > 0.8 * m.proj_sigma3(0, 6 + j));  // b_g+
  }
}

TEST_CASE("observability verdicts agree with the empirical envelope growth") {
  // the analysis' predicted-unobservable directions must keep their
  // Monte Carlo 3-sigma envelopes, the predicted-observable relative
  // combinations must lose theirs
  for (const char* tag : {"I-S", "V-M", "V-K", "III-K", "I-K"}) {
    ProfileParams params;
    params.duration = 10.0;
    const MotionProfile prof = make_profile(cell_from_string(tag), params, 11);

    const ObsReport rep = analyze_observability(prof, MeasMode::dpdq, ObsOptions{});
    REQUIRE(rep.pass);

    const CandidateDirections cand = candidate_directions(prof, MeasMode::dpdq);
    RunOptions opt;
    opt.mode = MeasMode::dpdq;
    for (const auto& d : cand.unobservable) opt.track_directions.push_back(d.n);
    for (const auto& d : cand.observable_contrast) opt.track_directions.push_back(d.n);

    const RunMetrics m = run_monte_carlo(prof, NoiseParams{}, 20, 777, opt);
    const int last = static_cast<int>(m.t.size()) - 1;
    for (size_t j = 0; j < opt.track_directions.size(); ++j) {
      const bool unobs = j < cand.unobservable.size();
      const double ratio = m.dir_sigma3(last, j) / m.dir_sigma3(0, j);
      INFO(tag, " direction ", j, " ratio ", ratio);
      if (unobs) {
        CHECK(ratio > 0.9);
      } else {
        CHECK(ratio < 0.3);
      }
    }
  }
}

TEST_CASE("run failures carry the failing seeds") {
  ProfileParams params;
  params.duration = 0.5;
  const MotionProfile p = make_profile(cell_from_string("I-K"), params, 8);
  RunOptions opt;
  opt.horizon = 0.5;
  NoiseParams insane;
  insane.sigma_g1 = 1e200;  // drives the state non-finite within a few steps
  insane.sigma_a1 = 1e200;
  bool threw = false;
  try {
    run_monte_carlo(p, insane, 3, 11, opt);
  } catch (const RunFailedError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("chi-square quantiles") {
  CHECK(chi2_quantile(0.95, 3.0) == doctest::Approx(7.81).epsilon(0.01));
  CHECK(chi2_quantile(0.975, 3.0) == doctest::Approx(9.35).epsilon(0.01));
  CHECK(chi2_quantile(0.5, 100.0) == doctest::Approx(99.33).epsilon(0.01));
  // the NEES band for 50 runs of a 21-dof filter
  const double lo = chi2_quantile(0.025, 21.0 * 50) / 50.0;
  const double hi = chi2_quantile(0.975, 21.0 * 50) / 50.0;
  CHECK(lo > 19.0);
  CHECK(lo < 21.0);
  CHECK(hi > 21.0);
  CHECK(hi < 23.0);
}

TEST_CASE("metric column names line up with the error ordering") {
  const auto& names = error_component_names();
  REQUIRE(names.size() == 21);
  CHECK(names[idx::dp] == "dp_x");
  CHECK(names[idx::dth + 2] == "dth_z");
  CHECK(names[idx::dba2 + 2] == "dba2_z");
  CHECK(projection_component_names().size() == kProjDim);
}

TEST_CASE("tracked directions record signed errors and envelopes") {
  ProfileParams params;
  params.duration = 1.0;
  const MotionProfile p = make_profile(cell_from_string("I-K"), params, 9);
  RunOptions opt;
  opt.horizon = 1.0;
  ErrorVec d = ErrorVec::Zero();
  d(idx::dp) = 1.0;
  opt.track_directions = {d};
  const FilterRunRecord r = run_filter_once(p, NoiseParams{}, 13, opt);
  REQUIRE(r.dir_error.size() == r.t.size());
  for (size_t k = 0; k < r.t.size(); ++k) {
    CHECK(r.dir_error[k](0) == r.error[k](idx::dp));
    CHECK(r.dir_sigma3[k](0) == doctest::Approx(r.sigma3[k](idx::dp)).epsilon(1e-12));
  }
}

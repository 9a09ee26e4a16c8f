// Transmon spectra, pair dressing, pulse propagation, open-system channels
// and the calibrated cross-resonance / ECR gates.

#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <gsl/gsl_sf_mathieu.h>

#include "qudit/transmon.hpp"

using namespace qd;
using namespace qd::tm;

namespace {

const PairModel& device() {
  static const PairModel m = build_device({});
  return m;
}

// One ECR calibration shared by the slow tests below.
const EcrCalibration& ecr_cal() {
  static const EcrCalibration c = calibrate_ecr(device(), EcrSettings{});
  return c;
}

// Exact spectrum at n_g = 0 and 1/2 from Mathieu characteristic values,
// q = EJ / (2 EC); levels are EC a + const.
std::array<std::vector<double>, 2> mathieu_levels(double EJ, double EC) {
  const double q = EJ / (2 * EC);
  std::vector<double> even = {gsl_sf_mathieu_a(0, q), gsl_sf_mathieu_b(2, q), gsl_sf_mathieu_a(2, q),
                              gsl_sf_mathieu_b(4, q), gsl_sf_mathieu_a(4, q)};
  std::vector<double> odd = {gsl_sf_mathieu_a(1, q), gsl_sf_mathieu_b(1, q), gsl_sf_mathieu_a(3, q),
                             gsl_sf_mathieu_b(3, q), gsl_sf_mathieu_a(5, q)};
  std::sort(even.begin(), even.end());
  std::sort(odd.begin(), odd.end());
  for (auto* v : {&even, &odd})
    for (double& x : *v) x *= EC;
  return {even, odd};
}

Mat density(const Vec& psi) { return psi * psi.adjoint(); }

}  // namespace

TEST(Spectrum, LargeRatioApproachesOscillatorLimit) {
  const double EC = 0.2, EJ = 1000 * EC;
  RVec e = charge_levels(EJ, EC);
  const double xi = std::sqrt(2 * EC / EJ);
  EXPECT_NEAR(e(1) - e(0), std::sqrt(8 * EJ * EC) - EC - EC * xi / 4, 1e-3 * EC);
  EXPECT_NEAR((e(2) - e(1)) - (e(1) - e(0)), -EC, 0.05 * EC);
}

TEST(Spectrum, FitReproducesFrequencyAndAnharmonicity) {
  for (auto [f, a] : {std::pair{6.3, -0.31}, std::pair{6.1, -0.30}, std::pair{5.0, -0.25}}) {
    auto p = make_transmon(ghz(f), ghz(a));
    RVec e = charge_levels(p.EJ, p.EC);
    EXPECT_NEAR(e(1) - e(0), ghz(f), 1e-9);
    EXPECT_NEAR(e(2) - 2 * e(1) + e(0), ghz(a), 1e-9);
    EXPECT_GT(p.EJ / p.EC, 50);
  }
  EXPECT_THROW(fit_ej_ec(1.0, 0.1), ValidationError);
}

TEST(Spectrum, DispersionMatchesMathieuSpectrum) {
  for (auto [f, a] : {std::pair{6.3, -0.31}, std::pair{6.1, -0.30}}) {
    auto p = make_transmon(ghz(f), ghz(a));
    auto d = charge_dispersion(p);
    ASSERT_EQ(d.domega.size(), 3u);
    EXPECT_LT(d.domega[0], d.domega[1]);
    EXPECT_LT(d.domega[1], d.domega[2]);
    EXPECT_LT(d.mode_convergence, khz(1e-3));
    auto [e0, e1] = mathieu_levels(p.EJ, p.EC);
    for (int n = 0; n < 3; ++n) {
      // Half the swing between the two offset-charge extremes.
      double want = std::abs((e0[n + 1] - e0[n]) - (e1[n + 1] - e1[n])) / 2;
      EXPECT_NEAR(d.domega[n] / want, 1.0, 1e-3) << "transition " << n;
    }
  }
}

TEST(Spectrum, DispersionIsSymmetricInOffsetCharge) {
  auto p = make_transmon(ghz(6.1), ghz(-0.30));
  RVec a = charge_levels(p.EJ, p.EC, 0.2), b = charge_levels(p.EJ, p.EC, 0.8), c = charge_levels(p.EJ, p.EC, 1.2);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((a - c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PairModel, ZeroCouplingGivesBareStates) {
  auto c = make_transmon(ghz(6.3), ghz(-0.31)), t = make_transmon(ghz(6.1), ghz(-0.30));
  PairModel m = build_pair_model(c, t, 0.0);
  EXPECT_NEAR(m.min_overlap, 1.0, 1e-12);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(m.E(4 * i + j), m.Ec(i) + m.Et(j), 1e-9);
  EXPECT_LT((m.S.cwiseAbs() - Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PairModel, DressedEnergiesAreEigenvalues) {
  const auto& m = device();
  Eigen::SelfAdjointEigenSolver<Mat> es(m.H0);
  std::vector<double> a(m.E.data(), m.E.data() + 16), b(es.eigenvalues().data(), es.eigenvalues().data() + 16);
  std::sort(a.begin(), a.end());
  EXPECT_LT((Eigen::Map<RVec>(a.data(), 16) - Eigen::Map<RVec>(b.data(), 16)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((m.H0 * m.S - m.S * m.E.cast<cplx>().asDiagonal()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PairModel, StaticZZMatchesDressedEnergies) {
  const auto& m = device();
  const double zeta = m.E(5) - m.E(4) - m.E(1) + m.E(0);
  EXPECT_NEAR(effective_rates(m, 0.0).at("ZZ"), zeta / 2, 1e-9);
  EXPECT_NEAR(effective_rates(m, 0.0).at("ZX"), 0.0, 1e-12);
}

TEST(PairModel, DrivenRatesHaveCrossResonanceSign) {
  auto r = effective_rates(device(), mhz(50));
  EXPECT_LT(r.at("ZX"), 0);
  EXPECT_GT(std::abs(r.at("ZX")), std::abs(r.at("ZY")));
}

TEST(Pulse, ZeroAmplitudeIsIdentityInInteractionPicture) {
  const auto& m = device();
  CrSettings cs;
  auto sys = cr_system(m, cs);
  Envelope env{36, 50, 9};
  Mat U = to_interaction(pulse_propagator(sys, 0.0, env), sys.K, 0, env.duration());
  EXPECT_LT((U - Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pulse, PlateauPropagatorMatchesMatrixExponential) {
  const auto& m = device();
  auto sys = cr_system(m, CrSettings{});
  HermitianPropagator hp(sys.H(mhz(30)));
  Mat want = Mat(-kI * sys.H(mhz(30)) * 73.0).exp();
  EXPECT_LT((hp.at(73.0) - want).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pulse, SamplesAgreeWithFullPropagator) {
  auto p = make_transmon(ghz(6.3), ghz(-0.31));
  auto sys = local_system(transmon_energies(p), ladder_matrix(p.epsilon), 0, 0.3, 0.0);
  Envelope env{20, 30, 5};
  auto S = pulse_samples(sys, mhz(20), env, {0, 10, 35, env.duration()});
  EXPECT_LT((S.back() - pulse_propagator(sys, mhz(20), env)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((S.front() - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  for (const auto& U : S) EXPECT_LT(unitarity_error(U), 1e-9);
}

TEST(Pulse, CalibratedPiPulseRotatesLevels) {
  auto p = make_transmon(ghz(6.3), ghz(-0.31));
  for (int n = 0; n < 3; ++n) {
    LocalPulseSpec s;
    s.level = n;
    auto lp = calibrate_local_pulse(transmon_energies(p), ladder_matrix(p.epsilon), s);
    EXPECT_GT(std::norm(lp.U(n + 1, n)), 0.999) << "level " << n;
  }
}

TEST(Phases, PlantedLocalPhasesAreRecovered) {
  LocalPhases planted;
  planted.control = {0, 0.4, -1.1, 2.0};
  planted.target = {0.3, -0.7, 1.5, 0.2};
  Mat Ut = cr_target({0.7, 2.4, 0.9, 0.8});
  Mat Us = planted.P().adjoint() * Ut;
  auto got = optimize_local_phases(Us, Ut);
  EXPECT_NEAR(got.fidelity, 1.0, 1e-12);
  EXPECT_LT((got.P() - planted.P()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Phases, BlockAnglesReadBackTarget) {
  std::array<double, 4> phi{0.7, 2.4, 0.9, 0.8};
  auto a = block_angles(cr_target(phi));
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(a[k], phi[k], 1e-12);
}

TEST(Noise, DephasingDecaysCoherenceAtT2) {
  const double T2 = 1000, t = 370;
  Mat S = idle_channel(transmon_jumps({INFINITY, T2}), 4, t);
  Vec psi = Vec::Zero(4);
  psi(0) = psi(1) = 1 / std::sqrt(2.0);
  Mat rho = unvec(S * vec(density(psi)), 4);
  EXPECT_NEAR(std::abs(rho(0, 1)), 0.5 * std::exp(-t / T2), 1e-12);
  EXPECT_NEAR(rho(0, 0).real(), 0.5, 1e-12);
}

TEST(Noise, HighestLevelDecaysThreeTimesFaster) {
  const double T1 = 3000, t = 200;
  Mat S = idle_channel(transmon_jumps({T1, INFINITY}), 4, t);
  Vec psi = Vec::Zero(4);
  psi(3) = 1;
  Mat rho = unvec(S * vec(density(psi)), 4);
  EXPECT_NEAR(rho(3, 3).real(), std::exp(-3 * t / T1), 1e-12);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
}

TEST(Noise, NegligibleNoiseReducesToUnitaryChannel) {
  auto p = make_transmon(ghz(6.3), ghz(-0.31));
  auto sys = local_system(transmon_energies(p), ladder_matrix(p.epsilon), 0, 0.0, 0.0);
  Envelope env = Envelope::gaussian(100);
  Mat S = pulse_channel_local(sys, mhz(10), env, transmon_jumps({1e15, 1e15}));
  Mat U = pulse_propagator(sys, mhz(10), env);
  EXPECT_LT((S - unitary_superop(U)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Noise, StrangSplittingConvergesAndPreservesTrace) {
  auto p = make_transmon(ghz(6.3), ghz(-0.31));
  auto sys = local_system(transmon_energies(p), ladder_matrix(p.epsilon), 1, 0.0, 0.0);
  Envelope env{40, 20, 10};
  auto Ls = transmon_jumps({2e4, 1.5e4});
  Mat a = pulse_channel_local(sys, mhz(15), env, Ls, {0.5, {}});
  Mat b = pulse_channel_local(sys, mhz(15), env, Ls, {0.1, {}});
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT(QuantumChannel(4, a).trace_preservation_error(), 1e-10);
}

TEST(Noise, ConstantDriveMatchesLiouvillianExponential) {
  // Zero-length ramps leave only the exact plateau.
  auto p = make_transmon(ghz(6.1), ghz(-0.30));
  auto sys = local_system(transmon_energies(p), ladder_matrix(p.epsilon), 0, 0.0, 0.0);
  auto Ls = transmon_jumps({5e3, 4e3});
  Envelope env{0, 80, 1};
  Mat S = pulse_channel_local(sys, mhz(8), env, Ls);
  const Mat I = Mat::Identity(4, 4);
  const Mat H = sys.H(mhz(8));
  Mat L = -kI * (kron(I, H) - kron(H.transpose(), I));
  for (const auto& J : Ls) {
    Mat JdJ = J.adjoint() * J;
    L += kron(J.conjugate(), J) - 0.5 * kron(I, JdJ) - 0.5 * kron(JdJ.transpose(), I);
  }
  EXPECT_LT((S - Mat(L * 80.0).exp()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CrossResonance, StrongerDriveShortensGate) {
  CrSettings weak, strong;
  strong.amplitude = mhz(100);
  EXPECT_LT(calibrate_cr_duration(device(), strong), calibrate_cr_duration(device(), weak));
}

TEST(CrossResonance, NoCouplingMeansNoEntanglingRate) {
  DeviceConfig d;
  d.J = 0;
  CrSettings cs;
  cs.scan_max = 1000;
  EXPECT_THROW(calibrate_cr_duration(build_device(d), cs), ConvergenceError);
}

TEST(Ecr, CalibratedGateMatchesTarget) {
  const auto& c = ecr_cal();
  EXPECT_GT(c.cr.tau, 250);
  EXPECT_LT(c.cr.tau, 330);
  EXPECT_GT(c.cr.fidelity, 0.998);
  EXPECT_NEAR(c.cr.phi_fit[0] + c.cr.phi_fit[1], kPi, 0.05);
  EXPECT_GT(c.fidelity, 0.99);
  EXPECT_LT(c.leakage_max, 1e-4);
  EXPECT_LT(unitarity_error(c.U), 1e-8);
  EXPECT_NEAR(c.duration(), 2 * c.cr.tau + 200, 1e-12);
}

TEST(Ecr, PopulationTracesConserveProbability) {
  auto rows = ecr_population_traces(device(), ecr_cal(), 20.0);
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    double s = 0;
    for (int k = 2; k < 18; ++k) s += r[k];
    EXPECT_NEAR(s, 1.0, 1e-8);
  }
  // Control |0> ends with the target flipped.
  const auto& last = rows[rows.size() - 4];
  EXPECT_EQ(static_cast<int>(last[1]), 0);
  EXPECT_GT(last[2 + 1], 0.98);
}

TEST(Ecr, NoiselessChannelEqualsCorrectedUnitary) {
  const auto& c = ecr_cal();
  Mat S = ecr_channel(device(), c, NoiseParams{});
  EXPECT_LT((S - unitary_superop(c.phases.P() * c.U)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Ecr, NoiseLowersFidelityMonotonically) {
  const auto& c = ecr_cal();
  ChannelSettings chs{0.5, {}};
  double f_good = average_gate_fidelity_channel(QuantumChannel(16, ecr_channel(device(), c, {1e6, 1e6}, chs)), ecr_target());
  double f_bad = average_gate_fidelity_channel(QuantumChannel(16, ecr_channel(device(), c, {1e5, 1e5}, chs)), ecr_target());
  EXPECT_LT(f_bad, f_good);
  EXPECT_LT(f_good, c.fidelity + 1e-9);
}

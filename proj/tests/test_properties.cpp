// Randomized structural invariants: unitarity, trace preservation,
// superoperator algebra and fidelity formulas.

#include <gtest/gtest.h>

#include "qudit/csd.hpp"
#include "qudit/qec.hpp"
#include "qudit/random.hpp"

using namespace qd;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(1212);
  return r;
}

double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

Mat random_density(int d) {
  Mat A = haar_unitary(d, rng()).leftCols(2);
  Vec w(2);
  w << 0.3, 0.7;
  Mat rho = A * w.asDiagonal() * A.adjoint();
  return rho / rho.trace();
}

// Random CPTP map from Kraus operators cut out of a Haar isometry.
Mat random_channel(int d, int kraus) {
  Mat V = haar_unitary(d * kraus, rng()).leftCols(d);
  Mat S = Mat::Zero(d * d, d * d);
  for (int k = 0; k < kraus; ++k) {
    Mat K = V.middleRows(k * d, d);
    S += kron(K.conjugate(), K);
  }
  return S;
}

}  // namespace

TEST(Properties, VecIdentity) {
  for (int k = 0; k < 10; ++k) {
    Mat A = haar_unitary(3, rng()), B = haar_unitary(3, rng()), R = haar_unitary(3, rng());
    EXPECT_LT((vec(A * R * B) - kron(B.transpose(), A) * vec(R)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ((unvec(vec(R), 3) - R).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Properties, SuperopTensorActsOnProducts) {
  for (int k = 0; k < 5; ++k) {
    Mat Sa = random_channel(4, 3), Sb = random_channel(4, 2);
    Mat ra = random_density(4), rb = random_density(4);
    Mat got = unvec(superop_tensor(Sa, 4, Sb, 4) * vec(kron(ra, rb)), 16);
    Mat want = kron(unvec(Sa * vec(ra), 4), unvec(Sb * vec(rb), 4));
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((partial_trace_second(got, 4, 4) - unvec(Sa * vec(ra), 4)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Properties, RandomChannelsPreserveTrace) {
  for (int k = 0; k < 10; ++k) {
    QuantumChannel ch(4, random_channel(4, 1 + k % 4));
    EXPECT_LT(ch.trace_preservation_error(), 1e-12);
    EXPECT_NEAR(ch.apply(random_density(4)).trace().real(), 1.0, 1e-12);
  }
}

TEST(Properties, AverageFidelityMatchesStateAverage) {
  // The six Pauli eigenstates form a qubit 2-design.
  const double r = 1 / std::sqrt(2.0);
  std::vector<Vec> states;
  for (auto [a, b] : {std::pair<cplx, cplx>{1, 0}, {0, 1}, {r, r}, {r, -r}, {r, cplx(0, r)}, {r, cplx(0, -r)}})
    states.push_back((Vec(2) << a, b).finished());
  for (int k = 0; k < 10; ++k) {
    QuantumChannel ch(2, random_channel(2, 2));
    Mat U = haar_unitary(2, rng());
    double avg = 0;
    for (const auto& psi : states) {
      Vec phi = U * psi;
      avg += phi.dot(ch.apply(psi * psi.adjoint()) * phi).real() / states.size();
    }
    EXPECT_NEAR(average_gate_fidelity_channel(ch, U), avg, 1e-12);
  }
}

TEST(Properties, UnitaryChannelFidelityAgreesWithUnitaryFormula) {
  for (int k = 0; k < 10; ++k) {
    Mat U = haar_unitary(4, rng()), V = haar_unitary(4, rng());
    EXPECT_NEAR(average_gate_fidelity_channel(QuantumChannel::unitary(U), V), average_gate_fidelity_unitary(U, V), 1e-12);
  }
}

TEST(Properties, GivensRoundTrip) {
  for (int k = 0; k < 30; ++k) {
    Mat U = haar_unitary(4, rng());
    auto dec = givens_synthesize(U);
    EXPECT_LT((std::exp(kI * dec.residual_phase) * local_ops_unitary(dec.ops, 4) - U).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Properties, SynthesizedCircuitsAreUnitary) {
  for (int k = 0; k < 8; ++k) {
    Mat U = haar_unitary(4, rng());
    EXPECT_LT(unitarity_error(circuit_unitary(decompose_cm_u(k % 4, U))), 1e-10);
  }
  EXPECT_LT(unitarity_error(circuit_unitary(csd_synthesize(haar_special_unitary(16, rng())))), 1e-10);
}

TEST(Properties, PulsePropagatorsAreUnitary) {
  auto p = tm::make_transmon(tm::ghz(6.3), tm::ghz(-0.31));
  RVec E = tm::transmon_energies(p);
  Mat b = tm::ladder_matrix(p.epsilon);
  for (int k = 0; k < 8; ++k) {
    auto sys = tm::local_system(E, b, k % 3, uniform(0, 2 * kPi), tm::mhz(uniform(-1, 1)));
    tm::Envelope env{uniform(10, 40), uniform(0, 100), uniform(4, 10)};
    EXPECT_LT(unitarity_error(tm::pulse_propagator(sys, tm::mhz(uniform(1, 40)), env)), 1e-9);
  }
}

TEST(Properties, NoisyPulseChannelsPreserveTrace) {
  auto p = tm::make_transmon(tm::ghz(6.1), tm::ghz(-0.30));
  RVec E = tm::transmon_energies(p);
  Mat b = tm::ladder_matrix(p.epsilon);
  for (int k = 0; k < 5; ++k) {
    auto sys = tm::local_system(E, b, k % 3, uniform(0, 2 * kPi), 0.0);
    tm::NoiseParams n{uniform(1e4, 1e5), uniform(1e4, 1e5)};
    Mat S = tm::pulse_channel_local(sys, tm::mhz(uniform(1, 30)), tm::Envelope::gaussian(uniform(30, 120)),
                                    tm::transmon_jumps(n));
    EXPECT_LT(QuantumChannel(4, S).trace_preservation_error(), 1e-10);
  }
}

TEST(Properties, KnillLaflamme) { EXPECT_LT(qec::knill_laflamme_violation(qec::build_code()), 1e-12); }

TEST(Properties, DelayedMeasurementOnRandomNoise) {
  for (int k = 0; k < 5; ++k) {
    auto g = qec::ideal_gates({uniform(2e5, 2e6), uniform(1e5, 3e5)});
    g.t_meas = uniform(0, 2000);
    EXPECT_LT(qec::delayed_measurement_mismatch(g, uniform(0, 1e5)), 1e-9);
  }
}

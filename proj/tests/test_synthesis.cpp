// Gate algebra, Givens factorization, C^m[U] lowering and cosine-sine synthesis.

#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "qudit/cost.hpp"
#include "qudit/csd.hpp"
#include "qudit/random.hpp"

using namespace qd;

namespace {

double phase_free_error(const Mat& A, const Mat& B) {
  cplx ov = (B.adjoint() * A).trace();
  return (A - ov / std::abs(ov) * B).cwiseAbs().maxCoeff();
}

// Generator-based oracle: exp(-i phi/2 (cos l sx + sin l sy)) on levels (n, n+1).
Mat rx_oracle(int d, int n, double phi, double lambda) {
  Mat G = Mat::Zero(d, d);
  G(n, n + 1) = std::exp(-kI * lambda);
  G(n + 1, n) = std::exp(kI * lambda);
  return Mat(-kI * phi / 2.0 * G).exp();
}

}  // namespace

TEST(GateAlgebra, TwoLevelRotationMatchesGeneratorExponential) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int n = 0; n < 3; ++n)
    for (int k = 0; k < 5; ++k) {
      double phi = u(rng), lam = u(rng);
      EXPECT_LT((rx_two_level(4, n, phi, lam) - rx_oracle(4, n, phi, lam)).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(GateAlgebra, RotationRejectsOutOfRangeLevel) {
  EXPECT_THROW(rx_two_level(4, 3, 0.1), DimensionError);
  EXPECT_THROW(controlled_gate(4, 4, Mat::Identity(4, 4)), DimensionError);
}

TEST(GateAlgebra, EcrActsOnlyForControlZeroAndOne) {
  const double th = 0.37;
  Mat G = ecr_matrix(4, th);
  Mat P0 = Mat::Zero(4, 4), P1 = Mat::Zero(4, 4), Prest = Mat::Zero(4, 4);
  P0(0, 0) = 1;
  P1(1, 1) = 1;
  Prest(2, 2) = Prest(3, 3) = 1;
  Mat want = kron(P0, rx_oracle(4, 0, -th, 0)) + kron(P1, rx_oracle(4, 0, th, 0)) + kron(Prest, Mat::Identity(4, 4));
  EXPECT_LT((G - want).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((ecr_matrix(4, th) * ecr_matrix(4, -th) - Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GateAlgebra, EmbedTwoSwapsOrderForReversedPair) {
  std::mt19937_64 rng(3);
  Mat G = haar_unitary(16, rng);
  Mat SW = Mat::Zero(16, 16);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) SW(4 * b + a, 4 * a + b) = 1;
  EXPECT_LT((embed_two(G, 1, 0, 2, 4) - SW * G * SW).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((embed_two(G, 0, 1, 2, 4) - G).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Givens, RoundTripOnHaarUnitaries) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 25; ++k) {
    Mat U = haar_unitary(4, rng);
    auto dec = givens_synthesize(U);
    Mat V = std::exp(kI * dec.residual_phase) * local_ops_unitary(dec.ops, 4);
    EXPECT_LT((V - U).cwiseAbs().maxCoeff(), 1e-10);
    for (const auto& g : dec.ops)
      EXPECT_TRUE(g.kind == GateKind::RxTwoLevel || g.kind == GateKind::VirtualPhase);
  }
}

TEST(Givens, DiagonalInputNeedsOnlyVirtualPhases) {
  Vec ph(4);
  ph << 0.1, -0.4, 1.2, 2.9;
  Mat D = Mat((kI * ph).array().exp().matrix().asDiagonal());
  auto dec = givens_synthesize(D);
  int rotations = 0;
  for (const auto& g : dec.ops)
    if (g.kind == GateKind::RxTwoLevel && !angle_close(g.angle, 0.0)) ++rotations;
  EXPECT_EQ(rotations, 0);
  EXPECT_LT((std::exp(kI * dec.residual_phase) * local_ops_unitary(dec.ops, 4) - D).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Givens, SqrtXRewriteReproducesRotation) {
  for (double phi : {0.3, -1.1, kPi, 2.5})
    for (double lam : {0.0, 0.7, kPi / 2}) {
      GateOp g = GateOp::rx(0, 1, phi, lam);
      auto seq = sqrtx_rewrite(g, 4);
      EXPECT_LT((local_ops_unitary(seq, 4) - gate_unitary(g, 4)).cwiseAbs().maxCoeff(), 1e-12);
      int sx = 0;
      for (const auto& s : seq)
        if (s.kind == GateKind::RxTwoLevel) ++sx;
      EXPECT_EQ(sx, 2);
    }
}

TEST(Givens, SqrtXCostRules) {
  EXPECT_EQ(sqrtx_cost(GateOp::rx(0, 0, kPi / 2)), 1);
  EXPECT_EQ(sqrtx_cost(GateOp::rx(0, 0, -kPi / 2)), 1);
  EXPECT_EQ(sqrtx_cost(GateOp::rx(0, 0, 1.0)), 2);
  EXPECT_EQ(sqrtx_cost(GateOp::phase(0, 2, 1.0)), 0);
  EXPECT_EQ(sqrtx_cost(GateOp::perm(0, 1)), 2);
}

TEST(ControlledGate, ControlZeroCoreUsesThreeEcr) {
  for (double th : {0.4, kPi, -2.0}) {
    QuditCircuit c = c0_rx01_via_ecr(th);
    EXPECT_EQ(count_resources(c).ecr_count, 3);
    EXPECT_LT(phase_free_error(circuit_unitary(c), controlled_gate(4, 0, rx_two_level(4, 0, th))), 1e-12);
  }
}

TEST(ControlledGate, PairRotationForEveryControlAndLevel) {
  for (int m = 0; m < 4; ++m)
    for (int j = 1; j < 4; ++j) {
      QuditCircuit c = cm_rx0j_via_c0_rx01(m, j, 0.9);
      EXPECT_LT(phase_free_error(circuit_unitary(c), controlled_gate(4, m, rx_pair(4, 0, j, 0.9))), 1e-12)
          << "m=" << m << " j=" << j;
    }
}

TEST(ControlledGate, RandomBlocksFollowCountingLaw) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 12; ++k) {
    const int m = k % 4;
    Mat U = random_generic_unitary(4, rng, 0.2);
    QuditCircuit c = decompose_cm_u(m, U);
    auto r = count_resources(c);
    EXPECT_EQ(r.ecr_count, 18);
    EXPECT_EQ(r.local_gate_count, 56 + 2 * m);
    for (const auto& g : c.ops)
      if (g.kind == GateKind::Ecr) EXPECT_NEAR(std::abs(g.angle), kPi / 4, 1e-12);
    EXPECT_GE(process_fidelity_unitary(circuit_unitary(c), controlled_gate(4, m, U)), 1 - 1e-10);
  }
}

TEST(ControlledGate, IdentityBlockIsFree) {
  for (int m = 0; m < 4; ++m) {
    QuditCircuit c = decompose_cm_u(m, Mat::Identity(4, 4));
    EXPECT_EQ(count_resources(c).ecr_count, 0);
    EXPECT_LT(phase_free_error(circuit_unitary(c), Mat::Identity(16, 16)), 1e-13);
  }
}

TEST(ControlledGate, DegenerateSpectrumElidesBlocks) {
  // iSWAP on levels (0,1) of a qubit pair embedded in one ququart: eigenphases 1, i, i, 1.
  Mat U = Mat::Identity(4, 4);
  U(1, 1) = U(2, 2) = 0;
  U(1, 2) = U(2, 1) = kI;
  QuditCircuit c = decompose_cm_u(2, U);
  EXPECT_LT(count_resources(c).ecr_count, 18);
  EXPECT_LT(phase_free_error(circuit_unitary(c), controlled_gate(4, 2, U)), 1e-9);
}

TEST(ControlledGate, RejectsNonUnitaryBlock) {
  Mat U = Mat::Identity(4, 4);
  U(0, 1) = 0.3;
  EXPECT_THROW(decompose_cm_u(1, U), ValidationError);
}

TEST(Csd, StepReassembles) {
  std::mt19937_64 rng(5);
  for (int n : {4, 8, 16}) {
    Mat U = haar_unitary(n, rng);
    auto f = csd_step(U);
    EXPECT_LT((f.reassemble() - U).cwiseAbs().maxCoeff(), 1e-11) << n;
    EXPECT_LT(unitarity_error(f.u) + unitarity_error(f.v) + unitarity_error(f.x) + unitarity_error(f.y), 1e-11);
  }
}

TEST(Csd, MultiplexedRotationMatchesDenseOracle) {
  std::vector<RyFamily> fams = {{0, 2, {0.1, -0.5, 1.3, 2.2}}, {1, 3, {0.7, 0.0, -1.9, 0.4}}};
  QuditCircuit c(4, 2);
  append_multiplexed_ry(c, fams);
  EXPECT_LT(phase_free_error(circuit_unitary(c), multiplexed_ry_matrix(fams)), 1e-11);
}

TEST(Csd, RandomTargetsReconstructWithFixedCost) {
  std::mt19937_64 rng(99);
  int ecr = -1;
  for (int k = 0; k < 5; ++k) {
    Mat U = haar_special_unitary(16, rng);
    QuditCircuit c = csd_synthesize(U);
    EXPECT_GE(process_fidelity_unitary(circuit_unitary(c), U), 1 - 1e-9);
    auto r = count_resources(c);
    if (ecr < 0) ecr = r.ecr_count;
    EXPECT_EQ(r.ecr_count, ecr);
    EXPECT_DOUBLE_EQ(r.cnot_equiv, r.total_ecr_angle / (kPi / 2));
  }
}

TEST(Csd, IdentityCostsNothing) {
  QuditCircuit c = csd_synthesize(Mat::Identity(16, 16));
  EXPECT_EQ(count_resources(c).ecr_count, 0);
}

TEST(Csd, RejectsWrongShape) {
  EXPECT_THROW(csd_synthesize(Mat::Identity(8, 8)), DimensionError);
}

TEST(Cost, ControlledBlockMustBeLoweredFirst) {
  QuditCircuit c(4, 2);
  c.add(GateOp::controlled(0, 1, 1, Mat::Identity(4, 4)));
  EXPECT_THROW(count_resources(c), ValidationError);
}

TEST(Cost, BenchmarkTableFillsReductions) {
  QuditCircuit c = c0_rx01_via_ecr(kPi / 4 * 4);
  auto rows = benchmark_table({{"w", c}}, {{"w", 10, 100, 0, 0}});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].cnot_reduction, 1 - rows[0].ours.cnot_equiv / 10, 1e-15);
  EXPECT_NEAR(rows[0].sqrtx_reduction, 1 - rows[0].ours.sqrtx_equiv / 100.0, 1e-15);
  EXPECT_NE(format_benchmark(rows).find("w"), std::string::npos);
}

// Single-qudit synthesis from neighbouring two-level rotations.
#pragma once

#include "core.hpp"

namespace qd {

constexpr double kAngleEps = 1e-12;

struct LocalDecomposition {
  std::vector<GateOp> ops;  // time order, RxTwoLevel and VirtualPhase only
  double residual_phase = 0.0;
};

// Zero the sub-diagonal column by column, bottom-up, with rotations on
// levels (r-1, r). Then U = G_1^dag ... G_k^dag Delta, so the emitted
// sequence is Delta's phases followed by G_k^dag ... G_1^dag.
inline LocalDecomposition givens_synthesize(const Mat& U, int qudit = 0) {
  if (U.rows() != U.cols()) throw DimensionError("givens_synthesize: matrix not square");
  if (unitarity_error(U) > 1e-8) throw ValidationError("givens_synthesize: input is not unitary");
  const int d = static_cast<int>(U.rows());
  Mat W = U;
  struct Rot { int n; double phi, lambda; };
  std::vector<Rot> rots;
  for (int c = 0; c < d - 1; ++c) {
    for (int r = d - 1; r > c; --r) {
      cplx a = W(r - 1, c), b = W(r, c);
      if (std::abs(b) < 1e-15) continue;
      double phi = 2.0 * std::atan2(std::abs(b), std::abs(a));
      double lambda = std::arg(b) - (std::abs(a) > 0 ? std::arg(a) : 0.0) - kPi / 2;
      lambda = wrap_angle(lambda);
      if (std::abs(phi) < kAngleEps) continue;
      Mat G = rx_two_level(d, r - 1, phi, lambda);
      W = G * W;
      W(r, c) = 0.0;
      rots.push_back({r - 1, phi, lambda});
    }
  }
  LocalDecomposition out;
  for (int j = 0; j < d; ++j) {
    double ph = std::arg(W(j, j));
    if (std::abs(wrap_angle(ph)) > kAngleEps) out.ops.push_back(GateOp::phase(qudit, j, ph));
  }
  for (auto it = rots.rbegin(); it != rots.rend(); ++it)
    out.ops.push_back(GateOp::rx(qudit, it->n, -it->phi, it->lambda));
  return out;
}

inline Mat local_ops_unitary(const std::vector<GateOp>& ops, int d) {
  Mat U = Mat::Identity(d, d);
  for (const auto& g : ops) {
    if (!g.is_local()) throw DimensionError("local_ops_unitary: entangling op");
    U = gate_unitary(g, d) * U;
  }
  return U;
}

// Rewrite one x-rotation as virtual phases and two pi/2 rotations within
// its block: Rx(t) = e^{i c} Rz(pi/2) SX Rz(t + pi) SX Rz(pi/2), tilted by Z(lambda).
inline std::vector<GateOp> sqrtx_rewrite(const GateOp& g, int d) {
  if (g.kind != GateKind::RxTwoLevel) throw DimensionError("sqrtx_rewrite: not a rotation");
  const int q = g.qudits[0], n = g.level;
  std::vector<GateOp> seq;
  seq.push_back(GateOp::phase(q, n + 1, -g.axis));
  seq.push_back(GateOp::phase(q, n + 1, kPi / 2));
  seq.push_back(GateOp::rx(q, n, kPi / 2));
  seq.push_back(GateOp::phase(q, n + 1, g.angle + kPi));
  seq.push_back(GateOp::rx(q, n, kPi / 2));
  seq.push_back(GateOp::phase(q, n + 1, kPi / 2));
  seq.push_back(GateOp::phase(q, n + 1, g.axis));
  // The block now differs from the target by a common phase; fix it virtually.
  Mat have = local_ops_unitary(seq, d), want = gate_unitary(g, d);
  cplx ratio = want(n, n) * std::conj(have(n, n)) + want(n + 1, n) * std::conj(have(n + 1, n));
  double fix = std::arg(ratio);
  seq.push_back(GateOp::phase(q, n, fix));
  seq.push_back(GateOp::phase(q, n + 1, fix));
  return seq;
}

inline bool angle_close(double a, double b, double tol = 1e-9) {
  return std::abs(wrap_angle(a - b)) < tol;
}

inline int sqrtx_cost(const GateOp& g) {
  switch (g.kind) {
    case GateKind::VirtualPhase: return 0;
    case GateKind::Permutation: return 2;
    case GateKind::RxTwoLevel:
      if (angle_close(g.angle, 0.0)) return 0;
      if (angle_close(std::abs(g.angle), kPi / 2) || angle_close(std::abs(g.angle), 3 * kPi / 2)) return 1;
      return 2;
    default: throw DimensionError("rx_to_sqrtx_count: entangling op in local list");
  }
}

inline int rx_to_sqrtx_count(const std::vector<GateOp>& ops) {
  int n = 0;
  for (const auto& g : ops) n += sqrtx_cost(g);
  return n;
}

}  // namespace qd

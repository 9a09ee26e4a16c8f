// Controlled single-qudit gates C^m[U] lowered to ECR, permutations and
// two-level rotations.
#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <numeric>

#include "givens.hpp"

namespace qd {

struct DiagonalFactorization {
  Mat V;
  double gamma = 0.0;
  std::vector<double> alphas;  // alpha_1 .. alpha_{d-1}

  Mat diagonal() const {
    const int d = static_cast<int>(alphas.size()) + 1;
    Mat D = Mat::Zero(d, d);
    double sum = std::accumulate(alphas.begin(), alphas.end(), 0.0);
    D(0, 0) = std::exp(kI * (gamma - sum));
    for (int j = 1; j < d; ++j) D(j, j) = std::exp(kI * (gamma + alphas[j - 1]));
    return D;
  }
  Mat reconstruct() const { return V * diagonal() * V.adjoint(); }
};

// Schur form of a unitary is diagonal, and its Schur vectors stay orthonormal
// for degenerate spectra where a plain eigensolver may not.
inline DiagonalFactorization diagonalize_special(const Mat& U) {
  if (U.rows() != U.cols()) throw DimensionError("diagonalize_special: matrix not square");
  require_unitary(U, 1e-8, "diagonalize_special");
  const int d = static_cast<int>(U.rows());
  Eigen::ComplexSchur<Mat> schur(U);
  Mat Q = schur.matrixU();
  Vec lam = schur.matrixT().diagonal();

  const double gamma = std::arg(U.determinant()) / d;
  std::vector<double> arg(d);
  std::vector<int> lead(d);
  for (int k = 0; k < d; ++k) {
    arg[k] = wrap_angle(std::arg(lam(k) * std::exp(-kI * gamma)));
    Eigen::Index imax;
    Q.col(k).cwiseAbs().maxCoeff(&imax);
    lead[k] = static_cast<int>(imax);
  }
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  // Ties (equal arguments) fall back to the position of the dominant component.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(arg[a] - arg[b]) > 1e-9) return arg[a] < arg[b];
    return lead[a] < lead[b];
  });

  DiagonalFactorization f;
  f.V.resize(d, d);
  for (int k = 0; k < d; ++k) f.V.col(k) = Q.col(order[k]);
  f.gamma = gamma;
  for (int k = 1; k < d; ++k) {
    double a = arg[order[k]];
    f.alphas.push_back(std::abs(a) < kAngleEps ? 0.0 : a);
  }
  return f;
}

// ------------------------------------------------------------ permutations

// frame[pos] = label. Bubble `label` leftwards until it sits at `pos`,
// appending the swap levels (time order) to `out`.
inline void bubble_to(std::vector<int>& frame, int label, int pos, std::vector<int>& out) {
  int at = static_cast<int>(std::find(frame.begin(), frame.end(), label) - frame.begin());
  if (at < pos) throw ValidationError("bubble_to: label already left of its slot");
  for (int k = at; k > pos; --k) {
    std::swap(frame[k], frame[k - 1]);
    out.push_back(k - 1);
  }
}

// Swaps that bring levels a -> 0 and b -> 1 starting from the identity frame.
inline std::vector<int> route_pair_to_01(int d, int a, int b) {
  if (a == b || a < 0 || b < 0 || a >= d || b >= d) throw DimensionError("route: bad level pair");
  std::vector<int> frame(d), out;
  std::iota(frame.begin(), frame.end(), 0);
  bubble_to(frame, a, 0, out);
  bubble_to(frame, b, 1, out);
  return out;
}

// Permutation matrix sending |label> to |pos>.
inline Mat frame_matrix(const std::vector<int>& frame) {
  const int d = static_cast<int>(frame.size());
  Mat P = Mat::Zero(d, d);
  for (int pos = 0; pos < d; ++pos) P(pos, frame[pos]) = 1.0;
  return P;
}

inline void emit_swaps(QuditCircuit& c, int q, const std::vector<int>& swaps, bool reverse = false) {
  if (reverse)
    for (auto it = swaps.rbegin(); it != swaps.rend(); ++it) c.add(GateOp::perm(q, *it));
  else
    for (int s : swaps) c.add(GateOp::perm(q, s));
}

inline bool touches(const GateOp& g, int q) {
  return std::find(g.qudits.begin(), g.qudits.end(), q) != g.qudits.end();
}

// Remove pairs of identical swaps on one qudit with nothing on that qudit in
// between. Swaps are involutions, so the unitary is unchanged.
inline int cancel_permutation_pairs(QuditCircuit& c) {
  int removed = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < c.ops.size() && !changed; ++i) {
      const GateOp& g = c.ops[i];
      if (g.kind != GateKind::Permutation) continue;
      const int q = g.qudits[0];
      for (size_t k = i + 1; k < c.ops.size(); ++k) {
        const GateOp& h = c.ops[k];
        if (!touches(h, q)) continue;
        if (h.kind == GateKind::Permutation && h.level == g.level) {
          c.ops.erase(c.ops.begin() + k);
          c.ops.erase(c.ops.begin() + i);
          removed += 2;
          changed = true;
        }
        break;
      }
    }
  }
  return removed;
}

// ------------------------------------------------------------------ cores

struct CoreOptions {
  int control = 0;
  int target = 1;
  bool rotation_first = false;  // place Rx01(theta/d) before the ECR steps
  bool skip_rotation = false;   // rotation has been fused elsewhere
};

// C0[Rx01(theta)] from d-1 ECR(-theta/d) steps, each followed by a cyclic
// shift of control levels 1..d-1, plus Rx01(theta/d) on the target.
inline void append_c0_core(QuditCircuit& c, double theta, const CoreOptions& o) {
  const int d = c.d;
  auto rot = [&] {
    if (!o.skip_rotation) c.add(GateOp::rx(o.target, 0, theta / d));
  };
  if (o.rotation_first) rot();
  for (int step = 0; step < d - 1; ++step) {
    c.add(GateOp::ecr(o.control, o.target, -theta / d));
    for (int j = d - 1; j >= 2; --j) c.add(GateOp::perm(o.control, j - 1));
  }
  if (!o.rotation_first) rot();
}

inline QuditCircuit c0_rx01_via_ecr(double theta, int d = 4) {
  if (d < 2) throw DimensionError("c0_rx01_via_ecr: d must be >= 2");
  QuditCircuit c(d, 2);
  append_c0_core(c, theta, {});
  return c;
}

// C^m[Rx^{ij}(theta, lambda)] acting on `rotated` with `selector` as the
// controlling qudit: selector m -> 0, rotated (i, j) -> (0, 1), core, undo.
inline void append_cm_rx_pair(QuditCircuit& c, int m, int i, int j, double theta, double lambda,
                              int selector, int rotated, bool emit_control_perms = true) {
  const int d = c.d;
  if (m < 0 || m >= d) throw DimensionError("control state out of range");
  std::vector<int> ctl, tgt = route_pair_to_01(d, i, j);
  {
    std::vector<int> frame(d);
    std::iota(frame.begin(), frame.end(), 0);
    bubble_to(frame, m, 0, ctl);
  }
  if (emit_control_perms) emit_swaps(c, selector, ctl);
  emit_swaps(c, rotated, tgt);
  const bool tilt = std::abs(wrap_angle(lambda)) > kAngleEps;
  if (tilt) c.add(GateOp::phase(rotated, 1, -lambda));
  CoreOptions o;
  o.control = selector;
  o.target = rotated;
  append_c0_core(c, theta, o);
  if (tilt) c.add(GateOp::phase(rotated, 1, lambda));
  emit_swaps(c, rotated, tgt, true);
  if (emit_control_perms) emit_swaps(c, selector, ctl, true);
}

inline QuditCircuit cm_rx0j_via_c0_rx01(int m, int j, double theta, bool emit_control_perms = true,
                                        int d = 4) {
  if (j < 1 || j >= d) throw DimensionError("cm_rx0j: level j out of range");
  QuditCircuit c(d, 2);
  append_cm_rx_pair(c, m, 0, j, theta, 0.0, 0, 1, emit_control_perms);
  return c;
}

inline void append_rz_virtual(QuditCircuit& c, int q, int i, int j, double theta) {
  if (std::abs(theta) < kAngleEps) return;
  c.add(GateOp::phase(q, i, -theta / 2));
  c.add(GateOp::phase(q, j, theta / 2));
}

// C^m[Rz^{0j}(2 alpha)] = C^m[Rx^{0j}(-pi)] Rz^{0j}(-alpha) C^m[Rx^{0j}(pi)] Rz^{0j}(alpha).
inline QuditCircuit cm_rz_via_cm_rx(int m, int j, double alpha, int d = 4) {
  if (j < 1 || j >= d) throw DimensionError("cm_rz: level j out of range");
  if (m < 0 || m >= d) throw DimensionError("cm_rz: control state out of range");
  QuditCircuit c(d, 2);
  append_rz_virtual(c, 1, 0, j, alpha);
  append_cm_rx_pair(c, m, 0, j, kPi, 0.0, 0, 1);
  append_rz_virtual(c, 1, 0, j, -alpha);
  append_cm_rx_pair(c, m, 0, j, -kPi, 0.0, 0, 1);
  cancel_permutation_pairs(c);
  return c;
}

// ------------------------------------------------------------ C^m[U]

struct CmuOptions {
  int control = 0;
  int target = 1;
};

// U = e^{i gamma} V diag(e^{-i sum a}, e^{i a_1}, ...) V^dag, so
// C^m[U] = (S_m x V) prod_j C^m[Rz^{0j}(2 a_j)] (1 x V^dag).
// Blocks run j = d-1 .. 1. The target keeps a level frame in which 0 sits at
// position 0 and the active j at position 1; the first frame and the first
// core rotation fuse into V^dag, the last frame into V.
inline void append_cm_u(QuditCircuit& c, int m, const Mat& U, const CmuOptions& o = {}) {
  const int d = c.d;
  if (U.rows() != d || U.cols() != d) throw DimensionError("decompose_cm_u: block dimension mismatch");
  if (m < 0 || m >= d) throw DimensionError("decompose_cm_u: control state out of range");
  require_unitary(U, 1e-8, "decompose_cm_u");
  DiagonalFactorization f = diagonalize_special(U);

  std::vector<int> js;
  std::vector<double> as;
  for (int j = d - 1; j >= 1; --j)
    if (std::abs(f.alphas[j - 1]) >= kAngleEps) {
      js.push_back(j);
      as.push_back(f.alphas[j - 1]);
    }

  if (!js.empty()) {
    // Initial frame: 0 at 0, first j at 1; remaining labels ordered so the walk is shortest.
    std::vector<int> rest;
    for (int l = 1; l < d; ++l)
      if (l != js[0]) rest.push_back(l);
    std::sort(rest.begin(), rest.end());
    std::vector<int> best;
    size_t best_cost = SIZE_MAX;
    do {
      std::vector<int> frame{0, js[0]};
      frame.insert(frame.end(), rest.begin(), rest.end());
      std::vector<int> sw;
      for (size_t k = 1; k < js.size(); ++k) bubble_to(frame, js[k], 1, sw);
      if (sw.size() < best_cost) {
        best_cost = sw.size();
        best = {0, js[0]};
        best.insert(best.end(), rest.begin(), rest.end());
      }
    } while (std::next_permutation(rest.begin(), rest.end()));

    std::vector<int> frame = best;
    std::vector<int> ctl;
    {
      std::vector<int> cf(d);
      std::iota(cf.begin(), cf.end(), 0);
      bubble_to(cf, m, 0, ctl);
    }
    emit_swaps(c, o.control, ctl);

    Mat Wpre = rx_two_level(d, 0, kPi / d) * rz_pair(d, 0, 1, as[0]) * frame_matrix(frame) * f.V.adjoint();
    for (const auto& g : givens_synthesize(Wpre, o.target).ops) c.add(g);

    CoreOptions core;
    core.control = o.control;
    core.target = o.target;
    core.rotation_first = true;
    for (size_t k = 0; k < js.size(); ++k) {
      if (k > 0) {
        std::vector<int> sw;
        bubble_to(frame, js[k], 1, sw);
        emit_swaps(c, o.target, sw);
        append_rz_virtual(c, o.target, 0, 1, as[k]);
      }
      core.skip_rotation = (k == 0);
      append_c0_core(c, kPi, core);
      append_rz_virtual(c, o.target, 0, 1, -as[k]);
      core.skip_rotation = false;
      append_c0_core(c, -kPi, core);
    }

    Mat Wpost = f.V * frame_matrix(frame).adjoint();
    for (const auto& g : givens_synthesize(Wpost, o.target).ops) c.add(g);
    emit_swaps(c, o.control, ctl, true);
  }
  if (std::abs(wrap_angle(f.gamma)) > kAngleEps) c.add(GateOp::phase(o.control, m, f.gamma));
}

inline QuditCircuit decompose_cm_u(int m, const Mat& U) {
  QuditCircuit c(static_cast<int>(U.rows()), 2);
  append_cm_u(c, m, U);
  return c;
}

}  // namespace qd

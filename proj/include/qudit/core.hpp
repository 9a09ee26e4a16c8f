// Gate and circuit algebra shared by every other module.
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qd {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;
constexpr cplx kI{0.0, 1.0};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Map an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

inline Mat kron(const Mat& a, const Mat& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

inline double unitarity_error(const Mat& U) {
  if (U.rows() != U.cols()) return INFINITY;
  return (U.adjoint() * U - Mat::Identity(U.rows(), U.cols())).cwiseAbs().maxCoeff();
}

// Closest unitary in Frobenius norm.
inline Mat polar_unitary(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

inline bool is_unitary(const Mat& U, double tol = 1e-12) { return unitarity_error(U) <= tol; }

inline void require_unitary(const Mat& U, double tol, const char* what) {
  double e = unitarity_error(U);
  if (!(e <= tol))
    throw ValidationError(std::string(what) + ": matrix is not unitary (deviation " +
                          std::to_string(e) + ")");
}

// ---------------------------------------------------------------- gates

enum class GateKind { RxTwoLevel, VirtualPhase, Permutation, Ecr, ControlledBlock };
enum class EcrDirection { Forward, Reversed };

struct GateOp {
  GateKind kind = GateKind::RxTwoLevel;
  std::vector<int> qudits;  // one entry for local ops, [control, target] for two-qudit ops
  int level = 0;            // n for Rx/Permutation, j for VirtualPhase, m for ControlledBlock
  double angle = 0.0;       // phi, phase or theta
  double axis = 0.0;        // axis-phase lambda of RxTwoLevel
  EcrDirection direction = EcrDirection::Forward;
  Mat block;                // ControlledBlock payload

  static GateOp rx(int q, int n, double phi, double lambda = 0.0) {
    GateOp g;
    g.kind = GateKind::RxTwoLevel;
    g.qudits = {q};
    g.level = n;
    g.angle = phi;
    g.axis = lambda;
    return g;
  }
  static GateOp ry(int q, int n, double phi) { return rx(q, n, phi, kPi / 2); }
  static GateOp phase(int q, int j, double ph) {
    GateOp g;
    g.kind = GateKind::VirtualPhase;
    g.qudits = {q};
    g.level = j;
    g.angle = ph;
    return g;
  }
  static GateOp perm(int q, int n) {
    GateOp g;
    g.kind = GateKind::Permutation;
    g.qudits = {q};
    g.level = n;
    return g;
  }
  // Control and target are given explicitly; the direction records whether the
  // hardware control is the lower-index qudit.
  static GateOp ecr(int control, int target, double theta) {
    GateOp g;
    g.kind = GateKind::Ecr;
    g.qudits = {control, target};
    g.angle = theta;
    g.direction = control < target ? EcrDirection::Forward : EcrDirection::Reversed;
    return g;
  }
  static GateOp controlled(int control, int target, int m, const Mat& U) {
    GateOp g;
    g.kind = GateKind::ControlledBlock;
    g.qudits = {control, target};
    g.level = m;
    g.block = U;
    return g;
  }
  bool is_local() const { return qudits.size() == 1; }
};

inline const char* kind_name(GateKind k) {
  switch (k) {
    case GateKind::RxTwoLevel: return "rx";
    case GateKind::VirtualPhase: return "vphase";
    case GateKind::Permutation: return "perm";
    case GateKind::Ecr: return "ecr";
    case GateKind::ControlledBlock: return "controlled";
  }
  return "?";
}

// Two-level x-rotation about cos(l) x + sin(l) y between levels n and n+1.
inline Mat rx_two_level(int d, int n, double phi, double lambda = 0.0) {
  if (n < 0 || n > d - 2) throw DimensionError("rotation level out of range");
  Mat R = Mat::Identity(d, d);
  double c = std::cos(phi / 2), s = std::sin(phi / 2);
  R(n, n) = c;
  R(n + 1, n + 1) = c;
  R(n, n + 1) = -kI * s * std::exp(-kI * lambda);
  R(n + 1, n) = -kI * s * std::exp(kI * lambda);
  return R;
}

inline Mat ry_two_level(int d, int n, double phi) { return rx_two_level(d, n, phi, kPi / 2); }

// Rotation between arbitrary levels i and j (not necessarily neighbours).
inline Mat rx_pair(int d, int i, int j, double phi, double lambda = 0.0) {
  Mat R = Mat::Identity(d, d);
  double c = std::cos(phi / 2), s = std::sin(phi / 2);
  R(i, i) = c;
  R(j, j) = c;
  R(i, j) = -kI * s * std::exp(-kI * lambda);
  R(j, i) = -kI * s * std::exp(kI * lambda);
  return R;
}

// Rz^{ij}(theta) = diag(e^{-i theta/2} on i, e^{+i theta/2} on j).
inline Mat rz_pair(int d, int i, int j, double theta) {
  Mat R = Mat::Identity(d, d);
  R(i, i) = std::exp(-kI * theta / 2.0);
  R(j, j) = std::exp(kI * theta / 2.0);
  return R;
}

inline Mat swap_levels(int d, int n) {
  if (n < 0 || n > d - 2) throw DimensionError("permutation level out of range");
  Mat X = Mat::Identity(d, d);
  X(n, n) = 0;
  X(n + 1, n + 1) = 0;
  X(n, n + 1) = 1;
  X(n + 1, n) = 1;
  return X;
}

// Controlled gate C^m[U] with control-major ordering (index = d*c + t).
inline Mat controlled_gate(int d, int m, const Mat& U) {
  if (m < 0 || m >= d) throw DimensionError("control state out of range");
  if (U.rows() != d || U.cols() != d) throw DimensionError("block dimension mismatch");
  Mat G = Mat::Identity(d * d, d * d);
  G.block(m * d, m * d, d, d) = U;
  return G;
}

// |0><0| x Rx01(-theta) + |1><1| x Rx01(theta) + identity elsewhere.
inline Mat ecr_matrix(int d, double theta) {
  Mat G = Mat::Identity(d * d, d * d);
  G.block(0, 0, d, d) = rx_two_level(d, 0, -theta);
  G.block(d, d, d, d) = rx_two_level(d, 0, theta);
  return G;
}

// Local d x d unitary or two-qudit d^2 x d^2 unitary (control x target).
inline Mat gate_unitary(const GateOp& g, int d) {
  auto check_level = [&](int lv, int hi) {
    if (lv < 0 || lv > hi) throw DimensionError("level index out of range for d=" + std::to_string(d));
  };
  switch (g.kind) {
    case GateKind::RxTwoLevel:
      check_level(g.level, d - 2);
      return rx_two_level(d, g.level, g.angle, g.axis);
    case GateKind::VirtualPhase: {
      check_level(g.level, d - 1);
      Mat P = Mat::Identity(d, d);
      P(g.level, g.level) = std::exp(kI * g.angle);
      return P;
    }
    case GateKind::Permutation:
      check_level(g.level, d - 2);
      return swap_levels(d, g.level);
    case GateKind::Ecr:
      if (d < 2) throw DimensionError("ECR needs d >= 2");
      return ecr_matrix(d, g.angle);
    case GateKind::ControlledBlock:
      return controlled_gate(d, g.level, g.block);
  }
  throw DimensionError("unknown gate kind");
}

// Embed a local d x d operator at `slot` among n qudits (slot 0 most significant).
inline Mat embed_local(const Mat& U, int slot, int n_qudits, int d) {
  if (U.rows() != d || U.cols() != d) throw DimensionError("embed_local: operator is not d x d");
  if (slot < 0 || slot >= n_qudits) throw DimensionError("embed_local: bad slot");
  Mat out = Mat::Identity(1, 1);
  for (int q = 0; q < n_qudits; ++q) out = kron(out, q == slot ? U : Mat::Identity(d, d));
  return out;
}

// Embed a two-qudit operator acting on (a, b) with a the more significant factor of G.
inline Mat embed_two(const Mat& G, int a, int b, int n_qudits, int d) {
  if (a == b || a < 0 || b < 0 || a >= n_qudits || b >= n_qudits)
    throw DimensionError("embed_two: bad qudit pair");
  const int D = static_cast<int>(std::lround(std::pow(d, n_qudits)));
  Mat out = Mat::Zero(D, D);
  // Strides for each qudit position in the full index.
  auto stride = [&](int q) { return static_cast<int>(std::lround(std::pow(d, n_qudits - 1 - q))); };
  const int sa = stride(a), sb = stride(b);
  for (int col = 0; col < D; ++col) {
    int ia = (col / sa) % d, ib = (col / sb) % d;
    int base = col - ia * sa - ib * sb;
    for (int ra = 0; ra < d; ++ra)
      for (int rb = 0; rb < d; ++rb) {
        cplx v = G(ra * d + rb, ia * d + ib);
        if (v != cplx(0)) out(base + ra * sa + rb * sb, col) += v;
      }
  }
  return out;
}

struct QuditCircuit {
  int d = 4;
  int n_qudits = 2;
  std::vector<GateOp> ops;                 // time order
  std::vector<std::vector<double>> phase_frames;  // trailing per-qudit frame phases

  QuditCircuit() = default;
  QuditCircuit(int d_, int n_) : d(d_), n_qudits(n_) {}

  void add(const GateOp& g) { ops.push_back(g); }
  void append(const QuditCircuit& other) {
    if (other.d != d || other.n_qudits != n_qudits) throw DimensionError("append: shape mismatch");
    ops.insert(ops.end(), other.ops.begin(), other.ops.end());
  }
};

inline void validate(const QuditCircuit& c) {
  if (c.d < 2 || c.n_qudits < 1) throw DimensionError("circuit needs d >= 2 and n >= 1");
  for (const auto& g : c.ops) {
    for (int q : g.qudits)
      if (q < 0 || q >= c.n_qudits) throw DimensionError("qudit index out of range");
    bool two = g.kind == GateKind::Ecr || g.kind == GateKind::ControlledBlock;
    if (two != (g.qudits.size() == 2) || (two && g.qudits[0] == g.qudits[1]))
      throw DimensionError("gate arity does not match its qudit list");
  }
  if (!c.phase_frames.empty() && static_cast<int>(c.phase_frames.size()) != c.n_qudits)
    throw DimensionError("phase_frames must have one entry per qudit");
}

inline Mat op_full(const GateOp& g, int d, int n) {
  Mat G = gate_unitary(g, d);
  if (g.is_local()) return embed_local(G, g.qudits[0], n, d);
  return embed_two(G, g.qudits[0], g.qudits[1], n, d);
}

// Left-multiply `acc` by the full-space operator of g without forming it
// when the gate is local (cheap path used by synthesis checks).
inline void apply_op(const GateOp& g, int d, int n, Mat& acc) {
  if (!g.is_local()) {
    acc = op_full(g, d, n) * acc;
    return;
  }
  const Mat G = gate_unitary(g, d);
  const int D = static_cast<int>(acc.rows());
  const int stride = static_cast<int>(std::lround(std::pow(d, n - 1 - g.qudits[0])));
  Mat out = Mat::Zero(D, acc.cols());
  for (int r = 0; r < D; ++r) {
    int lv = (r / stride) % d;
    int base = r - lv * stride;
    for (int k = 0; k < d; ++k) {
      cplx v = G(lv, k);
      if (v != cplx(0)) out.row(r) += v * acc.row(base + k * stride);
    }
  }
  acc.swap(out);
}

// Product of gate unitaries in execution order, then trailing phase frames.
inline Mat circuit_unitary(const QuditCircuit& c) {
  validate(c);
  const int D = static_cast<int>(std::lround(std::pow(c.d, c.n_qudits)));
  Mat U = Mat::Identity(D, D);
  for (const auto& g : c.ops) apply_op(g, c.d, c.n_qudits, U);
  for (int q = 0; q < static_cast<int>(c.phase_frames.size()); ++q)
    for (int j = 0; j < static_cast<int>(c.phase_frames[q].size()); ++j)
      if (c.phase_frames[q][j] != 0.0) apply_op(GateOp::phase(q, j, c.phase_frames[q][j]), c.d, c.n_qudits, U);
  return U;
}

// ------------------------------------------------------------ fidelities

inline double process_fidelity_unitary(const Mat& U, const Mat& V) {
  if (U.rows() != V.rows() || U.cols() != V.cols()) throw DimensionError("fidelity: dimension mismatch");
  const double D = static_cast<double>(U.rows());
  return std::norm((U.adjoint() * V).trace()) / (D * D);
}

inline double average_gate_fidelity_unitary(const Mat& U, const Mat& V) {
  const double D = static_cast<double>(U.rows());
  return (D * process_fidelity_unitary(U, V) + 1.0) / (D + 1.0);
}

// Column-stacked superoperators: vec(A rho B) = (B^T kron A) vec(rho).
inline Mat vec(const Mat& rho) {
  return Eigen::Map<const Mat>(rho.data(), rho.size(), 1);
}
inline Mat unvec(const Mat& v, int dim) {
  Mat out(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) out(i, j) = v(i + dim * j, 0);
  return out;
}
inline Mat unitary_superop(const Mat& U) { return kron(U.conjugate(), U); }

struct QuantumChannel {
  int dim = 0;
  Mat superop;  // dim^2 x dim^2, column stacking

  QuantumChannel() = default;
  QuantumChannel(int d, Mat S) : dim(d), superop(std::move(S)) {
    if (superop.rows() != d * d || superop.cols() != d * d)
      throw DimensionError("superoperator shape does not match dim");
  }
  static QuantumChannel identity(int d) { return {d, Mat::Identity(d * d, d * d)}; }
  static QuantumChannel unitary(const Mat& U) { return {static_cast<int>(U.rows()), unitary_superop(U)}; }

  Mat apply(const Mat& rho) const { return unvec(superop * vec(rho), dim); }
  // this after other
  QuantumChannel then(const QuantumChannel& next) const {
    if (next.dim != dim) throw DimensionError("channel composition: dimension mismatch");
    return {dim, next.superop * superop};
  }
  // Deviation of the adjoint map on the identity from the identity.
  double trace_preservation_error() const {
    Mat Id = vec(Mat::Identity(dim, dim));
    Mat adj = superop.adjoint() * Id;
    return (adj - Id).cwiseAbs().maxCoeff();
  }
};

inline double entanglement_fidelity(const QuantumChannel& E, const Mat& U) {
  if (E.superop.rows() != E.superop.cols()) throw DimensionError("non-square superoperator");
  if (U.rows() != E.dim) throw DimensionError("target unitary dimension mismatch");
  const double D = E.dim;
  // (1/D^2) sum_ij <i|U^dag E(|i><j|) U|j> = Tr(S_U^dag S_E) / D^2
  return (unitary_superop(U).adjoint() * E.superop).trace().real() / (D * D);
}

inline double average_gate_fidelity_channel(const QuantumChannel& E, const Mat& U) {
  const double D = E.dim;
  return (D * entanglement_fidelity(E, U) + 1.0) / (D + 1.0);
}

// Partial trace over the second factor of a (da*db)-dimensional operator.
inline Mat partial_trace_second(const Mat& rho, int da, int db) {
  Mat out = Mat::Zero(da, da);
  for (int i = 0; i < da; ++i)
    for (int j = 0; j < da; ++j)
      for (int k = 0; k < db; ++k) out(i, j) += rho(i * db + k, j * db + k);
  return out;
}

// Superoperator of (S_a on factor A) tensor (S_b on factor B) acting on
// vec(rho_AB), with rho_AB ordered A-major.
inline Mat superop_tensor(const Mat& Sa, int da, const Mat& Sb, int db) {
  const int D = da * db;
  Mat out = Mat::Zero(D * D, D * D);
  // vec index of rho(r,c) = r + D*c with r = a*db + b
  for (int a = 0; a < da; ++a)
    for (int b = 0; b < db; ++b)
      for (int a2 = 0; a2 < da; ++a2)
        for (int b2 = 0; b2 < db; ++b2) {
          int col = (a * db + b) + D * (a2 * db + b2);
          for (int x = 0; x < da; ++x)
            for (int x2 = 0; x2 < da; ++x2) {
              cplx va = Sa(x + da * x2, a + da * a2);
              if (va == cplx(0)) continue;
              for (int y = 0; y < db; ++y)
                for (int y2 = 0; y2 < db; ++y2) {
                  cplx vb = Sb(y + db * y2, b + db * b2);
                  if (vb == cplx(0)) continue;
                  out((x * db + y) + D * (x2 * db + y2), col) += va * vb;
                }
            }
        }
  return out;
}

}  // namespace qd

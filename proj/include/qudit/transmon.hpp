// Pulse-level model of two capacitively coupled transmons truncated to four
// levels each. Internal units: angular frequency in rad/ns, time in ns.
#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <map>

#include "numerics.hpp"

namespace qd::tm {

constexpr double kTwoPi = 2.0 * kPi;
inline double ghz(double f) { return kTwoPi * f; }
inline double mhz(double f) { return kTwoPi * f * 1e-3; }
inline double khz(double f) { return kTwoPi * f * 1e-6; }
inline double to_mhz(double w) { return w / kTwoPi * 1e3; }
inline double to_khz(double w) { return w / kTwoPi * 1e6; }

// ------------------------------------------------------------ single transmon

// Lowest k eigenvalues of 4 EC (n - ng)^2 - EJ/2 (|n><n+1| + h.c.), |n| <= N.
inline RVec charge_levels(double EJ, double EC, double ng = 0.0, int N = 20, int k = 6) {
  const int M = 2 * N + 1;
  RVec diag(M), sub = RVec::Constant(M - 1, -0.5 * EJ);
  for (int i = 0; i < M; ++i) diag(i) = 4.0 * EC * (i - N - ng) * (i - N - ng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues().head(k);
}

struct TransmonParams {
  double omega = 0, alpha = 0;  // E1 - E0 and (E2 - E1) - (E1 - E0)
  double EJ = 0, EC = 0;
  double ng = 0;
  double epsilon = 0;  // sqrt(2 EC / EJ)
};

inline std::pair<double, double> fit_ej_ec(double omega, double alpha) {
  if (!(alpha < 0 && omega > 0)) throw ValidationError("fit_ej_ec: need alpha < 0 < omega");
  double EC0 = -alpha, EJ0 = (omega + EC0) * (omega + EC0) / (8.0 * EC0);
  auto F = [&](const std::vector<double>& x) -> std::vector<double> {
    if (x[0] <= 0 || x[1] <= 0) return {1e3, 1e3};
    RVec e = charge_levels(x[0], x[1]);
    return {e(1) - e(0) - omega, (e(2) - e(1)) - (e(1) - e(0)) - alpha};
  };
  auto x = num::multiroot(F, {EJ0, EC0}, 1e-11);
  return {x[0], x[1]};
}

inline TransmonParams make_transmon(double omega, double alpha) {
  TransmonParams p;
  p.omega = omega;
  p.alpha = alpha;
  std::tie(p.EJ, p.EC) = fit_ej_ec(omega, alpha);
  p.epsilon = std::sqrt(2.0 * p.EC / p.EJ);
  return p;
}

struct Dispersion {
  std::vector<double> domega;  // per transition n -> n+1
  double mode_convergence = 0; // max change between 20 and 25 Fourier modes
};

// Max deviation of each transition frequency from its n_g average,
// 101 points on [0, 1/2] (the spectrum is symmetric about n_g = 1/2).
inline Dispersion charge_dispersion(const TransmonParams& p, int n_levels = 4) {
  if (n_levels < 2 || n_levels > 5) throw ValidationError("charge_dispersion: n_levels must be in [2, 5]");
  const int G = 101;
  auto sweep = [&](int N) {
    std::vector<std::vector<double>> tr(n_levels - 1, std::vector<double>(G));
    for (int g = 0; g < G; ++g) {
      RVec e = charge_levels(p.EJ, p.EC, 0.5 * g / (G - 1), N, n_levels);
      for (int n = 0; n + 1 < n_levels; ++n) tr[n][g] = e(n + 1) - e(n);
    }
    return tr;
  };
  auto a = sweep(20), b = sweep(25);
  Dispersion d;
  for (int n = 0; n + 1 < n_levels; ++n) {
    double mean = 0;
    for (double w : a[n]) mean += w / G;
    double dev = 0;
    for (int g = 0; g < G; ++g) {
      dev = std::max(dev, std::abs(a[n][g] - mean));
      d.mode_convergence = std::max(d.mode_convergence, std::abs(a[n][g] - b[n][g]));
    }
    d.domega.push_back(dev);
  }
  if (d.mode_convergence > khz(1e-3)) throw ConvergenceError("charge_dispersion: 20 Fourier modes not converged");
  return d;
}

// Perturbative ladder operator in the transmon eigenbasis.
inline Mat ladder_matrix(double eps) {
  Mat b = Mat::Zero(4, 4);
  b(0, 1) = 1 - eps / 8 - 11 * eps * eps / 256;
  b(1, 2) = (1 - eps / 4 - 73 * eps * eps / 512) * std::sqrt(2.0);
  b(2, 3) = (1 - 3 * eps / 8 - 79 * eps * eps / 256) * std::sqrt(3.0);
  b(0, 3) = -std::sqrt(6.0) * eps / 16 - 5 * std::sqrt(6.0) * eps * eps / 128;
  return b;
}

inline RVec transmon_energies(const TransmonParams& p) {
  RVec e(4);
  e << 0, p.omega, 2 * p.omega + p.alpha,
      3 * (p.omega + p.alpha - p.EC / (8 * p.EJ) * std::sqrt(2 * p.EC * p.EJ));
  return e;
}

// ------------------------------------------------------------------ pair

struct PairModel {
  TransmonParams control, target;
  double J = 0;
  Mat H0;          // bare product basis, control-major
  RVec E;          // dressed energies indexed by bare label
  Mat S;           // dressed eigenvectors (columns) indexed by bare label
  RVec N;          // excitation number c + t of each label
  Mat Bc, Bt;      // ladder operators in the dressed basis
  Mat bc, bt;      // single-transmon ladder matrices
  RVec Ec, Et;     // single-transmon energies
  double omega_bar_t = 0, omega_bar_c = 0;
  std::vector<double> disp_c, disp_t;  // charge detunings per transition
  double min_overlap = 1;
};

inline PairModel build_pair_model(const TransmonParams& c, const TransmonParams& t, double J) {
  PairModel m;
  m.control = c;
  m.target = t;
  m.J = J;
  m.bc = ladder_matrix(c.epsilon);
  m.bt = ladder_matrix(t.epsilon);
  m.Ec = transmon_energies(c);
  m.Et = transmon_energies(t);
  const Mat I4 = Mat::Identity(4, 4);
  Mat yc = -kI * (m.bc - m.bc.adjoint()), yt = -kI * (m.bt - m.bt.adjoint());
  m.H0 = kron(Mat(m.Ec.cast<cplx>().asDiagonal()), I4) + kron(I4, Mat(m.Et.cast<cplx>().asDiagonal())) +
         J * kron(yc, yt);
  Eigen::SelfAdjointEigenSolver<Mat> es(m.H0);
  const Mat& V = es.eigenvectors();
  std::vector<int> assign(16, -1), used(16, 0);
  m.min_overlap = 1;
  for (int b = 0; b < 16; ++b) {
    Eigen::Index k;
    double ov = V.row(b).cwiseAbs2().maxCoeff(&k);
    m.min_overlap = std::min(m.min_overlap, ov);
    if (ov <= 0.5 || used[k]) throw ValidationError("build_pair_model: ambiguous dressed-state assignment");
    used[k] = 1;
    assign[b] = static_cast<int>(k);
  }
  m.E.resize(16);
  m.S.resize(16, 16);
  m.N.resize(16);
  for (int b = 0; b < 16; ++b) {
    m.E(b) = es.eigenvalues()(assign[b]);
    cplx ph = V(b, assign[b]);
    m.S.col(b) = V.col(assign[b]) * (std::conj(ph) / std::abs(ph));
    m.N(b) = b / 4 + b % 4;
  }
  m.Bc = m.S.adjoint() * kron(m.bc, I4) * m.S;
  m.Bt = m.S.adjoint() * kron(I4, m.bt) * m.S;
  for (int k = 0; k < 4; ++k) {
    m.omega_bar_t += (m.E(4 * k + 1) - m.E(4 * k)) / 4;
    m.omega_bar_c += (m.E(4 + k) - m.E(k)) / 4;
  }
  m.disp_c = charge_dispersion(c).domega;
  m.disp_t = charge_dispersion(t).domega;
  return m;
}

// ------------------------------------------------------------------ pulses

struct Envelope {
  double tg = 0, ts = 0, sigma = 1;  // ramp length, plateau length, Gaussian width

  static Envelope gaussian(double total) { return {total / 2, 0, total / 8}; }
  static Envelope gaussian_square(double tg, double ts, double sigma) { return {tg, ts, sigma}; }
  double duration() const { return 2 * tg + ts; }
  double chi() const { return std::exp(-0.5 * tg * tg / (sigma * sigma)); }
  double ramp(double u) const {  // u in [0, tg], rising
    double x = (u - tg) / sigma, c = chi();
    return (std::exp(-0.5 * x * x) - c) / (1 - c);
  }
  double operator()(double t) const {
    if (t <= 0 || t >= duration()) return 0.0;
    if (t <= tg) return ramp(t);
    if (t < tg + ts) return 1.0;
    return ramp(duration() - t);
  }
  double area() const {
    const int n = 20000;
    double s = 0;
    for (int k = 0; k < n; ++k) s += ramp((k + 0.5) * tg / n);
    return 2 * s * tg / n + ts;
  }
};

// Rotating frame at `carrier` with the secular drive term only.
struct RotatingSystem {
  RVec K;  // diagonal frame Hamiltonian E - carrier * N
  Mat V;   // drive operator for unit amplitude
  Mat H(double a) const { return Mat(K.cast<cplx>().asDiagonal()) + a * V; }
};

inline RotatingSystem rotating_system(const RVec& E, const RVec& N, const Mat& B, double carrier, double phase) {
  const int D = static_cast<int>(E.size());
  Mat Bm = Mat::Zero(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      if (std::abs(N(i) - (N(j) - 1)) < 0.5) Bm(i, j) = B(i, j);
  RotatingSystem s;
  s.K = E - carrier * N;
  s.V = 0.5 * (std::exp(-kI * phase) * Bm + std::exp(kI * phase) * Bm.adjoint());
  return s;
}

inline RVec level_numbers(int d) { return RVec::LinSpaced(d, 0, d - 1); }

inline Mat to_interaction(const Mat& U, const RVec& K, double t0, double t1) {
  Vec l = (kI * K.cast<cplx>() * t1).array().exp();
  Vec r = (-kI * K.cast<cplx>() * t0).array().exp();
  return l.asDiagonal() * U * r.asDiagonal();
}

struct SimTolerance {
  double rtol = 1e-10;
  double atol = 1e-12;
};

// Ramp propagators sampled at local times in [0, tg]; rising or falling.
inline std::vector<Mat> ramp_samples(const RotatingSystem& s, double a, const Envelope& env, bool rising,
                                     const std::vector<double>& times, const SimTolerance& tol = {}) {
  const int D = static_cast<int>(s.K.size());
  num::MatrixOde ode;
  ode.dim = D;
  ode.rtol = tol.rtol;
  ode.atol = tol.atol;
  Vec kd = s.K.cast<cplx>();
  Mat aV = a * s.V;
  ode.rhs = [&](double t, const Mat& U, Mat& dU) {
    double f = rising ? env.ramp(t) : env.ramp(env.tg - t);
    dU.noalias() = -kI * (kd.asDiagonal() * U);
    if (f != 0.0) dU.noalias() += (-kI * f) * (aV * U);
  };
  return ode.solve(Mat::Identity(D, D), 0.0, times);
}

inline Mat ramp_propagator(const RotatingSystem& s, double a, const Envelope& env, bool rising,
                           const SimTolerance& tol = {}) {
  if (env.tg <= 0) return Mat::Identity(s.K.size(), s.K.size());
  // Integration drift is removed by projecting back onto the unitaries.
  return polar_unitary(ramp_samples(s, a, env, rising, {env.tg}, tol).back());
}

// exp(-i H t) for a fixed Hermitian H via its eigendecomposition.
struct HermitianPropagator {
  Mat W;
  RVec w;
  explicit HermitianPropagator(const Mat& H) {
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    W = es.eigenvectors();
    w = es.eigenvalues();
  }
  Mat at(double t) const {
    Vec ph = (-kI * w.cast<cplx>() * t).array().exp();
    return W * ph.asDiagonal() * W.adjoint();
  }
};

// Rotating-frame propagator of a full pulse: ramps by ODE, plateau exact.
inline Mat pulse_propagator(const RotatingSystem& s, double a, const Envelope& env, const SimTolerance& tol = {}) {
  Mat U = ramp_propagator(s, a, env, true, tol);
  if (env.ts > 0) U = HermitianPropagator(s.H(a)).at(env.ts) * U;
  return ramp_propagator(s, a, env, false, tol) * U;
}

// Local propagator at each requested time in [0, duration].
inline std::vector<Mat> pulse_samples(const RotatingSystem& s, double a, const Envelope& env,
                                      const std::vector<double>& times, const SimTolerance& tol = {}) {
  std::vector<double> rise, fall;
  for (double t : times) {
    if (t <= env.tg) rise.push_back(std::max(t, 0.0));
    else if (t > env.tg + env.ts) fall.push_back(std::min(t, env.duration()) - env.tg - env.ts);
  }
  std::vector<double> rise_q = rise;
  rise_q.push_back(env.tg);
  auto R = ramp_samples(s, a, env, true, rise_q, tol);
  Mat Urise = R.back();
  HermitianPropagator plat(s.H(a));
  Mat Uplat = Urise;
  if (env.ts > 0) Uplat = plat.at(env.ts) * Urise;
  std::vector<Mat> F;
  if (!fall.empty()) F = ramp_samples(s, a, env, false, fall, tol);
  std::vector<Mat> out;
  size_t ir = 0, jf = 0;
  for (double t : times) {
    if (t <= env.tg) out.push_back(R[ir++]);
    else if (t <= env.tg + env.ts) out.push_back(plat.at(t - env.tg) * Urise);
    else out.push_back(F[jf++] * Uplat);
  }
  return out;
}

// ------------------------------------------------------------------ noise

struct NoiseParams {
  double T1 = INFINITY;  // ns
  double T2 = INFINITY;  // ns
  bool enabled() const { return std::isfinite(T1) || std::isfinite(T2); }
};

// Weighted dephasing sqrt(2/T2) n and cascade damping sqrt(k/T1)|k-1><k|.
inline std::vector<Mat> transmon_jumps(const NoiseParams& n, int d = 4) {
  std::vector<Mat> out;
  if (std::isfinite(n.T2)) out.push_back(std::sqrt(2.0 / n.T2) * Mat(level_numbers(d).cast<cplx>().asDiagonal()));
  if (std::isfinite(n.T1))
    for (int k = 1; k < d; ++k) {
      Mat A = Mat::Zero(d, d);
      A(k - 1, k) = std::sqrt(k / n.T1);
      out.push_back(A);
    }
  return out;
}

inline std::vector<Mat> pair_jumps(const NoiseParams& n) {
  std::vector<Mat> out;
  const Mat I4 = Mat::Identity(4, 4);
  for (const auto& L : transmon_jumps(n)) {
    out.push_back(kron(L, I4));
    out.push_back(kron(I4, L));
  }
  return out;
}

inline Mat dissipator(const std::vector<Mat>& Ls, int D) {
  const Mat I = Mat::Identity(D, D);
  Mat S = Mat::Zero(D * D, D * D);
  for (const auto& L : Ls) {
    Mat LdL = L.adjoint() * L;
    S += kron(L.conjugate(), L) - 0.5 * kron(I, LdL) - 0.5 * kron(LdL.transpose(), I);
  }
  return S;
}

inline Mat lindbladian(const Mat& H, const std::vector<Mat>& Ls) {
  const int D = static_cast<int>(H.rows());
  const Mat I = Mat::Identity(D, D);
  return -kI * (kron(I, H) - kron(H.transpose(), I)) + dissipator(Ls, D);
}

// S <- Ad(U) S, column by column as rho -> U rho U^dag.
inline void apply_ad_left(const Mat& U, Mat& S) {
  const int D = static_cast<int>(U.rows());
  Mat tmp(D, D);
  for (int j = 0; j < S.cols(); ++j) {
    Eigen::Map<Mat> rho(S.col(j).data(), D, D);
    tmp.noalias() = U * rho;
    rho.noalias() = tmp * U.adjoint();
  }
}

// Ad of a diagonal unitary with entries `d`, on the left or right.
inline void apply_diag_ad_left(const Vec& d, Mat& S) {
  const int D = static_cast<int>(d.size());
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < D; ++i) S.row(i + D * j) *= d(i) * std::conj(d(j));
}
inline void apply_diag_ad_right(const Vec& d, Mat& S) {
  const int D = static_cast<int>(d.size());
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < D; ++i) S.col(i + D * j) *= d(i) * std::conj(d(j));
}
inline Vec frame_phases(const RVec& K, double t) { return (kI * K.cast<cplx>() * t).array().exp(); }

struct ChannelSettings {
  double dt = 0.5;  // Strang step on the ramps (ns)
  SimTolerance tol;
};

// Channel of a pulse in its rotating frame, local time 0 .. duration.
// Ramps: e^{D h/2} Ad(U_k) e^{D h/2} with exact unitary steps from the ODE;
// plateau: exact exponential of the full Liouvillian.
inline Mat pulse_channel_local(const RotatingSystem& s, double a, const Envelope& env, const std::vector<Mat>& Ls,
                               const ChannelSettings& cs = {}) {
  const int D = static_cast<int>(s.K.size());
  Mat S = Mat::Identity(D * D, D * D);
  if (Ls.empty()) return unitary_superop(pulse_propagator(s, a, env, cs.tol));
  const Mat Dm = dissipator(Ls, D);
  auto ramp = [&](bool rising) {
    if (env.tg <= 0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(env.tg / cs.dt - 1e-9)));
    const double h = env.tg / n;
    std::vector<double> grid(n + 1);
    for (int k = 0; k <= n; ++k) grid[k] = k * h;
    auto Us = ramp_samples(s, a, env, rising, grid, cs.tol);
    Mat half = (Dm * (h / 2)).exp();
    Eigen::SparseMatrix<cplx> Ed = half.sparseView(1e-300, 1e-16 / std::max(1.0, half.cwiseAbs().maxCoeff()));
    Mat tmp;
    for (int k = 0; k < n; ++k) {
      tmp = Ed * S;
      // Nearest unitary: keeps the map trace preserving to rounding.
      apply_ad_left(polar_unitary(Us[k + 1] * Us[k].adjoint()), tmp);
      S = Ed * tmp;
    }
  };
  ramp(true);
  if (env.ts > 0) S = (lindbladian(s.H(a), Ls) * env.ts).exp() * S;
  ramp(false);
  return S;
}

inline Mat idle_channel(const std::vector<Mat>& Ls, int D, double t) {
  if (Ls.empty() || t == 0) return Mat::Identity(D * D, D * D);
  return (dissipator(Ls, D) * t).exp();
}

// ------------------------------------------------------ phases and targets

inline std::array<double, 4> block_angles(const Mat& U) {
  std::array<double, 4> a{};
  for (int c = 0; c < 4; ++c) a[c] = 2 * std::atan2(std::abs(U(4 * c, 4 * c + 1)), std::abs(U(4 * c, 4 * c)));
  return a;
}

// Blocks Rx01(s_c phi_c) with the rotation senses of the CR drive.
inline Mat cr_target(const std::array<double, 4>& phi) {
  static const int sense[4] = {-1, 1, -1, -1};
  Mat U = Mat::Zero(16, 16);
  for (int c = 0; c < 4; ++c) U.block(4 * c, 4 * c, 4, 4) = rx_two_level(4, 0, sense[c] * phi[c]);
  return U;
}

struct LocalPhases {
  std::array<double, 4> control{}, target{};
  double fidelity = 0;
  Mat P() const {
    Vec a(4), b(4);
    for (int k = 0; k < 4; ++k) {
      a(k) = std::exp(kI * control[k]);
      b(k) = std::exp(kI * target[k]);
    }
    return kron(Mat(a.asDiagonal()), Mat(b.asDiagonal()));
  }
};

// Maximize |Tr((P U_sim)^dag U_target)| over P = diag(e^{i a_c}) x diag(e^{i b_t})
// by exact coordinate ascent; gauge fixed by a_0 = 0.
inline LocalPhases optimize_local_phases(const Mat& Us, const Mat& Ut) {
  if (Us.rows() != 16 || Ut.rows() != 16) throw DimensionError("optimize_local_phases: expects 16 x 16");
  Mat M = Us * Ut.adjoint();
  Eigen::Matrix4cd m;
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 4; ++t) m(c, t) = M(4 * c + t, 4 * c + t);
  std::array<double, 4> a{}, b{};
  for (int t = 0; t < 4; ++t) b[t] = -std::arg(m(0, t));
  for (int c = 0; c < 4; ++c) {
    cplx z = 0;
    for (int t = 0; t < 4; ++t) z += std::exp(kI * b[t]) * m(c, t);
    a[c] = -std::arg(z);
  }
  auto total = [&] {
    cplx z = 0;
    for (int c = 0; c < 4; ++c)
      for (int t = 0; t < 4; ++t) z += std::exp(kI * (a[c] + b[t])) * m(c, t);
    return z;
  };
  double prev = -1;
  for (int it = 0; it < 5000; ++it) {
    for (int c = 0; c < 4; ++c) {
      cplx A = 0;
      for (int t = 0; t < 4; ++t) A += std::exp(kI * b[t]) * m(c, t);
      cplx rest = total() - std::exp(kI * a[c]) * A;
      a[c] = std::abs(rest) > 1e-14 ? std::arg(rest) - std::arg(A) : -std::arg(A);
    }
    for (int t = 0; t < 4; ++t) {
      cplx A = 0;
      for (int c = 0; c < 4; ++c) A += std::exp(kI * a[c]) * m(c, t);
      cplx rest = total() - std::exp(kI * b[t]) * A;
      b[t] = std::abs(rest) > 1e-14 ? std::arg(rest) - std::arg(A) : -std::arg(A);
    }
    double now = std::abs(total());
    if (std::abs(now - prev) < 1e-15) break;
    prev = now;
  }
  LocalPhases r;
  const double g = a[0];
  for (int k = 0; k < 4; ++k) {
    r.control[k] = wrap_angle(a[k] - g);
    r.target[k] = wrap_angle(b[k] + g);
  }
  r.fidelity = average_gate_fidelity_unitary(r.P() * Us, Ut);
  return r;
}

// ------------------------------------------------------------ calibration

struct CrSettings {
  double amplitude = mhz(50);
  double tg = 36;
  double sigma = 9;
  double phase = 0;
  bool charge_detuning = true;
  double scan_step = 10;
  double scan_max = 4000;
  SimTolerance tol;
};

inline RotatingSystem cr_system(const PairModel& m, const CrSettings& cs) {
  double carrier = m.omega_bar_t + (cs.charge_detuning ? m.disp_t[0] : 0.0);
  return rotating_system(m.E, m.N, m.Bc, carrier, cs.phase);
}

// Interaction-picture CR propagators for a family of plateau lengths.
struct CrFamily {
  RotatingSystem sys;
  double amplitude;
  CrSettings cs;
  Mat rise, fall;
  HermitianPropagator plateau;

  CrFamily(const PairModel& m, const CrSettings& s, double sign = 1.0)
      : sys(cr_system(m, s)),
        amplitude(sign * s.amplitude),
        cs(s),
        rise(ramp_propagator(sys, amplitude, Envelope{s.tg, 0, s.sigma}, true, s.tol)),
        fall(ramp_propagator(sys, amplitude, Envelope{s.tg, 0, s.sigma}, false, s.tol)),
        plateau(sys.H(amplitude)) {}

  Envelope envelope(double ts) const { return {cs.tg, ts, cs.sigma}; }
  Mat local(double ts) const { return fall * plateau.at(ts) * rise; }
  Mat interaction(double ts, double t0 = 0.0) const {
    return to_interaction(local(ts), sys.K, t0, t0 + 2 * cs.tg + ts);
  }
};

struct CrCalibration {
  double tau_s = 0, tau = 0;
  std::array<double, 4> phi_extracted{}, phi_fit{};
  double fidelity = 0;  // to the fitted U_CR after local phases
  LocalPhases phases;
  Mat U;  // interaction picture, t0 = 0
};

inline double calibrate_cr_duration(const PairModel& m, const CrSettings& cs, double* tau_s_out = nullptr) {
  CrFamily fam(m, cs);
  auto f = [&](double ts) {
    auto a = block_angles(fam.interaction(ts));
    return a[0] + a[1] - kPi;
  };
  double lo = 0, flo = f(0);
  if (flo > 0) throw ConvergenceError("CR calibration: rotation already exceeds pi at zero plateau");
  for (double hi = cs.scan_step; hi <= cs.scan_max; hi += cs.scan_step) {
    double fhi = f(hi);
    if (fhi >= 0) {
      double ts = num::brent_root(f, lo, hi, 1e-9);
      if (tau_s_out) *tau_s_out = ts;
      return ts + 2 * cs.tg;
    }
    lo = hi;
  }
  throw ConvergenceError("CR calibration: phi_0 + phi_1 never reaches pi (no entangling rate)");
}

inline CrCalibration calibrate_cr(const PairModel& m, const CrSettings& cs) {
  CrCalibration r;
  r.tau = calibrate_cr_duration(m, cs, &r.tau_s);
  CrFamily fam(m, cs);
  r.U = fam.interaction(r.tau_s);
  r.phi_extracted = block_angles(r.U);
  auto obj = [&](const std::vector<double>& p) {
    return 1.0 - optimize_local_phases(r.U, cr_target({p[0], p[1], p[2], p[3]})).fidelity;
  };
  auto best = num::nelder_mead(obj, {r.phi_extracted.begin(), r.phi_extracted.end()}, 0.02, 1e-10);
  for (int k = 0; k < 4; ++k) r.phi_fit[k] = best[k];
  r.phases = optimize_local_phases(r.U, cr_target(r.phi_fit));
  r.fidelity = r.phases.fidelity;
  return r;
}

// Single-transmon Gaussian pulse on levels (n, n+1) in the transmon's own frame.
struct LocalPulseSpec {
  int level = 0;
  double angle = kPi;     // signed rotation angle
  double duration = 100;  // total Gaussian length
  double phase = 0;       // 0 for x, pi/2 for y
  double detuning = 0;    // added to the carrier
};

struct LocalPulse {
  LocalPulseSpec spec;
  RotatingSystem sys;
  Envelope env;
  double amplitude = 0;  // calibrated, signed
  Mat U;                 // interaction picture, 0 .. duration
};

inline RotatingSystem local_system(const RVec& E, const Mat& b, int level, double phase, double detuning) {
  const double carrier = E(level + 1) - E(level) + detuning;
  return rotating_system(E, level_numbers(static_cast<int>(E.size())), b, carrier, phase);
}

inline LocalPulse calibrate_local_pulse(const RVec& E, const Mat& b, const LocalPulseSpec& spec,
                                        const SimTolerance& tol = {}) {
  LocalPulse p;
  p.spec = spec;
  p.sys = local_system(E, b, spec.level, spec.phase, spec.detuning);
  p.env = Envelope::gaussian(spec.duration);
  const int n = spec.level;
  const double th = std::abs(spec.angle);
  const double a0 = th / (p.env.area() * std::abs(b(n, n + 1)));
  auto mism = [&](double a) {
    Mat U = pulse_propagator(p.sys, a, p.env, tol);
    double e1 = std::abs(U(n + 1, n)) - std::sin(th / 2), e0 = std::abs(U(n, n)) - std::cos(th / 2);
    return e1 * e1 + e0 * e0;
  };
  double a = num::brent_minimize(mism, 0.7 * a0, 1.4 * a0, 1e-13, 16);
  p.amplitude = spec.angle < 0 ? -a : a;
  p.U = to_interaction(pulse_propagator(p.sys, p.amplitude, p.env, tol), p.sys.K, 0, spec.duration);
  return p;
}

inline Mat local_rotation_target(const LocalPulseSpec& s, int d = 4) {
  return rx_two_level(d, s.level, s.angle, s.phase);
}

// --------------------------------------------------------------- ECR gate

struct EcrSettings {
  CrSettings cr;
  double echo_duration = 100;
  bool charge_detuning = true;
};

struct EcrCalibration {
  EcrSettings settings;
  CrCalibration cr;
  LocalPulse echo;
  Mat U;  // full sequence, interaction picture
  LocalPhases phases;
  double fidelity = 0;
  double leakage_max = 0;
  std::array<double, 2> residual{};  // 0 <-> 1 target mixing for control 2, 3
  double duration() const { return 2 * cr.tau + 2 * settings.echo_duration; }
};

inline LocalPulse calibrate_echo(const PairModel& m, const EcrSettings& s) {
  LocalPulseSpec e;
  e.level = 0;
  e.angle = kPi;
  e.duration = s.echo_duration;
  e.detuning = s.charge_detuning ? m.disp_c[0] : 0.0;
  return calibrate_local_pulse(m.Ec, m.bc, e, s.cr.tol);
}

inline Mat ecr_target(double theta = kPi) { return ecr_matrix(4, theta); }

// CR(+) -> echo -> CR(-) -> echo, CR pulses in the absolute-time interaction
// picture, each echo in its own frame on the control only.
inline EcrCalibration calibrate_ecr(const PairModel& m, const EcrSettings& s) {
  EcrCalibration r;
  r.settings = s;
  CrSettings crs = s.cr;
  crs.charge_detuning = s.charge_detuning;
  r.cr = calibrate_cr(m, crs);
  r.echo = calibrate_echo(m, s);
  const double tau = r.cr.tau, tx = s.echo_duration;
  CrFamily plus(m, crs, 1.0), minus(m, crs, -1.0);
  Mat X = kron(r.echo.U, Mat::Identity(4, 4));
  r.U = X * minus.interaction(r.cr.tau_s, tau + tx) * X * plus.interaction(r.cr.tau_s, 0.0);
  r.phases = optimize_local_phases(r.U, ecr_target());
  r.fidelity = r.phases.fidelity;
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 2; ++t) {
      double leak = 0;
      for (int c2 = 0; c2 < 4; ++c2)
        for (int t2 = 2; t2 < 4; ++t2) leak += std::norm(r.U(4 * c2 + t2, 4 * c + t));
      r.leakage_max = std::max(r.leakage_max, leak);
    }
  for (int k = 0; k < 2; ++k) r.residual[k] = std::norm(r.U(4 * (k + 2) + 1, 4 * (k + 2)));
  return r;
}

// Population time series for initial states |c>|0>, rows (t, c, p_0 .. p_15).
inline std::vector<std::array<double, 18>> ecr_population_traces(const PairModel& m, const EcrCalibration& cal,
                                                                 double dt = 2.0) {
  CrSettings crs = cal.settings.cr;
  crs.charge_detuning = cal.settings.charge_detuning;
  const double tau = cal.cr.tau, tx = cal.settings.echo_duration;
  CrFamily plus(m, crs, 1.0), minus(m, crs, -1.0);
  Envelope crenv = plus.envelope(cal.cr.tau_s);
  struct Seg {
    const RotatingSystem* sys;
    double amp, t0, len;
    Envelope env;
    bool echo;
  };
  std::vector<Seg> segs = {{&plus.sys, plus.amplitude, 0, tau, crenv, false},
                           {&cal.echo.sys, cal.echo.amplitude, tau, tx, cal.echo.env, true},
                           {&minus.sys, minus.amplitude, tau + tx, tau, crenv, false},
                           {&cal.echo.sys, cal.echo.amplitude, 2 * tau + tx, tx, cal.echo.env, true}};
  std::vector<std::array<double, 18>> rows;
  Mat before = Mat::Identity(16, 16);
  const Mat I4 = Mat::Identity(4, 4);
  for (size_t k = 0; k < segs.size(); ++k) {
    const Seg& s = segs[k];
    std::vector<double> ts;
    for (double t = 0; t < s.len - 1e-9; t += dt) ts.push_back(t);
    ts.push_back(s.len);
    auto Us = pulse_samples(*s.sys, s.amp, s.env, ts, crs.tol);
    for (size_t i = 0; i < ts.size(); ++i) {
      if (k > 0 && i == 0) continue;
      Mat W = s.echo ? Mat(kron(Us[i], I4) * before)
                     : Mat(Us[i] * frame_phases(s.sys->K, -s.t0).asDiagonal() * before);
      for (int c = 0; c < 4; ++c) {
        std::array<double, 18> row{};
        row[0] = s.t0 + ts[i];
        row[1] = c;
        for (int j = 0; j < 16; ++j) row[2 + j] = std::norm(W(j, 4 * c));
        rows.push_back(row);
      }
    }
    Mat Uend = Us.back();
    before = s.echo ? Mat(kron(to_interaction(Uend, s.sys->K, 0, s.len), I4) * before)
                    : Mat(to_interaction(Uend, s.sys->K, s.t0, s.t0 + s.len) * before);
  }
  return rows;
}

// Noisy ECR channel (256 x 256 superoperator) with the unitary-mode local
// phase correction applied afterwards.
inline Mat ecr_channel(const PairModel& m, const EcrCalibration& cal, const NoiseParams& noise,
                       const ChannelSettings& chs = {}) {
  CrSettings crs = cal.settings.cr;
  crs.charge_detuning = cal.settings.charge_detuning;
  const double tau = cal.cr.tau, tx = cal.settings.echo_duration;
  const auto Ls = pair_jumps(noise);
  CrFamily plus(m, crs, 1.0), minus(m, crs, -1.0);
  Envelope env = plus.envelope(cal.cr.tau_s);

  Mat Sp = pulse_channel_local(plus.sys, plus.amplitude, env, Ls, chs);
  apply_diag_ad_left(frame_phases(plus.sys.K, tau), Sp);
  Mat Sm = pulse_channel_local(minus.sys, minus.amplitude, env, Ls, chs);
  apply_diag_ad_left(frame_phases(minus.sys.K, 2 * tau + tx), Sm);
  apply_diag_ad_right(frame_phases(minus.sys.K, -(tau + tx)), Sm);

  const auto Lq = transmon_jumps(noise);
  Mat Sc = pulse_channel_local(cal.echo.sys, cal.echo.amplitude, cal.echo.env, Lq, chs);
  apply_diag_ad_left(frame_phases(cal.echo.sys.K, tx), Sc);
  Mat Sx = superop_tensor(Sc, 4, idle_channel(Lq, 4, tx), 4);

  Mat S = Sx * Sm * Sx * Sp;
  apply_ad_left(cal.phases.P(), S);
  return S;
}

// --------------------------------------------------------------- rates

// Pauli rates w_PQ (H = sum w_PQ/2 P x Q) of the block-diagonalised drive
// Hamiltonian restricted to the computational subspace.
inline std::map<std::string, double> effective_rates(const PairModel& m, double amplitude, const CrSettings& cs = {}) {
  RotatingSystem s = cr_system(m, cs);
  Eigen::SelfAdjointEigenSolver<Mat> es(s.H(amplitude));
  const int idx[4] = {0, 1, 4, 5};
  std::vector<std::pair<double, int>> weight;
  for (int k = 0; k < 16; ++k) {
    double w = 0;
    for (int i : idx) w += std::norm(es.eigenvectors()(i, k));
    weight.push_back({-w, k});
  }
  std::sort(weight.begin(), weight.end());
  Mat Pv(4, 4);
  RVec ev(4);
  for (int j = 0; j < 4; ++j) {
    int k = weight[j].second;
    ev(j) = es.eigenvalues()(k);
    for (int i = 0; i < 4; ++i) Pv(i, j) = es.eigenvectors()(idx[i], k);
  }
  Eigen::JacobiSVD<Mat> svd(Pv, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat W = svd.matrixU() * svd.matrixV().adjoint();
  Mat Heff = W * ev.cast<cplx>().asDiagonal() * W.adjoint();
  std::map<char, Mat> P;
  P['I'] = Mat::Identity(2, 2);
  P['X'] = Mat::Zero(2, 2);
  P['X'](0, 1) = P['X'](1, 0) = 1;
  P['Y'] = Mat::Zero(2, 2);
  P['Y'](0, 1) = -kI;
  P['Y'](1, 0) = kI;
  P['Z'] = Mat::Identity(2, 2);
  P['Z'](1, 1) = -1;
  std::map<std::string, double> out;
  for (char a : std::string("IZ"))
    for (char b : std::string("IXYZ")) out[std::string{a, b}] = (Heff * kron(P[a], P[b])).trace().real() / 2;
  return out;
}

// The parameter set of the reference device.
struct DeviceConfig {
  double f_c = 6.3, f_t = 6.1;             // GHz
  double alpha_c = -0.31, alpha_t = -0.30;  // GHz
  double J = 1.8e-3;                        // GHz
};

inline PairModel build_device(const DeviceConfig& d) {
  return build_pair_model(make_transmon(ghz(d.f_c), ghz(d.alpha_c)), make_transmon(ghz(d.f_t), ghz(d.alpha_t)),
                          ghz(d.J));
}

}  // namespace qd::tm

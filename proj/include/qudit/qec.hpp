// Dephasing-correcting ququart code: a qubit stored in levels 0..3 of the
// data transmon, one ECR to an ancilla, and a quantum-controlled recovery.
#pragma once

#include "transmon.hpp"

namespace qd::qec {

inline Mat ry_level(int n, double theta, int d = 4) { return rx_two_level(d, n, theta, kPi / 2); }

struct PulseStep {
  int level;
  double angle;
};

// Time-ordered rotation sequences.
inline const std::vector<PulseStep>& encode_sequence() {
  static const std::vector<PulseStep> s = {{1, kPi}, {2, kPi / 3}, {0, -2 * kPi / 3}, {1, -kPi}};
  return s;
}
inline const std::vector<PulseStep>& recover_sequence() {
  static const std::vector<PulseStep> s = {{1, kPi}, {2, -2 * kPi / 3}, {0, kPi / 3}, {1, -kPi}};
  return s;
}
inline std::vector<PulseStep> decode_sequence() {
  std::vector<PulseStep> s;
  for (auto it = encode_sequence().rbegin(); it != encode_sequence().rend(); ++it) s.push_back({it->level, -it->angle});
  return s;
}

inline Mat sequence_unitary(const std::vector<PulseStep>& seq) {
  Mat U = Mat::Identity(4, 4);
  for (const auto& p : seq) U = ry_level(p.level, p.angle) * U;
  return U;
}

struct CodeSpec {
  Vec logical0, logical1, error0, error1;
  Mat UE, UD, UR;
};

inline Mat number_op(int d = 4) { return Mat(tm::level_numbers(d).cast<cplx>().asDiagonal()); }

inline CodeSpec build_code() {
  CodeSpec c;
  c.UE = sequence_unitary(encode_sequence());
  c.UD = c.UE.adjoint();
  c.UR = sequence_unitary(recover_sequence());
  c.logical0 = c.UE.col(0);
  c.logical1 = c.UE.col(1);
  // n|psi_L> / sqrt(3) = (sqrt(3)/2)|psi_L> - (1/2)|psi_e>
  const Mat n = number_op();
  c.error0 = std::sqrt(3.0) * c.logical0 - 2.0 / std::sqrt(3.0) * (n * c.logical0);
  c.error1 = std::sqrt(3.0) * c.logical1 - 2.0 / std::sqrt(3.0) * (n * c.logical1);
  return c;
}

// Largest violation of the Knill-Laflamme conditions for errors {I, n}.
inline double knill_laflamme_violation(const CodeSpec& c) {
  const std::vector<Mat> E = {Mat::Identity(4, 4), number_op()};
  double worst = 0;
  for (const auto& Ek : E)
    for (const auto& Ej : E) {
      Mat M = Ek * Ej.adjoint();
      cplx a = c.logical0.dot(M * c.logical0), b = c.logical1.dot(M * c.logical1);
      cplx x = c.logical0.dot(M * c.logical1);
      worst = std::max({worst, std::abs(a - b), std::abs(x)});
    }
  return worst;
}

// rho_{mm'} -> rho_{mm'} exp(-(m - m')^2 t / T2)
inline QuantumChannel dephase_channel(double t, double T2, int d = 4) {
  if (t < 0) throw ValidationError("dephase_channel: t must be >= 0");
  QuantumChannel ch = QuantumChannel::identity(d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) ch.superop(i + d * j, i + d * j) = std::exp(-double((i - j) * (i - j)) * t / T2);
  return ch;
}

// Free evolution of one ququart: closed form without damping, else Lindblad.
inline Mat idle_superop(double t, const tm::NoiseParams& noise, int d = 4) {
  if (!std::isfinite(noise.T1)) {
    if (!std::isfinite(noise.T2)) return Mat::Identity(d * d, d * d);
    return dephase_channel(t, noise.T2, d).superop;
  }
  return tm::idle_channel(tm::transmon_jumps(noise, d), d, t);
}

// Unprotected qubit: levels 0, 1 with the same jump operators.
inline double bare_fidelity(double t, const tm::NoiseParams& noise) {
  Mat S = idle_superop(t, noise, 2);
  return (2.0 * S.trace().real() / 4.0 + 1.0) / 3.0;
}

enum class CycleMode { Ideal, PulseLevel };
inline const char* mode_name(CycleMode m) { return m == CycleMode::Ideal ? "ideal" : "pulse"; }

struct QecSettings {
  double T2 = 200e3;      // ns
  double t_meas = 675.0;  // ns
  double pi_duration = 100.0;
  bool charge_detuning = true;
  tm::EcrSettings ecr;
  tm::ChannelSettings channel{0.25, {}};
};

// Correction on the data qudit after the ECR, compensating the phase the
// ECR imprints on control levels 0 and 1.
inline Mat ecr_data_phase() {
  Vec d(4);
  d << -kI, kI, 1, 1;
  return kron(Mat(d.asDiagonal()), Mat::Identity(4, 4));
}

struct CalibratedStep {
  tm::LocalPulse pulse;
  Mat P;  // diagonal phase correction after the pulse
};

// Calibrated pulse-level hardware for the cycle (independent of noise).
struct PulseHardware {
  tm::PairModel model;
  tm::EcrCalibration ecr;
  std::vector<CalibratedStep> encode, recover, decode;
  double ecr_duration() const { return ecr.duration(); }
};

inline std::vector<CalibratedStep> calibrate_sequence(const tm::PairModel& m, const std::vector<PulseStep>& seq,
                                                      const QecSettings& s) {
  std::vector<CalibratedStep> out;
  for (const auto& p : seq) {
    tm::LocalPulseSpec spec;
    spec.level = p.level;
    spec.angle = p.angle;
    spec.duration = s.pi_duration * std::abs(p.angle) / kPi;
    spec.phase = kPi / 2;
    spec.detuning = s.charge_detuning ? m.disp_c[p.level] : 0.0;
    CalibratedStep c{tm::calibrate_local_pulse(m.Ec, m.bc, spec, s.ecr.cr.tol), Mat()};
    Mat M = c.pulse.U * ry_level(p.level, p.angle).adjoint();
    Vec ph(4);
    for (int k = 0; k < 4; ++k) ph(k) = std::exp(-kI * std::arg(M(k, k)));
    c.P = ph.asDiagonal();
    out.push_back(c);
  }
  return out;
}

inline PulseHardware calibrate_hardware(const tm::PairModel& m, const QecSettings& s) {
  PulseHardware h;
  h.model = m;
  tm::EcrSettings es = s.ecr;
  es.charge_detuning = s.charge_detuning;
  h.ecr = tm::calibrate_ecr(m, es);
  h.encode = calibrate_sequence(m, encode_sequence(), s);
  h.recover = calibrate_sequence(m, recover_sequence(), s);
  h.decode = calibrate_sequence(m, decode_sequence(), s);
  return h;
}

inline Mat step_channel(const CalibratedStep& c, const tm::NoiseParams& noise, const tm::ChannelSettings& cs) {
  const auto& p = c.pulse;
  Mat S = tm::pulse_channel_local(p.sys, p.amplitude, p.env, tm::transmon_jumps(noise), cs);
  tm::apply_diag_ad_left(tm::frame_phases(p.sys.K, p.spec.duration), S);
  tm::apply_ad_left(c.P, S);
  return S;
}

inline Mat sequence_channel(const std::vector<CalibratedStep>& seq, const tm::NoiseParams& noise,
                            const tm::ChannelSettings& cs) {
  Mat S = Mat::Identity(16, 16);
  for (const auto& c : seq) S = step_channel(c, noise, cs) * S;
  return S;
}

// Superoperators of every gate in one correction cycle.
struct GateSet {
  CycleMode mode = CycleMode::Ideal;
  tm::NoiseParams noise;
  CodeSpec code;
  Mat SE, SR, SD;  // 16 x 16, data qudit
  Mat Secr;        // 256 x 256, data (control) x ancilla (target)
  double t_meas = 0;
  double gate_time = 0;  // duration of one cycle excluding free dephasing
};

inline GateSet ideal_gates(const tm::NoiseParams& noise) {
  GateSet g;
  g.mode = CycleMode::Ideal;
  g.noise = noise;
  g.code = build_code();
  g.SE = unitary_superop(g.code.UE);
  g.SR = unitary_superop(g.code.UR);
  g.SD = unitary_superop(g.code.UD);
  g.Secr = unitary_superop(ecr_data_phase() * ecr_matrix(4, kPi));
  return g;
}

inline GateSet pulse_gates(const PulseHardware& h, const tm::NoiseParams& noise, const QecSettings& s) {
  GateSet g;
  g.mode = CycleMode::PulseLevel;
  g.noise = noise;
  g.code = build_code();
  g.SE = sequence_channel(h.encode, noise, s.channel);
  g.SR = sequence_channel(h.recover, noise, s.channel);
  g.SD = sequence_channel(h.decode, noise, s.channel);
  g.Secr = tm::ecr_channel(h.model, h.ecr, noise, s.channel);
  tm::apply_ad_left(ecr_data_phase(), g.Secr);
  g.t_meas = s.t_meas;
  double seq = 0;
  for (const auto& c : h.decode) seq += c.pulse.spec.duration;
  for (const auto& c : h.encode) seq += c.pulse.spec.duration;
  g.gate_time = seq + h.ecr_duration() + s.t_meas;
  return g;
}

// rho (data x ancilla, 16 x 16) -> (S (x) id) rho for a 4-dim data superop S.
inline Mat apply_on_data(const Mat& S, const Mat& J) {
  Mat out = Mat::Zero(16, 16);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      Mat blk(4, 4);
      for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) blk(x, y) = J(4 * x + a, 4 * y + b);
      Mat r = unvec(S * vec(blk), 4);
      for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) out(4 * x + a, 4 * y + b) = r(x, y);
    }
  return out;
}

// Decode, couple to the ancilla in |1>, measurement idle, then recovery
// selected by the ancilla level (0: re-encode, >= 1: recover). The ancilla
// blocks are read off diagonally, which is the delayed-measurement form.
inline Mat decoded_to_data(const GateSet& g, const Mat& rho) {
  Mat rd = unvec(g.SD * vec(rho), 4);
  Mat anc = Mat::Zero(4, 4);
  anc(1, 1) = 1;
  Mat J = unvec(g.Secr * vec(kron(rd, anc)), 16);
  if (g.t_meas > 0) J = apply_on_data(idle_superop(g.t_meas, g.noise), J);
  Mat res = Mat::Zero(4, 4);
  for (int a = 0; a < 4; ++a) {
    Mat blk(4, 4);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) blk(x, y) = J(4 * x + a, 4 * y + a);
    res += unvec((a == 0 ? g.SE : g.SR) * vec(blk), 4);
  }
  return res;
}

// One cycle without the free dephasing, as a 16 x 16 data superop.
inline Mat cycle_superop(const GateSet& g) {
  Mat S(16, 16);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      Mat r = Mat::Zero(4, 4);
      r(i, j) = 1;
      S.col(i + 4 * j) = vec(decoded_to_data(g, r));
    }
  return S;
}

// Qubit view of a data superop: ideal encode, S, ideal decode, keep levels 0, 1.
inline Mat logical_superop(const Mat& S, const CodeSpec& c) {
  Mat out(4, 4);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      Mat r = Mat::Zero(4, 4);
      r(i, j) = 1;
      Mat res = unvec(S * vec(c.UE * r * c.UE.adjoint()), 4);
      res = c.UD * res * c.UD.adjoint();
      out.col(i + 2 * j) = vec(Mat(res.topLeftCorner(2, 2)));
    }
  return out;
}

inline double qubit_fidelity(const Mat& S2) { return (2.0 * S2.trace().real() / 4.0 + 1.0) / 3.0; }

// Qubit -> qubit channel of a single cycle preceded by tau_phi of dephasing.
inline QuantumChannel correction_cycle(const GateSet& g, double tau_phi) {
  return QuantumChannel(2, logical_superop(cycle_superop(g) * idle_superop(tau_phi, g.noise), g.code));
}

inline double cycle_fidelity(const GateSet& g, double tau_phi) {
  return qubit_fidelity(correction_cycle(g, tau_phi).superop);
}

// The same cycle for a physical input state, with the recovery applied as a
// controlled channel sum_a R_a (x) |a><a| . |a><a| and the ancilla traced out.
inline Mat cycle_physical(const GateSet& g, double tau_phi, const Mat& rho_qubit) {
  Mat rho = Mat::Zero(4, 4);
  rho.topLeftCorner(2, 2) = rho_qubit;
  rho = g.code.UE * rho * g.code.UE.adjoint();
  rho = unvec(idle_superop(tau_phi, g.noise) * vec(rho), 4);
  rho = unvec(g.SD * vec(rho), 4);
  Mat anc = Mat::Zero(4, 4);
  anc(1, 1) = 1;
  Mat J = unvec(g.Secr * vec(kron(rho, anc)), 16);
  if (g.t_meas > 0) J = unvec(superop_tensor(idle_superop(g.t_meas, g.noise), 4, Mat::Identity(16, 16), 4) * vec(J), 16);
  Mat ctrl = Mat::Zero(256, 256);
  for (int a = 0; a < 4; ++a) {
    Mat Pa = Mat::Zero(4, 4);
    Pa(a, a) = 1;
    ctrl += superop_tensor(a == 0 ? g.SE : g.SR, 4, unitary_superop(Pa), 4);
  }
  J = unvec(ctrl * vec(J), 16);
  Mat out = partial_trace_second(J, 4, 4);
  out = g.code.UD * out * g.code.UD.adjoint();
  return out.topLeftCorner(2, 2);
}

// Largest mismatch between the two constructions on a tomographically
// complete set of physical inputs.
inline double delayed_measurement_mismatch(const GateSet& g, double tau_phi) {
  const Mat S = correction_cycle(g, tau_phi).superop;
  std::vector<Vec> states;
  const double r = 1 / std::sqrt(2.0);
  states.push_back((Vec(2) << 1, 0).finished());
  states.push_back((Vec(2) << 0, 1).finished());
  states.push_back((Vec(2) << r, r).finished());
  states.push_back((Vec(2) << r, kI * r).finished());
  double worst = 0;
  for (const auto& psi : states) {
    Mat rho = psi * psi.adjoint();
    Mat a = unvec(S * vec(rho), 2), b = cycle_physical(g, tau_phi, rho);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ------------------------------------------------------------ sweeps

struct SweepRow {
  double tau_phi_over_T2, F_bare, F_corr;
  double error_reduction() const { return 1.0 - (1.0 - F_corr) / (1.0 - F_bare); }
};

inline std::vector<SweepRow> single_cycle_sweep(const GateSet& g, double T2, const std::vector<double>& grid) {
  const Mat C = cycle_superop(g);
  std::vector<SweepRow> rows;
  for (double x : grid) {
    double t = x * T2;
    rows.push_back({x, bare_fidelity(t, g.noise), qubit_fidelity(logical_superop(C * idle_superop(t, g.noise), g.code))});
  }
  return rows;
}

// tau_phi / T2 where the corrected error first drops below the bare error.
inline double break_even(const std::vector<SweepRow>& rows) {
  for (size_t k = 1; k < rows.size(); ++k) {
    double a = rows[k - 1].F_corr - rows[k - 1].F_bare, b = rows[k].F_corr - rows[k].F_bare;
    if (a < 0 && b >= 0) return rows[k - 1].tau_phi_over_T2 + (rows[k].tau_phi_over_T2 - rows[k - 1].tau_phi_over_T2) * (-a) / (b - a);
  }
  throw ConvergenceError("break_even: no crossing on the grid");
}

inline const SweepRow& max_reduction(const std::vector<SweepRow>& rows) {
  const SweepRow* best = &rows.front();
  for (const auto& r : rows)
    if (r.tau_phi_over_T2 > 0 && r.error_reduction() > best->error_reduction()) best = &r;
  return *best;
}

struct DecayFit {
  double T2_eff = 0, F_inf = 0;
  bool fitted = false;
  std::string notice;
};

// F(t) = (1 - F_inf) e^{-t/T} + F_inf with F_inf in [0.25, 1], T > 0.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& F) {
  DecayFit r;
  if (t.size() < 3) {
    r.notice = "fewer than 3 points, fit skipped";
    return r;
  }
  // Log-linear seed on F - min(F).
  const double fmin = *std::min_element(F.begin(), F.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    double y = F[k] - fmin;
    if (y <= 1e-12) continue;
    double ly = std::log(y);
    sx += t[k];
    sy += ly;
    sxx += t[k] * t[k];
    sxy += t[k] * ly;
    ++n;
  }
  double slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0;
  double T0 = slope < 0 ? -1.0 / slope : std::max(t.back(), 1.0);
  double F0 = std::clamp(fmin - 0.05, 0.26, 0.99);
  auto to_p = [](const std::vector<double>& q) { return std::pair{0.25 + 0.75 / (1 + std::exp(-q[0])), std::exp(q[1])}; };
  auto model = [&](double x, const std::vector<double>& q) {
    auto [Fi, T] = to_p(q);
    return (1 - Fi) * std::exp(-x / T) + Fi;
  };
  double u = (F0 - 0.25) / 0.75;
  auto q = num::least_squares(model, t, F, {std::log(u / (1 - u)), std::log(T0)});
  std::tie(r.F_inf, r.T2_eff) = to_p(q);
  r.fitted = true;
  return r;
}

struct RepeatedResult {
  std::vector<double> t, F;
  DecayFit fit;
};

// n_cycles corrections, each after dt_corr of free dephasing; cycle
// duration included on the time axis.
inline RepeatedResult repeated_cycles(const GateSet& g, double dt_corr, int n_cycles) {
  RepeatedResult r;
  const Mat step = cycle_superop(g) * idle_superop(dt_corr, g.noise);
  Mat S = Mat::Identity(16, 16);
  for (int n = 0; n <= n_cycles; ++n) {
    r.t.push_back(n * (dt_corr + g.gate_time));
    r.F.push_back(qubit_fidelity(logical_superop(S, g.code)));
    S = step * S;
  }
  r.fit = fit_decay(r.t, r.F);
  return r;
}

inline int cycles_in_window(const GateSet& g, double dt_corr, double window, int cap = 400) {
  return std::min(cap, static_cast<int>(std::floor(window / (dt_corr + g.gate_time))));
}

// Unprotected qubit sampled at the same times.
inline RepeatedResult bare_series(const tm::NoiseParams& noise, double dt, int n) {
  RepeatedResult r;
  for (int k = 0; k <= n; ++k) {
    r.t.push_back(k * dt);
    r.F.push_back(bare_fidelity(k * dt, noise));
  }
  r.fit = fit_decay(r.t, r.F);
  return r;
}

struct T1Point {
  double ratio, F_bare, F_corr;
};

struct T1Sweep {
  std::vector<T1Point> points;
  double break_even_ratio = NAN;
};

// Break-even T1/T2 at fixed tau_phi; `gates(noise)` builds the gate set.
inline T1Sweep t1_sweep(const std::function<GateSet(const tm::NoiseParams&)>& gates, double T2, double tau_phi,
                        const std::vector<double>& ratios) {
  T1Sweep s;
  for (double r : ratios) {
    tm::NoiseParams noise{r * T2, T2};
    GateSet g = gates(noise);
    s.points.push_back({r, bare_fidelity(tau_phi, noise), cycle_fidelity(g, tau_phi)});
  }
  for (size_t k = 1; k < s.points.size(); ++k) {
    double a = s.points[k - 1].F_corr - s.points[k - 1].F_bare, b = s.points[k].F_corr - s.points[k].F_bare;
    if (a < 0 && b >= 0) {
      s.break_even_ratio = s.points[k - 1].ratio + (s.points[k].ratio - s.points[k - 1].ratio) * (-a) / (b - a);
      return s;
    }
  }
  throw ConvergenceError("t1_sweep: no break-even crossing on the grid");
}

}  // namespace qd::qec

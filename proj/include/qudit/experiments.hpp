// Config-driven experiment runners shared by the command-line tool and the
// acceptance checks. Config units: GHz, MHz, ns.
#pragma once

#include <filesystem>
#include <iomanip>

#include "cost.hpp"
#include "csd.hpp"
#include "io.hpp"
#include "qec.hpp"
#include "random.hpp"

namespace qd::xp {

using io::Config;
using io::json;

// Relative paths in a config resolve against the config's directory.
inline std::string resolve(const std::string& config_path, const std::string& p) {
  namespace fs = std::filesystem;
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(config_path).parent_path() / p).lexically_normal().string();
}

inline tm::DeviceConfig device_from(const Config& c) {
  tm::DeviceConfig d;
  d.f_c = c.number("control_freq_ghz", d.f_c);
  d.f_t = c.number("target_freq_ghz", d.f_t);
  d.alpha_c = c.number("control_anharm_ghz", d.alpha_c);
  d.alpha_t = c.number("target_anharm_ghz", d.alpha_t);
  d.J = c.number("coupling_mhz", d.J * 1e3) * 1e-3;
  return d;
}

inline tm::EcrSettings ecr_from(const Config& c) {
  tm::EcrSettings s;
  s.cr.amplitude = tm::mhz(c.number("cr_amplitude_mhz", 50.0));
  s.cr.tg = c.number("cr_ramp_ns", 36.0);
  s.cr.sigma = c.number("cr_sigma_ns", s.cr.tg / 4);
  s.cr.tol.rtol = c.number("ode_rtol", 1e-10);
  s.cr.tol.atol = c.number("ode_atol", 1e-12);
  s.echo_duration = c.number("echo_duration_ns", 100.0);
  s.charge_detuning = c.flag("charge_detuning", true);
  s.cr.charge_detuning = s.charge_detuning;
  return s;
}

inline tm::ChannelSettings channel_from(const Config& c, const tm::EcrSettings& e) {
  tm::ChannelSettings s;
  s.dt = c.number("strang_dt_ns", 0.25);
  s.tol = e.cr.tol;
  return s;
}

inline std::vector<tm::NoiseParams> noise_list_from(const Config& c) {
  auto t1 = c.numbers("noise_t1_ns", {}), t2 = c.numbers("noise_t2_ns", {});
  if (t1.size() != t2.size()) throw ValidationError("config: noise_t1_ns and noise_t2_ns differ in length");
  std::vector<tm::NoiseParams> out;
  for (size_t k = 0; k < t1.size(); ++k) {
    if (!(t1[k] > 0 && t2[k] > 0)) throw ValidationError("config: T1 and T2 must be positive");
    out.push_back({t1[k], t2[k]});
  }
  return out;
}

inline qec::QecSettings qec_from(const Config& c) {
  qec::QecSettings s;
  s.ecr = ecr_from(c);
  s.channel = channel_from(c, s.ecr);
  s.charge_detuning = s.ecr.charge_detuning;
  s.T2 = c.number("t2_ns", 200e3);
  s.t_meas = c.number("t_meas_ns", 675.0);
  s.pi_duration = c.number("pi_pulse_ns", 100.0);
  if (!(s.T2 > 0) || s.t_meas < 0 || !(s.pi_duration > 0)) throw ValidationError("config: durations must be positive");
  return s;
}

inline const std::vector<std::string>& ecr_keys() {
  static const std::vector<std::string> k = {
      "control_freq_ghz", "target_freq_ghz", "control_anharm_ghz", "target_anharm_ghz", "coupling_mhz",
      "cr_amplitude_mhz", "cr_ramp_ns",      "cr_sigma_ns",        "ode_rtol",           "ode_atol",
      "echo_duration_ns", "charge_detuning", "strang_dt_ns",       "noise_t1_ns",        "noise_t2_ns"};
  return k;
}
inline std::vector<std::string> qec_keys() {
  auto k = ecr_keys();
  for (const char* s : {"t2_ns", "t1_ns", "t_meas_ns", "pi_pulse_ns", "modes", "sections", "bare_only", "sweep_grid",
                        "repeated_dt", "repeated_window_t2", "n_cycles", "t1_sweep_tau", "t1_grid_pulse",
                        "t1_grid_ideal"})
    k.push_back(s);
  return k;
}
inline const std::vector<std::string>& bench_keys() {
  static const std::vector<std::string> k = {"seed", "n_random", "hamiltonian_file", "evolution_time",
                                             "hamiltonian_label", "reference_file"};
  return k;
}

// Identifies a calibration: every setting that changes the pulses.
inline std::string calibration_key(const Config& c) {
  auto d = device_from(c);
  auto e = ecr_from(c);
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << d.f_c << ' ' << d.f_t << ' ' << d.alpha_c << ' ' << d.alpha_t << ' ' << d.J << ' '
     << e.cr.amplitude << ' ' << e.cr.tg << ' ' << e.cr.sigma << ' ' << e.cr.tol.rtol << ' ' << e.cr.tol.atol << ' '
     << e.echo_duration << ' ' << e.charge_detuning << ' ' << c.number("pi_pulse_ns", 100.0);
  return os.str();
}

// Calibrations are deterministic, so one per settings key is reused.
inline const qec::PulseHardware& cached_hardware(const Config& c) {
  static std::map<std::string, qec::PulseHardware> cache;
  const std::string key = calibration_key(c);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, qec::calibrate_hardware(tm::build_device(device_from(c)), qec_from(c))).first;
  return it->second;
}

// ------------------------------------------------------------ device/ECR

inline json device_json(const tm::PairModel& m) {
  auto disp = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(tm::to_khz(x));
    return a;
  };
  return {{"EJ_over_EC_control", m.control.EJ / m.control.EC},
          {"EJ_over_EC_target", m.target.EJ / m.target.EC},
          {"omega_bar_t_shift_khz", tm::to_khz(m.omega_bar_t - m.Et(1))},
          {"charge_dispersion_control_khz", disp(m.disp_c)},
          {"charge_dispersion_target_khz", disp(m.disp_t)},
          {"min_dressing_overlap", m.min_overlap}};
}

struct EcrRun {
  tm::PairModel model;
  tm::EcrCalibration cal;
  std::map<std::string, double> rates, static_rates;
  std::vector<std::pair<tm::NoiseParams, double>> noisy;  // fidelity per noise point
  std::vector<double> noisy_trace_error;
  double echo_fidelity = 0;
};

inline EcrRun run_ecr(const Config& c) {
  EcrRun r;
  tm::EcrSettings s = ecr_from(c);
  auto noises = noise_list_from(c);
  auto chs = channel_from(c, s);
  const auto& hw = cached_hardware(c);
  r.model = hw.model;
  r.cal = hw.ecr;
  r.rates = tm::effective_rates(r.model, s.cr.amplitude, s.cr);
  r.static_rates = tm::effective_rates(r.model, 0.0, s.cr);
  Mat X = rx_two_level(4, 0, kPi);
  // Echo fidelity up to per-level phases.
  Mat M = r.cal.echo.U * X.adjoint();
  Vec ph(4);
  for (int k = 0; k < 4; ++k) ph(k) = std::exp(-kI * std::arg(M(k, k)));
  r.echo_fidelity = average_gate_fidelity_unitary(ph.asDiagonal() * r.cal.echo.U, X);
  for (const auto& n : noises) {
    Mat S = tm::ecr_channel(r.model, r.cal, n, chs);
    QuantumChannel ch(16, S);
    r.noisy.push_back({n, average_gate_fidelity_channel(ch, tm::ecr_target())});
    r.noisy_trace_error.push_back(ch.trace_preservation_error());
  }
  return r;
}

inline json ecr_json(const EcrRun& r) {
  auto pis = [](const std::array<double, 4>& a) {
    json j = json::array();
    for (double x : a) j.push_back(x / kPi);
    return j;
  };
  json noisy = json::array();
  for (size_t k = 0; k < r.noisy.size(); ++k)
    noisy.push_back({{"t1_ns", r.noisy[k].first.T1},
                     {"t2_ns", r.noisy[k].first.T2},
                     {"fidelity", r.noisy[k].second},
                     {"trace_error", r.noisy_trace_error[k]}});
  const auto& c = r.cal;
  return {{"device", device_json(r.model)},
          {"cr",
           {{"plateau_ns", c.cr.tau_s},
            {"duration_ns", c.cr.tau},
            {"phi_extracted_over_pi", pis(c.cr.phi_extracted)},
            {"phi_fit_over_pi", pis(c.cr.phi_fit)},
            {"fidelity", c.cr.fidelity}}},
          {"echo", {{"amplitude_mhz", tm::to_mhz(c.echo.amplitude)}, {"fidelity", r.echo_fidelity}}},
          {"ecr",
           {{"duration_ns", c.duration()},
            {"fidelity", c.fidelity},
            {"target_leakage_max", c.leakage_max},
            {"residual_mixing_c2", c.residual[0]},
            {"residual_mixing_c3", c.residual[1]},
            {"local_phases_control", c.phases.control},
            {"local_phases_target", c.phases.target}}},
          {"rates",
           {{"ZX_mhz", tm::to_mhz(r.rates.at("ZX"))},
            {"IX_mhz", tm::to_mhz(r.rates.at("IX"))},
            {"ZZ_static_khz", tm::to_khz(r.static_rates.at("ZZ"))},
            {"ZZ_driven_khz", tm::to_khz(r.rates.at("ZZ"))}}},
          {"noisy", noisy}};
}

inline std::string traces_csv(const tm::PairModel& m, const tm::EcrCalibration& cal, double dt) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "time_ns,control_state";
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 4; ++t) os << ",p" << c << t;
  os << "\n" << std::setprecision(17);
  for (const auto& row : tm::ecr_population_traces(m, cal, dt)) {
    os << row[0] << "," << static_cast<int>(row[1]);
    for (int k = 2; k < 18; ++k) os << "," << row[k];
    os << "\n";
  }
  return os.str();
}

// ------------------------------------------------------------ QEC

struct QecRun {
  std::vector<double> grid;
  std::vector<double> F_bare, F_ideal, F_pulse;
  json summary;
};

inline std::vector<qec::SweepRow> sweep_rows(const std::vector<double>& grid, const std::vector<double>& Fb,
                                             const std::vector<double>& Fc) {
  std::vector<qec::SweepRow> rows;
  for (size_t k = 0; k < grid.size(); ++k) rows.push_back({grid[k], Fb[k], Fc[k]});
  return rows;
}

inline json fit_json(const qec::RepeatedResult& r, double T2) {
  if (!r.fit.fitted) return {{"fitted", false}, {"notice", r.fit.notice}, {"points", r.t.size()}};
  return {{"fitted", true}, {"T2_eff_over_T2", r.fit.T2_eff / T2}, {"F_inf", r.fit.F_inf}, {"points", r.t.size()}};
}

// Runs the sections listed in `sections` (sweep, repeated, t1).
inline QecRun run_qec(const Config& c, std::string* sweep_csv = nullptr, std::string* repeated_csv = nullptr) {
  QecRun out;
  const qec::QecSettings s = qec_from(c);
  const double T2 = s.T2;
  const double T1 = c.number("t1_ns", INFINITY);
  const std::string modes = c.text("modes", "ideal,pulse");
  const std::string sections = c.text("sections", "sweep,repeated,t1");
  const bool bare_only = c.flag("bare_only", false);
  const bool want_ideal = !bare_only && modes.find("ideal") != std::string::npos;
  const bool want_pulse = !bare_only && modes.find("pulse") != std::string::npos;
  out.grid = c.numbers("sweep_grid", {0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.05, 0.06, 0.07, 0.08,
                                      0.09, 0.1, 0.11, 0.12, 0.15, 0.2, 0.3, 0.4, 0.5});
  const auto rep_dt = c.numbers("repeated_dt", {0.01, 0.02, 0.05, 0.1, 0.2});
  const double window = c.number("repeated_window_t2", 2.0);
  const int n_cycles_fixed = c.integer("n_cycles", 0);
  const double t1_tau = c.number("t1_sweep_tau", 0.12);
  const auto grid_pulse = c.numbers("t1_grid_pulse", {2, 3, 4, 5, 6, 7, 8, 10, 12});
  const auto grid_ideal = c.numbers("t1_grid_ideal", {1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5});
  const tm::NoiseParams noise{T1, T2};

  const qec::PulseHardware* hw = want_pulse ? &cached_hardware(c) : nullptr;
  std::optional<qec::GateSet> gi, gp;
  if (want_ideal) gi = qec::ideal_gates(noise);
  if (want_pulse) gp = qec::pulse_gates(*hw, noise, s);

  json& js = out.summary;
  js["T2_ns"] = T2;
  js["T1_ns"] = std::isfinite(T1) ? json(T1) : json("inf");
  js["t_meas_ns"] = s.t_meas;
  if (gp) js["cycle_gate_time_ns"] = gp->gate_time;

  if (sections.find("sweep") != std::string::npos) {
    for (double x : out.grid) out.F_bare.push_back(qec::bare_fidelity(x * T2, noise));
    auto fill = [&](const std::optional<qec::GateSet>& g, std::vector<double>& F, const char* name) {
      if (!g) return;
      for (const auto& r : qec::single_cycle_sweep(*g, T2, out.grid)) F.push_back(r.F_corr);
      auto rows = sweep_rows(out.grid, out.F_bare, F);
      json m;
      try {
        m["break_even_tau_over_T2"] = qec::break_even(rows);
      } catch (const ConvergenceError&) {
        m["break_even_tau_over_T2"] = nullptr;
      }
      const auto& best = qec::max_reduction(rows);
      m["max_error_reduction"] = best.error_reduction();
      m["max_reduction_tau_over_T2"] = best.tau_phi_over_T2;
      m["always_better_than_bare"] =
          std::all_of(rows.begin(), rows.end(), [](const qec::SweepRow& r) { return r.F_corr > r.F_bare; });
      js["single_cycle"][name] = m;
    };
    fill(gi, out.F_ideal, "ideal");
    fill(gp, out.F_pulse, "pulse");
    if (sweep_csv) {
      std::ostringstream os;
      os.imbue(std::locale::classic());
      os << std::setprecision(17) << "tau_phi_over_T2,F_bare,F_ideal,F_pulse\n";
      for (size_t k = 0; k < out.grid.size(); ++k) {
        os << out.grid[k] << "," << out.F_bare[k] << ",";
        if (!out.F_ideal.empty()) os << out.F_ideal[k];
        os << ",";
        if (!out.F_pulse.empty()) os << out.F_pulse[k];
        os << "\n";
      }
      *sweep_csv = os.str();
    }
  }

  if (sections.find("repeated") != std::string::npos) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << "mode,dt_corr_over_T2,cycle,time_ns,fidelity\n";
    json rep = json::array();
    for (double x : rep_dt) {
      json row = {{"dt_corr_over_T2", x}};
      auto add = [&](const char* name, const qec::RepeatedResult& r) {
        row[name] = fit_json(r, T2);
        for (size_t k = 0; k < r.t.size(); ++k)
          os << name << "," << x << "," << k << "," << r.t[k] << "," << r.F[k] << "\n";
      };
      auto count = [&](const qec::GateSet& g) {
        return n_cycles_fixed > 0 ? n_cycles_fixed : qec::cycles_in_window(g, x * T2, window * T2);
      };
      int nb = n_cycles_fixed > 0 ? n_cycles_fixed : static_cast<int>(std::floor(window / x));
      add("bare", qec::bare_series(noise, x * T2, nb));
      if (gi) add("ideal", qec::repeated_cycles(*gi, x * T2, count(*gi)));
      if (gp) add("pulse", qec::repeated_cycles(*gp, x * T2, count(*gp)));
      rep.push_back(row);
    }
    js["repeated"] = rep;
    if (repeated_csv) *repeated_csv = os.str();
  }

  if (sections.find("t1") != std::string::npos) {
    json t1;
    auto run = [&](const char* name, const std::function<qec::GateSet(const tm::NoiseParams&)>& make,
                   const std::vector<double>& grid) {
      json m;
      try {
        auto sw = qec::t1_sweep(make, T2, t1_tau * T2, grid);
        m["break_even_T1_over_T2"] = sw.break_even_ratio;
        json pts = json::array();
        for (const auto& p : sw.points) pts.push_back({{"T1_over_T2", p.ratio}, {"F_bare", p.F_bare}, {"F_corr", p.F_corr}});
        m["points"] = pts;
      } catch (const ConvergenceError& e) {
        m["break_even_T1_over_T2"] = nullptr;
        m["notice"] = e.what();
      }
      t1[name] = m;
    };
    t1["tau_phi_over_T2"] = t1_tau;
    if (want_ideal) run("ideal", [](const tm::NoiseParams& n) { return qec::ideal_gates(n); }, grid_ideal);
    if (want_pulse) run("pulse", [&](const tm::NoiseParams& n) { return qec::pulse_gates(*hw, n, s); }, grid_pulse);
    js["t1_sweep"] = t1;
  }
  return out;
}

// ------------------------------------------------------------ bench

inline std::vector<ReferenceRow> read_references(const std::string& path) {
  json j = io::read_json_file(path);
  std::vector<ReferenceRow> rows;
  for (const auto& r : j.at("workloads"))
    rows.push_back({r.at("label").get<std::string>(), r.at("qubit_cnot").get<double>(), r.at("qubit_sqrtx").get<double>(),
                    r.at("qudit_cnot").get<double>(), r.at("qudit_sqrtx").get<double>()});
  return rows;
}

inline Mat hamiltonian_evolution(const Mat& H, double t) {
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw ValidationError("hamiltonian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec ph = (-kI * es.eigenvalues().cast<cplx>() * t).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

struct BenchRun {
  std::vector<BenchmarkRow> rows;
  std::vector<double> reconstruction_error;
};

inline BenchRun run_bench(const Config& c, const std::string& config_path) {
  const auto seed = static_cast<uint64_t>(c.number("seed", 2024));
  const int n_random = c.integer("n_random", 1);
  const std::string ham = resolve(config_path, c.text("hamiltonian_file", ""));
  const double t = c.number("evolution_time", 10.0);
  const std::string ham_label = c.text("hamiltonian_label", "lih_t10");
  const std::string ref = resolve(config_path, c.text("reference_file", ""));
  std::vector<ReferenceRow> refs;
  if (!ref.empty()) refs = read_references(ref);

  std::vector<std::pair<std::string, QuditCircuit>> circuits;
  std::vector<Mat> targets;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_random; ++k) {
    Mat U = haar_special_unitary(16, rng);
    circuits.push_back({n_random == 1 ? "random_su16" : "random_su16_" + std::to_string(k), csd_synthesize(U)});
    targets.push_back(U);
  }
  if (!ham.empty()) {
    Mat H = io::read_matrix_file(ham);
    if (H.rows() != 16 || H.cols() != 16) throw DimensionError("hamiltonian: expected 16 x 16");
    Mat U = hamiltonian_evolution(H, t);
    circuits.push_back({ham_label, csd_synthesize(U)});
    targets.push_back(U);
  }
  BenchRun r;
  r.rows = benchmark_table(circuits, refs);
  for (size_t k = 0; k < circuits.size(); ++k)
    r.reconstruction_error.push_back(1.0 - process_fidelity_unitary(circuit_unitary(circuits[k].second), targets[k]));
  return r;
}

inline json bench_json(const BenchRun& b) {
  json rows = json::array();
  for (size_t k = 0; k < b.rows.size(); ++k) {
    const auto& r = b.rows[k];
    rows.push_back({{"label", r.label},
                    {"ecr_count", r.ours.ecr_count},
                    {"cnot_equiv", r.ours.cnot_equiv},
                    {"sqrtx_equiv", r.ours.sqrtx_equiv},
                    {"local_gate_count", r.ours.local_gate_count},
                    {"virtual_phase_count", r.ours.virtual_phase_count},
                    {"reference", {{"qubit_cnot", r.ref.qubit_cnot}, {"qubit_sqrtx", r.ref.qubit_sqrtx},
                                   {"qudit_cnot", r.ref.qudit_cnot}, {"qudit_sqrtx", r.ref.qudit_sqrtx}}},
                    {"cnot_reduction_vs_qubit", r.cnot_reduction},
                    {"sqrtx_reduction_vs_qubit", r.sqrtx_reduction},
                    {"process_infidelity", b.reconstruction_error[k]}});
  }
  return {{"workloads", rows}};
}

}  // namespace qd::xp

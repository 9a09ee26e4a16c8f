// qudit: synthesis, checking, pulse simulation, QEC sweeps and benchmarks.
// Exit codes: 0 success, 1 check failed, 2 validation/I-O error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>

#include "qudit/experiments.hpp"

namespace {

using namespace qd;
using io::json;

int fail(int code, const char* kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << std::endl;
  return code;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Accepts U (d x d) or the full controlled gate C^m[U] (d^2 x d^2).
Mat controlled_block(const Mat& M, int m) {
  if (M.rows() == 4) return M;
  if (M.rows() != 16) throw DimensionError("cmu mode expects a 4 x 4 block or a 16 x 16 controlled gate");
  Mat U(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) U(a, b) = M(4 * m + a, 4 * m + b);
  if ((controlled_gate(4, m, U) - M).cwiseAbs().maxCoeff() > 1e-9)
    throw ValidationError("matrix is not of the form C^m[U] for the given m");
  return U;
}

std::string report_text(const ResourceReport& r) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "ecr_count           " << r.ecr_count << "\n"
     << "cnot_equiv          " << r.cnot_equiv << "\n"
     << "sqrtx_equiv         " << r.sqrtx_equiv << "\n"
     << "local_gate_count    " << r.local_gate_count << "\n"
     << "virtual_phase_count " << r.virtual_phase_count << "\n";
  return os.str();
}

json report_json(const ResourceReport& r) {
  return {{"ecr_count", r.ecr_count},
          {"cnot_equiv", r.cnot_equiv},
          {"sqrtx_equiv", r.sqrtx_equiv},
          {"local_gate_count", r.local_gate_count},
          {"virtual_phase_count", r.virtual_phase_count},
          {"total_ecr_angle", r.total_ecr_angle}};
}

}  // namespace

int main(int argc, char** argv) {
  std::cout.imbue(std::locale::classic());
  std::cout.precision(17);
  CLI::App app{"ququart synthesis, transmon pulse simulation and error-correction toolkit"};
  app.require_subcommand(1);

  std::string matrix, mode = "csd", out, circuit, config, outdir = ".";
  int m = 0;
  double tol = 1e-8, trace_dt = 2.0;

  auto* syn = app.add_subcommand("synthesize", "decompose a unitary into ECR pulses and single-qudit gates");
  syn->add_option("matrix", matrix, "matrix JSON file")->required();
  syn->add_option("--mode", mode, "cmu (controlled block) or csd (generic SU(16))")
      ->check(CLI::IsMember({"cmu", "csd"}));
  syn->add_option("--m", m, "control level for cmu mode")->check(CLI::Range(0, 3));
  syn->add_option("--out", out, "circuit JSON output")->required();

  auto* chk = app.add_subcommand("check", "compare a circuit against a target matrix");
  chk->add_option("circuit", circuit, "circuit JSON file")->required();
  chk->add_option("matrix", matrix, "matrix JSON file")->required();
  chk->add_option("--tol", tol, "allowed infidelity");

  auto* ecr = app.add_subcommand("simulate-ecr", "calibrate and simulate the echoed cross-resonance gate");
  ecr->add_option("config", config, "key = value config")->required();
  ecr->add_option("--out", outdir, "output directory");
  ecr->add_option("--trace-dt", trace_dt, "population sampling step (ns)");

  auto* qec = app.add_subcommand("qec", "dephasing-correction sweeps and fits");
  qec->add_option("config", config, "key = value config")->required();
  qec->add_option("--out", outdir, "output directory");

  auto* bench = app.add_subcommand("bench", "gate-count benchmark against reference numbers");
  bench->add_option("config", config, "key = value config")->required();
  bench->add_option("--out", outdir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    if (*syn) {
      Mat M = io::read_matrix_file(matrix);
      require_unitary(M, 1e-8, "synthesize input");
      QuditCircuit c;
      if (mode == "cmu") {
        c = decompose_cm_u(m, controlled_block(M, m));
      } else {
        if (M.rows() != 16) throw DimensionError("csd mode expects a 16 x 16 matrix");
        c = csd_synthesize(M);
      }
      ResourceReport r = count_resources(c);
      json j = io::circuit_to_json(c);
      j["resources"] = report_json(r);
      io::write_atomic(out, io::dump(j));
      std::cout << report_text(r);
      return 0;
    }
    if (*chk) {
      QuditCircuit c = io::circuit_from_json(io::read_json_file(circuit));
      Mat M = io::read_matrix_file(matrix);
      Mat U = circuit_unitary(c);
      if (U.rows() != M.rows() || U.cols() != M.cols())
        throw DimensionError("circuit dimension " + std::to_string(U.rows()) + " does not match matrix " +
                             std::to_string(M.rows()));
      double F = process_fidelity_unitary(U, M);
      bool ok = 1.0 - F <= tol;
      std::cout << "fidelity " << F << "\ninfidelity " << 1.0 - F << "\ntolerance " << tol << "\n"
                << (ok ? "PASS" : "FAIL") << "\n";
      return ok ? 0 : 1;
    }
    if (*ecr) {
      auto cfg = io::Config::from_file(config);
      cfg.check_keys(xp::ecr_keys());
      auto run = xp::run_ecr(cfg);
      json j = xp::ecr_json(run);
      io::write_atomic(join(outdir, "ecr_summary.json"), io::dump(j));
      io::write_atomic(join(outdir, "ecr_populations.csv"), xp::traces_csv(run.model, run.cal, trace_dt));
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*qec) {
      auto cfg = io::Config::from_file(config);
      std::string sweep, rep;
      cfg.check_keys(xp::qec_keys());
      auto run = xp::run_qec(cfg, &sweep, &rep);
      if (!sweep.empty()) io::write_atomic(join(outdir, "qec_single_cycle.csv"), sweep);
      if (!rep.empty()) io::write_atomic(join(outdir, "qec_repeated.csv"), rep);
      io::write_atomic(join(outdir, "qec_summary.json"), io::dump(run.summary));
      std::cout << run.summary.dump(2) << "\n";
      return 0;
    }
    if (*bench) {
      auto cfg = io::Config::from_file(config);
      cfg.check_keys(xp::bench_keys());
      auto run = xp::run_bench(cfg, config);
      io::write_atomic(join(outdir, "bench.json"), io::dump(xp::bench_json(run)));
      std::cout << format_benchmark(run.rows);
      return 0;
    }
  } catch (const ConvergenceError& e) {
    return fail(3, "convergence", e.what());
  } catch (const ValidationError& e) {
    return fail(2, "validation", e.what());
  } catch (const DimensionError& e) {
    return fail(2, "dimension", e.what());
  } catch (const io::IoError& e) {
    return fail(2, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(2, "io", e.what());
  }
  return 2;
}

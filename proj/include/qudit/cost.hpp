// Resource accounting in qubit-equivalent units.
#pragma once

#include <iomanip>
#include <sstream>

#include "givens.hpp"

namespace qd {

struct ResourceReport {
  int ecr_count = 0;
  double cnot_equiv = 0.0;  // two ECR(pi/4) per CNOT
  int sqrtx_equiv = 0;
  int local_gate_count = 0;  // physical single-qudit gates
  int virtual_phase_count = 0;
  double total_ecr_angle = 0.0;

  ResourceReport& operator+=(const ResourceReport& o) {
    ecr_count += o.ecr_count;
    cnot_equiv += o.cnot_equiv;
    sqrtx_equiv += o.sqrtx_equiv;
    local_gate_count += o.local_gate_count;
    virtual_phase_count += o.virtual_phase_count;
    total_ecr_angle += o.total_ecr_angle;
    return *this;
  }
};

inline ResourceReport count_resources(const QuditCircuit& c) {
  validate(c);
  ResourceReport r;
  for (const auto& g : c.ops) {
    switch (g.kind) {
      case GateKind::Ecr:
        ++r.ecr_count;
        r.total_ecr_angle += std::abs(g.angle);
        break;
      case GateKind::VirtualPhase:
        ++r.virtual_phase_count;
        break;
      case GateKind::ControlledBlock:
        throw ValidationError("count_resources: circuit contains an unlowered controlled block");
      default:
        if (g.kind == GateKind::RxTwoLevel && angle_close(g.angle, 0.0)) break;
        ++r.local_gate_count;
        r.sqrtx_equiv += sqrtx_cost(g);
    }
  }
  r.cnot_equiv = r.total_ecr_angle / (kPi / 2);
  return r;
}

struct ReferenceRow {
  std::string label;
  double qubit_cnot = 0, qubit_sqrtx = 0;    // qubit-baseline transpiler
  double qudit_cnot = 0, qudit_sqrtx = 0;    // published ququart numbers
};

struct BenchmarkRow {
  std::string label;
  ResourceReport ours;
  ReferenceRow ref;
  double cnot_reduction = 0;   // 1 - ours / qubit baseline
  double sqrtx_reduction = 0;
};

inline std::vector<BenchmarkRow> benchmark_table(
    const std::vector<std::pair<std::string, QuditCircuit>>& circuits, const std::vector<ReferenceRow>& refs) {
  std::vector<BenchmarkRow> rows;
  for (const auto& [label, circ] : circuits) {
    BenchmarkRow row;
    row.label = label;
    row.ours = count_resources(circ);
    for (const auto& r : refs)
      if (r.label == label) row.ref = r;
    row.ref.label = label;
    if (row.ref.qubit_cnot > 0) row.cnot_reduction = 1.0 - row.ours.cnot_equiv / row.ref.qubit_cnot;
    if (row.ref.qubit_sqrtx > 0) row.sqrtx_reduction = 1.0 - row.ours.sqrtx_equiv / row.ref.qubit_sqrtx;
    rows.push_back(row);
  }
  return rows;
}

inline std::string format_benchmark(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::left << std::setw(14) << "workload" << std::right << std::setw(8) << "ECR" << std::setw(10) << "CNOTeq"
     << std::setw(9) << "sqrtX" << std::setw(11) << "qubitCNOT" << std::setw(11) << "qubitSX" << std::setw(11)
     << "refCNOT" << std::setw(10) << "refSX" << std::setw(9) << "dCNOT" << std::setw(9) << "dSX" << "\n";
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.label << std::right << std::setw(8) << r.ours.ecr_count << std::setw(10)
       << std::setprecision(1) << r.ours.cnot_equiv << std::setw(9) << r.ours.sqrtx_equiv << std::setw(11)
       << std::setprecision(0) << r.ref.qubit_cnot << std::setw(11) << r.ref.qubit_sqrtx << std::setw(11)
       << r.ref.qudit_cnot << std::setw(10) << r.ref.qudit_sqrtx << std::setw(8) << std::setprecision(1)
       << 100 * r.cnot_reduction << "%" << std::setw(8) << 100 * r.sqrtx_reduction << "%\n";
  }
  return os.str();
}

}  // namespace qd

// File formats: matrices and circuits as JSON, run configs as flat
// key = value text, atomic writes.
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "core.hpp"

namespace qd::io {

using json = nlohmann::json;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// [[{"re": .., "im": ..}, ...], ...], row major.
inline json matrix_to_json(const Mat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back({{"re", M(i, j).real()}, {"im", M(i, j).imag()}});
    rows.push_back(row);
  }
  return rows;
}

inline Mat matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ValidationError("matrix: expected an array of rows");
  const size_t n = j.size(), m = j[0].size();
  Mat M(n, m);
  for (size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != m) throw ValidationError("matrix: ragged rows");
    for (size_t c = 0; c < m; ++c) {
      const json& e = j[r][c];
      if (e.is_number())
        M(r, c) = e.get<double>();
      else if (e.is_object() && e.contains("re"))
        M(r, c) = cplx(e.at("re").get<double>(), e.value("im", 0.0));
      else
        throw ValidationError("matrix: entries must be {\"re\", \"im\"} objects");
    }
  }
  return M;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline Mat read_matrix_file(const std::string& path) { return matrix_from_json(read_json_file(path)); }

// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ------------------------------------------------------------ circuits

inline json circuit_to_json(const QuditCircuit& c) {
  json ops = json::array();
  for (const auto& g : c.ops) {
    json params;
    switch (g.kind) {
      case GateKind::RxTwoLevel:
        params = {{"level", g.level}, {"phi", g.angle}, {"lambda", g.axis}};
        break;
      case GateKind::VirtualPhase:
        params = {{"level", g.level}, {"phase", g.angle}};
        break;
      case GateKind::Permutation:
        params = {{"level", g.level}};
        break;
      case GateKind::Ecr:
        params = {{"theta", g.angle}, {"direction", g.direction == EcrDirection::Forward ? "forward" : "reversed"}};
        break;
      case GateKind::ControlledBlock:
        params = {{"m", g.level}, {"block", matrix_to_json(g.block)}};
        break;
    }
    ops.push_back({{"kind", kind_name(g.kind)}, {"qudits", g.qudits}, {"params", params}});
  }
  json out = {{"d", c.d}, {"n_qudits", c.n_qudits}, {"order", "time"}, {"ops", ops}};
  if (!c.phase_frames.empty()) out["phase_frames"] = c.phase_frames;
  return out;
}

inline QuditCircuit circuit_from_json(const json& j) {
  try {
    QuditCircuit c(j.at("d").get<int>(), j.at("n_qudits").get<int>());
    for (const auto& o : j.at("ops")) {
      const std::string kind = o.at("kind").get<std::string>();
      const auto q = o.at("qudits").get<std::vector<int>>();
      const json& p = o.contains("params") ? o.at("params") : json::object();
      auto need = [&](size_t n) {
        if (q.size() != n) throw ValidationError("circuit: wrong qudit count for " + kind);
      };
      if (kind == "rx") {
        need(1);
        c.add(GateOp::rx(q[0], p.at("level").get<int>(), p.at("phi").get<double>(), p.value("lambda", 0.0)));
      } else if (kind == "vphase") {
        need(1);
        c.add(GateOp::phase(q[0], p.at("level").get<int>(), p.at("phase").get<double>()));
      } else if (kind == "perm") {
        need(1);
        c.add(GateOp::perm(q[0], p.at("level").get<int>()));
      } else if (kind == "ecr") {
        need(2);
        c.add(GateOp::ecr(q[0], q[1], p.at("theta").get<double>()));
      } else if (kind == "controlled") {
        need(2);
        c.add(GateOp::controlled(q[0], q[1], p.at("m").get<int>(), matrix_from_json(p.at("block"))));
      } else {
        throw ValidationError("circuit: unknown op kind '" + kind + "'");
      }
    }
    if (j.contains("phase_frames")) c.phase_frames = j.at("phase_frames").get<std::vector<std::vector<double>>>();
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("circuit JSON: ") + e.what());
  }
}

// ------------------------------------------------------------ configs

// Flat "key = value" file; lines starting with '#' or ';' are comments.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return from_stream(in, path);
  }
  static Config from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in, "<string>");
  }

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  double number(const std::string& key, double fallback) const {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(key);
    if (!v) return fallback;
    try {
      size_t pos = 0;
      double x = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return x;
    } catch (const std::exception&) {
      throw ValidationError("config: '" + key + "' is not a number: " + *v);
    }
  }
  int integer(const std::string& key, int fallback) const {
    double x = number(key, fallback);
    if (x != std::floor(x)) throw ValidationError("config: '" + key + "' must be an integer");
    return static_cast<int>(x);
  }
  bool flag(const std::string& key, bool fallback) const {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ValidationError("config: '" + key + "' is not a boolean: " + *v);
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    return tree_.get<std::string>(key, fallback);
  }
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream in(*v);
    while (std::getline(in, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ValidationError("config: bad list entry in '" + key + "'");
      }
    }
    return out;
  }

  // Keys present in the file that no accessor has asked for.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& kv : tree_)
      if (!used_.count(kv.first)) out.push_back(kv.first);
    return out;
  }
  // Validates key names up front; "expect_*" keys carry acceptance thresholds.
  void check_keys(const std::vector<std::string>& allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : tree_)
      if (!ok.count(kv.first) && kv.first.rfind("expect_", 0) != 0)
        throw ValidationError("config: unknown key '" + kv.first + "'");
  }
  void reject_unknown() const {
    auto u = unused_keys();
    if (!u.empty()) throw ValidationError("config: unknown key '" + u.front() + "'");
  }

 private:
  static Config from_stream(std::istream& in, const std::string& name) {
    Config c;
    try {
      boost::property_tree::read_ini(in, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ValidationError("config " + name + ": " + e.message());
    }
    return c;
  }
  boost::property_tree::ptree tree_;
  mutable std::set<std::string> used_;
};

}  // namespace qd::io

#include "affsls/log_io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace affsls {
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, int line) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw std::runtime_error("log line " + std::to_string(line) +
                             ": malformed number '" + s + "'");
  }
  return v;
}

SolveStatus parse_status(const std::string& s, int line) {
  for (SolveStatus st : {SolveStatus::kOptimal, SolveStatus::kInfeasible,
                         SolveStatus::kUnbounded, SolveStatus::kMaxIter}) {
    if (s == to_string(st)) return st;
  }
  throw std::runtime_error("log line " + std::to_string(line) +
                           ": unknown status '" + s + "'");
}

}  // namespace

void write_log_csv(std::ostream& os, const ClosedLoopLog& log) {
  if (log.x.empty()) throw std::invalid_argument("write_log_csv: empty log");
  const Index n = log.x[0].size();
  const Index m = log.u.empty() ? 0 : log.u[0].size();
  if (log.u.empty()) throw std::invalid_argument("write_log_csv: log has no inputs");
  os << "step";
  for (Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Index i = 1; i <= m; ++i) os << ",u" << i;
  os << ",objective,status,solve_ms\n";
  for (size_t k = 0; k < log.x.size(); ++k) {
    os << k;
    for (Index i = 0; i < n; ++i) os << ',' << num(log.x[k](i));
    if (k < log.u.size()) {
      for (Index i = 0; i < m; ++i) os << ',' << num(log.u[k](i));
      const StepRecord& r = log.steps.at(k);
      os << ',' << num(r.objective) << ',' << to_string(r.status) << ','
         << num(r.solve_ms);
    } else {
      for (Index i = 0; i < m + 3; ++i) os << ',';
    }
    os << '\n';
  }
}

ClosedLoopLog read_log_csv(std::istream& is, const std::string& controller) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("log: empty file");
  const std::vector<std::string> header = split(line);
  Index n = 0, m = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'x') ++n;
    if (h.size() > 1 && h[0] == 'u') ++m;
  }
  const size_t width = static_cast<size_t>(1 + n + m + 3);
  if (n == 0 || m == 0 || header.size() != width || header[0] != "step") {
    throw std::runtime_error("log: header must be step,x1..xn,u1..um,objective,status,solve_ms");
  }
  ClosedLoopLog log;
  log.controller = controller;
  int lineno = 1;
  bool final_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (final_seen) throw std::runtime_error("log: rows after the final state row");
    const std::vector<std::string> cells = split(line);
    if (cells.size() != width) {
      throw std::runtime_error("log line " + std::to_string(lineno) + ": expected " +
                               std::to_string(width) + " fields");
    }
    if (parse_number(cells[0], lineno) != static_cast<double>(log.x.size())) {
      throw std::runtime_error("log line " + std::to_string(lineno) + ": steps out of order");
    }
    VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = parse_number(cells[1 + i], lineno);
    log.x.push_back(x);
    if (cells[1 + n].empty()) {
      final_seen = true;
      continue;
    }
    VectorXd u(m);
    for (Index i = 0; i < m; ++i) u(i) = parse_number(cells[1 + n + i], lineno);
    log.u.push_back(u);
    StepRecord r;
    r.objective = parse_number(cells[1 + n + m], lineno);
    r.status = parse_status(cells[2 + n + m], lineno);
    r.solve_ms = parse_number(cells[3 + n + m], lineno);
    log.steps.push_back(r);
  }
  if (log.x.empty()) throw std::runtime_error("log: no rows");
  if (!final_seen) throw std::runtime_error("log: missing final state row");
  return log;
}

std::string summary_json(const std::vector<RunSummary>& runs,
                         const std::vector<ComparisonSummary>& comparisons) {
  nlohmann::ordered_json j;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) {
    nlohmann::ordered_json e;
    e["controller"] = r.controller;
    e["log"] = r.log_file;
    e["completed"] = r.completed;
    e["steps"] = r.steps;
    if (!r.failure.empty()) e["failure"] = r.failure;
    e["max_kkt_residual"] = r.max_kkt_residual;
    e["constraint_violation"] = r.constraint_violation;
    j["runs"].push_back(e);
  }
  j["comparisons"] = nlohmann::ordered_json::array();
  bool all_pass = true;
  for (const auto& c : comparisons) {
    nlohmann::ordered_json e;
    e["a"] = c.a;
    e["b"] = c.b;
    e["steps"] = c.report.steps;
    e["state_deviation"] = c.report.state_deviation;
    e["input_deviation"] = c.report.input_deviation;
    e["objective_gap"] = c.report.objective_gap;
    e["tol"] = c.report.tol;
    e["pass"] = c.report.pass;
    all_pass = all_pass && c.report.pass;
    j["comparisons"].push_back(e);
  }
  j["pass"] = all_pass;
  return j.dump(2) + "\n";
}

std::string format_report(const DeviationReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "steps %d  state dev %.3e  input dev %.3e  objective gap %.3e  "
                "tol %.1e  %s",
                r.steps, r.state_deviation, r.input_deviation, r.objective_gap,
                r.tol, r.pass ? "PASS" : "FAIL");
  return buf;
}

}  // namespace affsls

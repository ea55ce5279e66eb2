#pragma once

// Closed-loop log export. One row per step:
//
//   step,x1..xn,u1..um,objective,status,solve_ms
//
// Numbers are written with 17 significant digits. The last row carries the
// final state with the input and solve columns empty.

#include <iosfwd>
#include <string>
#include <vector>

#include "affsls/harness.hpp"

namespace affsls {

void write_log_csv(std::ostream& os, const ClosedLoopLog& log);

// The controller tag is not part of the file; the caller supplies it.
ClosedLoopLog read_log_csv(std::istream& is, const std::string& controller);

struct RunSummary {
  std::string controller;
  std::string log_file;
  bool completed = false;
  int steps = 0;
  std::string failure;  // empty when completed
  double max_kkt_residual = 0.0;
  double constraint_violation = 0.0;
};

struct ComparisonSummary {
  std::string a;
  std::string b;
  DeviationReport report;
};

// Machine-readable summary for CI consumption.
std::string summary_json(const std::vector<RunSummary>& runs,
                         const std::vector<ComparisonSummary>& comparisons);

std::string format_report(const DeviationReport& r);

}  // namespace affsls

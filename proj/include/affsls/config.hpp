#pragma once

// JSON run configuration for the command-line front end. Every object
// rejects keys it does not know. Schema (all sections optional unless the
// subcommand needs them):
//
//   system       {"A": [[..]], "B": [[..]], "s": [..]}
//   cost         {"Q", "R", "P" (default Q), "p_norm": "1"|"2"|"inf",
//                 "x_ref", "u_reg"}
//   constraints  {"box": {"x_min", "x_max", "u_min", "u_max"}}  (null = unbounded)
//                or {"H_x", "H_u", "h", "terminal": {"H", "h"}}
//   horizon, sim_steps, x_init
//   controllers  ["traditional", "sls", "dd-sls"]
//   data         {"file": path} or {"length", "seed", "u_min", "u_max"}
//   output       {"dir", "plot", "labels"}
//   tolerances   {"compare", "constraint"}
//   solver       {"eps_prim", "eps_dual", "eps_comp", "max_iter"}
//   validate     SuiteConfig fields

#include <optional>
#include <string>
#include <vector>

#include "affsls/harness.hpp"
#include "affsls/suites.hpp"

namespace affsls {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  // Present when the document has a "system" section.
  std::optional<BenchmarkSpec> benchmark;
  std::vector<Formulation> controllers;
  std::optional<std::string> data_file;  // as written in the document
  std::string base_dir;                  // directory of the document, not emitted
  std::string output_dir = "out";
  bool plot = true;
  std::vector<std::string> labels;
  double compare_tol = 1e-4;
  double constraint_tol = 1e-6;
  SuiteConfig validate;
};

// Throws ConfigError.
RunConfig parse_config(const std::string& text, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

// data_file resolved against base_dir.
std::string resolved_data_file(const RunConfig& cfg);

// Canonical JSON; constraints are always emitted in polytope form.
std::string emit_config(const RunConfig& cfg);

// The swing benchmark with all three controllers.
RunConfig swing_config();

}  // namespace affsls

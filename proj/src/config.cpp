#include "affsls/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace affsls {
namespace {

using Json = nlohmann::ordered_json;

void check_keys(const Json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

const Json& need(const Json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  return j.at(key);
}

double number(const Json& j, const std::string& where) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

bool boolean(const Json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

// null entries become `null_value` (used for unbounded box sides).
VectorXd vector(const Json& j, const std::string& where,
                double null_value = std::numeric_limits<double>::quiet_NaN()) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  VectorXd v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Index>(i)) = j[i].is_null() ? null_value : number(j[i], where);
    if (std::isnan(v(static_cast<Index>(i)))) throw ConfigError(where + ": expected numbers");
  }
  return v;
}

MatrixXd matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(where + ": expected a nonempty array of rows");
  }
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  MatrixXd M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const VectorXd r = vector(j[i], where);
    if (r.size() != cols) throw ConfigError(where + ": ragged rows");
    M.row(i) = r.transpose();
  }
  return M;
}

// Polytope matrices may have zero rows; emit them as [] and accept that.
MatrixXd matrix_or_empty(const Json& j, const std::string& where, Index cols) {
  if (j.is_array() && j.empty()) return MatrixXd(0, cols);
  return matrix(j, where);
}

Json to_json(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json to_json(const MatrixXd& M) {
  Json a = Json::array();
  for (Index i = 0; i < M.rows(); ++i) a.push_back(to_json(VectorXd(M.row(i).transpose())));
  return a;
}

PolytopicConstraints parse_constraints(const Json& j, int n, int m) {
  const std::string where = "constraints";
  if (j.contains("box")) {
    check_keys(j, where, {"box"});
    const Json& b = j.at("box");
    check_keys(b, "constraints.box", {"x_min", "x_max", "u_min", "u_max"});
    const double inf = std::numeric_limits<double>::infinity();
    auto side = [&](const char* key, int len, double unbounded) {
      if (!b.contains(key)) return VectorXd::Constant(len, unbounded).eval();
      VectorXd v = vector(b.at(key), std::string("constraints.box.") + key, unbounded);
      if (v.size() != len) {
        throw ConfigError(std::string("constraints.box.") + key + ": expected length " +
                          std::to_string(len));
      }
      return v;
    };
    return PolytopicConstraints::Box(side("x_min", n, -inf), side("x_max", n, inf),
                                     side("u_min", m, -inf), side("u_max", m, inf));
  }
  check_keys(j, where, {"H_x", "H_u", "h", "terminal"});
  PolytopicConstraints c;
  c.H_x = matrix_or_empty(need(j, where, "H_x"), "constraints.H_x", n);
  c.H_u = matrix_or_empty(need(j, where, "H_u"), "constraints.H_u", m);
  c.h = vector(need(j, where, "h"), "constraints.h");
  if (j.contains("terminal")) {
    const Json& t = j.at("terminal");
    check_keys(t, "constraints.terminal", {"H", "h"});
    c.terminal = TerminalSet{matrix(need(t, "constraints.terminal", "H"), "constraints.terminal.H"),
                             vector(need(t, "constraints.terminal", "h"), "constraints.terminal.h")};
  }
  try {
    c.validate(n, m);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("constraints: ") + e.what());
  }
  return c;
}

CostSpec parse_cost(const Json& j) {
  check_keys(j, "cost", {"Q", "R", "P", "p_norm", "x_ref", "u_reg"});
  CostSpec c;
  c.Q = matrix(need(j, "cost", "Q"), "cost.Q");
  c.R = matrix(need(j, "cost", "R"), "cost.R");
  c.P = j.contains("P") ? matrix(j.at("P"), "cost.P") : c.Q;
  if (j.contains("p_norm")) {
    const Json& p = j.at("p_norm");
    std::string s = p.is_string() ? p.get<std::string>()
                                  : p.is_number_integer() ? std::to_string(p.get<int>()) : "";
    try {
      c.p_norm = parse_pnorm(s);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cost.p_norm: ") + e.what());
    }
  }
  if (j.contains("x_ref")) c.x_ref = vector(j.at("x_ref"), "cost.x_ref");
  if (j.contains("u_reg")) c.u_reg = number(j.at("u_reg"), "cost.u_reg");
  return c;
}

SolverSettings parse_solver(const Json& j) {
  check_keys(j, "solver", {"eps_prim", "eps_dual", "eps_comp", "max_iter"});
  SolverSettings s;
  if (j.contains("eps_prim")) s.eps_prim = number(j.at("eps_prim"), "solver.eps_prim");
  if (j.contains("eps_dual")) s.eps_dual = number(j.at("eps_dual"), "solver.eps_dual");
  if (j.contains("eps_comp")) s.eps_comp = number(j.at("eps_comp"), "solver.eps_comp");
  if (j.contains("max_iter")) s.max_iter = integer(j.at("max_iter"), "solver.max_iter");
  if (!(s.eps_prim > 0 && s.eps_dual > 0 && s.eps_comp > 0) || s.max_iter < 1) {
    throw ConfigError("solver: tolerances and max_iter must be positive");
  }
  return s;
}

SuiteConfig parse_validate(const Json& j) {
  check_keys(j, "validate",
             {"trials", "disturbance_trials", "dd_trials", "seed", "max_state_dim",
              "max_input_dim", "max_horizon", "max_spectral_radius", "dd_max_state_dim",
              "dd_max_input_dim", "dd_max_horizon", "corrupt_hankel"});
  SuiteConfig s;
  auto get_int = [&](const char* key, int& dst) {
    if (j.contains(key)) dst = integer(j.at(key), std::string("validate.") + key);
  };
  get_int("trials", s.trials);
  get_int("disturbance_trials", s.disturbance_trials);
  get_int("dd_trials", s.dd_trials);
  get_int("max_state_dim", s.max_state_dim);
  get_int("max_input_dim", s.max_input_dim);
  get_int("max_horizon", s.max_horizon);
  get_int("dd_max_state_dim", s.dd_max_state_dim);
  get_int("dd_max_input_dim", s.dd_max_input_dim);
  get_int("dd_max_horizon", s.dd_max_horizon);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("validate.seed: expected a nonnegative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("max_spectral_radius")) {
    s.max_spectral_radius = number(j.at("max_spectral_radius"), "validate.max_spectral_radius");
  }
  if (j.contains("corrupt_hankel")) s.corrupt_hankel = boolean(j.at("corrupt_hankel"), "validate.corrupt_hankel");
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return s;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"system", "cost", "constraints", "horizon", "sim_steps", "x_init",
              "controllers", "data", "output", "tolerances", "solver", "validate"});
  RunConfig cfg;
  cfg.base_dir = base_dir;

  if (j.contains("system")) {
    const Json& sj = j.at("system");
    check_keys(sj, "system", {"A", "B", "s"});
    BenchmarkSpec b;
    b.A = matrix(need(sj, "system", "A"), "system.A");
    b.B = matrix(need(sj, "system", "B"), "system.B");
    b.s = vector(need(sj, "system", "s"), "system.s");
    const int n = static_cast<int>(b.A.rows()), m = static_cast<int>(b.B.cols());
    b.cost = parse_cost(need(j, "config", "cost"));
    b.cons = j.contains("constraints") ? parse_constraints(j.at("constraints"), n, m)
                                       : PolytopicConstraints::None(n, m);
    b.horizon = integer(need(j, "config", "horizon"), "horizon");
    b.sim_steps = integer(need(j, "config", "sim_steps"), "sim_steps");
    b.x_init = vector(need(j, "config", "x_init"), "x_init");
    if (j.contains("solver")) b.solver = parse_solver(j.at("solver"));
    if (b.horizon < 1) throw ConfigError("horizon: must be >= 1 (got " + std::to_string(b.horizon) + ")");
    if (b.sim_steps < 1) throw ConfigError("sim_steps: must be >= 1");

    if (j.contains("data")) {
      const Json& d = j.at("data");
      if (d.contains("file")) {
        check_keys(d, "data", {"file"});
        if (!d.at("file").is_string()) throw ConfigError("data.file: expected a path");
        cfg.data_file = d.at("file").get<std::string>();
      } else {
        check_keys(d, "data", {"length", "seed", "u_min", "u_max"});
        DataRecipe r;
        r.length = integer(need(d, "data", "length"), "data.length");
        if (d.contains("seed")) {
          if (!d.at("seed").is_number_unsigned()) throw ConfigError("data.seed: expected a nonnegative integer");
          r.seed = d.at("seed").get<std::uint64_t>();
        }
        r.box.lower = d.contains("u_min") ? vector(d.at("u_min"), "data.u_min") : VectorXd::Constant(m, -1.0);
        r.box.upper = d.contains("u_max") ? vector(d.at("u_max"), "data.u_max") : VectorXd::Constant(m, 1.0);
        if (r.length < 1) throw ConfigError("data.length: must be positive");
        b.recipe = r;
      }
    }
    try {
      b.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    cfg.benchmark = std::move(b);
  } else {
    for (const char* key : {"cost", "constraints", "horizon", "sim_steps", "x_init", "data", "solver"}) {
      if (j.contains(key)) throw ConfigError(std::string(key) + ": requires a system section");
    }
  }

  if (j.contains("controllers")) {
    const Json& c = j.at("controllers");
    if (!c.is_array() || c.empty()) throw ConfigError("controllers: expected a nonempty array");
    for (const auto& e : c) {
      if (!e.is_string()) throw ConfigError("controllers: expected names");
      try {
        cfg.controllers.push_back(parse_formulation(e.get<std::string>()));
      } catch (const std::exception& ex) {
        throw ConfigError(ex.what());
      }
    }
  } else if (cfg.benchmark) {
    cfg.controllers = {Formulation::kTraditional, Formulation::kSls};
    if (cfg.data_file || cfg.benchmark->recipe) cfg.controllers.push_back(Formulation::kDdSls);
  }
  for (Formulation f : cfg.controllers) {
    if (f == Formulation::kDdSls && !cfg.data_file && !(cfg.benchmark && cfg.benchmark->recipe)) {
      throw ConfigError("controllers: dd-sls requires a data section");
    }
  }

  if (j.contains("output")) {
    const Json& o = j.at("output");
    check_keys(o, "output", {"dir", "plot", "labels"});
    if (o.contains("dir")) {
      if (!o.at("dir").is_string()) throw ConfigError("output.dir: expected a path");
      cfg.output_dir = o.at("dir").get<std::string>();
    }
    if (o.contains("plot")) cfg.plot = boolean(o.at("plot"), "output.plot");
    if (o.contains("labels")) {
      const Json& l = o.at("labels");
      if (!l.is_array()) throw ConfigError("output.labels: expected an array of strings");
      for (const auto& e : l) {
        if (!e.is_string()) throw ConfigError("output.labels: expected strings");
        cfg.labels.push_back(e.get<std::string>());
      }
    }
  }
  if (cfg.benchmark && !cfg.labels.empty() &&
      static_cast<int>(cfg.labels.size()) !=
          cfg.benchmark->state_dim() + cfg.benchmark->input_dim()) {
    throw ConfigError("output.labels: need one label per state and input channel");
  }
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    check_keys(t, "tolerances", {"compare", "constraint"});
    if (t.contains("compare")) cfg.compare_tol = number(t.at("compare"), "tolerances.compare");
    if (t.contains("constraint")) cfg.constraint_tol = number(t.at("constraint"), "tolerances.constraint");
    if (!(cfg.compare_tol >= 0) || !(cfg.constraint_tol >= 0)) {
      throw ConfigError("tolerances: must be nonnegative");
    }
  }
  if (j.contains("validate")) cfg.validate = parse_validate(j.at("validate"));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string resolved_data_file(const RunConfig& cfg) {
  if (!cfg.data_file) return "";
  const std::filesystem::path p(*cfg.data_file);
  if (p.is_absolute() || cfg.base_dir.empty()) return p.string();
  return (std::filesystem::path(cfg.base_dir) / p).string();
}

std::string emit_config(const RunConfig& cfg) {
  Json j;
  if (cfg.benchmark) {
    const BenchmarkSpec& b = *cfg.benchmark;
    j["system"] = {{"A", to_json(b.A)}, {"B", to_json(b.B)}, {"s", to_json(b.s)}};
    Json c;
    c["Q"] = to_json(b.cost.Q);
    c["R"] = to_json(b.cost.R);
    c["P"] = to_json(b.cost.P);
    c["p_norm"] = to_string(b.cost.p_norm);
    if (b.cost.x_ref) c["x_ref"] = to_json(*b.cost.x_ref);
    c["u_reg"] = b.cost.u_reg;
    j["cost"] = c;
    Json k;
    k["H_x"] = to_json(b.cons.H_x);
    k["H_u"] = to_json(b.cons.H_u);
    k["h"] = to_json(b.cons.h);
    if (b.cons.terminal) {
      k["terminal"] = {{"H", to_json(b.cons.terminal->H)}, {"h", to_json(b.cons.terminal->h)}};
    }
    j["constraints"] = k;
    j["horizon"] = b.horizon;
    j["sim_steps"] = b.sim_steps;
    j["x_init"] = to_json(b.x_init);
    if (cfg.data_file) {
      j["data"] = {{"file", *cfg.data_file}};
    } else if (b.recipe) {
      j["data"] = {{"length", b.recipe->length},
                   {"seed", b.recipe->seed},
                   {"u_min", to_json(b.recipe->box.lower)},
                   {"u_max", to_json(b.recipe->box.upper)}};
    }
    j["solver"] = {{"eps_prim", b.solver.eps_prim},
                   {"eps_dual", b.solver.eps_dual},
                   {"eps_comp", b.solver.eps_comp},
                   {"max_iter", b.solver.max_iter}};
  }
  if (!cfg.controllers.empty()) {
    Json c = Json::array();
    for (Formulation f : cfg.controllers) c.push_back(to_string(f));
    j["controllers"] = c;
  }
  j["output"] = {{"dir", cfg.output_dir}, {"plot", cfg.plot}};
  if (!cfg.labels.empty()) j["output"]["labels"] = cfg.labels;
  j["tolerances"] = {{"compare", cfg.compare_tol}, {"constraint", cfg.constraint_tol}};
  const SuiteConfig& v = cfg.validate;
  j["validate"] = {{"trials", v.trials},
                   {"disturbance_trials", v.disturbance_trials},
                   {"dd_trials", v.dd_trials},
                   {"seed", v.seed},
                   {"max_state_dim", v.max_state_dim},
                   {"max_input_dim", v.max_input_dim},
                   {"max_horizon", v.max_horizon},
                   {"max_spectral_radius", v.max_spectral_radius},
                   {"dd_max_state_dim", v.dd_max_state_dim},
                   {"dd_max_input_dim", v.dd_max_input_dim},
                   {"dd_max_horizon", v.dd_max_horizon},
                   {"corrupt_hankel", v.corrupt_hankel}};
  return j.dump(2) + "\n";
}

RunConfig swing_config() {
  RunConfig cfg;
  cfg.benchmark = swing_benchmark();
  cfg.controllers = {Formulation::kTraditional, Formulation::kSls, Formulation::kDdSls};
  cfg.labels = {"theta", "omega", "u"};
  return cfg;
}

}  // namespace affsls

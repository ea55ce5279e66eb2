#pragma once

// Randomized property suites over the closed-loop parameterization and its
// data-driven counterpart. Used by the `validate` subcommand.

#include <cstdint>
#include <string>
#include <vector>

namespace affsls {

struct SuiteConfig {
  int trials = 200;            // model-based systems
  int disturbance_trials = 20; // rollouts per model-based system
  int dd_trials = 50;          // data-driven systems
  std::uint64_t seed = 0;
  int max_state_dim = 4;
  int max_input_dim = 2;
  int max_horizon = 8;
  double max_spectral_radius = 2.0;
  int dd_max_state_dim = 3;
  int dd_max_input_dim = 2;
  int dd_max_horizon = 6;
  // Fault injection: perturbs one non-initial row of every state Hankel
  // matrix so that the data no longer come from the system.
  bool corrupt_hankel = false;

  void validate() const;
};

struct PropertyResult {
  std::string property;
  double value = 0.0;         // worst case observed
  double threshold = 0.0;
  bool lower_bound = false;   // pass iff value >= threshold (else <=)
  bool pass = false;
};

std::vector<PropertyResult> run_suites(const SuiteConfig& cfg);

}  // namespace affsls

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgir/girsanov.hpp"
#include "lgir/simulate.hpp"

namespace lgir {

// Any problem with a configuration: syntax, unknown or duplicate keys, missing
// values, or a violated step-size precondition.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment {
  Normalization,
  AdaptedEquivalence,
  FdMalliavin,
  EtaRefinement,
  KlOrderSweep,
  LocalErrorSweep,
  TraceDiagnostics,
  ComplexityTable,
};

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& name);

struct PotentialSpec {
  PotentialKind kind = PotentialKind::IsotropicQuadratic;
  int dim = 2;
  double scale = 1.0;   // isotropic curvature
  Vec spectrum;         // anisotropic / perturbed
  PerturbationSpec perturbation;
  ProductSpec product;
};

PotentialModel make_potential(const PotentialSpec& spec);

enum class InitialKind { Stationary, Point };

struct ExperimentConfig {
  Experiment experiment = Experiment::Normalization;
  PotentialSpec potential;
  double T = 1.0;
  std::vector<int> steps;  // N values (one per grid in a sweep)
  int m = 8;
  Scheme scheme = Scheme::Mlmc;
  bool randomized = false;
  double tau_fraction = 0.5;
  double gamma = 1.0;
  std::vector<double> q = {2.0};
  long n_paths = 100000;
  std::uint64_t seed = 0;
  std::string output;
  InitialKind initial = InitialKind::Stationary;
  Vec x0, p0;  // point start
  // Experiment-specific settings.
  int refinements = 3;                 // eta-refinement
  std::vector<int> m_list = {4, 8, 16, 32};  // trace-diagnostics
  std::vector<double> epsilons = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5};  // complexity-table
  int reference_m = 2048;              // local-error-sweep

  std::vector<double> step_sizes() const;
  TimeGrid grid(std::size_t i = 0) const;
  // Canonical text of every effective setting (defaults included).
  std::string canonical() const;
  // FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;
};

// Parses sectioned key = value text ('#' comments, [section] headers).
ExperimentConfig load_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Throws ConfigError when a step-size precondition of the configured scheme fails.
void check_step_bounds(const ExperimentConfig& cfg);

InitialLaw make_initial(const ExperimentConfig& cfg, const PotentialModel& V);
SchemeSetup make_setup(const ExperimentConfig& cfg, std::size_t grid_index = 0);

}  // namespace lgir

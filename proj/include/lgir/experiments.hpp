#pragma once

#include <map>
#include <string>

#include "lgir/config.hpp"
#include "lgir/divergence.hpp"
#include "lgir/report.hpp"

namespace lgir {

struct RunOptions {
  int threads = 1;
  bool timing = false;  // write wall-clock columns into the CSV
};

struct ExperimentResult {
  Report report;
  bool pass = true;
  std::string summary;
  // Key numbers for programmatic checks (acceptance suite, tests).
  std::map<std::string, double> facts;
};

// Executes the configured experiment and applies its built-in thresholds.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Built-in thresholds.
struct Thresholds {
  static constexpr double kNormalizationSigmas = 3.0;
  static constexpr double kAdaptedTolerance = 1e-10;
  static constexpr double kFdProbe = 1e-5;
  static constexpr double kFdRelative = 1e-5;
  static constexpr double kFdAbsolute = 1e-10;
  static constexpr double kMlmcKlSlope = 0.8;
  static constexpr double kDmKlSlope = 2.5;
  static constexpr double kDataProcessingSigmas = 3.0;
  static constexpr double kDmStrongMomentumSlope = 4.5;
  static constexpr double kDmWeakMomentumSlope = 5.5;
  static constexpr double kSlopeSigmas = 2.0;
  static constexpr double kTraceGapRatio = 1.8;
  static constexpr double kExpansionRatio = 6.0;
};

// Least number of steps N in [1, n_max] with KL(scheme marginal || diffusion
// marginal) <= eps^2 at fixed T; 0 when unreachable.
struct ComplexityPoint {
  double epsilon = 0.0;
  long steps = 0;
  long gradient_queries = 0;
  double kl = 0.0;
};
long gradient_queries_per_step(Scheme scheme);
double scheme_marginal_kl(Scheme scheme, const PotentialModel& V, double T, long N, int m, double gamma,
                          const GaussianLaw& initial);
ComplexityPoint required_steps(Scheme scheme, const PotentialModel& V, double T, int m, double gamma,
                               const GaussianLaw& initial, double epsilon, long n_max = 1L << 22);

}  // namespace lgir

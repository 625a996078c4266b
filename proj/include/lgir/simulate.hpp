#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lgir/girsanov.hpp"

namespace lgir {

// Initial law: independent Gaussian coordinates (zero std gives a point mass).
struct InitialLaw {
  Vec x_mean, x_std;
  Vec p_mean, p_std;
};

InitialLaw point_initial(const Vec& x0, const Vec& p0);
// Stationary law of the diffusion for a strongly convex quadratic V:
// x ~ N(argmin V, H^{-1}), p ~ N(0, I).
InitialLaw stationary_initial(const PotentialModel& V);

struct KineticSample {
  Vec x, p;
};
KineticSample sample_initial(const InitialLaw& law, std::uint64_t seed, std::uint64_t stream);

// Everything needed to simulate a scheme and its change of measure on one path.
struct SchemeSetup {
  Scheme scheme = Scheme::Mlmc;
  PotentialModel V = PotentialModel::isotropic(1, 1.0);
  PotentialModel reference = PotentialModel::isotropic(1, 0.0);  // EM-LD only
  TimeGrid grid;
  ScheduleMode schedule_mode = ScheduleMode::DeterministicOD;
  double tau_fraction = 0.5;
  double gamma = 1.0;
  InitialLaw init;
  std::uint64_t seed = 0;
  FixedPointOptions fixed_point;
};

bool is_underdamped(Scheme scheme);
MidpointSchedule make_schedule(const SchemeSetup& setup, const TimeGrid& grid, std::uint64_t stream);

struct PathOutcome {
  LogWeight weight;
  Vec x_end, p_end;
  long gradient_queries = 0;
  bool failed = false;
  std::string error;
};

// Simulates the scheme on `path` from z0 and accumulates the log Radon-Nikodym
// weight step by step (diagonal Malliavin blocks only).  Scheme ULMC yields the
// endpoint only.
PathOutcome evaluate_path(const SchemeSetup& setup, const NoisePath& path, const KineticSample& z0);

// Same with the path and initial state drawn from stream `index`, refined
// `refine_levels` times from the setup grid.
PathOutcome evaluate_index(const SchemeSetup& setup, std::uint64_t index, int refine_levels = 0);

// Runs paths 0..n-1 (stream = first_stream + i).
std::vector<PathOutcome> run_paths(const SchemeSetup& setup, std::size_t n, int threads,
                                   std::uint64_t first_stream = 0, int refine_levels = 0);

}  // namespace lgir

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgir/potential.hpp"

namespace lgir {

// Two-level time discretisation: N outer steps of size h = T/N, each split
// into m inner cells of size eta = h/m.  Only (T, N, m) are stored.
struct TimeGrid {
  double T = 1.0;
  int N = 1;
  int m = 1;

  double h() const { return T / N; }
  double eta() const { return T / N / m; }
  int cells() const { return N * m; }
  TimeGrid refined() const { return TimeGrid{T, N, 2 * m}; }
  bool operator==(const TimeGrid&) const = default;
};

TimeGrid make_grid(double T, int N, int m);

// Standard-normal increments xi_i (one d-vector per inner cell, stored as the
// columns of a d x (N m) matrix).  The Brownian increment over cell i is
// sqrt(eta) xi_i.  `level` counts bridge refinements from the sampled base path.
struct NoisePath {
  TimeGrid grid;
  int dim = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint32_t level = 0;
  Mat xi;

  // Increments of outer step k as a d x m block view.
  auto step_block(int k) const { return xi.middleCols(static_cast<Eigen::Index>(k) * grid.m, grid.m); }
};

NoisePath sample_path(const TimeGrid& grid, int dim, std::uint64_t seed, std::uint64_t stream);

// Brownian-bridge midpoint refinement: m -> 2m with the coarse increments
// reproduced exactly by pairwise merging.
NoisePath refine(const NoisePath& path);
// Inverse of refine on the increments: (xi_{2i} + xi_{2i+1}) / sqrt(2).
NoisePath coarsen(const NoisePath& path);

// Prefix sums B_{i eta} = sqrt(eta) sum_{j<i} xi_j, as a d x (N m + 1) matrix.
Mat brownian_partial_sums(const NoisePath& path);

// Binary dump: header (int32 d, int32 N, int32 m, uint64 seed, uint64 stream),
// then the increments as row-major float64 (cell-major, d values per cell).
void write_path_binary(const NoisePath& path, const std::string& file);
NoisePath read_path_binary(const std::string& file, double T);

enum class ScheduleMode { DeterministicOD, DeterministicUD, RandomizedUniform };

// Per-outer-step midpoint times.  Overdamped schedules fill `tau`; underdamped
// schedules fill `tau_minus` / `tau_plus`.
struct MidpointSchedule {
  ScheduleMode mode = ScheduleMode::DeterministicOD;
  bool underdamped = false;
  std::vector<double> tau;
  std::vector<double> tau_minus;
  std::vector<double> tau_plus;

  // Inner-grid index of tau for step k (overdamped schedules are on the grid).
  int tau_index(int k, const TimeGrid& grid) const;
};

// tau = fraction * h snapped to the nearest inner grid point in [0, h).
MidpointSchedule deterministic_od_schedule(const TimeGrid& grid, double fraction);
// tau- = h/3, tau+ = h/2 at their exact values (the underdamped interpolants are
// integrated exactly over partial cells, so no snapping is needed).
MidpointSchedule deterministic_ud_schedule(const TimeGrid& grid);
// Grid points drawn uniformly from {0, eta, ..., h - eta}; for the underdamped
// case two independent draws are sorted so that tau- <= tau+.
MidpointSchedule randomized_schedule(const TimeGrid& grid, bool underdamped, std::uint64_t seed,
                                     std::uint64_t stream);

}  // namespace lgir

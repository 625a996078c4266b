#include "lgir/path_grid.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lgir/rng.hpp"

namespace lgir {

TimeGrid make_grid(double T, int N, int m) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("grid horizon T must be positive");
  if (N <= 0) throw std::invalid_argument("grid needs at least one outer step");
  if (m <= 0) throw std::invalid_argument("grid needs at least one inner cell per step");
  return TimeGrid{T, N, m};
}

NoisePath sample_path(const TimeGrid& grid, int dim, std::uint64_t seed, std::uint64_t stream) {
  NoisePath path;
  path.grid = grid;
  path.dim = dim;
  path.seed = seed;
  path.stream = stream;
  path.xi.resize(dim, grid.cells());
  const CounterRng rng(seed, stream);
  for (int i = 0; i < grid.cells(); ++i)
    rng.normals(RngPurpose::Increment, 0, static_cast<std::uint64_t>(i), path.xi.col(i).data(), dim);
  return path;
}

NoisePath refine(const NoisePath& path) {
  NoisePath out = path;
  out.grid = path.grid.refined();
  out.level = path.level + 1;
  out.xi.resize(path.dim, out.grid.cells());
  const CounterRng rng(path.seed, path.stream);
  const double r = 1.0 / std::sqrt(2.0);
  Vec z(path.dim);
  for (int i = 0; i < path.grid.cells(); ++i) {
    rng.normals(RngPurpose::Bridge, out.level, static_cast<std::uint64_t>(i), z.data(), path.dim);
    out.xi.col(2 * i) = r * (path.xi.col(i) + z);
    out.xi.col(2 * i + 1) = r * (path.xi.col(i) - z);
  }
  return out;
}

NoisePath coarsen(const NoisePath& path) {
  if (path.grid.m % 2 != 0) throw std::invalid_argument("coarsen needs an even inner refinement");
  NoisePath out = path;
  out.grid.m = path.grid.m / 2;
  out.level = path.level > 0 ? path.level - 1 : 0;
  out.xi.resize(path.dim, out.grid.cells());
  const double r = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < out.grid.cells(); ++i)
    out.xi.col(i) = r * (path.xi.col(2 * i) + path.xi.col(2 * i + 1));
  return out;
}

Mat brownian_partial_sums(const NoisePath& path) {
  const double se = std::sqrt(path.grid.eta());
  Mat b(path.dim, path.grid.cells() + 1);
  b.col(0).setZero();
  for (int i = 0; i < path.grid.cells(); ++i) b.col(i + 1) = b.col(i) + se * path.xi.col(i);
  return b;
}

void write_path_binary(const NoisePath& path, const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + file + " for writing");
  const std::int32_t hdr[3] = {path.dim, path.grid.N, path.grid.m};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  os.write(reinterpret_cast<const char*>(&path.seed), sizeof(path.seed));
  os.write(reinterpret_cast<const char*>(&path.stream), sizeof(path.stream));
  // Column-major d x cells storage is row-major over (cell, coordinate).
  os.write(reinterpret_cast<const char*>(path.xi.data()),
           static_cast<std::streamsize>(sizeof(double) * path.xi.size()));
  if (!os) throw std::runtime_error("failed writing " + file);
}

NoisePath read_path_binary(const std::string& file, double T) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file);
  std::int32_t hdr[3];
  NoisePath path;
  is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  is.read(reinterpret_cast<char*>(&path.seed), sizeof(path.seed));
  is.read(reinterpret_cast<char*>(&path.stream), sizeof(path.stream));
  if (!is) throw std::runtime_error("truncated path header in " + file);
  path.dim = hdr[0];
  path.grid = make_grid(T, hdr[1], hdr[2]);
  path.xi.resize(path.dim, path.grid.cells());
  is.read(reinterpret_cast<char*>(path.xi.data()),
          static_cast<std::streamsize>(sizeof(double) * path.xi.size()));
  if (!is) throw std::runtime_error("truncated path body in " + file);
  return path;
}

int MidpointSchedule::tau_index(int k, const TimeGrid& grid) const {
  return static_cast<int>(std::lround(tau.at(static_cast<std::size_t>(k)) / grid.eta()));
}

MidpointSchedule deterministic_od_schedule(const TimeGrid& grid, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("midpoint fraction must lie in [0, 1)");
  MidpointSchedule s;
  s.mode = ScheduleMode::DeterministicOD;
  long idx = std::lround(fraction * grid.m);
  if (idx > grid.m - 1) idx = grid.m - 1;
  s.tau.assign(static_cast<std::size_t>(grid.N), static_cast<double>(idx) * grid.eta());
  return s;
}

MidpointSchedule deterministic_ud_schedule(const TimeGrid& grid) {
  MidpointSchedule s;
  s.mode = ScheduleMode::DeterministicUD;
  s.underdamped = true;
  s.tau_minus.assign(static_cast<std::size_t>(grid.N), grid.h() / 3.0);
  s.tau_plus.assign(static_cast<std::size_t>(grid.N), grid.h() / 2.0);
  return s;
}

MidpointSchedule randomized_schedule(const TimeGrid& grid, bool underdamped, std::uint64_t seed,
                                     std::uint64_t stream) {
  MidpointSchedule s;
  s.mode = ScheduleMode::RandomizedUniform;
  s.underdamped = underdamped;
  const CounterRng rng(seed, stream);
  double u[2];
  auto pick = [&](double v) {
    long idx = static_cast<long>(std::floor(v * grid.m));
    if (idx > grid.m - 1) idx = grid.m - 1;
    return static_cast<double>(idx) * grid.eta();
  };
  for (int k = 0; k < grid.N; ++k) {
    rng.uniforms(RngPurpose::Schedule, 0, static_cast<std::uint64_t>(k), u, 2);
    if (underdamped) {
      const double a = pick(u[0]), b = pick(u[1]);
      s.tau_minus.push_back(std::min(a, b));
      s.tau_plus.push_back(std::max(a, b));
    } else {
      s.tau.push_back(pick(u[0]));
    }
  }
  return s;
}

}  // namespace lgir

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace lgir {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct AcceptanceOptions {
  int threads = 1;
  std::string out_dir;  // CSV reports are written here when non-empty
  std::uint64_t seed = 2024;
};

// Runs the twelve acceptance criteria in order; one line per criterion is
// streamed to `log` as it completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream* log = nullptr);

std::string format_criterion(const CriterionResult& r);

}  // namespace lgir

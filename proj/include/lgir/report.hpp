#pragma once

#include <limits>
#include <string>
#include <vector>

namespace lgir {

constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

// One CSV row.  Non-applicable numeric fields stay NaN and are written as NA.
struct ReportRow {
  std::string experiment;
  std::string config_hash;
  std::string scheme;
  std::string metric;
  double h = kNA;
  double d = kNA;
  double q = kNA;
  double m = kNA;
  double gamma = kNA;
  double estimate = kNA;
  double se = kNA;
  double slope = kNA;
  double rejections = kNA;
  double runtime_ms = kNA;
  std::string status;
};

struct Report {
  std::vector<std::string> comments;  // written as '# ' lines after the schema line
  std::vector<ReportRow> rows;
};

constexpr const char* kReportSchema = "# lgir-report schema=1";

// Numbers use 17 significant digits.  Wall-clock columns are written only when
// `timing` is set, so that reruns produce byte-identical files by default.
std::string to_csv(const Report& report, bool timing = false);
void write_csv(const Report& report, const std::string& path, bool timing = false);

std::string format_number(double v);

}  // namespace lgir

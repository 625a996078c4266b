#include "lgir/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lgir {

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_csv(const Report& report, bool timing) {
  std::ostringstream o;
  o << kReportSchema << "\n";
  for (const std::string& c : report.comments) o << "# " << c << "\n";
  o << "experiment,config_hash,scheme,metric,h,d,q,m,gamma,estimate,se,slope,rejections,runtime_ms,status\n";
  for (const ReportRow& r : report.rows) {
    o << r.experiment << ',' << r.config_hash << ',' << r.scheme << ',' << r.metric << ','
      << format_number(r.h) << ',' << format_number(r.d) << ',' << format_number(r.q) << ','
      << format_number(r.m) << ',' << format_number(r.gamma) << ',' << format_number(r.estimate) << ','
      << format_number(r.se) << ',' << format_number(r.slope) << ',' << format_number(r.rejections) << ','
      << (timing ? format_number(r.runtime_ms) : std::string("NA")) << ',' << r.status << "\n";
  }
  return o.str();
}

void write_csv(const Report& report, const std::string& path, bool timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  out << to_csv(report, timing);
  if (!out) throw std::runtime_error("failed writing report '" + path + "'");
}

}  // namespace lgir

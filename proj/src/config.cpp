#include "lgir/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace lgir {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

class Table {
 public:
  std::map<std::string, Entry> entries;

  const Entry* find(const std::string& key) {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }
  bool has(const std::string& key) const { return entries.count(key) != 0; }

  std::string require(const std::string& key) {
    const Entry* e = find(key);
    if (!e) throw ConfigError("missing required key '" + key + "'");
    return e->value;
  }

  double to_double(const std::string& key, const std::string& text, int line) const {
    double v = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v))
      throw ConfigError("line " + std::to_string(line) + ": malformed number '" + text + "' for '" + key + "'");
    return v;
  }
  long to_long(const std::string& key, const std::string& text, int line) const {
    long v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
      // Accept integral values written in floating notation, e.g. 1e5.
      const double d = to_double(key, text, line);
      if (d != std::floor(d) || std::abs(d) > 9e15)
        throw ConfigError("line " + std::to_string(line) + ": '" + key + "' must be an integer");
      return static_cast<long>(d);
    }
    return v;
  }

  void get(const std::string& key, double& out) {
    if (const Entry* e = find(key)) out = to_double(key, e->value, e->line);
  }
  void get(const std::string& key, int& out) {
    if (const Entry* e = find(key)) out = static_cast<int>(to_long(key, e->value, e->line));
  }
  void get(const std::string& key, long& out) {
    if (const Entry* e = find(key)) out = to_long(key, e->value, e->line);
  }
  void get(const std::string& key, std::string& out) {
    if (const Entry* e = find(key)) out = e->value;
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const Entry* e = find(key)) {
      out.clear();
      for (const std::string& t : split_list(e->value)) out.push_back(to_double(key, t, e->line));
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const Entry* e = find(key)) {
      out.clear();
      for (const std::string& t : split_list(e->value)) out.push_back(static_cast<int>(to_long(key, t, e->line)));
    }
  }
};

Table parse_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3)
        throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key");
    if (value.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    auto it = t.entries.find(full);
    if (it != t.entries.end())
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + full + "' (first set on line " +
                        std::to_string(it->second.line) + ")");
    t.entries[full] = Entry{value, line, false};
  }
  return t;
}

Vec broadcast(const std::vector<double>& v, int dim, const std::string& key) {
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError("'" + key + "' needs 1 or " + std::to_string(dim) + " values");
  return Eigen::Map<const Vec>(v.data(), dim);
}

bool uses_weights(Experiment e) {
  return e != Experiment::LocalErrorSweep && e != Experiment::ComplexityTable;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Normalization: return "normalization";
    case Experiment::AdaptedEquivalence: return "adapted-equivalence";
    case Experiment::FdMalliavin: return "fd-malliavin";
    case Experiment::EtaRefinement: return "eta-refinement";
    case Experiment::KlOrderSweep: return "kl-order-sweep";
    case Experiment::LocalErrorSweep: return "local-error-sweep";
    case Experiment::TraceDiagnostics: return "trace-diagnostics";
    case Experiment::ComplexityTable: return "complexity-table";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& name) {
  for (Experiment e : {Experiment::Normalization, Experiment::AdaptedEquivalence, Experiment::FdMalliavin,
                       Experiment::EtaRefinement, Experiment::KlOrderSweep, Experiment::LocalErrorSweep,
                       Experiment::TraceDiagnostics, Experiment::ComplexityTable})
    if (to_string(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

PotentialModel make_potential(const PotentialSpec& spec) {
  switch (spec.kind) {
    case PotentialKind::IsotropicQuadratic: return PotentialModel::isotropic(spec.dim, spec.scale);
    case PotentialKind::AnisotropicQuadratic: return PotentialModel::anisotropic(spec.spectrum);
    case PotentialKind::QuadraticPlusSmoothPerturbation:
      return PotentialModel::perturbed(spec.spectrum, spec.perturbation);
    case PotentialKind::ProductNonGaussian: return PotentialModel::product(spec.dim, spec.product);
  }
  throw ConfigError("unknown potential kind");
}

std::vector<double> ExperimentConfig::step_sizes() const {
  std::vector<double> h;
  for (int n : steps) h.push_back(T / n);
  return h;
}

TimeGrid ExperimentConfig::grid(std::size_t i) const { return make_grid(T, steps.at(i), m); }

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  auto list = [](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()); ++i) {
      if (i) s += ",";
      s += fmt(static_cast<double>(v[i]));
    }
    return s;
  };
  o << "experiment=" << to_string(experiment) << "\n";
  o << "potential.kind=" << to_string(potential.kind) << "\n";
  o << "potential.dim=" << potential.dim << "\n";
  o << "potential.scale=" << fmt(potential.scale) << "\n";
  o << "potential.spectrum=" << list(potential.spectrum) << "\n";
  o << "potential.perturbation=" << fmt(potential.perturbation.amplitude) << ","
    << fmt(potential.perturbation.coupling) << "," << fmt(potential.perturbation.frequency) << "\n";
  o << "potential.product=" << fmt(potential.product.curvature) << "," << fmt(potential.product.logcosh_weight)
    << "\n";
  o << "grid.T=" << fmt(T) << "\n";
  o << "grid.N=" << list(steps) << "\n";
  o << "grid.m=" << m << "\n";
  o << "scheme=" << to_string(scheme) << "\n";
  o << "schedule=" << (randomized ? "randomized" : "deterministic") << "\n";
  o << "tau_fraction=" << fmt(tau_fraction) << "\n";
  o << "gamma=" << fmt(gamma) << "\n";
  o << "q=" << list(q) << "\n";
  o << "n_paths=" << n_paths << "\n";
  o << "seed=" << seed << "\n";
  o << "initial=" << (initial == InitialKind::Stationary ? "stationary" : "point") << "\n";
  o << "x0=" << list(x0) << "\n";
  o << "p0=" << list(p0) << "\n";
  o << "refinements=" << refinements << "\n";
  o << "m_list=" << list(m_list) << "\n";
  o << "epsilons=" << list(epsilons) << "\n";
  o << "reference_m=" << reference_m << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig load_config(const std::string& text) {
  Table t = parse_table(text);
  ExperimentConfig c;
  c.experiment = parse_experiment(t.require("experiment.name"));
  {
    long seed = 0;
    t.get("experiment.seed", seed);
    if (seed < 0) throw ConfigError("'experiment.seed' must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
  }
  t.get("experiment.n_paths", c.n_paths);
  t.get("experiment.output", c.output);
  t.get("experiment.refinements", c.refinements);
  t.get("experiment.m_list", c.m_list);
  t.get("experiment.epsilons", c.epsilons);
  t.get("experiment.reference_m", c.reference_m);

  const std::string kind = t.require("potential.kind");
  PotentialSpec& p = c.potential;
  std::vector<double> spectrum;
  t.get("potential.spectrum", spectrum);
  const bool has_dim = t.has("potential.dim");
  t.get("potential.dim", p.dim);
  if (kind == "isotropic") {
    p.kind = PotentialKind::IsotropicQuadratic;
    t.get("potential.scale", p.scale);
  } else if (kind == "anisotropic" || kind == "perturbed") {
    p.kind = kind == "anisotropic" ? PotentialKind::AnisotropicQuadratic
                                   : PotentialKind::QuadraticPlusSmoothPerturbation;
    if (spectrum.empty()) throw ConfigError("missing required key 'potential.spectrum'");
    if (has_dim && p.dim != static_cast<int>(spectrum.size()))
      throw ConfigError("'potential.dim' does not match the length of 'potential.spectrum'");
    p.dim = static_cast<int>(spectrum.size());
    p.spectrum = Eigen::Map<const Vec>(spectrum.data(), p.dim);
    t.get("potential.amplitude", p.perturbation.amplitude);
    t.get("potential.coupling", p.perturbation.coupling);
    t.get("potential.frequency", p.perturbation.frequency);
  } else if (kind == "product") {
    p.kind = PotentialKind::ProductNonGaussian;
    t.get("potential.curvature", p.product.curvature);
    t.get("potential.logcosh_weight", p.product.logcosh_weight);
  } else {
    throw ConfigError("unknown potential kind '" + kind + "'");
  }
  if (p.dim < 1) throw ConfigError("'potential.dim' must be positive");

  if (!t.has("grid.T")) throw ConfigError("missing required key 'grid.T'");
  t.get("grid.T", c.T);
  if (!(c.T > 0.0)) throw ConfigError("'grid.T' must be positive");
  const bool has_n = t.has("grid.N"), has_h = t.has("grid.h");
  if (has_n == has_h) throw ConfigError("exactly one of 'grid.N' and 'grid.h' is required");
  if (has_n) {
    t.get("grid.N", c.steps);
  } else {
    std::vector<double> hs;
    t.get("grid.h", hs);
    for (double h : hs) {
      if (!(h > 0.0)) throw ConfigError("'grid.h' values must be positive");
      const long n = std::lround(c.T / h);
      if (n < 1 || std::abs(n * h - c.T) > 1e-9 * c.T)
        throw ConfigError("'grid.h' = " + fmt(h) + " does not divide T = " + fmt(c.T));
      c.steps.push_back(static_cast<int>(n));
    }
  }
  for (int n : c.steps)
    if (n < 1) throw ConfigError("'grid.N' values must be positive");
  t.get("grid.m", c.m);
  if (c.m < 1) throw ConfigError("'grid.m' must be positive");

  std::string scheme = "M-LMC";
  t.get("scheme.name", scheme);
  try {
    c.scheme = parse_scheme(scheme);
  } catch (const std::exception&) {
    throw ConfigError("unknown scheme '" + scheme + "'");
  }
  std::string schedule = "deterministic";
  t.get("scheme.schedule", schedule);
  if (schedule != "deterministic" && schedule != "randomized")
    throw ConfigError("'scheme.schedule' must be deterministic or randomized");
  c.randomized = schedule == "randomized";
  t.get("scheme.tau_fraction", c.tau_fraction);
  t.get("scheme.gamma", c.gamma);
  t.get("scheme.q", c.q);

  const bool quadratic = p.kind == PotentialKind::IsotropicQuadratic || p.kind == PotentialKind::AnisotropicQuadratic;
  std::string law = quadratic ? "stationary" : "point";
  t.get("initial.law", law);
  if (law == "stationary") {
    if (!quadratic) throw ConfigError("'initial.law = stationary' needs a quadratic potential");
    c.initial = InitialKind::Stationary;
  } else if (law == "point") {
    c.initial = InitialKind::Point;
  } else {
    throw ConfigError("'initial.law' must be stationary or point");
  }
  std::vector<double> x0 = {0.0}, p0 = {0.0};
  t.get("initial.x0", x0);
  t.get("initial.p0", p0);
  if (c.initial == InitialKind::Point) {
    c.x0 = broadcast(x0, p.dim, "initial.x0");
    c.p0 = broadcast(p0, p.dim, "initial.p0");
  }

  for (const auto& [key, e] : t.entries)
    if (!e.used) throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "'");

  if (c.n_paths < 1) throw ConfigError("'experiment.n_paths' must be positive");
  if (!(c.gamma > 0.0)) throw ConfigError("'scheme.gamma' must be positive");
  if (!(c.tau_fraction >= 0.0 && c.tau_fraction < 1.0)) throw ConfigError("'scheme.tau_fraction' must lie in [0, 1)");
  if (c.q.empty()) throw ConfigError("'scheme.q' needs at least one value");
  for (double q : c.q)
    if (!(q > 1.0)) throw ConfigError("'scheme.q' values must exceed 1");
  if (c.refinements < 1) throw ConfigError("'experiment.refinements' must be positive");
  if (c.reference_m < 1) throw ConfigError("'experiment.reference_m' must be positive");
  for (int mm : c.m_list)
    if (mm < 1) throw ConfigError("'experiment.m_list' values must be positive");
  for (double eps : c.epsilons)
    if (!(eps > 0.0)) throw ConfigError("'experiment.epsilons' values must be positive");
  if (uses_weights(c.experiment) && c.scheme == Scheme::Ulmc && c.experiment != Experiment::TraceDiagnostics &&
      c.experiment != Experiment::AdaptedEquivalence)
    throw ConfigError("scheme ULMC has no path weights; use EM-LD, M-LMC or DM-ULMC");
  if (c.experiment == Experiment::ComplexityTable && !quadratic)
    throw ConfigError("complexity-table needs a quadratic potential");
  check_step_bounds(c);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return load_config(s.str());
}

void check_step_bounds(const ExperimentConfig& cfg) {
  if (!uses_weights(cfg.experiment)) return;
  const PotentialModel V = make_potential(cfg.potential);
  const double beta = V.beta();
  const double q = *std::max_element(cfg.q.begin(), cfg.q.end());
  for (double h : cfg.step_sizes()) {
    if (cfg.scheme == Scheme::Mlmc && cfg.experiment != Experiment::AdaptedEquivalence && h * beta * q > 1.0)
      throw ConfigError("h <= 1/(beta*q) required for M-LMC weights (h = " + fmt(h) + ", beta = " + fmt(beta) +
                        ", q = " + fmt(q) + ")");
    if (cfg.scheme == Scheme::DmUlmc && h * h * beta * q > 1.0)
      throw ConfigError("h <= 1/sqrt(beta*q) required for DM-ULMC weights (h = " + fmt(h) + ", beta = " +
                        fmt(beta) + ", q = " + fmt(q) + ")");
  }
}

InitialLaw make_initial(const ExperimentConfig& cfg, const PotentialModel& V) {
  if (cfg.initial == InitialKind::Stationary) return stationary_initial(V);
  return point_initial(cfg.x0, cfg.p0);
}

SchemeSetup make_setup(const ExperimentConfig& cfg, std::size_t grid_index) {
  SchemeSetup s;
  s.scheme = cfg.scheme;
  s.V = make_potential(cfg.potential);
  s.reference = PotentialModel::isotropic(cfg.potential.dim, 0.0);
  s.grid = cfg.grid(grid_index);
  if (cfg.randomized)
    s.schedule_mode = ScheduleMode::RandomizedUniform;
  else
    s.schedule_mode = is_underdamped(cfg.scheme) ? ScheduleMode::DeterministicUD : ScheduleMode::DeterministicOD;
  s.tau_fraction = cfg.tau_fraction;
  s.gamma = cfg.gamma;
  s.init = make_initial(cfg, s.V);
  s.seed = cfg.seed;
  return s;
}

}  // namespace lgir

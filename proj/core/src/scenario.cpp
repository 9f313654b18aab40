#include "mtnetopt/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mtnetopt/errors.hpp"

namespace mtnetopt {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::ProposedComp: return "proposed_comp";
    case Scheme::Baseline1Gcsi: return "baseline1_gcsi";
    case Scheme::Baseline2Stat: return "baseline2_stat";
    case Scheme::Baseline3Nocomp: return "baseline3_nocomp";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "proposed_comp") return Scheme::ProposedComp;
  if (s == "baseline1_gcsi") return Scheme::Baseline1Gcsi;
  if (s == "baseline2_stat") return Scheme::Baseline2Stat;
  if (s == "baseline3_nocomp") return Scheme::Baseline3Nocomp;
  throw ConfigError("unknown scheme: " + s);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

/// Consumes typed values from one section; leftover keys are errors.
class SectionReader {
 public:
  SectionReader(std::string name, std::map<std::string, std::string> kv)
      : name_(std::move(name)), kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& dflt) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }
  double num(const std::string& key, double dflt) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      const double v = std::stod(it->second);
      kv_.erase(it);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": not a number: " + it->second);
    }
  }
  long integer(const std::string& key, long dflt) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      const long v = std::stol(it->second);
      kv_.erase(it);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("[" + name_ + "] " + key + ": not an integer: " + it->second);
    }
  }
  bool flag(const std::string& key, bool dflt) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string v = it->second;
    kv_.erase(it);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("[" + name_ + "] " + key + ": expected on/off, got " + v);
  }

  void done() const {
    if (!kv_.empty())
      throw ConfigError("unknown key in [" + name_ + "]: " + kv_.begin()->first);
  }

 private:
  std::string name_;
  std::map<std::string, std::string> kv_;
};

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_config_text(
    const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"channel", "topology", "solver", "oracle", "experiment"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw ConfigError("unknown section [" + section + "]");
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (out[section].count(key))
      throw ConfigError("duplicate key in [" + section + "]: " + key);
    out[section][key] = value;
  }
  return out;
}

Scenario Scenario::from_text(const std::string& text) {
  auto sections = parse_config_text(text);
  Scenario sc;

  {
    SectionReader ch("channel", sections["channel"]);
    sc.channel.a_H = ch.num("a_H", sc.channel.a_H);
    sc.channel.epsilon_target = ch.num("epsilon_target", sc.channel.epsilon_target);
    sc.channel.v_max_mps = ch.num("v_max_mps", sc.channel.v_max_mps);
    sc.channel.D_min_m = ch.num("D_min_m", sc.channel.D_min_m);
    sc.channel.iota = ch.num("iota", sc.channel.iota);
    const std::string c0_mode = ch.str("c0_mode", "dmin_pow_iota");
    if (c0_mode == "explicit") {
      sc.channel.c0_explicit = true;
      sc.channel.c0 = ch.num("c0", 1.0);
    } else if (c0_mode != "dmin_pow_iota") {
      throw ConfigError("[channel] c0_mode: expected dmin_pow_iota or explicit");
    }
    sc.channel.levy_beta_flight = ch.num("levy_beta_flight", sc.channel.levy_beta_flight);
    sc.channel.levy_beta_pause = ch.num("levy_beta_pause", sc.channel.levy_beta_pause);
    sc.channel.region_radius_m = ch.num("region_radius_m", sc.channel.region_radius_m);
    sc.channel.snr_db = ch.num("snr_db", sc.channel.snr_db);
    ch.done();
  }
  {
    SectionReader tp("topology", sections["topology"]);
    sc.topology_source = tp.str("source", "builtin:fig1");
    sc.V = tp.num("power_price_V", 1.0);
    sc.r_floor = tp.num("r_floor", kRateFloor);
    tp.done();
    if (sc.topology_source == "builtin:fig1") {
      sc.topo = Topology::fig1();
    } else {
      sc.topo = Topology::from_json_file(sc.topology_source);
    }
  }
  {
    SectionReader so("solver", sections["solver"]);
    const std::string alg = so.str("algorithm", "primal_dual");
    if (alg == "primal_dual") sc.algorithm = AlgorithmVariant::PrimalDual;
    else if (alg == "projected_gradient") sc.algorithm = AlgorithmVariant::ProjectedGradient;
    else throw ConfigError("[solver] algorithm: expected primal_dual or projected_gradient");
    sc.schedule.gamma = so.num("gamma", 0.05);
    const std::string mu = so.str("mu_schedule", "constant");
    if (mu == "constant") sc.schedule.kind = ScheduleKind::Constant;
    else if (mu == "one_over_n") sc.schedule.kind = ScheduleKind::Diminishing;
    else throw ConfigError("[solver] mu_schedule: expected constant or one_over_n");
    sc.schedule.mu0 = so.num("mu0", sc.schedule.gamma);
    sc.N_s = static_cast<int>(so.integer("N_s", 30));
    sc.tau_ms = so.num("tau_ms", 1.0);
    sc.compensation = so.flag("compensation", true);
    sc.tikhonov_delta = so.num("tikhonov_delta", 1e-8);
    sc.active_set_tol = so.num("active_set_tol", 1e-6);
    sc.scaling = so.str("scaling", "identity");
    so.done();
    if (sc.scaling.rfind("diag:", 0) == 0) {
      std::ifstream in(sc.scaling.substr(5));
      if (!in) throw ConfigError("[solver] scaling: cannot open " + sc.scaling.substr(5));
      std::vector<double> vals;
      double v;
      while (in >> v) vals.push_back(v);
      sc.scaling_diag = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    } else if (sc.scaling != "identity") {
      throw ConfigError("[solver] scaling: expected identity or diag:<file>");
    }
  }
  {
    SectionReader orc("oracle", sections["oracle"]);
    sc.oracle.inner_tol = orc.num("oracle_inner_tol", sc.oracle.inner_tol);
    sc.oracle.outer_tol = orc.num("oracle_outer_tol", sc.oracle.outer_tol);
    sc.oracle.outer_samples = static_cast<int>(orc.integer("oracle_outer_samples", sc.oracle.outer_samples));
    sc.oracle.cache_tol = orc.num("oracle_cache_tol", sc.oracle.cache_tol);
    sc.oracle.burn_in_frac = orc.num("burn_in_frac", sc.oracle.burn_in_frac);
    sc.oracle.max_iter = static_cast<int>(orc.integer("oracle_max_iter", sc.oracle.max_iter));
    orc.done();
    sc.oracle.tikhonov_delta = sc.tikhonov_delta;
    sc.oracle.active_set_tol = sc.active_set_tol;
  }
  {
    SectionReader ex("experiment", sections["experiment"]);
    const std::string schemes = ex.str("scheme", "proposed_comp");
    sc.experiment.schemes.clear();
    for (const std::string& s : split(schemes, ','))
      sc.experiment.schemes.push_back(scheme_from_string(s));
    sc.experiment.horizon_frames = ex.integer("horizon_frames", 2000);
    const std::string seeds = ex.str("seeds", "1");
    sc.experiment.seeds.clear();
    for (const std::string& s : split(seeds, ','))
      sc.experiment.seeds.push_back(static_cast<std::uint64_t>(std::stoull(s)));
    sc.experiment.latency_ms = ex.num("latency_ms", 0.0);
    sc.experiment.T_s_ms = ex.num("T_s_ms", 100.0);
    sc.experiment.theta_out = ex.num("theta_out", 0.05);
    sc.experiment.baseline2_samples = static_cast<int>(ex.integer("baseline2_samples", 2048));
    sc.experiment.outage_margin = ex.num("outage_margin", 0.0);
    const std::string grid = ex.str("grid_a_H", "");
    if (!grid.empty())
      for (const std::string& s : split(grid, ','))
        sc.experiment.grid_a_H.push_back(std::stod(s));
    sc.experiment.snapshot_link = static_cast<int>(ex.integer("snapshot_link", -1));
    sc.experiment.dump_channel = ex.flag("dump_channel", false);
    sc.experiment.burn_in_frames = ex.integer("burn_in_frames", -1);
    ex.done();
  }

  sc.validate();
  return sc;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void Scenario::validate() const {
  if (channel.a_H < 0) throw ConfigError("[channel] a_H must be >= 0");
  if (channel.iota <= 0) throw ConfigError("[channel] iota must be > 0");
  if (channel.D_min_m <= 0) throw ConfigError("[channel] D_min_m must be > 0");
  if (schedule.gamma < 0) throw ConfigError("[solver] gamma must be >= 0");
  if (N_s < 1) throw ConfigError("[solver] N_s must be >= 1");
  if (tau_ms <= 0) throw ConfigError("[solver] tau_ms must be > 0");
  if (V <= 0) throw ConfigError("[topology] power_price_V must be > 0");
  if (experiment.seeds.empty()) throw ConfigError("[experiment] seeds must be nonempty");
  if (experiment.horizon_frames <= burn_in())
    throw ConfigError("[experiment] horizon_frames must exceed the burn-in (" +
                      std::to_string(burn_in()) + " frames)");
  if (experiment.theta_out < 0 || experiment.theta_out >= 1)
    throw ConfigError("[experiment] theta_out must be in [0, 1)");
  if (experiment.T_s_ms < tau_ms)
    throw ConfigError("[experiment] T_s_ms must be at least one frame");
  if (oracle.burn_in_frac < 0 || oracle.burn_in_frac >= 1)
    throw ConfigError("[oracle] burn_in_frac must be in [0, 1)");
}

RelayProblem Scenario::make_problem() const {
  RelayProblem pr = RelayProblem::build(topo, V);
  pr.r_floor = r_floor;
  return pr;
}

SolverConfig Scenario::make_solver_config(bool comp_enabled) const {
  SolverConfig cfg;
  cfg.algorithm = algorithm;
  cfg.schedule = schedule;
  cfg.comp.enabled = comp_enabled;
  cfg.comp.tikhonov_delta = tikhonov_delta;
  cfg.comp.active_set_tol = active_set_tol;
  cfg.latency_frames = static_cast<int>(experiment.latency_ms / tau_ms + 0.5);
  if (scaling_diag.size() > 0) {
    const Eigen::Index N = static_cast<Eigen::Index>(topo.num_links());
    const Eigen::Index F = static_cast<Eigen::Index>(topo.num_flows());
    const Eigen::Index W = scaling_diag.size() - N - F;
    if (W < 0) throw ConfigError("[solver] scaling diag file too short");
    cfg.scaling.diag_p = scaling_diag.head(N);
    cfg.scaling.diag_lambda = scaling_diag.segment(N, W);
    cfg.scaling.diag_r = scaling_diag.tail(F);
  }
  return cfg;
}

}  // namespace mtnetopt

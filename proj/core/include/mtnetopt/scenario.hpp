#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtnetopt/channel.hpp"
#include "mtnetopt/oracle.hpp"
#include "mtnetopt/solver.hpp"
#include "mtnetopt/topology.hpp"

namespace mtnetopt {

enum class Scheme {
  ProposedComp,
  Baseline1Gcsi,
  Baseline2Stat,
  Baseline3Nocomp,
};

std::string scheme_name(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct ExperimentParams {
  std::vector<Scheme> schemes = {Scheme::ProposedComp};
  long horizon_frames = 2000;
  std::vector<std::uint64_t> seeds = {1};
  double latency_ms = 0.0;
  double T_s_ms = 100.0;       // baseline-2 hold window
  double theta_out = 0.05;     // baseline-2 outage budget
  int baseline2_samples = 2048;
  double outage_margin = 0.0;  // count outage when g > max(margin, 1e-9)
  std::vector<double> grid_a_H;  // empty: single run at channel.a_H
  int snapshot_link = -1;        // per-frame power trace of this link id
  bool dump_channel = false;
  long burn_in_frames = -1;      // -1: burn_in_frac * horizon
};

/// A fully parsed experiment configuration (config file sections
/// [channel] [topology] [solver] [oracle] [experiment]).
struct Scenario {
  ChannelParams channel;
  std::string topology_source = "builtin:fig1";
  Topology topo;
  double V = 1.0;
  double r_floor = kRateFloor;

  AlgorithmVariant algorithm = AlgorithmVariant::PrimalDual;
  StepSchedule schedule;
  int N_s = 30;
  double tau_ms = 1.0;
  bool compensation = true;
  double tikhonov_delta = 1e-8;
  double active_set_tol = 1e-6;
  std::string scaling = "identity";
  Eigen::VectorXd scaling_diag;  // stacked (p, lambda, r) when scaling = diag:<file>

  OracleConfig oracle;
  ExperimentParams experiment;

  double tau_sec() const { return tau_ms * 1e-3; }
  long burn_in() const {
    if (experiment.burn_in_frames >= 0) return experiment.burn_in_frames;
    return static_cast<long>(oracle.burn_in_frac * experiment.horizon_frames);
  }

  RelayProblem make_problem() const;
  SolverConfig make_solver_config(bool comp_enabled) const;

  /// Throws ConfigError naming the offending key.
  void validate() const;

  static Scenario from_file(const std::string& path);
  static Scenario from_text(const std::string& text);
};

/// Raw section -> key -> value parse of the flat key=value format.
std::map<std::string, std::map<std::string, std::string>> parse_config_text(
    const std::string& text);

}  // namespace mtnetopt

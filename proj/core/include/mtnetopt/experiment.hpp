#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mtnetopt/scenario.hpp"

namespace mtnetopt {

/// Per-frame metrics; feasibility/outage are always evaluated at the applied
/// decisions against the true current CSI.
struct FrameMetrics {
  double t_sec = 0.0;
  bool feasible = true;
  double sum_rate = 0.0;
  double utility = 0.0;  // sum_j log r_j at the applied rates
  double power_sum = 0.0;
  double e_x_inst = 0.0;
  double e_y_inst = 0.0;
};

struct RunSummary {
  Scheme scheme = Scheme::ProposedComp;
  std::uint64_t seed = 0;
  double a_H = 0.0;
  double P_out = 0.0;      // fraction of post-burn-in frames in outage
  double throughput = 0.0; // mean sum_rate over frames, zero when infeasible
  double utility = 0.0;    // mean sum log r over feasible frames
  double e_x = 0.0;
  double e_y = 0.0;
  double mean_objective = 0.0;  // mean (sum log r - V sum p) over feasible frames
  long comp_failures = 0;
  long fallbacks = 0;  // baseline-1/2 infeasibility fallbacks (logged)
};

struct SnapshotPoint {
  double t_sec = 0.0;
  double p_link = 0.0;
  double p_oracle = 0.0;
};

struct RunOutput {
  std::vector<FrameMetrics> frames;
  RunSummary summary;
  std::vector<SnapshotPoint> snapshot;
};

/// Folds per-frame metrics into the run-level aggregates (after burn-in).
RunSummary metrics_fold(const std::vector<FrameMetrics>& frames, long burn_in,
                        double V);

/// Executes one scheme over one channel realization; deterministic per seed.
RunOutput run_one(const Scenario& scenario, Scheme scheme, double a_H,
                  std::uint64_t seed);

struct Aggregate {
  double mean = 0.0;
  double ci95 = 0.0;  // normal-approximation half width across seeds
  int n = 0;
};

struct SchemeAggregate {
  Scheme scheme;
  double a_H = 0.0;
  Aggregate p_out, throughput, utility, e_x, e_y;
};

struct ScenarioResults {
  std::vector<RunSummary> runs;
  std::vector<SchemeAggregate> aggregates;
};

/// Runs every scheme x a_H grid point x seed, optionally in parallel
/// (MTNETOPT_THREADS caps the worker count), and emits CSV/JSON/SVG outputs
/// when out_dir is set.
ScenarioResults run_scenario(const Scenario& scenario,
                             const std::optional<std::string>& out_dir);

Aggregate aggregate_of(const std::vector<double>& values);

/// Baseline-1 one-shot decision: deterministic joint solve on (possibly
/// delayed) CSI, dropping the expectation.
struct JointDecision {
  Eigen::VectorXd r;
  Eigen::VectorXd p;
  bool fallback = false;
};
JointDecision baseline1_step(const EffectiveChannel& h_delayed,
                             const RelayProblem& problem,
                             const OracleConfig& cfg,
                             const Eigen::VectorXd* warm_r,
                             const Eigen::VectorXd* prev_r,
                             const Eigen::VectorXd* prev_p);

/// Baseline-2 scenario approximation: keep the ceil((1-theta) M) easiest
/// fading samples (ordered by worst constraint slack at the current decision)
/// and require feasibility on all of them, re-sorting a fixed number of
/// rounds. Decisions are held for T_s.
struct ScenarioSolve {
  Eigen::VectorXd r;
  Eigen::VectorXd p;
  std::vector<int> kept;
  bool fallback = false;
};
ScenarioSolve baseline2_step(const std::vector<EffectiveChannel>& samples,
                             const RelayProblem& problem, double theta_out,
                             const OracleConfig& cfg,
                             const Eigen::VectorXd* warm_r);

/// Indices of the ceil((1-theta) M) easiest samples by worst slack at (r, p).
std::vector<int> select_scenario_kept(const std::vector<EffectiveChannel>& samples,
                                      const Eigen::VectorXd& r,
                                      const Eigen::VectorXd& p,
                                      const RelayProblem& problem,
                                      double theta_out);

/// Out-of-sample violation rate (any constraint infeasible) at (r, p).
double violation_rate(const std::vector<EffectiveChannel>& samples,
                      const Eigen::VectorXd& r, const Eigen::VectorXd& p,
                      const RelayProblem& problem);

/// Shrinks r toward the floor by bisection on a scale factor until the MAC
/// residuals are feasible at (r, p, h). Used as the logged fallback when a
/// baseline solve fails.
Eigen::VectorXd shrink_rates_to_feasible(const Eigen::VectorXd& r,
                                         const Eigen::VectorXd& p,
                                         const EffectiveChannel& h,
                                         const RelayProblem& problem);

/// Outage test: any residual above max(margin, 1e-9); the absolute tolerance
/// treats sub-nanoscale boundary noise at converged points as feasible.
bool in_outage(const Eigen::VectorXd& g, double margin);

int thread_cap();

}  // namespace mtnetopt

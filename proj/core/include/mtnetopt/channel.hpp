#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "mtnetopt/rng.hpp"

namespace mtnetopt {

struct Topology;  // topology.hpp

using Complex = std::complex<double>;

/// Small-scale fading state: one complex Ornstein-Uhlenbeck coefficient per
/// link, unit stationary power E|h_s|^2 = 1. a_H is the short-term timescale
/// rate in 1/s; a_H = 0 freezes the process exactly.
struct OuFading {
  std::vector<Complex> h_s;
  double a_H = 0.0;

  static OuFading stationary(std::size_t links, double a_H, RngStream& rng);
};

/// Exact OU transition over dt seconds (not an Euler step):
///   h' = h * exp(-a_H*dt/2) + sqrt(1 - exp(-a_H*dt)) * xi,
/// xi a standard complex Gaussian. Statistics are exact for any dt.
OuFading ou_step(const OuFading& state, double dt, RngStream& rng);

/// Truncated power-law (Pareto) sampler: density ~ l^-(1+beta) on [lo, hi].
double truncated_pareto(double beta, double lo, double hi, RngStream& rng);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct MobilityParams {
  double v_max = 27.7778;        // m/s
  double region_radius = 50.0;   // m, restricted region around home position
  double beta_flight = 1.0;      // Levy flight-length exponent
  double beta_pause = 1.0;       // Levy pause-time exponent
  double flight_min = 1.0;       // m
  double flight_max = 0.0;       // m; 0 -> region_radius
  double pause_min = 1.0;        // s
  double pause_max = 100.0;      // s
};

enum class MobilityPhase { Walking, Paused };

struct NodeMotion {
  bool is_static = true;
  Vec2 position;
  Vec2 home;  // center of the restricted region
  MobilityPhase phase = MobilityPhase::Paused;
  Vec2 destination;
  double speed = 0.0;            // m/s, in (0, v_max] while walking
  double pause_remaining = 0.0;  // s
};

struct MobilityState {
  std::vector<NodeMotion> nodes;
  MobilityParams params;

  static MobilityState from_positions(const std::vector<Vec2>& positions,
                                      const std::vector<bool>& mobile,
                                      const MobilityParams& params);
};

/// Levy-walk step: walking nodes advance speed*dt toward their destination;
/// on arrival a truncated power-law pause is drawn; on pause expiry a new
/// destination (truncated power-law flight length, uniform direction, clipped
/// to the region) and a uniform speed in (0, v_max] are drawn. Sub-steps
/// internally across phase boundaries.
MobilityState mobility_step(const MobilityState& state, double dt,
                            RngStream& rng);

/// Large-scale path loss per link: h_l = c0 * max(D, D_min)^-iota.
struct PathLoss {
  std::vector<double> h_l;
  double c0 = 1.0;
  double iota = 1.8;
  double D_min = 75.0;
};

PathLoss path_loss_from_positions(const MobilityState& mob,
                                  const Topology& topo, double c0, double iota,
                                  double D_min);

/// Per-link distances (same clamping as path loss is NOT applied here).
std::vector<double> link_distances(const MobilityState& mob,
                                   const Topology& topo);

/// Composite CSI h_j = h_l_j * h_s_j. Lengths must match.
std::vector<Complex> composite_csi(const OuFading& fading, const PathLoss& pl);

/// Slow-timescale bound epsilon(D_min, v_max) = 2*c0*iota*D_min^-(iota+1)*v_max.
double epsilon_bound(double c0, double iota, double D_min, double v_max);

/// Scenario-level channel parameters (see the [channel] config section).
struct ChannelParams {
  double a_H = 1.0;
  double epsilon_target = 0.0;  // if > 0, v_max is derived from it
  double v_max_mps = 27.7778;
  double D_min_m = 75.0;
  double iota = 1.8;
  bool c0_explicit = false;  // false: c0 = D_min^iota
  double c0 = 0.0;
  double levy_beta_flight = 1.0;
  double levy_beta_pause = 1.0;
  double region_radius_m = 50.0;
  double snr_db = 11.0;

  double c0_value() const;
  double v_max_value() const;  // derived from epsilon_target when set
  double snr_gain() const { return std::pow(10.0, snr_db / 10.0); }
};

/// A full mixed-timescale channel trajectory: OU fading plus Levy mobility
/// driving the path-loss process, advanced frame by frame.
class ChannelProcess {
 public:
  ChannelProcess(const ChannelParams& params, const Topology& topo,
                 std::uint64_t seed);

  /// Advances time by dt seconds (mobility + fading).
  void advance(double dt);

  const OuFading& fading() const { return fading_; }
  const PathLoss& path_loss() const { return pl_; }
  const MobilityState& mobility() const { return mob_; }
  const ChannelParams& params() const { return params_; }
  double time() const { return time_; }

  /// Diagonal of H_L(t): c0*iota*D_j^-(iota+1)*v_j with v_j the per-link
  /// relative speed from actual endpoint kinematics (finite difference).
  std::vector<double> h_l_rate() const { return h_l_rate_; }

 private:
  ChannelParams params_;
  const Topology* topo_;
  OuFading fading_;
  MobilityState mob_;
  PathLoss pl_;
  std::vector<double> prev_dist_;
  std::vector<double> h_l_rate_;
  double time_ = 0.0;
  RngStream fading_rng_;
  RngStream mobility_rng_;
};

}  // namespace mtnetopt

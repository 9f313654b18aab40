#include "mtnetopt/channel.hpp"

#include <algorithm>
#include <cmath>

#include "mtnetopt/errors.hpp"
#include "mtnetopt/topology.hpp"

namespace mtnetopt {

OuFading OuFading::stationary(std::size_t links, double a_H, RngStream& rng) {
  OuFading f;
  f.a_H = a_H;
  f.h_s.resize(links);
  for (auto& h : f.h_s) h = rng.complex_gaussian();
  return f;
}

OuFading ou_step(const OuFading& state, double dt, RngStream& rng) {
  if (dt < 0.0) throw std::invalid_argument("ou_step: negative dt");
  if (state.a_H < 0.0) throw std::invalid_argument("ou_step: negative a_H");
  if (dt == 0.0 || state.a_H == 0.0) return state;

  OuFading out = state;
  const double decay = std::exp(-0.5 * state.a_H * dt);
  const double scale = std::sqrt(1.0 - std::exp(-state.a_H * dt));
  for (auto& h : out.h_s) h = h * decay + scale * rng.complex_gaussian();
  return out;
}

double truncated_pareto(double beta, double lo, double hi, RngStream& rng) {
  if (!(lo > 0.0) || hi < lo) throw std::invalid_argument("truncated_pareto: bad range");
  if (hi == lo) return lo;
  const double u = rng.uniform();
  const double a = std::pow(lo, -beta);
  const double b = std::pow(hi, -beta);
  return std::pow(a - u * (a - b), -1.0 / beta);
}

MobilityState MobilityState::from_positions(const std::vector<Vec2>& positions,
                                            const std::vector<bool>& mobile,
                                            const MobilityParams& params) {
  MobilityState st;
  st.params = params;
  st.nodes.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    NodeMotion& n = st.nodes[i];
    n.position = positions[i];
    n.home = positions[i];
    n.is_static = !(i < mobile.size() && mobile[i]);
    n.phase = MobilityPhase::Paused;
    n.pause_remaining = 0.0;  // draws a fresh destination on the first step
  }
  return st;
}

namespace {

Vec2 clip_to_region(const Vec2& v, const Vec2& home, double radius) {
  const double d = dist(v, home);
  if (d <= radius || d == 0.0) return v;
  const double s = radius / d;
  return {home.x + (v.x - home.x) * s, home.y + (v.y - home.y) * s};
}

void start_new_flight(NodeMotion& n, const MobilityParams& p, RngStream& rng) {
  const double fmax = p.flight_max > 0.0 ? p.flight_max : p.region_radius;
  const double len = truncated_pareto(p.beta_flight, p.flight_min,
                                      std::max(p.flight_min, fmax), rng);
  const double ang = 2.0 * M_PI * rng.uniform();
  Vec2 dest{n.position.x + len * std::cos(ang), n.position.y + len * std::sin(ang)};
  n.destination = clip_to_region(dest, n.home, p.region_radius);
  n.speed = rng.uniform_open_closed(0.0, p.v_max);
  n.phase = MobilityPhase::Walking;
}

}  // namespace

MobilityState mobility_step(const MobilityState& state, double dt,
                            RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("mobility_step: dt must be > 0");
  MobilityState out = state;
  const MobilityParams& p = out.params;

  for (NodeMotion& n : out.nodes) {
    if (n.is_static) continue;
    double remaining = dt;
    // Sub-step across phase boundaries within this dt.
    while (remaining > 0.0) {
      if (n.phase == MobilityPhase::Paused) {
        if (n.pause_remaining > remaining) {
          n.pause_remaining -= remaining;
          remaining = 0.0;
        } else {
          remaining -= n.pause_remaining;
          n.pause_remaining = 0.0;
          start_new_flight(n, p, rng);
        }
      } else {
        const double d = dist(n.position, n.destination);
        const double need = n.speed > 0.0 ? d / n.speed : 0.0;
        if (need > remaining) {
          const double step = n.speed * remaining;
          const double s = step / d;
          n.position.x += (n.destination.x - n.position.x) * s;
          n.position.y += (n.destination.y - n.position.y) * s;
          remaining = 0.0;
        } else {
          n.position = n.destination;
          remaining -= need;
          n.phase = MobilityPhase::Paused;
          n.pause_remaining =
              truncated_pareto(p.beta_pause, p.pause_min, p.pause_max, rng);
        }
      }
    }
  }
  return out;
}

std::vector<double> link_distances(const MobilityState& mob,
                                   const Topology& topo) {
  std::vector<double> d(topo.links.size());
  for (std::size_t k = 0; k < topo.links.size(); ++k) {
    const Link& l = topo.links[k];
    int ti = -1, ri = -1;
    for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
      if (topo.nodes[i].id == l.tx) ti = static_cast<int>(i);
      if (topo.nodes[i].id == l.rx) ri = static_cast<int>(i);
    }
    if (ti < 0 || ri < 0) throw std::invalid_argument("link endpoint not in node set");
    d[k] = dist(mob.nodes[ti].position, mob.nodes[ri].position);
  }
  return d;
}

PathLoss path_loss_from_positions(const MobilityState& mob,
                                  const Topology& topo, double c0, double iota,
                                  double D_min) {
  PathLoss pl;
  pl.c0 = c0;
  pl.iota = iota;
  pl.D_min = D_min;
  const std::vector<double> d = link_distances(mob, topo);
  pl.h_l.resize(d.size());
  for (std::size_t k = 0; k < d.size(); ++k)
    pl.h_l[k] = c0 * std::pow(std::max(d[k], D_min), -iota);
  return pl;
}

std::vector<Complex> composite_csi(const OuFading& fading, const PathLoss& pl) {
  if (fading.h_s.size() != pl.h_l.size())
    throw std::invalid_argument("composite_csi: length mismatch");
  std::vector<Complex> h(fading.h_s.size());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = pl.h_l[k] * fading.h_s[k];
  return h;
}

double epsilon_bound(double c0, double iota, double D_min, double v_max) {
  return 2.0 * c0 * iota * std::pow(D_min, -iota - 1.0) * v_max;
}

double ChannelParams::c0_value() const {
  return c0_explicit ? c0 : std::pow(D_min_m, iota);
}

double ChannelParams::v_max_value() const {
  if (epsilon_target > 0.0) {
    // invert epsilon(D_min, v_max) for v_max
    return epsilon_target * std::pow(D_min_m, iota + 1.0) /
           (2.0 * c0_value() * iota);
  }
  return v_max_mps;
}

ChannelProcess::ChannelProcess(const ChannelParams& params,
                               const Topology& topo, std::uint64_t seed)
    : params_(params),
      topo_(&topo),
      fading_rng_(derive_seed(seed, 1)),
      mobility_rng_(derive_seed(seed, 2)) {
  fading_ = OuFading::stationary(topo.num_links(), params_.a_H, fading_rng_);

  MobilityParams mp;
  mp.v_max = params_.v_max_value();
  mp.region_radius = params_.region_radius_m;
  mp.beta_flight = params_.levy_beta_flight;
  mp.beta_pause = params_.levy_beta_pause;
  std::vector<Vec2> pos(topo.nodes.size());
  std::vector<bool> mob(topo.nodes.size());
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    pos[i] = topo.nodes[i].position;
    mob[i] = topo.nodes[i].mobile && mp.v_max > 0.0;
  }
  mob_ = MobilityState::from_positions(pos, mob, mp);
  pl_ = path_loss_from_positions(mob_, topo, params_.c0_value(), params_.iota,
                                 params_.D_min_m);
  prev_dist_ = link_distances(mob_, topo);
  h_l_rate_.assign(topo.num_links(), 0.0);
}

void ChannelProcess::advance(double dt) {
  if (dt <= 0.0) return;
  mob_ = mobility_step(mob_, dt, mobility_rng_);
  pl_ = path_loss_from_positions(mob_, *topo_, params_.c0_value(),
                                 params_.iota, params_.D_min_m);
  const std::vector<double> d = link_distances(mob_, *topo_);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double v = std::abs(d[k] - prev_dist_[k]) / dt;  // relative speed
    const double D = std::max(d[k], params_.D_min_m);
    h_l_rate_[k] = params_.c0_value() * params_.iota *
                   std::pow(D, -params_.iota - 1.0) * v;
  }
  prev_dist_ = d;
  fading_ = ou_step(fading_, dt, fading_rng_);
  time_ += dt;
}

}  // namespace mtnetopt

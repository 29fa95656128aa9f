#include "sgc/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "sgc/errors.hpp"

namespace sgc {

namespace {

constexpr double kSupportSlack = 1e-9;

struct Membership {
  bool up = false;
  bool down = false;
  [[nodiscard]] bool any() const { return up || down; }
};

// Branch with positive weight closest to `p` along z; ties go to the higher one.
std::pair<const Packet*, double> nearest_branch(const BranchedWave& wave, Vec2 p, double tau) {
  const Packet* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : wave.branches) {
    if (b.weight <= 0.0) continue;
    const double d = std::max({b.z_low(tau) - p.z, p.z - b.z_high(tau), 0.0});
    if (d < best || (d == best && nearest != nullptr && b.center_z + b.vel_z * tau > nearest->center_z + nearest->vel_z * tau)) {
      best = d;
      nearest = &b;
    }
  }
  return {nearest, best};
}

// Weighted group velocity at `p`, with branch positions taken at offset
// `tau` from the wave's reference time. `capture` > 0 enables the
// nearest-branch rule used by the integrator.
Vec2 guided_velocity(const BranchedWave& wave, double tau, Vec2 p, double capture) {
  double wsum = 0.0;
  Vec2 acc;
  for (const auto& b : wave.branches) {
    if (b.weight > 0.0 && b.contains(p, tau)) {
      wsum += b.weight;
      acc.x += b.weight * b.vel_x;
      acc.z += b.weight * b.vel_z;
    }
  }
  if (wsum > 0.0) return {acc.x / wsum, acc.z / wsum};

  const auto [nearest, gap] = nearest_branch(wave, p, tau);
  if (nearest != nullptr && gap <= capture) return {nearest->vel_x, nearest->vel_z};

  throw NoSupport(fmt::format("particle at (x={}, z={}) lies outside every branch at t={}", p.x, p.z,
                              wave.time + tau));
}

Membership membership(const BranchedWave& wave, Vec2 p, double tau) {
  Membership m;
  for (const auto& b : wave.branches) {
    if (b.weight > 0.0 && b.contains(p, tau)) (b.spin == Spin::Up ? m.up : m.down) = true;
  }
  return m;
}

Occupancy occupancy_at(const BranchedWave& wave, Vec2 p, double tau) {
  const Membership m = membership(wave, p, tau);
  if (m.up && m.down) return Occupancy::Both;
  if (m.up) return Occupancy::Up;
  if (m.down) return Occupancy::Down;

  const Packet* nearest = nearest_branch(wave, p, tau).first;
  if (nearest == nullptr) throw NoSupport("wave has no branch with positive weight");
  return nearest->spin == Spin::Up ? Occupancy::Up : Occupancy::Down;
}

}  // namespace

SpinorWeights::SpinorWeights(std::complex<double> alpha, std::complex<double> beta)
    : alpha_(alpha), beta_(beta) {
  const double norm = std::norm(alpha) + std::norm(beta);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kNormTolerance) {
    throw ValidationError(fmt::format("spinor weights not normalized: |alpha|^2 + |beta|^2 = {:.17g}", norm));
  }
}

SpinorWeights SpinorWeights::from_up_probability(double p_up) {
  if (!(p_up >= 0.0 && p_up <= 1.0)) {
    throw ValidationError(fmt::format("spin-up probability {} outside [0, 1]", p_up));
  }
  const double a = std::sqrt(p_up);
  const double b = std::sqrt(1.0 - p_up);
  // sqrt round-off can leave the norm a few ulps away from 1; well inside tolerance
  return SpinorWeights{{a, 0.0}, {b, 0.0}};
}

Packet Packet::advanced(double tau) const {
  Packet p = *this;
  p.center_x += vel_x * tau;
  p.center_z += vel_z * tau;
  return p;
}

bool Packet::contains(Vec2 p, double tau) const {
  const double cx = center_x + vel_x * tau;
  const double slack_x = kSupportSlack * std::max(width_eps, height_a);
  const double slack_z = kSupportSlack * height_a;
  return std::abs(p.x - cx) <= 0.5 * width_eps + slack_x && p.z >= z_low(tau) - slack_z &&
         p.z <= z_high(tau) + slack_z;
}

BranchedWave BranchedWave::advanced_to(double t) const {
  BranchedWave w;
  w.time = t;
  w.branches.reserve(branches.size());
  for (const auto& b : branches) w.branches.push_back(b.advanced(t - time));
  return w;
}

double BranchedWave::total_weight() const {
  double s = 0.0;
  for (const auto& b : branches) s += b.weight;
  return s;
}

double BranchedWave::max_abs_vel_z() const {
  double m = 0.0;
  for (const auto& b : branches) m = std::max(m, std::abs(b.vel_z));
  return m;
}

double BranchedWave::height() const {
  if (branches.empty()) throw BranchCount("wave has no branches");
  return branches.front().height_a;
}

BranchedWave make_initial_wave(const SpinorWeights& weights, const PhysicalParams& params, double x0, double t0) {
  BranchedWave w;
  w.time = t0;
  const auto add = [&](Spin s, double weight) {
    if (weight <= 0.0) return;
    w.branches.push_back(Packet{x0, 0.0, params.eps, params.a, params.v, 0.0, s, weight});
  };
  add(Spin::Up, weights.p_up());
  add(Spin::Down, weights.p_down());
  return w;
}

void check_support(const BohmianState& state) {
  if (!membership(state.wave, state.pos(), 0.0).any()) {
    throw NoSupport(fmt::format("particle at (x={}, z={}) lies outside every branch at t={}", state.pos_x,
                                state.pos_z, state.wave.time));
  }
}

Vec2 velocity_at(const BranchedWave& wave, Vec2 point) { return guided_velocity(wave, 0.0, point, -1.0); }

Occupancy occupancy(const BranchedWave& wave, Vec2 point) { return occupancy_at(wave, point, 0.0); }

Trajectory integrate_trajectory(const BohmianState& state, double dt, double t_end) {
  if (!(dt > 0.0)) throw std::invalid_argument("integration step must be positive");
  const BranchedWave& wave = state.wave;
  const double t0 = wave.time;
  if (t_end < t0) throw std::invalid_argument("t_end precedes the state's time");

  const double umax = wave.max_abs_vel_z();
  const double a = wave.height();
  if (dt * umax > a / 100.0) {
    throw StepTooLarge(fmt::format("dt·u = {} exceeds a/100 = {}", dt * umax, a / 100.0));
  }
  const double capture = 2.0 * dt * umax;
  const auto field = [&](double t, Vec2 p) { return guided_velocity(wave, t - t0, p, capture); };
  (void)field(t0, state.pos());  // NoSupport for a start point outside the capture band

  Trajectory traj;
  const auto n_steps = static_cast<std::size_t>(std::ceil((t_end - t0) / dt * (1.0 - 1e-12)));
  traj.samples.reserve(n_steps + 1);

  Vec2 p = state.pos();
  double t = t0;
  traj.samples.push_back({t, p.x, p.z, occupancy_at(wave, p, 0.0)});
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double t_next = (k == n_steps) ? t_end : t0 + static_cast<double>(k) * dt;
    const double h = t_next - t;
    if (!(h > 0.0)) break;
    const Vec2 k1 = field(t, p);
    const Vec2 k2 = field(t + 0.5 * h, {p.x + 0.5 * h * k1.x, p.z + 0.5 * h * k1.z});
    const Vec2 k3 = field(t + 0.5 * h, {p.x + 0.5 * h * k2.x, p.z + 0.5 * h * k2.z});
    const Vec2 k4 = field(t + h, {p.x + h * k3.x, p.z + h * k3.z});
    p.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    p.z += h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
    t = t_next;
    traj.samples.push_back({t, p.x, p.z, occupancy_at(wave, p, t - t0)});
  }
  return traj;
}

BohmianState state_after(const BohmianState& state, const Trajectory& traj) {
  if (traj.samples.empty()) return state;
  const auto& last = traj.samples.back();
  return BohmianState{state.wave.advanced_to(last.t), last.x, last.z};
}

double overlap_velocity(const SpinorWeights& weights, double u) { return (weights.p_up() - weights.p_down()) * u; }

double exit_threshold(const SpinorWeights& weights, double u, double a) {
  return -a * overlap_velocity(weights, u) / (2.0 * u) + 0.0;  // + 0.0 turns -0 into +0
}

ExitResult analytic_exit(const SpinorWeights& weights, double z0, double u, double a) {
  if (!(u > 0.0) || !(a > 0.0)) throw std::invalid_argument("analytic_exit needs u > 0 and a > 0");
  if (std::abs(z0) > 0.5 * a * (1.0 + 1e-12)) {
    throw std::invalid_argument(fmt::format("start height {} outside the packet [-a/2, a/2]", z0));
  }
  if (weights.p_down() == 0.0) return {Path::Upper, 0.0};
  if (weights.p_up() == 0.0) return {Path::Lower, 0.0};

  const double vs = overlap_velocity(weights, u);
  if (z0 >= exit_threshold(weights, u, a)) return {Path::Upper, (0.5 * a - z0) / (u + vs)};
  return {Path::Lower, (z0 + 0.5 * a) / (u - vs)};
}

std::vector<double> sample_qeh(double a, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& z : out) z = a * (uniform01(rng) - 0.5);
  return out;
}

}  // namespace sgc

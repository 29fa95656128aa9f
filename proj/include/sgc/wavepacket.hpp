#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "sgc/rng.hpp"

namespace sgc {

enum class Spin { Up, Down };
enum class Path { Upper, Lower };

struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

/// Dimensionless model constants. Lengths are in units of the packet
/// height `a`, times in units of a/u.
struct PhysicalParams {
  double a = 1.0;     // packet extent along z
  double u = 1.0;     // transverse kick speed of a device
  double v = 1.0;     // forward speed along x
  double dt = 1e-3;   // integrator step
  double eps = 0.05;  // packet extent along x; carried, never enters the z dynamics

  bool operator==(const PhysicalParams&) const = default;
};

/// Amplitudes of alpha|up> + beta|down>.
class SpinorWeights {
 public:
  static constexpr double kNormTolerance = 1e-12;

  /// Throws ValidationError unless |alpha|^2 + |beta|^2 = 1 within kNormTolerance.
  SpinorWeights(std::complex<double> alpha, std::complex<double> beta);

  /// Real, non-negative amplitudes with |alpha|^2 = p_up.
  static SpinorWeights from_up_probability(double p_up);

  [[nodiscard]] std::complex<double> alpha() const { return alpha_; }
  [[nodiscard]] std::complex<double> beta() const { return beta_; }
  [[nodiscard]] double p_up() const { return std::norm(alpha_); }
  [[nodiscard]] double p_down() const { return std::norm(beta_); }

  bool operator==(const SpinorWeights&) const = default;

 private:
  std::complex<double> alpha_;
  std::complex<double> beta_;
};

/// Rectangular wave-packet branch carrying one spin component.
struct Packet {
  double center_x = 0.0;
  double center_z = 0.0;
  double width_eps = 0.05;
  double height_a = 1.0;
  double vel_x = 1.0;
  double vel_z = 0.0;
  Spin spin = Spin::Up;
  double weight = 1.0;

  [[nodiscard]] Packet advanced(double tau) const;
  [[nodiscard]] double z_low(double tau = 0.0) const { return center_z + vel_z * tau - 0.5 * height_a; }
  [[nodiscard]] double z_high(double tau = 0.0) const { return center_z + vel_z * tau + 0.5 * height_a; }
  /// Closed support test at time offset `tau`, with a 1e-9·a slack
  /// absorbing round-off between analytic and integrated positions.
  [[nodiscard]] bool contains(Vec2 p, double tau = 0.0) const;
};

struct BranchedWave {
  std::vector<Packet> branches;
  double time = 0.0;

  [[nodiscard]] BranchedWave advanced_to(double t) const;
  [[nodiscard]] double total_weight() const;
  [[nodiscard]] double max_abs_vel_z() const;
  [[nodiscard]] double height() const;
};

/// Co-located Up/Down branches at rest transversally, centred at (x0, 0).
/// Components with zero weight are not created.
[[nodiscard]] BranchedWave make_initial_wave(const SpinorWeights& weights, const PhysicalParams& params,
                                             double x0 = 0.0, double t0 = 0.0);

struct BohmianState {
  BranchedWave wave;
  double pos_x = 0.0;
  double pos_z = 0.0;

  [[nodiscard]] Vec2 pos() const { return {pos_x, pos_z}; }
};

/// Throws NoSupport if the particle is outside every branch with weight > 0.
void check_support(const BohmianState& state);

enum class Occupancy { Up, Down, Both };

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double z = 0.0;
  Occupancy occupied = Occupancy::Up;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
};

/// Density-weighted mean of the branch group velocities at `point`, at the
/// wave's current time. Throws NoSupport if no branch covers the point.
[[nodiscard]] Vec2 velocity_at(const BranchedWave& wave, Vec2 point);

/// Fixed-step RK4 integration of the guiding velocity from the state's time
/// to `t_end`, branch supports moving analytically. The last step is
/// shortened to land on `t_end` exactly.
///
/// Where a step straddles a moving support edge the stage points can fall a
/// fraction of a step outside every branch (only near the overlap tip). Such
/// points take the velocity of the nearest branch if it lies within
/// 2·dt·max|vel_z|; anything farther raises NoSupport. The capture rule keeps
/// the field monotone in z, so integrated trajectories still never cross.
///
/// Throws StepTooLarge when dt·max|vel_z| exceeds a/100.
[[nodiscard]] Trajectory integrate_trajectory(const BohmianState& state, double dt, double t_end);

/// State at the last sample of `traj`, which must have started from `state`.
[[nodiscard]] BohmianState state_after(const BohmianState& state, const Trajectory& traj);

/// Branch label the particle is in at the wave's current time; nearest
/// branch if it is in none (see integrate_trajectory).
[[nodiscard]] Occupancy occupancy(const BranchedWave& wave, Vec2 point);

/// Transverse velocity inside the overlap of an SG_S split: (|a|^2-|b|^2)u.
[[nodiscard]] double overlap_velocity(const SpinorWeights& weights, double u);

/// Start height separating upper from lower exits: -a·v_S/(2u).
[[nodiscard]] double exit_threshold(const SpinorWeights& weights, double u, double a);

struct ExitResult {
  Path side = Path::Upper;  // boundary of the overlap region met first
  double t_exit = 0.0;      // time after the kick at which the overlap is left
};

/// Closed-form exit of a particle starting at transverse offset z0 from
/// the packet centre, Up branch kicked by +u and Down by -u.
///
/// Inside the overlap z(t) = z0 + v_S·t while the overlap shrinks between
/// u·t - a/2 and a/2 - u·t. The upper edge is met first iff z0 > -a·v_S/(2u);
/// z0 exactly on the threshold goes Upper. With a single nonzero component
/// the side is that component's and t_exit is 0.
[[nodiscard]] ExitResult analytic_exit(const SpinorWeights& weights, double z0, double u, double a);

/// n draws from the transverse marginal of |chi|^2, uniform on [-a/2, a/2).
[[nodiscard]] std::vector<double> sample_qeh(double a, std::size_t n, Rng& rng);

}  // namespace sgc

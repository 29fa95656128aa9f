#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "sgc/wavepacket.hpp"

namespace sgc {

/// Pole of the upper magnet. S kicks Up by +u and Down by -u; N the reverse.
enum class Polarity { S, N };

[[nodiscard]] constexpr Polarity opposite(Polarity p) { return p == Polarity::S ? Polarity::N : Polarity::S; }

/// +1 or -1: direction in which `polarity` kicks spin component `spin`.
[[nodiscard]] constexpr int kick_sign(Polarity polarity, Spin spin) {
  return (polarity == Polarity::S) == (spin == Spin::Up) ? 1 : -1;
}

/// Value assignment: upper exit of SG_S is spin up, upper exit of SG_N is spin down.
[[nodiscard]] constexpr Spin spin_for(Polarity polarity, Path path) {
  return (polarity == Polarity::S) == (path == Path::Upper) ? Spin::Up : Spin::Down;
}

[[nodiscard]] constexpr Path path_for(Polarity polarity, Spin spin) {
  return (polarity == Polarity::S) == (spin == Spin::Up) ? Path::Upper : Path::Lower;
}

struct SGDeviceSpec {
  Polarity polarity = Polarity::S;
  double kick = 1.0;  // transverse speed u given to each branch
  double plane_x = 0.0;

  bool operator==(const SGDeviceSpec&) const = default;
};

struct Device {
  SGDeviceSpec spec;
  bool operator==(const Device&) const = default;
};

struct Block {
  Path path = Path::Lower;
  bool operator==(const Block&) const = default;
};

/// Reversed-polarity copy of the preceding device that undoes its kick.
struct Recollimate {
  SGDeviceSpec spec;
  bool operator==(const Recollimate&) const = default;
};

using ChainElement = std::variant<Device, Block, Recollimate>;
using Chain = std::vector<ChainElement>;

/// Throws ValidationError naming the first broken rule: positive kicks,
/// strictly increasing planes, Block directly after a Device, Recollimate
/// opposite in polarity and equal in kick to the last Device.
void validate_chain(const Chain& chain);

/// Copy of `chain` whose first Device has `polarity`; Recollimate elements
/// undoing that device are flipped with it.
[[nodiscard]] Chain with_first_polarity(const Chain& chain, Polarity polarity);

struct DeviceOutcome {
  Polarity polarity = Polarity::S;
  Path path = Path::Upper;
  Spin spin = Spin::Up;
  bool operator==(const DeviceOutcome&) const = default;
};

struct BlockOutcome {
  Path blocked = Path::Lower;
  bool survived = true;
  bool operator==(const BlockOutcome&) const = default;
};

using ChainStep = std::variant<DeviceOutcome, BlockOutcome>;

/// Per-element log of one run through a chain. Recollimation leaves no entry.
struct OutcomeRecord {
  std::vector<ChainStep> steps;
  bool absorbed = false;

  [[nodiscard]] std::vector<DeviceOutcome> devices() const;
  [[nodiscard]] std::optional<DeviceOutcome> first_device() const;
  [[nodiscard]] std::optional<DeviceOutcome> last_device() const;
  [[nodiscard]] bool survived() const { return !absorbed; }
  bool operator==(const OutcomeRecord&) const = default;
};

struct DeviceResult {
  BohmianState state;
  Path path = Path::Upper;
  Spin spin = Spin::Up;
};

/// Particle and wave flown freely until the particle reaches the device plane.
/// Throws GeometryError if the plane is behind the particle.
[[nodiscard]] BohmianState fly_to_plane(const BohmianState& state, double plane_x);

/// Flies to the device, kicks every branch by its polarity-dependent
/// velocity and resolves the exit side: via analytic_exit when the particle
/// sits in two co-located branches, otherwise by following its branch. The
/// returned state is advanced by a/kick past the plane, when the two
/// outgoing supports are a full packet height apart.
[[nodiscard]] DeviceResult apply_device(const SGDeviceSpec& device, const BohmianState& state);

/// Removes the branch on the blocked path; nullopt if the particle was in it.
/// Needs two supports at least a packet height apart; the survivor keeps
/// its unrenormalized weight.
[[nodiscard]] std::optional<BohmianState> apply_block(const Block& block, const BohmianState& state);

/// Flies to the device and applies its kick to the single remaining branch,
/// which must end up with zero transverse velocity.
[[nodiscard]] BohmianState apply_recollimate(const SGDeviceSpec& device, const BohmianState& state);

/// Initial state: co-located branches at the first device plane, time 0,
/// particle at transverse offset z0.
[[nodiscard]] BohmianState initial_bohmian_state(const SpinorWeights& weights, double z0, const PhysicalParams& params,
                                                 double x0 = 0.0);

/// Runs the chain with closed-form exits. The particle starts at the first
/// device's plane at t = 0.
[[nodiscard]] OutcomeRecord run_chain_bohm(const Chain& chain, const SpinorWeights& weights, double z0,
                                           const PhysicalParams& params);

struct TracedRun {
  OutcomeRecord record;
  Trajectory trajectory;
};

/// Same chain as run_chain_bohm, but every segment is integrated numerically
/// with step params.dt and the exit side is read off the integrated
/// position. Starts `lead` (in x) before the first device so the incoming
/// straight segment is part of the trace, and runs `tail` past the last
/// element. Differs from run_chain_bohm only for z0 within a few dt·u of
/// the threshold.
[[nodiscard]] TracedRun trace_chain_bohm(const Chain& chain, const SpinorWeights& weights, double z0,
                                         const PhysicalParams& params, double lead = 0.5, double tail = 1.5);

}  // namespace sgc

#include "sgc/apparatus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "sgc/errors.hpp"

namespace sgc {

namespace {

const char* name(Polarity p) { return p == Polarity::S ? "S" : "N"; }

BranchedWave kicked(const BranchedWave& wave, const SGDeviceSpec& device) {
  BranchedWave out = wave;
  for (auto& b : out.branches) b.vel_z += kick_sign(device.polarity, b.spin) * device.kick;
  return out;
}

// Kick of a recollimating device; the single branch must come out horizontal.
BranchedWave recollimated(const BranchedWave& wave, const SGDeviceSpec& device) {
  if (wave.branches.size() != 1) {
    throw BranchCount(fmt::format("recollimation needs exactly one branch, wave has {}", wave.branches.size()));
  }
  BranchedWave out = kicked(wave, device);
  auto& b = out.branches.front();
  if (std::abs(b.vel_z) > 1e-12 * device.kick) {
    throw ValidationError(fmt::format("SG_{} recollimator leaves transverse velocity {} on the {} branch",
                                      name(device.polarity), b.vel_z, b.spin == Spin::Up ? "up" : "down"));
  }
  b.vel_z = 0.0;
  return out;
}

Path kicked_path(const SGDeviceSpec& device, Spin spin) {
  return kick_sign(device.polarity, spin) > 0 ? Path::Upper : Path::Lower;
}

std::size_t upper_index(const BranchedWave& wave) {
  return wave.branches[0].center_z >= wave.branches[1].center_z ? 0 : 1;
}

void require_separated(const BranchedWave& wave) {
  if (wave.branches.size() != 2) {
    throw BranchCount(fmt::format("blocking needs two branches, wave has {}", wave.branches.size()));
  }
  const double gap = std::abs(wave.branches[0].center_z - wave.branches[1].center_z);
  if (gap < wave.height() * (1.0 - 1e-9)) {
    throw BranchCount(fmt::format("branches still overlap (centre separation {} < a = {})", gap, wave.height()));
  }
}

// Moves a particle lying at most `tol` outside its single branch onto the
// nearest support edge. Order-preserving, so traced fans still never cross.
BohmianState snapped_into_support(const BohmianState& state, double tol) {
  BohmianState out = state;
  const Packet& b = out.wave.branches.front();
  const double lo = b.z_low(), hi = b.z_high();
  if (out.pos_z < lo && lo - out.pos_z <= tol) out.pos_z = lo;
  if (out.pos_z > hi && out.pos_z - hi <= tol) out.pos_z = hi;
  return out;
}

BohmianState without_branch(const BohmianState& state, std::size_t drop) {
  BohmianState out = state;
  out.wave.branches.erase(out.wave.branches.begin() + static_cast<std::ptrdiff_t>(drop));
  return out;
}

}  // namespace

void validate_chain(const Chain& chain) {
  const Device* last_device = nullptr;
  const ChainElement* previous = nullptr;
  double last_plane = -std::numeric_limits<double>::infinity();

  const auto check_spec = [&](const SGDeviceSpec& spec) {
    if (!(spec.kick > 0.0) || !std::isfinite(spec.kick)) {
      throw ValidationError(fmt::format("device kick must be positive, got {}", spec.kick));
    }
    if (!std::isfinite(spec.plane_x) || spec.plane_x <= last_plane) {
      throw ValidationError(fmt::format("device planes must be strictly increasing ({} after {})", spec.plane_x,
                                        last_plane));
    }
    last_plane = spec.plane_x;
  };

  for (const auto& element : chain) {
    if (const auto* d = std::get_if<Device>(&element)) {
      check_spec(d->spec);
      last_device = d;
    } else if (std::holds_alternative<Block>(element)) {
      if (previous == nullptr || !std::holds_alternative<Device>(*previous)) {
        throw ValidationError("Block must follow a Device");
      }
    } else {
      const auto& r = std::get<Recollimate>(element);
      if (last_device == nullptr) throw ValidationError("Recollimate must follow a Device");
      check_spec(r.spec);
      if (r.spec.polarity == last_device->spec.polarity) {
        throw ValidationError(fmt::format("Recollimate polarity must be opposite to the preceding SG_{} device",
                                          name(last_device->spec.polarity)));
      }
      if (r.spec.kick != last_device->spec.kick) {
        throw ValidationError(fmt::format("Recollimate kick {} differs from the preceding device kick {}", r.spec.kick,
                                          last_device->spec.kick));
      }
    }
    previous = &element;
  }
}

Chain with_first_polarity(const Chain& chain, Polarity polarity) {
  Chain out = chain;
  bool seen_first = false;
  for (auto& element : out) {
    if (auto* d = std::get_if<Device>(&element)) {
      if (seen_first) break;
      seen_first = true;
      if (d->spec.polarity == polarity) return out;
      d->spec.polarity = polarity;
    } else if (auto* r = std::get_if<Recollimate>(&element); r != nullptr && seen_first) {
      r->spec.polarity = opposite(polarity);
    }
  }
  return out;
}

std::vector<DeviceOutcome> OutcomeRecord::devices() const {
  std::vector<DeviceOutcome> out;
  for (const auto& s : steps) {
    if (const auto* d = std::get_if<DeviceOutcome>(&s)) out.push_back(*d);
  }
  return out;
}

std::optional<DeviceOutcome> OutcomeRecord::first_device() const {
  for (const auto& s : steps) {
    if (const auto* d = std::get_if<DeviceOutcome>(&s)) return *d;
  }
  return std::nullopt;
}

std::optional<DeviceOutcome> OutcomeRecord::last_device() const {
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    if (const auto* d = std::get_if<DeviceOutcome>(&*it)) return *d;
  }
  return std::nullopt;
}

BohmianState fly_to_plane(const BohmianState& state, double plane_x) {
  const Vec2 vel = velocity_at(state.wave, state.pos());
  for (const auto& b : state.wave.branches) {
    if (b.weight > 0.0 && b.contains(state.pos()) && (b.vel_x != vel.x || b.vel_z != vel.z)) {
      throw BranchCount("free flight requested while the particle sits in diverging branches");
    }
  }
  if (!(vel.x > 0.0)) throw GeometryError("particle has no forward velocity");
  const double tau = (plane_x - state.pos_x) / vel.x;
  if (tau < -1e-12) {
    throw GeometryError(fmt::format("device plane x={} lies behind the particle at x={}", plane_x, state.pos_x));
  }
  const double t = state.wave.time + std::max(tau, 0.0);
  return BohmianState{state.wave.advanced_to(t), plane_x, state.pos_z + vel.z * std::max(tau, 0.0)};
}

DeviceResult apply_device(const SGDeviceSpec& device, const BohmianState& state) {
  const BohmianState at = fly_to_plane(state, device.plane_x);
  const BranchedWave after_kick = kicked(at.wave, device);
  const double a = at.wave.height();
  const double separation_time = a / device.kick;

  std::vector<std::size_t> holders;
  for (std::size_t i = 0; i < at.wave.branches.size(); ++i) {
    const auto& b = at.wave.branches[i];
    if (b.weight > 0.0 && b.contains(at.pos())) holders.push_back(i);
  }
  if (holders.empty()) throw NoSupport("particle outside every branch at the device plane");

  DeviceResult result;
  double dz = 0.0;  // transverse displacement over the separation time
  if (holders.size() == 1) {
    const auto& b = after_kick.branches[holders.front()];
    result.path = kicked_path(device, b.spin);
    dz = b.vel_z * separation_time;
  } else {
    const auto& b0 = at.wave.branches[holders[0]];
    const auto& b1 = at.wave.branches[holders[1]];
    if (b0.center_z != b1.center_z || b0.vel_z != b1.vel_z) {
      throw BranchCount("particle sits in two branches that are not co-located");
    }
    // Co-moving frame: the branch kicked upward plays the role of |up>.
    const bool first_up = kick_sign(device.polarity, b0.spin) > 0;
    const double w_up = first_up ? b0.weight : b1.weight;
    const double w_down = first_up ? b1.weight : b0.weight;
    const auto weights = SpinorWeights::from_up_probability(w_up / (w_up + w_down));
    const double z0 = std::clamp(at.pos_z - b0.center_z, -0.5 * a, 0.5 * a);
    const ExitResult exit = analytic_exit(weights, z0, device.kick, a);
    const double vs = overlap_velocity(weights, device.kick);
    const double after = separation_time - exit.t_exit;
    const double out_speed = exit.side == Path::Upper ? device.kick : -device.kick;
    result.path = exit.side;
    dz = b0.vel_z * separation_time + vs * exit.t_exit + out_speed * after;
  }
  result.spin = spin_for(device.polarity, result.path);

  const double t_out = at.wave.time + separation_time;
  const double vx = at.wave.branches[holders.front()].vel_x;
  result.state = BohmianState{after_kick.advanced_to(t_out), at.pos_x + vx * separation_time, at.pos_z + dz};
  check_support(result.state);
  return result;
}

std::optional<BohmianState> apply_block(const Block& block, const BohmianState& state) {
  require_separated(state.wave);
  const std::size_t upper = upper_index(state.wave);
  const std::size_t blocked = block.path == Path::Upper ? upper : 1 - upper;
  if (state.wave.branches[blocked].contains(state.pos())) return std::nullopt;
  if (!state.wave.branches[1 - blocked].contains(state.pos())) {
    throw NoSupport("particle in neither branch at the blocking screen");
  }
  return without_branch(state, blocked);
}

BohmianState apply_recollimate(const SGDeviceSpec& device, const BohmianState& state) {
  if (state.wave.branches.size() != 1) {
    throw BranchCount(fmt::format("recollimation needs exactly one branch, wave has {}", state.wave.branches.size()));
  }
  BohmianState at = fly_to_plane(state, device.plane_x);
  at.wave = recollimated(at.wave, device);
  return at;
}

BohmianState initial_bohmian_state(const SpinorWeights& weights, double z0, const PhysicalParams& params, double x0) {
  if (std::abs(z0) > 0.5 * params.a) {
    throw ValidationError(fmt::format("start height z0={} outside the packet [-a/2, a/2]", z0));
  }
  BohmianState s{make_initial_wave(weights, params, x0, 0.0), x0, z0};
  check_support(s);
  return s;
}

namespace {

double first_plane(const Chain& chain) {
  for (const auto& e : chain) {
    if (const auto* d = std::get_if<Device>(&e)) return d->spec.plane_x;
  }
  return 0.0;
}

}  // namespace

OutcomeRecord run_chain_bohm(const Chain& chain, const SpinorWeights& weights, double z0,
                             const PhysicalParams& params) {
  validate_chain(chain);
  OutcomeRecord record;
  BohmianState state = initial_bohmian_state(weights, z0, params, first_plane(chain));
  Path last_path = Path::Upper;

  for (const auto& element : chain) {
    if (const auto* d = std::get_if<Device>(&element)) {
      DeviceResult r = apply_device(d->spec, state);
      record.steps.emplace_back(DeviceOutcome{d->spec.polarity, r.path, r.spin});
      state = std::move(r.state);
      last_path = r.path;
    } else if (const auto* b = std::get_if<Block>(&element)) {
      bool survived = true;
      if (state.wave.branches.size() == 1) {
        // the whole wave left on the last device's path
        survived = last_path != b->path;
      } else if (auto next = apply_block(*b, state)) {
        state = std::move(*next);
      } else {
        survived = false;
      }
      record.steps.emplace_back(BlockOutcome{b->path, survived});
      if (!survived) {
        record.absorbed = true;
        break;
      }
    } else {
      state = apply_recollimate(std::get<Recollimate>(element).spec, state);
    }
  }
  return record;
}

TracedRun trace_chain_bohm(const Chain& chain, const SpinorWeights& weights, double z0, const PhysicalParams& params,
                           double lead, double tail) {
  validate_chain(chain);
  if (std::abs(z0) > 0.5 * params.a) {
    throw ValidationError(fmt::format("start height z0={} outside the packet [-a/2, a/2]", z0));
  }
  const double x0 = first_plane(chain) - lead;
  BohmianState state{make_initial_wave(weights, params, x0, -lead / params.v), x0, z0};
  check_support(state);

  TracedRun run;
  auto& samples = run.trajectory.samples;
  const auto advance = [&](double t_end) {
    Trajectory seg = integrate_trajectory(state, params.dt, t_end);
    state = state_after(state, seg);
    const std::size_t skip = samples.empty() ? 0 : 1;
    samples.insert(samples.end(), seg.samples.begin() + static_cast<std::ptrdiff_t>(skip), seg.samples.end());
  };
  const auto fly_to = [&](double plane_x) {
    const double vx = state.wave.branches.front().vel_x;
    const double tau = (plane_x - state.pos_x) / vx;
    if (tau < -1e-9) {
      throw GeometryError(fmt::format("device plane x={} lies behind the particle at x={}", plane_x, state.pos_x));
    }
    advance(state.wave.time + std::max(tau, 0.0));
  };

  Path last_path = Path::Upper;
  for (const auto& element : chain) {
    if (const auto* d = std::get_if<Device>(&element)) {
      fly_to(d->spec.plane_x);
      state.wave = kicked(state.wave, d->spec);
      advance(state.wave.time + state.wave.height() / d->spec.kick);
      const Occupancy occ = occupancy(state.wave, state.pos());
      if (occ == Occupancy::Both) throw NoSupport("particle still in both branches after separation");
      const Path path = kicked_path(d->spec, occ == Occupancy::Up ? Spin::Up : Spin::Down);
      run.record.steps.emplace_back(DeviceOutcome{d->spec.polarity, path, spin_for(d->spec.polarity, path)});
      last_path = path;
    } else if (const auto* b = std::get_if<Block>(&element)) {
      bool survived = true;
      if (state.wave.branches.size() == 1) {
        survived = last_path != b->path;
      } else {
        require_separated(state.wave);
        const std::size_t upper = upper_index(state.wave);
        const std::size_t blocked = b->path == Path::Upper ? upper : 1 - upper;
        const Occupancy occ = occupancy(state.wave, state.pos());
        survived = (occ == Occupancy::Up ? Spin::Up : Spin::Down) != state.wave.branches[blocked].spin;
        if (survived) state = without_branch(state, blocked);
      }
      run.record.steps.emplace_back(BlockOutcome{b->path, survived});
      if (!survived) {
        run.record.absorbed = true;
        return run;
      }
    } else {
      const auto& spec = std::get<Recollimate>(element).spec;
      fly_to(spec.plane_x);
      state.wave = recollimated(state.wave, spec);
      state = snapped_into_support(state, 2.0 * params.dt * spec.kick);
    }
  }
  advance(state.wave.time + tail / params.v);
  return run;
}

}  // namespace sgc

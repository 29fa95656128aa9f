#include "sgc/com.hpp"

#include <string_view>

#include <fmt/format.h>

#include "sgc/errors.hpp"

namespace sgc {

SignedPauli::SignedPauli(Axis axis, int sign) : axis(axis), sign(sign) {
  if (sign != 1 && sign != -1) throw ValidationError(fmt::format("Pauli sign must be +1 or -1, got {}", sign));
}

char axis_char(Axis a) {
  switch (a) {
    case Axis::X: return 'X';
    case Axis::Y: return 'Y';
    case Axis::Z: return 'Z';
  }
  return '?';
}

std::string to_string(SignedPauli p) { return fmt::format("{}{}", p.sign > 0 ? '+' : '-', axis_char(p.axis)); }

SignedPauli parse_signed_pauli(const std::string& text) {
  std::string_view s = text;
  int sign = 1;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    sign = s.front() == '-' ? -1 : 1;
    s.remove_prefix(1);
  }
  if (s == "X") return {Axis::X, sign};
  if (s == "Y") return {Axis::Y, sign};
  if (s == "Z") return {Axis::Z, sign};
  throw ParseError(fmt::format("'{}' is not a signed Pauli observable (expected e.g. +X, -Z)", text));
}

ComState::ComState(SignedPauli stabilizer, SignedPauli destabilizer)
    : stabilizer_(stabilizer), destabilizer_(destabilizer) {
  if (stabilizer.axis == destabilizer.axis) {
    throw AxisClash(fmt::format("stabilizer {} and destabilizer {} share an axis", to_string(stabilizer),
                                to_string(destabilizer)));
  }
}

std::string to_string(const ComState& s) {
  return fmt::format("{{{}; {}}}", to_string(s.stabilizer()), to_string(s.destabilizer()));
}

ComState prepare(SignedPauli stabilizer, Axis destab_axis, Rng& rng) {
  if (destab_axis == stabilizer.axis) {
    throw AxisClash(fmt::format("destabilizer axis {} equals the stabilizer axis", axis_char(destab_axis)));
  }
  return ComState{stabilizer, SignedPauli{destab_axis, random_sign(rng)}};
}

Measurement measure(const ComState& state, SignedPauli observable, Rng& rng) {
  const SignedPauli stab = state.stabilizer();
  const SignedPauli destab = state.destabilizer();
  if (observable.axis == stab.axis) {
    const int outcome = observable.sign * stab.sign;
    return {outcome, ComState{stab, SignedPauli{destab.axis, random_sign(rng)}}};
  }
  if (observable.axis == destab.axis) {
    const int outcome = observable.sign * destab.sign;
    const SignedPauli new_stab{observable.axis, outcome * observable.sign};
    return {outcome, ComState{new_stab, SignedPauli{stab.axis, random_sign(rng)}}};
  }
  throw UnsupportedAxis(fmt::format("{} anticommutes with both {} and {}; its outcome is not defined here",
                                    to_string(observable), to_string(stab), to_string(destab)));
}

SignedPauli sg_observable(Polarity polarity) { return {Axis::Z, polarity == Polarity::S ? 1 : -1}; }

OutcomeRecord run_chain_com(const Chain& chain, const ComState& initial, Rng& rng) {
  validate_chain(chain);
  OutcomeRecord record;
  ComState state = initial;
  Path last_path = Path::Upper;
  for (const auto& element : chain) {
    if (const auto* d = std::get_if<Device>(&element)) {
      const Polarity pol = d->spec.polarity;
      Measurement m = measure(state, sg_observable(pol), rng);
      last_path = path_for_outcome(m.outcome);
      record.steps.emplace_back(DeviceOutcome{pol, last_path, spin_for(pol, last_path)});
      state = m.state;
    } else if (const auto* b = std::get_if<Block>(&element)) {
      const bool survived = last_path != b->path;
      record.steps.emplace_back(BlockOutcome{b->path, survived});
      if (!survived) {
        record.absorbed = true;
        break;
      }
    }
  }
  return record;
}

}  // namespace sgc

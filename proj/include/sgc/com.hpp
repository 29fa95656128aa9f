#pragma once

#include <string>

#include "sgc/apparatus.hpp"
#include "sgc/rng.hpp"

namespace sgc {

enum class Axis { X, Y, Z };

/// ±X, ±Y or ±Z. The sign carries state content: -Z stabilizes |down>.
struct SignedPauli {
  Axis axis = Axis::Z;
  int sign = 1;

  SignedPauli() = default;
  /// Throws ValidationError unless sign is +1 or -1.
  SignedPauli(Axis axis, int sign);

  [[nodiscard]] SignedPauli negated() const { return {axis, -sign}; }
  bool operator==(const SignedPauli&) const = default;
};

/// "+X", "-Z", ...
[[nodiscard]] std::string to_string(SignedPauli p);
/// Accepts "X", "+X", "-X" (any axis). Throws ParseError.
[[nodiscard]] SignedPauli parse_signed_pauli(const std::string& text);
[[nodiscard]] char axis_char(Axis a);

/// Single-qubit COM state {stabilizer; destabilizer}. Axes always differ.
class ComState {
 public:
  /// Throws AxisClash when both share an axis.
  ComState(SignedPauli stabilizer, SignedPauli destabilizer);

  [[nodiscard]] SignedPauli stabilizer() const { return stabilizer_; }
  [[nodiscard]] SignedPauli destabilizer() const { return destabilizer_; }

  bool operator==(const ComState&) const = default;

 private:
  SignedPauli stabilizer_;
  SignedPauli destabilizer_;
};

[[nodiscard]] std::string to_string(const ComState& s);

/// {stabilizer; ±destab_axis}, the sign a fair draw from `rng`.
[[nodiscard]] ComState prepare(SignedPauli stabilizer, Axis destab_axis, Rng& rng);

struct Measurement {
  int outcome = 1;
  ComState state;
};

/// Reveals the predetermined value of `observable` and updates the state.
///
/// Along the stabilizer axis the stabilizer is read and kept, and only the
/// destabilizer sign is redrawn. Along the destabilizer axis the outcome is
/// read from the destabilizer, outcome·observable becomes the new
/// stabilizer and the old stabilizer axis becomes the destabilizer with a
/// fresh random sign. The third axis throws UnsupportedAxis.
[[nodiscard]] Measurement measure(const ComState& state, SignedPauli observable, Rng& rng);

/// SG_S measures +Z, SG_N measures -Z.
[[nodiscard]] SignedPauli sg_observable(Polarity polarity);

/// Outcome +1 leaves on the upper path.
[[nodiscard]] constexpr Path path_for_outcome(int outcome) { return outcome > 0 ? Path::Upper : Path::Lower; }

/// Runs a chain against a COM state. Recollimation is a no-op; a Block
/// absorbs the sample when the last device sent it down the blocked path.
[[nodiscard]] OutcomeRecord run_chain_com(const Chain& chain, const ComState& initial, Rng& rng);

}  // namespace sgc

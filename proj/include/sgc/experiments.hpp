#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sgc/apparatus.hpp"
#include "sgc/com.hpp"
#include "sgc/wavepacket.hpp"

namespace sgc {

enum class Model { Bohmian, Com, Both };

struct BohmianSampler {
  enum class Kind { Fixed, Qeh };
  Kind kind = Kind::Qeh;
  double z0 = 0.0;  // used by Fixed
  bool operator==(const BohmianSampler&) const = default;
};

struct ComSampler {
  enum class Kind { Fixed, RandomDestabilizer };
  Kind kind = Kind::RandomDestabilizer;
  int destabilizer_sign = 1;  // used by Fixed
  bool operator==(const ComSampler&) const = default;
};

/// A device chain plus the quantum state and hidden-variable sampler for
/// each model. The COM stabilizer is derived from `weights` when present;
/// `com_stabilizer` is for COM-only scenarios given directly as a COM state.
struct Scenario {
  std::string name;
  std::string description;
  Model model = Model::Both;
  PhysicalParams params;
  std::optional<SpinorWeights> weights;
  std::optional<SignedPauli> com_stabilizer;
  BohmianSampler bohmian_sampler;
  ComSampler com_sampler;
  Chain chain;

  bool operator==(const Scenario&) const = default;
};

[[nodiscard]] constexpr bool runs_bohmian(Model m) { return m != Model::Com; }
[[nodiscard]] constexpr bool runs_com(Model m) { return m != Model::Bohmian; }

/// Stabilizer of the spinor if it is a single-qubit stabilizer state with a
/// real relative phase (±Z eigenstates, ±X superpositions); nullopt otherwise.
[[nodiscard]] std::optional<SignedPauli> stabilizer_of(const SpinorWeights& weights);

/// Destabilizer axis paired with a stabilizer: X for ±Z, Z for ±X and ±Y.
[[nodiscard]] Axis destabilizer_axis_for(SignedPauli stabilizer);

/// Throws ValidationError describing the first violated constraint.
void validate_scenario(const Scenario& scenario);

/// Stabilizer used for COM runs of a validated scenario.
[[nodiscard]] SignedPauli scenario_stabilizer(const Scenario& scenario);

/// Initial COM state for one sample, drawing from `rng` when random.
[[nodiscard]] ComState initial_com_state(const Scenario& scenario, Rng& rng);

/// Start height for one sample, drawing from `rng` under the QEH.
[[nodiscard]] double initial_z0(const Scenario& scenario, Rng& rng);

/// True iff an SG_S and an SG_N device assign different spins to the same
/// Bohmian hidden state (weights, z0).
[[nodiscard]] bool device_dependence_test(const SpinorWeights& weights, double z0, const PhysicalParams& params);

/// Same question for a COM state.
[[nodiscard]] bool device_dependence_test(const ComState& state);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Start heights in [-a/2, a/2] where the Bohmian spin assignment of the
/// first device depends on its polarity. With thresholds z_S and z_N = -z_S
/// these are z0 >= max(z_S, z_N) and z0 < min(z_S, z_N). Empty for eigenstates.
[[nodiscard]] std::vector<Interval> device_dependent_bands(const SpinorWeights& weights, const PhysicalParams& params);

/// Integer tallies; summing partial tallies in any order gives the same total.
struct EnsembleCounts {
  std::size_t n_total = 0;
  std::size_t n_survived = 0;
  std::size_t n_up_first = 0;
  std::size_t n_upper_first = 0;
  std::size_t n_up_final = 0;     // among survivors
  std::size_t n_upper_final = 0;  // among survivors
  std::size_t n_device_dependent = 0;

  EnsembleCounts& operator+=(const EnsembleCounts& o);
  bool operator==(const EnsembleCounts&) const = default;
};

struct SampleRecord {
  std::size_t index = 0;
  std::variant<double, ComState> hidden;  // z0 or the initial COM state
  OutcomeRecord outcome;
  bool device_dependent = false;
};

struct EnsembleReport {
  Model model = Model::Bohmian;
  EnsembleCounts counts;
  double p_up_first = 0.0;
  double p_upper_first = 0.0;
  double survival_fraction = 0.0;
  double p_up_final = 0.0;     // conditioned on survival
  double p_upper_final = 0.0;  // conditioned on survival
  double device_dependent_fraction = 0.0;
  std::vector<SampleRecord> records;  // filled when requested
};

[[nodiscard]] EnsembleReport make_report(Model model, const EnsembleCounts& counts);

struct EnsembleResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::optional<EnsembleReport> bohmian;
  std::optional<EnsembleReport> com;
};

struct RunOptions {
  std::optional<Model> model;  // overrides the scenario's model
  unsigned workers = 1;
  bool keep_records = false;
};

/// Monte Carlo run of `n` samples. Sample i of each model draws only from
/// substream(seed, i, lane), so the result does not depend on `workers`.
[[nodiscard]] EnsembleResult run_ensemble(const Scenario& scenario, std::size_t n, std::uint64_t seed,
                                          const RunOptions& options = {});

/// First-device polarity flipped against the scenario's chain, per model.
struct PolarityComparison {
  Model model = Model::Bohmian;
  std::size_t n = 0;
  std::size_t first_spin_differs = 0;
  std::size_t both_survive = 0;
  std::size_t final_spin_differs = 0;  // among samples surviving both chains

  [[nodiscard]] double first_fraction() const;
  [[nodiscard]] double final_fraction() const;
  [[nodiscard]] bool device_dependent() const { return first_spin_differs > 0; }
};

/// Runs the chain with its first device as SG_S and as SG_N on identical
/// hidden states and counts disagreements in assigned spin.
[[nodiscard]] std::vector<PolarityComparison> compare_polarities(const Scenario& scenario, std::size_t n,
                                                                 std::uint64_t seed, unsigned workers = 1);

/// fig1a-fig1d, fig2a, fig2b, fig3a, fig3b, com-sequential.
[[nodiscard]] std::vector<Scenario> builtin_scenarios();
[[nodiscard]] std::optional<Scenario> find_builtin(const std::string& name);

[[nodiscard]] const char* to_string(Model m);

}  // namespace sgc

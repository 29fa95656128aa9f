#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgc/apparatus.hpp"
#include "sgc/experiments.hpp"

namespace sgc {

inline constexpr int kScenarioVersion = 1;

/// Parses a version-1 scenario document and validates it.
/// Throws ParseError for malformed documents, unknown keys or bad types, and
/// ValidationError when the content breaks a model constraint. Messages
/// name the offending key, e.g. "chain[2].polarity".
[[nodiscard]] Scenario parse_scenario_text(const std::string& text);
[[nodiscard]] Scenario parse_scenario(const std::filesystem::path& path);

/// Pretty-printed JSON; parse_scenario_text(serialize_scenario(s)) == s.
[[nodiscard]] std::string serialize_scenario(const Scenario& scenario);

/// Full EnsembleResult tree as pretty-printed JSON with a trailing newline.
/// Contains nothing run-dependent beyond the result itself.
[[nodiscard]] std::string report_json(const EnsembleResult& result);

/// Columns t,x,z,branch_occupied; one row per trajectory sample.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

/// Evenly spaced start heights covering [-a/2, a/2] (endpoints included
/// for k >= 2, the centre for k = 1).
[[nodiscard]] std::vector<double> start_grid(double a, std::size_t k);

/// Self-contained SVG of the chain geometry: device magnets, blocking
/// screens, packet outlines at each device and after each split, the
/// traced trajectories, and the first device's exit threshold as a
/// dash-dotted line.
[[nodiscard]] std::string render_svg(const Scenario& scenario, const std::vector<double>& z0s,
                                     const std::vector<TracedRun>& runs);

}  // namespace sgc

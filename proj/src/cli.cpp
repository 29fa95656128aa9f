#include "sgc/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sgc/errors.hpp"
#include "sgc/experiments.hpp"
#include "sgc/scenario_io.hpp"

namespace sgc {

namespace {

namespace fs = std::filesystem;

Scenario resolve_scenario(const std::string& ref) {
  if (fs::is_regular_file(ref)) return parse_scenario(ref);
  if (auto s = find_builtin(ref)) return *s;
  throw ParseError(fmt::format("'{}' is neither a scenario file nor a builtin scenario name", ref));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimulationError(fmt::format("cannot write '{}'", path.string()));
  f << content;
  if (!f) throw SimulationError(fmt::format("error writing '{}'", path.string()));
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::vector<TracedRun> trace_grid(const Scenario& sc, const std::vector<double>& z0s) {
  if (!sc.weights) throw ValidationError(fmt::format("scenario '{}' has no spinor weights to trace", sc.name));
  std::vector<TracedRun> runs;
  runs.reserve(z0s.size());
  for (const double z0 : z0s) runs.push_back(trace_chain_bohm(sc.chain, *sc.weights, z0, sc.params));
  return runs;
}

void print_summary(std::ostream& out, const EnsembleReport& r) {
  out << fmt::format("{:<8} n={} survived={} ({:.4f})  P(up, first)={:.4f}  P(upper, first)={:.4f}  "
                     "P(up, final | survived)={:.4f}  P(upper, final | survived)={:.4f}  device-dependent={:.4f}\n",
                     to_string(r.model), r.counts.n_total, r.counts.n_survived, r.survival_fraction, r.p_up_first,
                     r.p_upper_first, r.p_up_final, r.p_upper_final, r.device_dependent_fraction);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bohmian and COM simulator for chains of Stern-Gerlach devices"};
  app.require_subcommand(1);

  std::string scenario_ref;
  std::string model_text;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t grid = 9;
  std::string out_dir = ".";
  unsigned workers = 1;
  bool keep_records = false;
  std::string write_dir;

  const std::map<std::string, Model> models{{"bohmian", Model::Bohmian}, {"com", Model::Com}, {"both", Model::Both}};

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble; writes <scenario>-report.json");
  simulate->add_option("--scenario", scenario_ref, "scenario file or builtin name")->required();
  simulate->add_option("--model", model_text, "bohmian, com or both (default: the scenario's)")
      ->check(CLI::IsMember({"bohmian", "com", "both"}));
  simulate->add_option("--samples", samples, "number of samples")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--workers", workers, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  simulate->add_flag("--records", keep_records, "include per-sample records in the report");

  auto* trajectories = app.add_subcommand("trajectories", "integrated trajectories over a start-height grid");
  trajectories->add_option("--scenario", scenario_ref, "scenario file or builtin name")->required();
  trajectories->add_option("--grid", grid, "number of start heights")->check(CLI::PositiveNumber);
  trajectories->add_option("--out", out_dir, "output directory");

  auto* compare = app.add_subcommand("compare", "device-dependence table, Bohmian vs COM");
  compare->add_option("--scenario", scenario_ref, "scenario file or builtin name")->required();
  compare->add_option("--samples", samples, "number of samples")->check(CLI::PositiveNumber);
  compare->add_option("--seed", seed, "RNG seed");
  compare->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "SVG of the chain with a fan of trajectories");
  plot->add_option("--scenario", scenario_ref, "scenario file or builtin name")->required();
  plot->add_option("--grid", grid, "number of trajectories")->check(CLI::PositiveNumber);
  plot->add_option("--out", out_dir, "output directory");

  auto* scenarios = app.add_subcommand("scenarios", "list builtin scenarios");
  scenarios->add_option("--write", write_dir, "also write each builtin as <name>.json into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*scenarios) {
      for (const auto& s : builtin_scenarios()) {
        out << fmt::format("{:<16} {:<8} {}\n", s.name, to_string(s.model), s.description);
        if (!write_dir.empty()) write_file(prepare_dir(write_dir) / (s.name + ".json"), serialize_scenario(s));
      }
      return kExitOk;
    }

    const Scenario sc = resolve_scenario(scenario_ref);

    if (*simulate) {
      RunOptions opts;
      if (!model_text.empty()) opts.model = models.at(model_text);
      opts.workers = workers;
      opts.keep_records = keep_records;
      const EnsembleResult result = run_ensemble(sc, samples, seed, opts);
      const fs::path file = prepare_dir(out_dir) / (sc.name + "-report.json");
      write_file(file, report_json(result));
      out << fmt::format("scenario {} seed {} samples {}\n", sc.name, seed, samples);
      if (result.bohmian) print_summary(out, *result.bohmian);
      if (result.com) print_summary(out, *result.com);
      out << fmt::format("wrote {}\n", file.string());
      return kExitOk;
    }

    if (*trajectories) {
      const auto z0s = start_grid(sc.params.a, grid);
      const auto runs = trace_grid(sc, z0s);
      const fs::path dir = prepare_dir(out_dir);
      const int digits = static_cast<int>(std::to_string(grid - 1).size());
      for (std::size_t k = 0; k < runs.size(); ++k) {
        const fs::path file = dir / fmt::format("{}-traj-{:0{}}.csv", sc.name, k, digits);
        std::ofstream f(file, std::ios::binary);
        if (!f) throw SimulationError(fmt::format("cannot write '{}'", file.string()));
        write_trajectory_csv(f, runs[k].trajectory);
        const auto last = runs[k].record.last_device();
        out << fmt::format("{}  z0={:+.4f}  {}\n", file.string(), z0s[k],
                           runs[k].record.absorbed ? "absorbed"
                           : last                  ? (last->path == Path::Upper ? "upper" : "lower")
                                                   : "-");
      }
      return kExitOk;
    }

    if (*compare) {
      const auto rows = compare_polarities(sc, samples, seed, workers);
      out << fmt::format("scenario {}: first device run as SG_S and as SG_N on identical hidden states\n", sc.name);
      out << fmt::format("{:<8} {:>8} {:>22} {:>14} {:>22}  {}\n", "model", "samples", "first spin differs",
                         "both survive", "final spin differs", "verdict");
      for (const auto& r : rows) {
        const std::string final_text = r.both_survive == 0 ? "-" : fmt::format("{:.4f}", r.final_fraction());
        out << fmt::format("{:<8} {:>8} {:>22.4f} {:>14} {:>22}  {}\n", to_string(r.model), r.n,
                           r.first_fraction(), r.both_survive, final_text,
                           r.device_dependent() ? "device-dependent" : "device-independent");
      }
      if (runs_bohmian(sc.model)) {
        const auto bands = device_dependent_bands(*sc.weights, sc.params);
        double length = 0.0;
        std::string text;
        for (const auto& b : bands) {
          length += b.hi - b.lo;
          text += fmt::format(" [{:+.4f}, {:+.4f})", b.lo, b.hi);
        }
        out << fmt::format("bohmian device-dependent start heights:{} (fraction {:.4f} of the packet)\n",
                           text.empty() ? " none" : text, length / sc.params.a);
      }
      return kExitOk;
    }

    if (*plot) {
      const auto z0s = start_grid(sc.params.a, grid);
      const auto runs = trace_grid(sc, z0s);
      const fs::path file = prepare_dir(out_dir) / (sc.name + ".svg");
      write_file(file, render_svg(sc, z0s, runs));
      out << fmt::format("wrote {}\n", file.string());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sgc

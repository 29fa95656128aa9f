#include "sgc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "sgc/errors.hpp"

namespace sgc {

namespace {

constexpr std::uint64_t kBohmianLane = 0;
constexpr std::uint64_t kComLane = 1;
constexpr double kStateTolerance = 1e-9;

// Calls body(begin, end, worker) on contiguous slices of [0, n).
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (w == 1) {
    body(std::size_t{0}, n, 0U);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    const std::size_t begin = n * k / w;
    const std::size_t end = n * (k + 1) / w;
    pool.emplace_back([&body, begin, end, k] { body(begin, end, static_cast<unsigned>(k)); });
  }
  for (auto& t : pool) t.join();
}

const SGDeviceSpec& first_device_spec(const Chain& chain) {
  for (const auto& e : chain) {
    if (const auto* d = std::get_if<Device>(&e)) return d->spec;
  }
  throw ValidationError("chain has no device");
}

bool dependent_for_device(const SpinorWeights& weights, double z0, const PhysicalParams& params,
                          const SGDeviceSpec& device) {
  const BohmianState start = initial_bohmian_state(weights, z0, params, device.plane_x);
  SGDeviceSpec s = device;
  SGDeviceSpec n = device;
  s.polarity = Polarity::S;
  n.polarity = Polarity::N;
  return apply_device(s, start).spin != apply_device(n, start).spin;
}

void tally(EnsembleCounts& c, const OutcomeRecord& rec, bool dependent) {
  ++c.n_total;
  if (dependent) ++c.n_device_dependent;
  if (const auto first = rec.first_device()) {
    if (first->spin == Spin::Up) ++c.n_up_first;
    if (first->path == Path::Upper) ++c.n_upper_first;
  }
  if (rec.survived()) {
    ++c.n_survived;
    if (const auto last = rec.last_device()) {
      if (last->spin == Spin::Up) ++c.n_up_final;
      if (last->path == Path::Upper) ++c.n_upper_final;
    }
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

const char* to_string(Model m) {
  switch (m) {
    case Model::Bohmian: return "bohmian";
    case Model::Com: return "com";
    case Model::Both: return "both";
  }
  return "?";
}

std::optional<SignedPauli> stabilizer_of(const SpinorWeights& weights) {
  const double pu = weights.p_up();
  const double pd = weights.p_down();
  if (std::abs(pu - 1.0) < kStateTolerance) return SignedPauli{Axis::Z, 1};
  if (std::abs(pd - 1.0) < kStateTolerance) return SignedPauli{Axis::Z, -1};
  if (std::abs(pu - pd) > kStateTolerance) return std::nullopt;
  const std::complex<double> rel = weights.beta() / weights.alpha();
  if (std::abs(rel - 1.0) < kStateTolerance) return SignedPauli{Axis::X, 1};
  if (std::abs(rel + 1.0) < kStateTolerance) return SignedPauli{Axis::X, -1};
  return std::nullopt;
}

Axis destabilizer_axis_for(SignedPauli stabilizer) { return stabilizer.axis == Axis::Z ? Axis::X : Axis::Z; }

void validate_scenario(const Scenario& sc) {
  require(!sc.name.empty(), "scenario name must not be empty");
  const auto& p = sc.params;
  for (const auto& [key, value] : {std::pair{"a", p.a}, {"u", p.u}, {"v", p.v}, {"dt", p.dt}, {"eps", p.eps}}) {
    require(std::isfinite(value) && value > 0.0, fmt::format("params.{} must be positive, got {}", key, value));
  }
  require(sc.chain.end() != std::find_if(sc.chain.begin(), sc.chain.end(),
                                         [](const ChainElement& e) { return std::holds_alternative<Device>(e); }),
          "chain must contain at least one Device");
  validate_chain(sc.chain);
  for (const auto& e : sc.chain) {
    const SGDeviceSpec* spec = nullptr;
    if (const auto* d = std::get_if<Device>(&e)) spec = &d->spec;
    if (const auto* r = std::get_if<Recollimate>(&e)) spec = &r->spec;
    if (spec != nullptr && runs_bohmian(sc.model)) {
      require(p.dt * spec->kick <= p.a / 100.0,
              fmt::format("dt·kick = {} exceeds a/100 = {}", p.dt * spec->kick, p.a / 100.0));
    }
  }

  if (runs_bohmian(sc.model)) {
    require(sc.weights.has_value(), "Bohmian runs need spinor weights");
    if (sc.bohmian_sampler.kind == BohmianSampler::Kind::Fixed) {
      require(std::abs(sc.bohmian_sampler.z0) <= 0.5 * p.a,
              fmt::format("fixed z0={} outside the packet [-a/2, a/2]", sc.bohmian_sampler.z0));
    }
  }
  if (runs_com(sc.model)) {
    if (sc.weights) {
      const auto stab = stabilizer_of(*sc.weights);
      require(stab.has_value(), "spinor weights are not a stabilizer state, which the COM model requires");
      if (sc.com_stabilizer) {
        require(*sc.com_stabilizer == *stab,
                fmt::format("com stabilizer {} disagrees with the spinor weights ({})", to_string(*sc.com_stabilizer),
                            to_string(*stab)));
      }
    } else {
      require(sc.com_stabilizer.has_value(), "COM runs need spinor weights or an explicit stabilizer");
    }
    if (sc.com_sampler.kind == ComSampler::Kind::Fixed) {
      require(sc.com_sampler.destabilizer_sign == 1 || sc.com_sampler.destabilizer_sign == -1,
              "fixed destabilizer sign must be +1 or -1");
    }
  }
}

SignedPauli scenario_stabilizer(const Scenario& sc) {
  if (sc.weights) {
    if (auto s = stabilizer_of(*sc.weights)) return *s;
    throw ValidationError("not a stabilizer state");
  }
  if (sc.com_stabilizer) return *sc.com_stabilizer;
  throw ValidationError("scenario defines no COM state");
}

ComState initial_com_state(const Scenario& sc, Rng& rng) {
  const SignedPauli stab = scenario_stabilizer(sc);
  const Axis axis = destabilizer_axis_for(stab);
  if (sc.com_sampler.kind == ComSampler::Kind::Fixed) {
    return ComState{stab, SignedPauli{axis, sc.com_sampler.destabilizer_sign}};
  }
  return prepare(stab, axis, rng);
}

double initial_z0(const Scenario& sc, Rng& rng) {
  if (sc.bohmian_sampler.kind == BohmianSampler::Kind::Fixed) return sc.bohmian_sampler.z0;
  return sample_qeh(sc.params.a, 1, rng).front();
}

bool device_dependence_test(const SpinorWeights& weights, double z0, const PhysicalParams& params) {
  return dependent_for_device(weights, z0, params, SGDeviceSpec{Polarity::S, params.u, 0.0});
}

bool device_dependence_test(const ComState& state) {
  // The first outcome is read off the state; the redrawn signs do not matter.
  Rng unused{0};
  const auto spin = [&](Polarity pol) {
    const int outcome = measure(state, sg_observable(pol), unused).outcome;
    return spin_for(pol, path_for_outcome(outcome));
  };
  return spin(Polarity::S) != spin(Polarity::N);
}

std::vector<Interval> device_dependent_bands(const SpinorWeights& weights, const PhysicalParams& params) {
  if (weights.p_up() == 0.0 || weights.p_down() == 0.0) return {};
  const double half = 0.5 * params.a;
  const double zs = exit_threshold(weights, params.u, params.a);
  const double zn = -zs;
  std::vector<Interval> bands;
  if (const double lo = std::min(zs, zn); lo > -half) bands.push_back({-half, lo});
  if (const double hi = std::max(zs, zn); hi < half) bands.push_back({hi, half});
  return bands;
}

EnsembleCounts& EnsembleCounts::operator+=(const EnsembleCounts& o) {
  n_total += o.n_total;
  n_survived += o.n_survived;
  n_up_first += o.n_up_first;
  n_upper_first += o.n_upper_first;
  n_up_final += o.n_up_final;
  n_upper_final += o.n_upper_final;
  n_device_dependent += o.n_device_dependent;
  return *this;
}

EnsembleReport make_report(Model model, const EnsembleCounts& c) {
  EnsembleReport r;
  r.model = model;
  r.counts = c;
  r.p_up_first = ratio(c.n_up_first, c.n_total);
  r.p_upper_first = ratio(c.n_upper_first, c.n_total);
  r.survival_fraction = ratio(c.n_survived, c.n_total);
  r.p_up_final = ratio(c.n_up_final, c.n_survived);
  r.p_upper_final = ratio(c.n_upper_final, c.n_survived);
  r.device_dependent_fraction = ratio(c.n_device_dependent, c.n_total);
  return r;
}

EnsembleResult run_ensemble(const Scenario& scenario, std::size_t n, std::uint64_t seed, const RunOptions& options) {
  if (n == 0) throw ValidationError("sample count must be at least 1");
  Scenario sc = scenario;
  if (options.model) sc.model = *options.model;
  validate_scenario(sc);

  EnsembleResult result{sc.name, seed, n, std::nullopt, std::nullopt};
  const SGDeviceSpec& first = first_device_spec(sc.chain);
  const unsigned workers = std::max(1U, options.workers);

  const auto run_model = [&](Model model, auto&& sample) {
    std::vector<EnsembleCounts> partial(workers);
    std::vector<SampleRecord> records(options.keep_records ? n : 0);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end, unsigned worker) {
      for (std::size_t i = begin; i < end; ++i) {
        SampleRecord rec = sample(i);
        tally(partial[worker], rec.outcome, rec.device_dependent);
        if (options.keep_records) records[i] = std::move(rec);
      }
    });
    EnsembleCounts total;
    for (const auto& c : partial) total += c;
    EnsembleReport report = make_report(model, total);
    report.records = std::move(records);
    return report;
  };

  if (runs_bohmian(sc.model)) {
    const SpinorWeights weights = *sc.weights;
    result.bohmian = run_model(Model::Bohmian, [&](std::size_t i) {
      Rng rng = substream(seed, i, kBohmianLane);
      const double z0 = initial_z0(sc, rng);
      return SampleRecord{i, z0, run_chain_bohm(sc.chain, weights, z0, sc.params),
                          dependent_for_device(weights, z0, sc.params, first)};
    });
  }
  if (runs_com(sc.model)) {
    result.com = run_model(Model::Com, [&](std::size_t i) {
      Rng rng = substream(seed, i, kComLane);
      const ComState init = initial_com_state(sc, rng);
      OutcomeRecord rec = run_chain_com(sc.chain, init, rng);
      return SampleRecord{i, init, std::move(rec), device_dependence_test(init)};
    });
  }
  return result;
}

double PolarityComparison::first_fraction() const { return ratio(first_spin_differs, n); }
double PolarityComparison::final_fraction() const { return ratio(final_spin_differs, both_survive); }

std::vector<PolarityComparison> compare_polarities(const Scenario& scenario, std::size_t n, std::uint64_t seed,
                                                   unsigned workers) {
  if (n == 0) throw ValidationError("sample count must be at least 1");
  validate_scenario(scenario);
  const Chain chain_s = with_first_polarity(scenario.chain, Polarity::S);
  const Chain chain_n = with_first_polarity(scenario.chain, Polarity::N);
  workers = std::max(1U, workers);

  const auto compare = [&](Model model, auto&& pair_for) {
    std::vector<PolarityComparison> partial(workers);
    parallel_for(n, workers, [&](std::size_t begin, std::size_t end, unsigned worker) {
      auto& c = partial[worker];
      for (std::size_t i = begin; i < end; ++i) {
        const auto [rs, rn] = pair_for(i);
        ++c.n;
        if (rs.first_device()->spin != rn.first_device()->spin) ++c.first_spin_differs;
        if (rs.survived() && rn.survived()) {
          ++c.both_survive;
          if (rs.last_device()->spin != rn.last_device()->spin) ++c.final_spin_differs;
        }
      }
    });
    PolarityComparison total{model};
    for (const auto& c : partial) {
      total.n += c.n;
      total.first_spin_differs += c.first_spin_differs;
      total.both_survive += c.both_survive;
      total.final_spin_differs += c.final_spin_differs;
    }
    return total;
  };

  std::vector<PolarityComparison> out;
  if (runs_bohmian(scenario.model)) {
    const SpinorWeights weights = *scenario.weights;
    out.push_back(compare(Model::Bohmian, [&](std::size_t i) {
      Rng rng = substream(seed, i, kBohmianLane);
      const double z0 = initial_z0(scenario, rng);
      return std::pair{run_chain_bohm(chain_s, weights, z0, scenario.params),
                       run_chain_bohm(chain_n, weights, z0, scenario.params)};
    }));
  }
  if (runs_com(scenario.model)) {
    out.push_back(compare(Model::Com, [&](std::size_t i) {
      Rng rng = substream(seed, i, kComLane);
      const ComState init = initial_com_state(scenario, rng);
      Rng rng_s = rng;
      Rng rng_n = rng;
      return std::pair{run_chain_com(chain_s, init, rng_s), run_chain_com(chain_n, init, rng_n)};
    }));
  }
  return out;
}

namespace {

Chain single(Polarity p) { return {Device{{p, 1.0, 0.0}}}; }

Chain sequential(Polarity first) {
  return {Device{{first, 1.0, 0.0}}, Block{Path::Lower}, Recollimate{{opposite(first), 1.0, 2.0}},
          Device{{Polarity::S, 1.0, 4.0}}};
}

Scenario make(std::string name, std::string description, Model model, SpinorWeights weights, Chain chain) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.model = model;
  s.weights = weights;
  s.chain = std::move(chain);
  return s;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  const SpinorWeights up{{1.0, 0.0}, {0.0, 0.0}};
  const SpinorWeights down{{0.0, 0.0}, {1.0, 0.0}};
  const double r3 = std::sqrt(3.0) / 2.0;
  const SpinorWeights mostly_up{{r3, 0.0}, {0.5, 0.0}};
  const SpinorWeights mostly_down{{0.5, 0.0}, {r3, 0.0}};
  const double h = std::sqrt(0.5);
  const SpinorWeights plus_x{{h, 0.0}, {h, 0.0}};

  return {
      make("fig1a", "spin up at an SG_S device: upper path", Model::Both, up, single(Polarity::S)),
      make("fig1b", "spin down at an SG_S device: lower path", Model::Both, down, single(Polarity::S)),
      make("fig1c", "spin down at an SG_N device: upper path", Model::Both, down, single(Polarity::N)),
      make("fig1d", "spin up at an SG_N device: lower path", Model::Both, up, single(Polarity::N)),
      make("fig2a", "|alpha|^2 = 3/4 through one SG_S device", Model::Bohmian, mostly_up, single(Polarity::S)),
      make("fig2b", "|alpha|^2 = 3/4 through one SG_N device", Model::Bohmian, mostly_up, single(Polarity::N)),
      make("fig3a", "|alpha|^2 = 1/4: SG_S, lower path blocked, recollimated, checked by SG_S", Model::Bohmian,
           mostly_down, sequential(Polarity::S)),
      make("fig3b", "|alpha|^2 = 1/4: SG_N, lower path blocked, recollimated, checked by SG_S", Model::Bohmian,
           mostly_down, sequential(Polarity::N)),
      make("com-sequential", "equal superposition through SG_S, block, recollimate, SG_S; compare flips the first device",
           Model::Both, plus_x, sequential(Polarity::S)),
  };
}

std::optional<Scenario> find_builtin(const std::string& name) {
  for (auto& s : builtin_scenarios()) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

}  // namespace sgc

#include "sgc/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "sgc/errors.hpp"

namespace sgc {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// enum <-> text

const char* polarity_text(Polarity p) { return p == Polarity::S ? "S" : "N"; }
const char* path_text(Path p) { return p == Path::Upper ? "upper" : "lower"; }
const char* spin_text(Spin s) { return s == Spin::Up ? "up" : "down"; }

const char* occupancy_text(Occupancy o) {
  switch (o) {
    case Occupancy::Up: return "up";
    case Occupancy::Down: return "down";
    case Occupancy::Both: return "both";
  }
  return "?";
}

std::string at(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : fmt::format("{}.{}", where, key);
}

void check_object(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ParseError(fmt::format("{} must be an object", where.empty() ? "document" : where));
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ParseError(fmt::format("unknown key '{}'", at(where, it.key())));
    }
  }
}

const json& required(const json& j, const std::string& where, std::string_view key) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw ParseError(fmt::format("missing required key '{}'", at(where, key)));
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(fmt::format("'{}' must be a number", path));
  return j.get<double>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(fmt::format("'{}' must be a string", path));
  return j.get<std::string>();
}

template <typename E>
E choice(const json& j, const std::string& path, std::initializer_list<std::pair<std::string_view, E>> options) {
  const std::string s = text(j, path);
  for (const auto& [name, value] : options) {
    if (s == name) return value;
  }
  std::string expected;
  for (const auto& [name, value] : options) expected += fmt::format("{}'{}'", expected.empty() ? "" : ", ", name);
  throw ParseError(fmt::format("'{}' = '{}' is not one of {}", path, s, expected));
}

Polarity parse_polarity(const json& j, const std::string& path) {
  return choice<Polarity>(j, path, {{"S", Polarity::S}, {"N", Polarity::N}});
}

Path parse_path(const json& j, const std::string& path) {
  return choice<Path>(j, path, {{"upper", Path::Upper}, {"lower", Path::Lower}});
}

std::complex<double> amplitude(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ParseError(fmt::format("'{}' must be a [re, im] pair", path));
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

SGDeviceSpec device_spec(const json& j, const std::string& where, const PhysicalParams& params) {
  SGDeviceSpec spec;
  spec.polarity = parse_polarity(required(j, where, "polarity"), at(where, "polarity"));
  spec.kick = j.contains("kick") ? number(j["kick"], at(where, "kick")) : params.u;
  spec.plane_x = number(required(j, where, "plane_x"), at(where, "plane_x"));
  return spec;
}

ChainElement chain_element(const json& j, const std::string& where, const PhysicalParams& params) {
  if (!j.is_object()) throw ParseError(fmt::format("{} must be an object", where));
  const std::string kind = text(required(j, where, "kind"), at(where, "kind"));
  if (kind == "device") {
    check_object(j, where, {"kind", "polarity", "kick", "plane_x"});
    return Device{device_spec(j, where, params)};
  }
  if (kind == "recollimate") {
    check_object(j, where, {"kind", "polarity", "kick", "plane_x"});
    return Recollimate{device_spec(j, where, params)};
  }
  if (kind == "block") {
    check_object(j, where, {"kind", "path"});
    return Block{parse_path(required(j, where, "path"), at(where, "path"))};
  }
  throw ParseError(fmt::format("'{}' = '{}' is not one of 'device', 'block', 'recollimate'", at(where, "kind"), kind));
}

Scenario scenario_from_json(const json& doc) {
  check_object(doc, "", {"version", "name", "description", "model", "params", "state", "com_stabilizer",
                         "bohmian_sampler", "com_sampler", "chain"});
  const json& version = required(doc, "", "version");
  if (!version.is_number_integer() || version.get<long long>() != kScenarioVersion) {
    throw ParseError(fmt::format("unsupported scenario version {} (expected {})", version.dump(), kScenarioVersion));
  }

  Scenario sc;
  sc.name = text(required(doc, "", "name"), "name");
  if (doc.contains("description")) sc.description = text(doc["description"], "description");
  sc.model = choice<Model>(required(doc, "", "model"), "model",
                           {{"bohmian", Model::Bohmian}, {"com", Model::Com}, {"both", Model::Both}});

  if (doc.contains("params")) {
    const json& p = doc["params"];
    check_object(p, "params", {"a", "u", "v", "dt", "eps"});
    const auto read = [&](const char* key, double& field) {
      if (p.contains(key)) field = number(p[key], at("params", key));
    };
    read("a", sc.params.a);
    read("u", sc.params.u);
    read("v", sc.params.v);
    read("dt", sc.params.dt);
    read("eps", sc.params.eps);
  }

  if (doc.contains("state")) {
    const json& s = doc["state"];
    check_object(s, "state", {"alpha", "beta"});
    sc.weights = SpinorWeights{amplitude(required(s, "state", "alpha"), "state.alpha"),
                               amplitude(required(s, "state", "beta"), "state.beta")};
  }
  if (doc.contains("com_stabilizer")) sc.com_stabilizer = parse_signed_pauli(text(doc["com_stabilizer"], "com_stabilizer"));

  if (doc.contains("bohmian_sampler")) {
    const json& s = doc["bohmian_sampler"];
    check_object(s, "bohmian_sampler", {"kind", "z0"});
    sc.bohmian_sampler.kind = choice<BohmianSampler::Kind>(
        required(s, "bohmian_sampler", "kind"), "bohmian_sampler.kind",
        {{"qeh", BohmianSampler::Kind::Qeh}, {"fixed", BohmianSampler::Kind::Fixed}});
    if (sc.bohmian_sampler.kind == BohmianSampler::Kind::Fixed) {
      sc.bohmian_sampler.z0 = number(required(s, "bohmian_sampler", "z0"), "bohmian_sampler.z0");
    } else if (s.contains("z0")) {
      throw ParseError("'bohmian_sampler.z0' only applies to kind 'fixed'");
    }
  }
  if (doc.contains("com_sampler")) {
    const json& s = doc["com_sampler"];
    check_object(s, "com_sampler", {"kind", "destabilizer_sign"});
    sc.com_sampler.kind = choice<ComSampler::Kind>(
        required(s, "com_sampler", "kind"), "com_sampler.kind",
        {{"random", ComSampler::Kind::RandomDestabilizer}, {"fixed", ComSampler::Kind::Fixed}});
    if (sc.com_sampler.kind == ComSampler::Kind::Fixed) {
      const json& sign = required(s, "com_sampler", "destabilizer_sign");
      if (!sign.is_number_integer()) throw ParseError("'com_sampler.destabilizer_sign' must be +1 or -1");
      sc.com_sampler.destabilizer_sign = sign.get<int>();
    } else if (s.contains("destabilizer_sign")) {
      throw ParseError("'com_sampler.destabilizer_sign' only applies to kind 'fixed'");
    }
  }

  const json& chain = required(doc, "", "chain");
  if (!chain.is_array()) throw ParseError("'chain' must be an array");
  for (std::size_t i = 0; i < chain.size(); ++i) {
    sc.chain.push_back(chain_element(chain[i], fmt::format("chain[{}]", i), sc.params));
  }

  validate_scenario(sc);
  return sc;
}

ordered_json device_json(const char* kind, const SGDeviceSpec& spec) {
  return ordered_json{{"kind", kind}, {"polarity", polarity_text(spec.polarity)}, {"kick", spec.kick},
                      {"plane_x", spec.plane_x}};
}

ordered_json steps_json(const OutcomeRecord& rec) {
  ordered_json steps = ordered_json::array();
  for (const auto& step : rec.steps) {
    if (const auto* d = std::get_if<DeviceOutcome>(&step)) {
      steps.push_back({{"device", polarity_text(d->polarity)}, {"path", path_text(d->path)}, {"spin", spin_text(d->spin)}});
    } else {
      const auto& b = std::get<BlockOutcome>(step);
      steps.push_back({{"block", path_text(b.blocked)}, {"survived", b.survived}});
    }
  }
  return steps;
}

ordered_json report_tree(const EnsembleReport& r) {
  const auto& c = r.counts;
  ordered_json j{{"model", to_string(r.model)},
                 {"n_total", c.n_total},
                 {"n_survived", c.n_survived},
                 {"n_up_first", c.n_up_first},
                 {"n_upper_first", c.n_upper_first},
                 {"n_up_final", c.n_up_final},
                 {"n_upper_final", c.n_upper_final},
                 {"n_device_dependent", c.n_device_dependent},
                 {"p_up_first", r.p_up_first},
                 {"p_upper_first", r.p_upper_first},
                 {"survival_fraction", r.survival_fraction},
                 {"p_up_final", r.p_up_final},
                 {"p_upper_final", r.p_upper_final},
                 {"device_dependent_fraction", r.device_dependent_fraction}};
  if (!r.records.empty()) {
    ordered_json records = ordered_json::array();
    for (const auto& s : r.records) {
      ordered_json rec{{"index", s.index}};
      if (const auto* z0 = std::get_if<double>(&s.hidden)) {
        rec["z0"] = *z0;
      } else {
        rec["initial_state"] = to_string(std::get<ComState>(s.hidden));
      }
      rec["absorbed"] = s.outcome.absorbed;
      rec["device_dependent"] = s.device_dependent;
      rec["steps"] = steps_json(s.outcome);
      records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
  }
  return j;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("malformed scenario document: {}", e.what()));
  }
  return scenario_from_json(doc);
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot read scenario file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_scenario(const Scenario& sc) {
  ordered_json j;
  j["version"] = kScenarioVersion;
  j["name"] = sc.name;
  j["description"] = sc.description;
  j["model"] = to_string(sc.model);
  j["params"] = {{"a", sc.params.a}, {"u", sc.params.u}, {"v", sc.params.v}, {"dt", sc.params.dt},
                 {"eps", sc.params.eps}};
  if (sc.weights) {
    const auto a = sc.weights->alpha();
    const auto b = sc.weights->beta();
    j["state"] = {{"alpha", {a.real(), a.imag()}}, {"beta", {b.real(), b.imag()}}};
  }
  if (sc.com_stabilizer) j["com_stabilizer"] = to_string(*sc.com_stabilizer);
  if (sc.bohmian_sampler.kind == BohmianSampler::Kind::Fixed) {
    j["bohmian_sampler"] = {{"kind", "fixed"}, {"z0", sc.bohmian_sampler.z0}};
  } else {
    j["bohmian_sampler"] = {{"kind", "qeh"}};
  }
  if (sc.com_sampler.kind == ComSampler::Kind::Fixed) {
    j["com_sampler"] = {{"kind", "fixed"}, {"destabilizer_sign", sc.com_sampler.destabilizer_sign}};
  } else {
    j["com_sampler"] = {{"kind", "random"}};
  }
  ordered_json chain = ordered_json::array();
  for (const auto& e : sc.chain) {
    if (const auto* d = std::get_if<Device>(&e)) {
      chain.push_back(device_json("device", d->spec));
    } else if (const auto* r = std::get_if<Recollimate>(&e)) {
      chain.push_back(device_json("recollimate", r->spec));
    } else {
      chain.push_back({{"kind", "block"}, {"path", path_text(std::get<Block>(e).path)}});
    }
  }
  j["chain"] = std::move(chain);
  return j.dump(2) + "\n";
}

std::string report_json(const EnsembleResult& result) {
  ordered_json j{{"scenario", result.scenario}, {"seed", result.seed}, {"samples", result.samples}};
  if (result.bohmian) j["bohmian"] = report_tree(*result.bohmian);
  if (result.com) j["com"] = report_tree(*result.com);
  return j.dump(2) + "\n";
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "t,x,z,branch_occupied\n";
  for (const auto& s : trajectory.samples) {
    out << fmt::format("{},{},{},{}\n", s.t, s.x, s.z, occupancy_text(s.occupied));
  }
}

std::vector<double> start_grid(double a, std::size_t k) {
  if (k == 0) return {};
  if (k == 1) return {0.0};
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = -0.5 * a + a * static_cast<double>(i) / static_cast<double>(k - 1);
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

struct Magnet {
  double x = 0.0;
  double lo = 0.0;  // beam extent at the plane
  double hi = 0.0;
  Polarity polarity = Polarity::S;
};

struct Screen {
  double x = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct Geometry {
  std::vector<Magnet> magnets;
  std::vector<Screen> screens;
  std::vector<BranchedWave> snapshots;
  std::optional<double> threshold;
  double first_plane = 0.0;
};

std::pair<double, double> extent(const BranchedWave& w) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& b : w.branches) {
    lo = std::min(lo, b.z_low());
    hi = std::max(hi, b.z_high());
  }
  return {lo, hi};
}

// Replays the chain analytically for one surviving start height, recording
// where devices and screens sit and what the wave looks like around them.
Geometry chain_geometry(const Scenario& sc, const std::vector<double>& z0s, const std::vector<TracedRun>& runs) {
  Geometry g;
  const SpinorWeights weights = *sc.weights;
  double z0 = z0s.empty() ? 0.0 : z0s.front();
  for (std::size_t i = 0; i < runs.size() && i < z0s.size(); ++i) {
    if (runs[i].record.survived()) {
      z0 = z0s[i];
      break;
    }
  }

  std::optional<BohmianState> state;
  for (const auto& e : sc.chain) {
    if (const auto* d = std::get_if<Device>(&e)) {
      if (!state) {
        g.first_plane = d->spec.plane_x;
        state = initial_bohmian_state(weights, z0, sc.params, d->spec.plane_x);
        if (weights.p_up() > 0.0 && weights.p_down() > 0.0) {
          const double zs = exit_threshold(weights, d->spec.kick, sc.params.a);
          g.threshold = d->spec.polarity == Polarity::S ? zs : -zs;
        }
      }
      const BohmianState at = fly_to_plane(*state, d->spec.plane_x);
      const auto [lo, hi] = extent(at.wave);
      g.magnets.push_back({d->spec.plane_x, lo, hi, d->spec.polarity});
      g.snapshots.push_back(at.wave);
      state = apply_device(d->spec, at).state;
      g.snapshots.push_back(state->wave);
    } else if (const auto* b = std::get_if<Block>(&e)) {
      if (!state) break;
      const auto& branches = state->wave.branches;
      double lo = 0.0;
      double hi = 0.0;
      if (branches.size() == 2) {
        const std::size_t upper = branches[0].center_z >= branches[1].center_z ? 0 : 1;
        const Packet& blocked = branches[b->path == Path::Upper ? upper : 1 - upper];
        lo = blocked.z_low();
        hi = blocked.z_high();
      } else {
        const auto [wl, wh] = extent(state->wave);
        const double shift = (b->path == Path::Upper ? 1.0 : -1.0) * sc.params.a;
        lo = wl + shift;
        hi = wh + shift;
      }
      g.screens.push_back({state->pos_x, lo - 0.05 * sc.params.a, hi + 0.05 * sc.params.a});
      auto next = apply_block(*b, *state);
      if (!next && branches.size() == 2) break;
      if (next) state = std::move(*next);
    } else {
      const auto& spec = std::get<Recollimate>(e).spec;
      if (!state) break;
      const BohmianState at = fly_to_plane(*state, spec.plane_x);
      const auto [lo, hi] = extent(at.wave);
      g.magnets.push_back({spec.plane_x, lo, hi, spec.polarity});
      state = apply_recollimate(spec, *state);
      g.snapshots.push_back(state->wave);
    }
  }
  return g;
}

}  // namespace

std::string render_svg(const Scenario& sc, const std::vector<double>& z0s, const std::vector<TracedRun>& runs) {
  if (!sc.weights) throw ValidationError("plotting needs a Bohmian scenario with spinor weights");
  const Geometry g = chain_geometry(sc, z0s, runs);
  const double a = sc.params.a;

  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double zmin = xmin;
  double zmax = -xmin;
  const auto grow = [&](double x, double z) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
  };
  for (const auto& run : runs) {
    for (const auto& s : run.trajectory.samples) grow(s.x, s.z);
  }
  for (const auto& m : g.magnets) {
    grow(m.x, m.hi + 0.6 * a);
    grow(m.x, m.lo - 0.6 * a);
  }
  for (const auto& w : g.snapshots) {
    const auto [lo, hi] = extent(w);
    grow(w.branches.front().center_x, lo);
    grow(w.branches.front().center_x, hi);
  }
  if (!std::isfinite(xmin)) {
    xmin = -1.0;
    xmax = 1.0;
    zmin = -a;
    zmax = a;
  }

  constexpr double kWidth = 960.0;
  constexpr double kHeight = 540.0;
  constexpr double kMargin = 40.0;
  const double sx = (kWidth - 2 * kMargin) / std::max(xmax - xmin, 1e-9);
  const double sz = (kHeight - 2 * kMargin) / std::max(zmax - zmin, 1e-9);
  const auto px = [&](double x) { return kMargin + (x - xmin) * sx; };
  const auto pz = [&](double z) { return kMargin + (zmax - z) * sz; };

  std::string svg;
  auto out = std::back_inserter(svg);
  fmt::format_to(out,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} "
                 "{:.0f}\">\n",
                 kWidth, kHeight, kWidth, kHeight);
  fmt::format_to(out, "<title>{}</title>\n", sc.name);
  fmt::format_to(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

  // magnets: upper and lower pole pieces, letter of the upper pole on top
  for (const auto& m : g.magnets) {
    const double w = 0.25 * sx * std::min(1.0, xmax - xmin);
    const double x = px(m.x) - 0.5 * w;
    const char* top = m.polarity == Polarity::S ? "S" : "N";
    const char* bottom = m.polarity == Polarity::S ? "N" : "S";
    const double up_lo = m.hi + 0.15 * a;
    const double up_hi = m.hi + 0.55 * a;
    const double dn_lo = m.lo - 0.55 * a;
    const double dn_hi = m.lo - 0.15 * a;
    fmt::format_to(out,
                   "<g class=\"device\"><rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                   "fill=\"#d9d9d9\" stroke=\"#444\"/>",
                   x, pz(up_hi), w, pz(up_lo) - pz(up_hi));
    fmt::format_to(out,
                   "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#d9d9d9\" "
                   "stroke=\"#444\"/>",
                   x, pz(dn_hi), w, pz(dn_lo) - pz(dn_hi));
    fmt::format_to(out,
                   "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"14\" "
                   "text-anchor=\"middle\">{}</text>",
                   px(m.x), 0.5 * (pz(up_hi) + pz(up_lo)) + 5, top);
    fmt::format_to(out,
                   "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"14\" "
                   "text-anchor=\"middle\">{}</text></g>\n",
                   px(m.x), 0.5 * (pz(dn_hi) + pz(dn_lo)) + 5, bottom);
  }

  for (const auto& s : g.screens) {
    fmt::format_to(out,
                   "<rect class=\"block\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"6\" height=\"{:.2f}\" fill=\"black\"/>\n",
                   px(s.x) - 3, pz(s.hi), pz(s.lo) - pz(s.hi));
  }

  for (const auto& w : g.snapshots) {
    for (const auto& b : w.branches) {
      const double width = std::max(b.width_eps * sx, 2.0);
      fmt::format_to(out,
                     "<rect class=\"packet\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                     "fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                     px(b.center_x) - 0.5 * width, pz(b.z_high()), width, pz(b.z_low()) - pz(b.z_high()),
                     b.spin == Spin::Up ? "#1f5fbf" : "#c0392b");
    }
  }

  if (g.threshold) {
    fmt::format_to(out,
                   "<line class=\"threshold\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#333\" "
                   "stroke-width=\"1.2\" stroke-dasharray=\"10,4,2,4\"/>\n",
                   px(xmin), pz(*g.threshold), px(g.first_plane), pz(*g.threshold));
    fmt::format_to(out,
                   "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\">z* = {:.4g}</text>\n",
                   px(xmin) + 4, pz(*g.threshold) - 4, *g.threshold);
  }

  for (const auto& run : runs) {
    const auto& samples = run.trajectory.samples;
    if (samples.empty()) continue;
    const char* colour = "#888888";
    if (run.record.survived()) {
      if (const auto last = run.record.last_device()) colour = last->path == Path::Upper ? "#1f5fbf" : "#c0392b";
    }
    const std::size_t stride = std::max<std::size_t>(1, samples.size() / 400);
    fmt::format_to(out, "<polyline class=\"trajectory\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"",
                   colour);
    for (std::size_t i = 0; i < samples.size(); i += stride) {
      fmt::format_to(out, "{:.2f},{:.2f} ", px(samples[i].x), pz(samples[i].z));
    }
    fmt::format_to(out, "{:.2f},{:.2f}\"/>\n", px(samples.back().x), pz(samples.back().z));
  }

  fmt::format_to(out,
                 "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\">x</text>\n"
                 "<text x=\"12\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\">z</text>\n",
                 kWidth - kMargin + 8, kHeight - kMargin / 2, kMargin);
  svg += "</svg>\n";
  return svg;
}

}  // namespace sgc

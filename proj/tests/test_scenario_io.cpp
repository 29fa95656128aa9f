#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sgc/errors.hpp"
#include "sgc/scenario_io.hpp"

using namespace sgc;
using nlohmann::json;

namespace {

const char* const kMinimal = R"({
  "version": 1,
  "name": "mini",
  "model": "bohmian",
  "state": {"alpha": [0.5, 0.0], "beta": [0.8660254037844386, 0.0]},
  "chain": [{"kind": "device", "polarity": "S", "plane_x": 0.0}]
})";

std::string error_of(const std::string& text) {
  try {
    (void)parse_scenario_text(text);
  } catch (const SimulationError& e) {
    return e.what();
  }
  return {};
}

std::string edited(const std::function<void(json&)>& edit) {
  json doc = json::parse(kMinimal);
  edit(doc);
  return doc.dump();
}

}  // namespace

TEST_CASE("minimal scenario takes defaults") {
  const Scenario sc = parse_scenario_text(kMinimal);
  CHECK(sc.name == "mini");
  CHECK(sc.model == Model::Bohmian);
  CHECK(sc.params == PhysicalParams{});
  REQUIRE(sc.weights.has_value());
  CHECK(sc.weights->p_up() == doctest::Approx(0.25));
  CHECK(sc.bohmian_sampler.kind == BohmianSampler::Kind::Qeh);
  REQUIRE(sc.chain.size() == 1);
  CHECK(std::get<Device>(sc.chain[0]).spec.kick == 1.0);
}

TEST_CASE("every builtin survives a serialize/parse round trip") {
  for (const auto& sc : builtin_scenarios()) {
    const std::string text = serialize_scenario(sc);
    CHECK(text.back() == '\n');
    CHECK(parse_scenario_text(text) == sc);
    CHECK(serialize_scenario(parse_scenario_text(text)) == text);
  }
}

TEST_CASE("shipped scenario files match the builtins") {
  for (const auto& sc : builtin_scenarios()) {
    const auto path = std::filesystem::path(SGC_SCENARIO_DIR) / (sc.name + ".json");
    REQUIRE_MESSAGE(std::filesystem::exists(path), path.string());
    CHECK(parse_scenario(path) == sc);
  }
}

TEST_CASE("round trip of non-default fields") {
  Scenario sc = *find_builtin("com-sequential");
  sc.params.a = 2.0;
  sc.bohmian_sampler = {BohmianSampler::Kind::Fixed, 0.3};
  sc.com_sampler = {ComSampler::Kind::Fixed, -1};
  sc.com_stabilizer = SignedPauli(Axis::X, 1);
  CHECK(parse_scenario_text(serialize_scenario(sc)) == sc);

  Scenario com_only = sc;
  com_only.model = Model::Com;
  com_only.weights.reset();
  CHECK(parse_scenario_text(serialize_scenario(com_only)) == com_only);
}

TEST_CASE("parse errors name the offending key") {
  CHECK(error_of("{").find("malformed") != std::string::npos);
  CHECK(error_of("[]").find("object") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["version"] = 2; })).find("version") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["colour"] = "red"; })).find("colour") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d.erase("chain"); })).find("chain") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["model"] = "qm"; })).find("model") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["params"] = {{"a", "one"}}; })).find("params.a") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["chain"][0]["polarity"] = "E"; })).find("chain[0].polarity") !=
        std::string::npos);
  CHECK(error_of(edited([](json& d) { d["chain"][0]["kind"] = "lens"; })).find("chain[0].kind") !=
        std::string::npos);
  CHECK(error_of(edited([](json& d) { d["chain"][0]["spin"] = 1; })).find("chain[0].spin") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["state"]["alpha"] = {0.5}; })).find("state.alpha") != std::string::npos);
  CHECK(error_of(edited([](json& d) { d["bohmian_sampler"] = {{"kind", "qeh"}, {"z0", 0.1}}; }))
            .find("z0") != std::string::npos);
}

TEST_CASE("validation errors surface through the parser") {
  CHECK_THROWS_AS((void)parse_scenario_text(edited([](json& d) { d["state"]["alpha"] = {1.0, 0.0}; })),
                  ValidationError);
  CHECK(error_of(edited([](json& d) { d["model"] = "com"; })).find("not a stabilizer state") != std::string::npos);
  CHECK(error_of(edited([](json& d) {
          d["chain"].insert(d["chain"].begin(), json{{"kind", "block"}, {"path", "lower"}});
        })) == "Block must follow a Device");
}

TEST_CASE("file errors carry the path") {
  CHECK_THROWS_AS((void)parse_scenario("/nonexistent/x.json"), ParseError);
  const auto tmp = std::filesystem::temp_directory_path() / "sgc-bad-scenario.json";
  {
    std::ofstream f(tmp);
    f << "{\"version\": 1}";
  }
  try {
    (void)parse_scenario(tmp);
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(tmp.string()) != std::string::npos);
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("report JSON") {
  RunOptions opts;
  opts.keep_records = true;
  const auto result = run_ensemble(*find_builtin("com-sequential"), 20, 4, opts);
  const std::string text = report_json(result);
  CHECK(text == report_json(run_ensemble(*find_builtin("com-sequential"), 20, 4, opts)));
  const json j = json::parse(text);
  CHECK(j["scenario"] == "com-sequential");
  CHECK(j["seed"] == 4);
  CHECK(j["samples"] == 20);
  CHECK(j["bohmian"]["n_total"] == 20);
  CHECK(j["com"]["records"].size() == 20);
  CHECK(j["com"]["records"][0]["initial_state"].get<std::string>().rfind("{+X; ", 0) == 0);
  CHECK(j["bohmian"]["records"][0].contains("z0"));
  CHECK_FALSE(json::parse(report_json(run_ensemble(*find_builtin("fig1a"), 5, 1)))["com"].contains("records"));
}

TEST_CASE("trajectory CSV") {
  Trajectory t;
  t.samples = {{0.0, 0.0, 0.25, Occupancy::Both}, {0.5, 0.5, 0.5, Occupancy::Up}, {1.0, 1.0, -1.0, Occupancy::Down}};
  std::ostringstream out;
  write_trajectory_csv(out, t);
  CHECK(out.str() == "t,x,z,branch_occupied\n0,0,0.25,both\n0.5,0.5,0.5,up\n1,1,-1,down\n");
}

TEST_CASE("start grid") {
  CHECK(start_grid(1.0, 1) == std::vector<double>{0.0});
  CHECK(start_grid(1.0, 3) == std::vector<double>{-0.5, 0.0, 0.5});
  CHECK(start_grid(2.0, 5).front() == -1.0);
  CHECK(start_grid(2.0, 5).back() == 1.0);
}

TEST_CASE("SVG rendering") {
  const Scenario sc = *find_builtin("fig3a");
  const auto z0s = start_grid(sc.params.a, 5);
  std::vector<TracedRun> runs;
  for (const double z0 : z0s) runs.push_back(trace_chain_bohm(sc.chain, *sc.weights, z0, sc.params));
  const std::string svg = render_svg(sc, z0s, runs);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("class=\"threshold\"") != std::string::npos);
  CHECK(svg.find("stroke-dasharray=\"10,4,2,4\"") != std::string::npos);
  std::size_t count = 0;
  for (auto pos = svg.find("class=\"trajectory\""); pos != std::string::npos;
       pos = svg.find("class=\"trajectory\"", pos + 1)) {
    ++count;
  }
  CHECK(count == z0s.size());
  CHECK(svg.find("http://") == svg.find("http://www.w3.org/2000/svg"));
}

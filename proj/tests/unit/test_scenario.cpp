#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hybridsim/error.hpp"
#include "hybridsim/scenario.hpp"

using namespace hybridsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hybridsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorCode parse_code(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorCode::Io;
}

// Short single-phase fault run that keeps the suite fast.
ScenarioConfig short_config() {
  ScenarioConfig c;
  c.name = "short";
  c.duration = 0.8;
  c.index.window = {0.5, 0.8};
  c.events.faults.push_back({2, FaultKind::SinglePhaseG, 0.0, 0.5, 0.6});
  return c;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ScenarioConfig c = short_config();
  c.boundary.protocol = Protocol::ThreeSeqCurrent;
  c.boundary.delay_steps = 2;
  c.emt_region = std::set<int>{1, 2, 3};
  FoSourceSpec fo;
  fo.kind = FoKind::SFO;
  fo.v_fo = 100.0;
  fo.f_fo = 9.0;
  fo.t_enable = 0.5;
  c.events.fo.push_back({2, fo});
  c.reference = Reference::FullEmt;
  c.pipelined = true;
  const std::string text = nlohmann::json(c).dump();
  EXPECT_EQ(parse_scenario(text), c);

  ScenarioConfig inl = short_config();
  inl.network.kind = NetworkSpec::Kind::Inline;
  inl.network.model = build_four_bus(0.4);
  EXPECT_EQ(parse_scenario(nlohmann::json(inl).dump()), inl);
}

TEST(Config, DefaultsFromMinimalDocument) {
  const auto c = parse_scenario(R"({"schema_version": 1})");
  EXPECT_EQ(c.network.kind, NetworkSpec::Kind::FourBus);
  EXPECT_DOUBLE_EQ(c.network.alpha, 0.1);
  EXPECT_EQ(c.boundary.bus, 3);
  EXPECT_DOUBLE_EQ(c.duration, 2.5);
  EXPECT_EQ(c.index.window, (IndexWindow{0.5, 2.5}));
  EXPECT_EQ(resolve_emt_region(c, resolve_network(c)), (std::set<int>{1, 2, 3}));
}

TEST(Config, RejectsInvalidDocuments) {
  EXPECT_EQ(parse_code("{not json"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 2})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "network": {"four_bus": {"alpha": 1.5}}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "boundary": {"protocol": "bogus"}})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "duration": 1.0})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "events": [{"type": "nope"}]})"), ErrorCode::Config);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "events": [{"type": "fault", "bus": 2, "kind": "ThreePhaseG", "t_on": 0.9, "t_off": 0.5}]})"),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(parse_code(R"({"schema_version": 1, "events": [{"type": "fo", "bus": 2, "kind": "MFO", "v_fo": 1, "f_fo": 80}]})"),
            ErrorCode::Config);
}

TEST(Config, NetworkFileResolvedRelativeToScenario) {
  const auto dir = scratch("netfile");
  std::ofstream(dir / "net.json") << nlohmann::json(build_four_bus(0.3)).dump();
  std::ofstream(dir / "scenario.json") << R"({"schema_version": 1, "network": {"file": "net.json"}})";
  const auto c = load_scenario(dir / "scenario.json");
  EXPECT_EQ(resolve_network(c), build_four_bus(0.3));
  try {
    load_scenario(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Output, NineSignificantDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_number(123456789012.0), "1.23456789e+11");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-2.5e-7), "-2.5e-07");
}

TEST(Output, RunFilesAndManifestAreDeterministic) {
  const auto r = run_scenario(short_config());
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto manifest = write_run_outputs(r, a);
  write_run_outputs(run_scenario(short_config()), b);
  ASSERT_TRUE(manifest.contains("files"));
  for (const auto& f : manifest["files"]) {
    const std::string name = f.is_string() ? f.get<std::string>() : f.at("file").get<std::string>();
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  const auto report = nlohmann::json::parse(slurp(a / "report.json")).get<ErrorReport>();
  EXPECT_EQ(report, r.report);
  // header plus one row per EMT sample
  std::ifstream csv(a / "emt_boundary_voltage.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, r.hybrid.emt_voltage.size() + 1);
  for (const auto& entry : fs::directory_iterator(a))
    EXPECT_EQ(entry.path().string().find(".tmp."), std::string::npos);
}

TEST(Sweep, SinglePointMatchesDirectRun) {
  ScenarioConfig c = short_config();
  c.reference = Reference::FullEmt;
  const auto s = sweep_alpha(c, {0.3}, {1, std::nullopt});
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.variable, "alpha");
  c.network.alpha = 0.3;
  const auto r = run_scenario(c);
  EXPECT_EQ(s.points[0].report, r.report);
  ASSERT_TRUE(r.report.e_true.has_value());
}

TEST(Sweep, ParallelEqualsSerial) {
  ScenarioConfig c = short_config();
  const std::vector<double> alphas{0.2, 0.8, 0.5};
  const auto serial = sweep_alpha(c, alphas, {1, std::nullopt});
  const auto dir = scratch("sweep");
  const auto parallel = sweep_alpha(c, alphas, {3, dir / "points"});
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < alphas.size(); ++i) EXPECT_DOUBLE_EQ(parallel.points[i].value, alphas[i]);
  write_sweep_outputs(parallel, c, dir);
  EXPECT_TRUE(fs::exists(dir / "err_vs_alpha.csv"));
  EXPECT_TRUE(fs::exists(dir / "sweep.json"));
}

TEST(Sweep, RejectsEmptyAndNonFourBus) {
  ScenarioConfig c = short_config();
  EXPECT_THROW(sweep_alpha(c, {}), Error);
  c.network.kind = NetworkSpec::Kind::Inline;
  c.network.model = build_four_bus(0.5);
  EXPECT_THROW(sweep_alpha(c, {0.5}), Error);
}

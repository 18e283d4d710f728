#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybridsim/error.hpp"
#include "hybridsim/scenario.hpp"

namespace {

using namespace hybridsim;
using nlohmann::json;

struct Overrides {
  std::string scenario;
  std::string out;
  std::string window;
  std::optional<double> threshold_a;
  std::string protocol;
  std::optional<double> dt;
  std::optional<double> dt_macro;
  std::string reference;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Overrides& o, bool outputs) {
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file (default: four-bus, alpha 0.1, no events)");
  if (outputs) cmd->add_option("--out", o.out, "Output directory (default: $HYBRIDSIM_OUT_DIR or ./hybridsim_out)");
  cmd->add_option("--window", o.window, "Index window as start,end in seconds");
  cmd->add_option("--threshold-a", o.threshold_a, "Heaviside gate level, pu");
  cmd->add_option("--protocol", o.protocol, "Boundary protocol: pos | pos-current | 3seq");
  cmd->add_option("--dt", o.dt, "EMT time step, s");
  cmd->add_option("--dt-macro", o.dt_macro, "TS time step, s");
  cmd->add_option("--reference", o.reference, "Reference run: none | full-emt");
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, std::string("cannot parse ") + what + " '" + s + "'");
    }
  }
  return out;
}

ScenarioConfig load(const Overrides& o) {
  ScenarioConfig cfg = o.scenario.empty() ? ScenarioConfig{} : load_scenario(o.scenario);
  if (!o.window.empty()) {
    const auto w = parse_list(o.window, "--window");
    if (w.size() != 2) throw Error(ErrorCode::InvalidArgument, "--window needs start,end");
    cfg.index.window = {w[0], w[1]};
  }
  if (o.threshold_a) cfg.index.threshold_a = *o.threshold_a;
  if (!o.protocol.empty()) cfg.boundary.protocol = protocol_from_string(o.protocol);
  if (o.dt) cfg.dt = *o.dt;
  if (o.dt_macro) cfg.dt_macro = *o.dt_macro;
  if (o.reference == "none") cfg.reference = Reference::None;
  else if (o.reference == "full-emt" || o.reference == "full_emt") cfg.reference = Reference::FullEmt;
  else if (!o.reference.empty()) throw Error(ErrorCode::InvalidArgument, "--reference must be none or full-emt");
  cfg.validate();
  return cfg;
}

std::filesystem::path out_dir(const Overrides& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("HYBRIDSIM_OUT_DIR"); env && *env) return env;
  return "hybridsim_out";
}

int fail(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMT-TS hybrid co-simulation with interface error indices"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "Run one scenario and write its outputs");
  add_common(run, o, true);

  std::string alphas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  auto* sa = app.add_subcommand("sweep-alpha", "Sweep the boundary position (four-bus system)");
  add_common(sa, o, true);
  sa->add_option("--alphas", alphas, "Comma-separated alpha values");
  sa->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  std::string freqs = "2,9,16,23,30,37,44";
  std::string kind = "MFO";
  auto* sf = app.add_subcommand("sweep-fo", "Sweep the forced-oscillation frequency");
  add_common(sf, o, true);
  sf->add_option("--freqs", freqs, "Comma-separated frequencies, Hz");
  sf->add_option("--kind", kind, "MFO or SFO")->check(CLI::IsMember({"MFO", "SFO"}));
  sf->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto* ci = app.add_subcommand("compare-interfaces", "Run PosSeqPQ and ThreeSeqCurrent side by side");
  add_common(ci, o, true);

  auto* vc = app.add_subcommand("validate-config", "Parse and check a scenario file");
  add_common(vc, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    const ScenarioConfig cfg = load(o);
    json summary;
    if (run->parsed()) {
      const ScenarioResult r = run_scenario(cfg);
      const auto dir = out_dir(o);
      write_run_outputs(r, dir);
      summary = {{"command", "run"}, {"out", dir.string()}, {"report", r.report}};
    } else if (sa->parsed()) {
      const auto dir = out_dir(o);
      SweepOptions so{o.threads, dir / "points"};
      const SweepResult s = sweep_alpha(cfg, parse_list(alphas, "--alphas"), so);
      write_sweep_outputs(s, cfg, dir);
      summary = {{"command", "sweep-alpha"}, {"out", dir.string()}, {"points", s.points}};
    } else if (sf->parsed()) {
      const auto dir = out_dir(o);
      SweepOptions so{o.threads, dir / "points"};
      const SweepResult s = sweep_fo(cfg, kind == "SFO" ? FoKind::SFO : FoKind::MFO, parse_list(freqs, "--freqs"), so);
      write_sweep_outputs(s, cfg, dir);
      summary = {{"command", "sweep-fo"}, {"out", dir.string()}, {"points", s.points}};
    } else if (ci->parsed()) {
      const InterfaceComparison c = compare_interfaces(cfg);
      const auto dir = out_dir(o);
      write_comparison_outputs(c, dir);
      summary = {{"command", "compare-interfaces"},
                 {"out", dir.string()},
                 {"PosSeqPQ", c.pos.report},
                 {"ThreeSeqCurrent", c.three.report}};
    } else {
      summary = {{"command", "validate-config"}, {"valid", true}, {"config", cfg}};
    }
    std::cout << summary.dump(2) << "\n";
  } catch (const Error& e) {
    return fail(std::string(to_string(e.code())), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}

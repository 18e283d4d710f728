#include "hybridsim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

using nlohmann::json;

void write_point(const SweepPoint& p, std::size_t index, const std::filesystem::path& dir) {
  write_atomic(dir / ("point_" + std::to_string(index) + ".json"), json(p).dump(2) + "\n");
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results land by index.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  // report the failure of the lowest index so errors are deterministic too
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ScenarioResult run_with_reference(const ScenarioConfig& cfg, const SolvedNetwork& net,
                                  const std::set<int>& region, const FullEmtRecord* full) {
  const HybridOptions opt = cfg.hybrid_options();
  ScenarioResult r;
  r.config = cfg;
  r.hybrid = run_hybrid(net, region, cfg.boundary, cfg.events, cfg.duration, opt);
  r.report = error_report(r.hybrid, cfg.index);
  if (full) {
    r.full = *full;
  } else if (cfg.reference == Reference::FullEmt) {
    r.full = run_full_emt(net, cfg.boundary.bus, cfg.events, cfg.duration, opt);
  }
  if (r.full) r.report.e_true = true_error(r.hybrid.emt_sequences[0], r.full->sequences[0], cfg.index.window);
  return r;
}

}  // namespace

NetworkModel build_four_bus(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  NetworkModel m;
  m.mva_base = 100.0;
  m.f0 = 60.0;
  m.buses = {
      {1, 0.6, BusType::Slack, 1.02, 0.0, 0.0},
      {2, 34.5, BusType::PQ, 1.0, 0.0, 0.0},
      {3, 34.5, BusType::PQ, 1.0, 0.0, 0.0},
      {4, 34.5, BusType::PV, 1.0445, 0.0, 100.0},
  };
  // lines carry a zero-sequence impedance of three times the positive one
  const Complex z{0.002, 0.02};
  const Complex z23 = alpha * z;
  const Complex z34 = (1.0 - alpha) * z;
  m.branches = {
      {1, 2, 0.006, 0.06, 1.025, std::nullopt},
      {2, 3, z23.real(), z23.imag(), 1.0, 3.0 * z23},
      {3, 4, z34.real(), z34.imag(), 1.0, 3.0 * z34},
  };
  m.loads = {{2, 150.0, 40.0}};
  Source s1;
  s1.bus = 1;
  s1.z_pu = {0.01, 0.10};
  Source s4;
  s4.bus = 4;
  s4.z_pu = {0.0036, 0.036};  // 0.02 + j0.2 on the 555 MVA machine base
  m.sources = {s1, s4};
  return m;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return schema_version == o.schema_version && name == o.name && network == o.network &&
         boundary == o.boundary && emt_region == o.emt_region && events == o.events &&
         duration == o.duration && index == o.index && dt == o.dt && dt_macro == o.dt_macro &&
         reference == o.reference && pipelined == o.pipelined &&
         instantaneous_clearing == o.instantaneous_clearing;
}

void ScenarioConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw Error(ErrorCode::Config, "unsupported schema_version " + std::to_string(schema_version));
  if (network.kind == NetworkSpec::Kind::FourBus && !(network.alpha > 0.0 && network.alpha < 1.0))
    throw Error(ErrorCode::Config, "alpha must lie in (0, 1)");
  if (network.kind == NetworkSpec::Kind::File && network.file.empty())
    throw Error(ErrorCode::Config, "network file reference is empty");
  if (!(duration > 0.0)) throw Error(ErrorCode::Config, "duration must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::Config, "dt must be positive");
  if (!(dt_macro >= dt)) throw Error(ErrorCode::Config, "dt_macro must be at least dt");
  boundary.validate();
  index.validate();
  if (index.window.t_start < 0.0 || index.window.t_end > duration * (1.0 + 1e-12))
    throw Error(ErrorCode::Config, "index window must lie within [0, duration]");
  for (const auto& f : events.faults) {
    f.validate();
    if (f.t_on >= duration) throw Error(ErrorCode::Config, "fault starts after the end of the run");
  }
  for (const auto& fo : events.fo) {
    fo.spec.validate();
    if (fo.spec.t_enable >= duration) throw Error(ErrorCode::Config, "FO source enabled after the end of the run");
    if (fo.spec.f_fo >= 0.5 / dt_macro)
      throw Error(ErrorCode::Config, "f_fo must be below the Nyquist rate of the macro step");
  }
}

HybridOptions ScenarioConfig::hybrid_options() const {
  HybridOptions o;
  o.emt.dt = dt;
  o.emt.instantaneous_clearing = instantaneous_clearing;
  o.dt_macro = dt_macro;
  o.pipelined = pipelined;
  return o;
}

void to_json(json& j, const ScenarioConfig& c) {
  j = json::object();
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  switch (c.network.kind) {
    case NetworkSpec::Kind::FourBus: j["network"] = {{"four_bus", {{"alpha", c.network.alpha}}}}; break;
    case NetworkSpec::Kind::Inline: j["network"] = {{"inline", c.network.model}}; break;
    case NetworkSpec::Kind::File: j["network"] = {{"file", c.network.file}}; break;
  }
  j["boundary"] = c.boundary;
  if (c.emt_region) j["emt_region"] = *c.emt_region;
  json events = json::array();
  for (const auto& f : c.events.faults) events.push_back(f);
  for (const auto& fo : c.events.fo) {
    json e = fo.spec;
    e["type"] = "fo";
    e["bus"] = fo.bus;
    events.push_back(e);
  }
  j["events"] = events;
  j["duration"] = c.duration;
  j["index"] = c.index;
  j["dt"] = c.dt;
  j["dt_macro"] = c.dt_macro;
  j["reference"] = c.reference == Reference::FullEmt ? "full_emt" : "none";
  j["pipelined"] = c.pipelined;
  j["instantaneous_clearing"] = c.instantaneous_clearing;
}

void from_json(const json& j, ScenarioConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "scenario must be a JSON object");
  try {
    c = ScenarioConfig{};
    if (!j.contains("schema_version")) throw Error(ErrorCode::Config, "missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != kSchemaVersion)
      throw Error(ErrorCode::Config, "unsupported schema_version " + std::to_string(c.schema_version));
    c.name = j.value("name", std::string("scenario"));
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.contains("four_bus")) {
        c.network.kind = NetworkSpec::Kind::FourBus;
        c.network.alpha = n.at("four_bus").value("alpha", 0.1);
      } else if (n.contains("inline")) {
        c.network.kind = NetworkSpec::Kind::Inline;
        n.at("inline").get_to(c.network.model);
      } else if (n.contains("file")) {
        c.network.kind = NetworkSpec::Kind::File;
        c.network.file = n.at("file").get<std::string>();
      } else {
        throw Error(ErrorCode::Config, "network needs one of four_bus, inline or file");
      }
    }
    if (j.contains("boundary")) j.at("boundary").get_to(c.boundary);
    if (j.contains("emt_region")) c.emt_region = j.at("emt_region").get<std::set<int>>();
    for (const auto& e : j.value("events", json::array())) {
      const auto type = e.value("type", std::string());
      if (type == "fault") {
        c.events.faults.push_back(e.get<FaultSpec>());
      } else if (type == "fo") {
        FoEvent fo;
        fo.bus = e.at("bus").get<int>();
        e.get_to(fo.spec);
        c.events.fo.push_back(fo);
      } else {
        throw Error(ErrorCode::Config, "event type must be 'fault' or 'fo'");
      }
    }
    c.duration = j.value("duration", 2.5);
    if (j.contains("index")) j.at("index").get_to(c.index);
    c.dt = j.value("dt", 20e-6);
    c.dt_macro = j.value("dt_macro", 1.0 / 120.0);
    const auto ref = j.value("reference", std::string("none"));
    if (ref == "none") c.reference = Reference::None;
    else if (ref == "full_emt" || ref == "full-emt") c.reference = Reference::FullEmt;
    else throw Error(ErrorCode::Config, "reference must be none or full_emt");
    c.pipelined = j.value("pipelined", false);
    c.instantaneous_clearing = j.value("instantaneous_clearing", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, e.what());
  }
}

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Config, std::string("scenario is not valid JSON: ") + e.what());
  }
  auto c = j.get<ScenarioConfig>();
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ScenarioConfig c = parse_scenario(ss.str());
  c.base_dir = file.parent_path();
  return c;
}

NetworkModel resolve_network(const ScenarioConfig& cfg) {
  switch (cfg.network.kind) {
    case NetworkSpec::Kind::FourBus: return build_four_bus(cfg.network.alpha);
    case NetworkSpec::Kind::Inline: return cfg.network.model;
    case NetworkSpec::Kind::File: {
      const auto path = cfg.base_dir / cfg.network.file;
      std::ifstream in(path);
      if (!in) throw Error(ErrorCode::Io, "cannot open network file " + path.string());
      try {
        return json::parse(in).get<NetworkModel>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("network file: ") + e.what());
      }
    }
  }
  throw Error(ErrorCode::Config, "unknown network kind");
}

std::set<int> resolve_emt_region(const ScenarioConfig& cfg, const NetworkModel& m) {
  if (cfg.emt_region) return *cfg.emt_region;
  // component of the slack bus once the boundary is removed, plus the boundary
  const int b = cfg.boundary.bus;
  int slack = 0;
  for (const auto& bus : m.buses)
    if (bus.type == BusType::Slack) slack = bus.id;
  if (slack == b) throw Error(ErrorCode::InvalidCut, "boundary is the slack bus; give emt_region explicitly");
  std::set<int> seen{slack};
  std::vector<int> stack{slack};
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    for (const auto& br : m.branches) {
      int other = 0;
      if (br.from == x) other = br.to;
      else if (br.to == x) other = br.from;
      else continue;
      if (other != b && seen.insert(other).second) stack.push_back(other);
    }
  }
  seen.insert(b);
  return seen;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const NetworkModel m = resolve_network(cfg);
  const SolvedNetwork net = solve_network(m);
  return run_with_reference(cfg, net, resolve_emt_region(cfg, m), nullptr);
}

FoMetrics fo_metrics(const HybridRunRecord& rec, double f_fo, const IndexWindow& w) {
  w.validate();
  FoMetrics m;
  m.f_fo = f_fo;
  m.emt_wave_amplitude = fit_tone(rec.emt_voltage.phase(0), f_fo, w.t_start, w.t_end).amplitude;
  m.ts_wave_amplitude = fit_tone(rec.reconstructed_ts().phase(0), f_fo, w.t_start, w.t_end).amplitude;
  const double floor = std::max(m.emt_wave_amplitude * 1e-15, 1e-300);
  m.attenuation_db = 20.0 * std::log10(std::max(m.emt_wave_amplitude, floor) / std::max(m.ts_wave_amplitude, floor));
  const ToneFit e = fit_tone(rec.emt_sequences[0].magnitude_signal(), f_fo, w.t_start, w.t_end);
  const ToneFit t = fit_tone(rec.ts_voltage[0].magnitude_signal(), f_fo, w.t_start, w.t_end);
  m.emt_mag_amplitude = e.amplitude;
  m.ts_mag_amplitude = t.amplitude;
  m.phase_misalignment_rad = std::remainder(t.phase_rad - e.phase_rad, kTwoPi);
  return m;
}

SweepResult sweep_alpha(const ScenarioConfig& cfg, const std::vector<double>& alphas, const SweepOptions& opt) {
  if (cfg.network.kind != NetworkSpec::Kind::FourBus)
    throw Error(ErrorCode::InvalidArgument, "alpha sweeps need the four-bus network");
  if (alphas.empty()) throw Error(ErrorCode::InvalidArgument, "alpha list is empty");
  std::vector<ScenarioConfig> cfgs;
  for (double a : alphas) {
    ScenarioConfig c = cfg;
    c.network.alpha = a;
    c.reference = Reference::FullEmt;
    c.validate();
    cfgs.push_back(c);
  }
  if (opt.out_dir) std::filesystem::create_directories(*opt.out_dir);
  SweepResult res;
  res.variable = "alpha";
  res.points.resize(alphas.size());
  parallel_for(alphas.size(), opt.threads, [&](std::size_t i) {
    const ScenarioResult r = run_scenario(cfgs[i]);
    res.points[i] = {alphas[i], r.report, std::nullopt};
    if (opt.out_dir) write_point(res.points[i], i, *opt.out_dir);
  });
  return res;
}

SweepResult sweep_fo(const ScenarioConfig& cfg, FoKind kind, const std::vector<double>& freqs,
                     const SweepOptions& opt) {
  if (freqs.empty()) throw Error(ErrorCode::InvalidArgument, "frequency list is empty");
  FoEvent tmpl;
  if (!cfg.events.fo.empty()) {
    tmpl = cfg.events.fo.front();
  } else {
    tmpl.bus = 2;
    tmpl.spec.t_enable = cfg.index.window.t_start;
    tmpl.spec.v_fo = 0.1 * phase_peak_base_volts(resolve_network(cfg).bus(2).base_kv_ll);
  }
  std::vector<ScenarioConfig> cfgs;
  for (double f : freqs) {
    ScenarioConfig c = cfg;
    FoEvent ev = tmpl;
    ev.spec.kind = kind;
    ev.spec.f_fo = f;
    c.events.fo.assign(1, ev);
    c.reference = Reference::FullEmt;
    c.validate();
    cfgs.push_back(c);
  }
  if (opt.out_dir) std::filesystem::create_directories(*opt.out_dir);
  SweepResult res;
  res.variable = "f_fo";
  res.points.resize(freqs.size());
  parallel_for(freqs.size(), opt.threads, [&](std::size_t i) {
    const ScenarioResult r = run_scenario(cfgs[i]);
    res.points[i] = {freqs[i], r.report, fo_metrics(r.hybrid, freqs[i], cfgs[i].index.window)};
    if (opt.out_dir) write_point(res.points[i], i, *opt.out_dir);
  });
  return res;
}

InterfaceComparison compare_interfaces(const ScenarioConfig& cfg) {
  ScenarioConfig pos = cfg;
  pos.boundary.protocol = Protocol::PosSeqPQ;
  pos.reference = Reference::FullEmt;
  ScenarioConfig three = pos;
  three.boundary.protocol = Protocol::ThreeSeqCurrent;
  pos.validate();
  three.validate();
  const NetworkModel m = resolve_network(cfg);
  const SolvedNetwork net = solve_network(m);
  const auto region = resolve_emt_region(cfg, m);
  const FullEmtRecord full = run_full_emt(net, cfg.boundary.bus, cfg.events, cfg.duration, pos.hybrid_options());
  return {run_with_reference(pos, net, region, &full), run_with_reference(three, net, region, &full)};
}

void to_json(json& j, const FoMetrics& m) {
  j = json{{"f_fo", m.f_fo},
           {"emt_wave_amplitude_v", m.emt_wave_amplitude},
           {"ts_wave_amplitude_v", m.ts_wave_amplitude},
           {"attenuation_db", m.attenuation_db},
           {"emt_mag_amplitude_pu", m.emt_mag_amplitude},
           {"ts_mag_amplitude_pu", m.ts_mag_amplitude},
           {"phase_misalignment_rad", m.phase_misalignment_rad}};
}

void to_json(json& j, const SweepPoint& p) {
  j = json{{"value", p.value}, {"report", p.report}};
  if (p.fo) j["fo"] = *p.fo;
}

}  // namespace hybridsim

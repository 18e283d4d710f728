#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridsim/hybrid.hpp"

namespace hybridsim {

inline constexpr int kSchemaVersion = 1;

/// Builds the four-bus test system with the 2-3 / 3-4 line impedance split
/// by `alpha`. Throws InvalidArgument unless 0 < alpha < 1.
NetworkModel build_four_bus(double alpha);

/// Where a scenario's network comes from.
struct NetworkSpec {
  enum class Kind { FourBus, Inline, File };
  Kind kind = Kind::FourBus;
  double alpha = 0.1;
  NetworkModel model;  // Inline
  std::string file;    // File, relative to the scenario file's directory

  bool operator==(const NetworkSpec&) const = default;
};

enum class Reference { None, FullEmt };

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  NetworkSpec network;
  BoundarySpec boundary;
  /// EMT region; defaults to every bus on the bus-1 side of the boundary
  /// ({1, 2, 3} for the four-bus system).
  std::optional<std::set<int>> emt_region;
  ScenarioEvents events;
  double duration = 2.5;  // scenario end time, s
  IndexConfig index;
  double dt = 20e-6;
  double dt_macro = 1.0 / 120.0;
  Reference reference = Reference::None;
  bool pipelined = false;
  bool instantaneous_clearing = false;

  /// Directory used to resolve a network file reference (not serialized).
  std::filesystem::path base_dir;

  bool operator==(const ScenarioConfig& o) const;
  /// Throws Config/InvalidArgument describing the first violated rule.
  void validate() const;
  HybridOptions hybrid_options() const;
};

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& file);

/// Network for the config (four-bus builder, inline, or file).
NetworkModel resolve_network(const ScenarioConfig& cfg);
std::set<int> resolve_emt_region(const ScenarioConfig& cfg, const NetworkModel& m);

struct ScenarioResult {
  ScenarioConfig config;
  HybridRunRecord hybrid;
  std::optional<FullEmtRecord> full;
  ErrorReport report;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// Forced-oscillation metrics at the boundary.
struct FoMetrics {
  double f_fo = 0.0;
  /// Amplitude at f_fo of the phase-a boundary waveform, volts.
  double emt_wave_amplitude = 0.0;
  double ts_wave_amplitude = 0.0;
  /// 20 log10(EMT / TS) of the waveform content at f_fo.
  double attenuation_db = 0.0;
  /// Amplitude at f_fo of the positive-sequence magnitude, pu.
  double emt_mag_amplitude = 0.0;
  double ts_mag_amplitude = 0.0;
  /// TS-side phase of the magnitude oscillation minus the EMT-side one, rad.
  double phase_misalignment_rad = 0.0;

  bool operator==(const FoMetrics&) const = default;
};

FoMetrics fo_metrics(const HybridRunRecord& rec, double f_fo, const IndexWindow& w);

struct SweepPoint {
  double value = 0.0;
  ErrorReport report;
  std::optional<FoMetrics> fo;

  bool operator==(const SweepPoint&) const = default;
};

struct SweepResult {
  std::string variable;
  std::vector<SweepPoint> points;

  bool operator==(const SweepResult&) const = default;
};

struct SweepOptions {
  /// Worker threads; 0 = hardware concurrency, 1 = serial.
  unsigned threads = 0;
  /// When set, each point's result is written here as it completes.
  std::optional<std::filesystem::path> out_dir;
};

/// One run per alpha with the full-EMT reference (four-bus networks only).
SweepResult sweep_alpha(const ScenarioConfig& cfg, const std::vector<double>& alphas,
                        const SweepOptions& opt = {});

/// One run per oscillation frequency with the full-EMT reference. The first
/// FO event of `cfg` is the template; a default one at bus 2 is used if none.
SweepResult sweep_fo(const ScenarioConfig& cfg, FoKind kind, const std::vector<double>& freqs,
                     const SweepOptions& opt = {});

struct InterfaceComparison {
  ScenarioResult pos;
  ScenarioResult three;
};

/// Runs the same scenario with PosSeqPQ and ThreeSeqCurrent, both against the
/// full-EMT reference.
InterfaceComparison compare_interfaces(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Output

/// Fixed 9-significant-digit formatting used in every CSV.
std::string format_number(double x);

/// Writes `content` to `path` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// CSV and JSON files for a single run; returns the manifest.
nlohmann::json write_run_outputs(const ScenarioResult& r, const std::filesystem::path& dir);
nlohmann::json write_sweep_outputs(const SweepResult& s, const ScenarioConfig& cfg,
                                   const std::filesystem::path& dir);
nlohmann::json write_comparison_outputs(const InterfaceComparison& c, const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const FoMetrics& m);
void to_json(nlohmann::json& j, const SweepPoint& p);

}  // namespace hybridsim

#pragma once

#include <optional>
#include <string_view>

#include <json.hpp>

#include "hybridsim/signals.hpp"

namespace hybridsim {

struct IndexWindow {
  double t_start = 0.0;
  double t_end = 0.0;

  bool operator==(const IndexWindow&) const = default;
  void validate() const;
};

struct IndexConfig {
  IndexWindow window{0.5, 2.5};
  double threshold_a = 0.2;         // pu, Heaviside gate level
  double large_threshold = 0.05;    // pu*s, "large error" level

  bool operator==(const IndexConfig&) const = default;
  void validate() const;
};

enum class Verdict { AccurateInterface, InterfaceError, TsSideFalseDynamics };

std::string_view to_string(Verdict v) noexcept;
Verdict verdict_from_string(std::string_view s);

struct ErrorReport {
  std::optional<double> e_true;
  double e_idx = 0.0;
  double e_idx_mod = 0.0;
  Verdict verdict = Verdict::AccurateInterface;
  IndexConfig config;

  bool operator==(const ErrorReport&) const = default;
};

/// Integral over [t_start, t_end) of the piecewise-constant signal that holds
/// each sample over its interval (left Riemann sum; additive for any split).
double integrate_left(const SampledSignal& signal, const IndexWindow& w);

/// Resample onto `grid` by linear interpolation (end values held).
SampledSignal resample_linear(const SampledSignal& s, double t0, double dt, std::size_t count);

/// Accumulated |V_m,hybrid - V_m,full| over the window, pu*s. Trajectories on
/// different grids are interpolated onto the finer one.
double true_error(const PhasorTrajectory& vm_hybrid_emt, const PhasorTrajectory& vm_full_emt,
                  const IndexWindow& w);

/// Per-sample three-phase mismatch, normalized by sqrt(6)*V_B (V_B in volts).
SampledSignal delta_v_diff(const ThreePhaseWaveform& emt, const ThreePhaseWaveform& ts,
                           double base_kv_ll);

double error_index(const SampledSignal& dv, const IndexWindow& w);

/// 1 when x > a, else 0.
inline int heaviside(double x, double a) { return x > a ? 1 : 0; }

/// Integral of H(V_m,ts(t), a) * dv(t); the gate uses the TS magnitude
/// interpolated at each dv sample time.
double modified_error_index(const SampledSignal& dv, const PhasorTrajectory& vm_ts,
                            const IndexConfig& cfg);

/// Tolerance under which e_idx and e'_idx count as equal.
double equality_tolerance(double e_idx);

Verdict classify(double e_idx, double e_idx_mod, const IndexConfig& cfg);

void to_json(nlohmann::json& j, const IndexWindow& w);
void from_json(const nlohmann::json& j, IndexWindow& w);
void to_json(nlohmann::json& j, const IndexConfig& c);
void from_json(const nlohmann::json& j, IndexConfig& c);
void to_json(nlohmann::json& j, const ErrorReport& r);
void from_json(const nlohmann::json& j, ErrorReport& r);

}  // namespace hybridsim

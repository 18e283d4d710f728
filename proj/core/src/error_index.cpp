#include "hybridsim/error_index.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

// Grid positions within this many sample widths of an integer snap to it, so
// windows specified in decimal seconds align with the sample grid.
constexpr double kSnap = 1e-7;

double snap(double u) {
  const double r = std::round(u);
  return std::abs(u - r) < kSnap ? r : u;
}

bool same_grid(double t0a, double dta, std::size_t na, double t0b, double dtb, std::size_t nb) {
  return na == nb && std::abs(dta - dtb) <= 1e-12 * std::max(dta, dtb) &&
         std::abs(t0a - t0b) <= 1e-9 * std::max(dta, dtb);
}

}  // namespace

void IndexWindow::validate() const {
  if (!(t_end > t_start)) throw Error(ErrorCode::InvalidArgument, "index window needs t_end > t_start");
}

void IndexConfig::validate() const {
  window.validate();
  if (!(threshold_a > 0.0 && threshold_a < 1.0))
    throw Error(ErrorCode::InvalidArgument, "threshold_a must lie in (0, 1)");
  if (!(large_threshold > 0.0))
    throw Error(ErrorCode::InvalidArgument, "large_threshold must be positive");
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::AccurateInterface: return "AccurateInterface";
    case Verdict::InterfaceError: return "InterfaceError";
    case Verdict::TsSideFalseDynamics: return "TsSideFalseDynamics";
  }
  return "Unknown";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "AccurateInterface") return Verdict::AccurateInterface;
  if (s == "InterfaceError") return Verdict::InterfaceError;
  if (s == "TsSideFalseDynamics") return Verdict::TsSideFalseDynamics;
  throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + std::string(s) + "'");
}

double integrate_left(const SampledSignal& signal, const IndexWindow& w) {
  w.validate();
  if (!(signal.dt > 0.0) || signal.values.empty())
    throw Error(ErrorCode::Coverage, "signal is empty or has no spacing");
  const double us = snap((w.t_start - signal.t0) / signal.dt);
  const double ue = snap((w.t_end - signal.t0) / signal.dt);
  const double n = static_cast<double>(signal.values.size());
  if (us < 0.0 || ue > n)
    throw Error(ErrorCode::Coverage, "window [" + std::to_string(w.t_start) + ", " +
                                         std::to_string(w.t_end) + "] outside signal coverage");
  const auto k0 = static_cast<std::size_t>(std::floor(us));
  const auto k1 = static_cast<std::size_t>(std::ceil(ue));
  double sum = 0.0;
  for (std::size_t k = k0; k < k1; ++k) {
    const double lo = std::max(static_cast<double>(k), us);
    const double hi = std::min(static_cast<double>(k + 1), ue);
    if (hi > lo) sum += signal.values[k] * (hi - lo);
  }
  return sum * signal.dt;
}

SampledSignal resample_linear(const SampledSignal& s, double t0, double dt, std::size_t count) {
  if (s.values.empty()) throw Error(ErrorCode::Coverage, "cannot resample an empty signal");
  SampledSignal out{t0, dt, {}};
  out.values.reserve(count);
  const double last = static_cast<double>(s.values.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = std::clamp((t0 + static_cast<double>(i) * dt - s.t0) / s.dt, 0.0, last);
    const auto k = std::min(static_cast<std::size_t>(u), s.values.size() - 1);
    const double frac = u - static_cast<double>(k);
    const double v = k + 1 < s.values.size()
                         ? (1.0 - frac) * s.values[k] + frac * s.values[k + 1]
                         : s.values[k];
    out.values.push_back(v);
  }
  return out;
}

double true_error(const PhasorTrajectory& vm_hybrid_emt, const PhasorTrajectory& vm_full_emt,
                  const IndexWindow& w) {
  w.validate();
  SampledSignal a = vm_hybrid_emt.magnitude_signal();
  SampledSignal b = vm_full_emt.magnitude_signal();
  if (a.values.empty() || b.values.empty())
    throw Error(ErrorCode::Coverage, "empty magnitude trajectory");
  for (const auto* s : {&a, &b}) {
    if (snap((w.t_start - s->t0) / s->dt) < 0.0 ||
        snap((w.t_end - s->t0) / s->dt) > static_cast<double>(s->values.size()))
      throw Error(ErrorCode::Coverage, "window outside trajectory coverage");
  }
  if (!same_grid(a.t0, a.dt, a.size(), b.t0, b.dt, b.size())) {
    // resample both onto the finer grid spanning the window
    const double dt = std::min(a.dt, b.dt);
    const auto count = static_cast<std::size_t>(std::ceil((w.t_end - w.t_start) / dt - kSnap));
    a = resample_linear(a, w.t_start, dt, count);
    b = resample_linear(b, w.t_start, dt, count);
  }
  SampledSignal diff{a.t0, a.dt, std::vector<double>(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) diff.values[i] = std::abs(a.values[i] - b.values[i]);
  return integrate_left(diff, w);
}

SampledSignal delta_v_diff(const ThreePhaseWaveform& emt, const ThreePhaseWaveform& ts,
                           double base_kv_ll) {
  emt.validate();
  ts.validate();
  if (!same_grid(emt.t0, emt.dt, emt.size(), ts.t0, ts.dt, ts.size()))
    throw Error(ErrorCode::GridMismatch, "EMT and TS waveforms are on different grids");
  if (!(base_kv_ll > 0.0)) throw Error(ErrorCode::InvalidArgument, "base voltage must be positive");
  const double scale = 1.0 / (std::sqrt(6.0) * base_kv_ll * 1000.0);
  SampledSignal dv{emt.t0, emt.dt, std::vector<double>(emt.size())};
  for (std::size_t n = 0; n < emt.size(); ++n) {
    double sq = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double d = emt.phases[i][n] - ts.phases[i][n];
      sq += d * d;
    }
    dv.values[n] = scale * std::sqrt(sq);
  }
  return dv;
}

double error_index(const SampledSignal& dv, const IndexWindow& w) { return integrate_left(dv, w); }

double modified_error_index(const SampledSignal& dv, const PhasorTrajectory& vm_ts,
                            const IndexConfig& cfg) {
  cfg.validate();
  if (vm_ts.empty()) throw Error(ErrorCode::Coverage, "empty TS magnitude trajectory");
  const double tol = 1e-9 * vm_ts.dt_macro;
  if (vm_ts.t0 > cfg.window.t_start + tol ||
      vm_ts.time(vm_ts.size() - 1) + vm_ts.dt_macro < cfg.window.t_end - tol)
    throw Error(ErrorCode::Coverage, "TS trajectory does not cover the index window");
  SampledSignal gated{dv.t0, dv.dt, std::vector<double>(dv.size())};
  for (std::size_t n = 0; n < dv.size(); ++n)
    gated.values[n] = heaviside(vm_ts.magnitude_at(dv.time(n)), cfg.threshold_a) * dv.values[n];
  return integrate_left(gated, cfg.window);
}

double equality_tolerance(double e_idx) { return std::max(1e-4, 0.02 * e_idx); }

Verdict classify(double e_idx, double e_idx_mod, const IndexConfig& cfg) {
  if (e_idx_mod < 0.0 || e_idx < 0.0)
    throw Error(ErrorCode::InconsistentIndices, "error indices must be non-negative");
  if (e_idx_mod > e_idx * (1.0 + 1e-12) + 1e-15)
    throw Error(ErrorCode::InconsistentIndices, "modified index exceeds the error index");
  if (e_idx - e_idx_mod > equality_tolerance(e_idx)) return Verdict::TsSideFalseDynamics;
  return e_idx_mod > cfg.large_threshold ? Verdict::InterfaceError : Verdict::AccurateInterface;
}

void to_json(nlohmann::json& j, const IndexWindow& w) { j = nlohmann::json::array({w.t_start, w.t_end}); }

void from_json(const nlohmann::json& j, IndexWindow& w) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::Config, "window must be [start, end]");
  w.t_start = j.at(0).get<double>();
  w.t_end = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const IndexConfig& c) {
  j = nlohmann::json{{"window", c.window},
                     {"threshold_a", c.threshold_a},
                     {"large_threshold", c.large_threshold}};
}

void from_json(const nlohmann::json& j, IndexConfig& c) {
  c = IndexConfig{};
  if (j.contains("window")) j.at("window").get_to(c.window);
  if (j.contains("threshold_a")) c.threshold_a = j.at("threshold_a").get<double>();
  if (j.contains("large_threshold")) c.large_threshold = j.at("large_threshold").get<double>();
}

void to_json(nlohmann::json& j, const ErrorReport& r) {
  j = nlohmann::json{{"e_idx", r.e_idx},
                     {"e_idx_mod", r.e_idx_mod},
                     {"verdict", std::string(to_string(r.verdict))},
                     {"window", r.config.window},
                     {"thresholds",
                      {{"threshold_a", r.config.threshold_a},
                       {"large_threshold", r.config.large_threshold}}}};
  if (r.e_true) j["e_true"] = *r.e_true;
}

void from_json(const nlohmann::json& j, ErrorReport& r) {
  r = ErrorReport{};
  if (j.contains("e_true") && !j.at("e_true").is_null()) r.e_true = j.at("e_true").get<double>();
  r.e_idx = j.at("e_idx").get<double>();
  r.e_idx_mod = j.at("e_idx_mod").get<double>();
  r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  j.at("window").get_to(r.config.window);
  const auto& th = j.at("thresholds");
  r.config.threshold_a = th.at("threshold_a").get<double>();
  r.config.large_threshold = th.at("large_threshold").get<double>();
}

}  // namespace hybridsim

// Acceptance checks for the hybrid engine. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hybridsim/circuit.hpp"
#include "hybridsim/error_index.hpp"
#include "hybridsim/scenario.hpp"
#include "hybridsim/signals.hpp"

using namespace hybridsim;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kTwoOverPiTol = 0.01;
constexpr double kAlgebraTol = 1e-12;
constexpr double kSymTol = 1e-12;
constexpr double kRoundTripTol = 1e-3;
constexpr double kSidebandTol = 0.01;
constexpr double kSfoLeakTol = 0.01;
constexpr double kLcTol = 1e-3;
constexpr double kRlTol = 0.01;
constexpr double kEmtPfTol = 1e-3;
constexpr double kTsPfTol = 1e-6;
constexpr double kTrendRipple = 0.05;
constexpr double kTrendRatio = 3.0;
constexpr double kSfoAttenuationDb = 20.0;
constexpr double kMfoPropagation = 0.10;
constexpr double kThreeSeqRatio = 0.5;
constexpr double kSeqPresent = 0.01;
constexpr double kSeqAbsent = 1e-3;

// Regression-locked baselines (first green run, with headroom).
constexpr double kNoDisturbanceEidxBound = 0.02;
constexpr double kNoDisturbanceEidxLocked = 1e-3;
constexpr double kBalancedFaultEtrueBound = 5e-4;

// Fault timing shared by the disturbance scenarios.
constexpr double kTon = 0.5;
constexpr double kToff = 0.96;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0) o.require(elapsed < budget_s, "runtime " + num(elapsed) + " s < " + num(budget_s) + " s");
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s | %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

ScenarioConfig fault_config(FaultKind kind, double r_ohm, int bus, Protocol p, double alpha) {
  ScenarioConfig c;
  c.name = "acceptance";
  c.network.alpha = alpha;
  c.boundary.protocol = p;
  c.events.faults.push_back({bus, kind, r_ohm, kTon, kToff});
  c.duration = 2.5;
  c.index.window = {0.5, 2.5};
  c.reference = Reference::FullEmt;
  return c;
}

ScenarioConfig fo_config(FoKind kind, double f) {
  ScenarioConfig c;
  c.name = "acceptance_fo";
  FoSourceSpec s;
  s.kind = kind;
  s.f_fo = f;
  s.v_fo = 0.1 * phase_peak_base_volts(34.5);
  s.t_enable = 0.5;
  c.events.fo.push_back({2, s});
  c.duration = 2.5;
  c.index.window = {0.5, 2.5};
  return c;
}

ThreePhaseWaveform balanced(double mag_pu, double peak, double t0, double dt, std::size_t n) {
  ThreePhaseWaveform w{t0, dt, {}};
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) s[static_cast<std::size_t>(i)] = mag_pu * peak * std::cos(kTwoPi * 60.0 * t - i * kTwoPi / 3.0);
    w.push_back(s);
  }
  return w;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Independent Gauss-Seidel solution of the four-bus power flow.
std::vector<Complex> gauss_seidel(const NetworkModel& m) {
  const std::size_t n = m.buses.size();
  std::vector<std::vector<Complex>> y(n, std::vector<Complex>(n));
  for (const auto& b : m.branches) {
    const auto f = m.index_of(b.from), t = m.index_of(b.to);
    const Complex yb = 1.0 / b.z1();
    y[f][f] += yb / (b.turn_ratio * b.turn_ratio);
    y[t][t] += yb;
    y[f][t] -= yb / b.turn_ratio;
    y[t][f] -= yb / b.turn_ratio;
  }
  std::vector<Complex> s(n), v(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = m.buses[i];
    if (b.type != BusType::PQ) v[i] = std::polar(b.v_set_pu, b.angle_deg * kPi / 180.0);
    if (b.type == BusType::PV) s[i] = b.p_gen_mw / m.mva_base;
  }
  for (const auto& l : m.loads) s[m.index_of(l.bus)] -= Complex(l.p_mw, l.q_mvar) / m.mva_base;
  for (int it = 0; it < 200000; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = m.buses[i];
      if (b.type == BusType::Slack) continue;
      Complex sum{}, iv{};
      for (std::size_t j = 0; j < n; ++j) {
        iv += y[i][j] * v[j];
        if (j != i) sum += y[i][j] * v[j];
      }
      Complex si = s[i];
      if (b.type == BusType::PV) si = {s[i].real(), -std::imag(std::conj(v[i]) * iv)};
      Complex vn = (std::conj(si) / std::conj(v[i]) - sum) / y[i][i];
      if (b.type == BusType::PV) vn *= b.v_set_pu / std::abs(vn);
      change = std::max(change, std::abs(vn - v[i]));
      v[i] = vn;
    }
    if (change < 1e-14) break;
  }
  return v;
}

bool non_increasing(const std::vector<double>& x, double ripple) {
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[i - 1] * (1.0 + ripple)) return false;
  return true;
}

std::string list(const std::vector<double>& x) {
  std::string s = "[";
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + num(x[i]);
  return s + "]";
}

}  // namespace

int main() {
  const double peak = phase_peak_base_volts(34.5);

  criterion(1, "2/pi factor for equal-phase magnitude error", 1.0, [&] {
    Outcome o;
    const double dt = 20e-6, dvm = 0.05;
    const auto n = static_cast<std::size_t>(std::lround(12.0 / 60.0 / dt));  // 12 cycles
    const auto ts = balanced(1.0, peak, 0.0, dt, n);
    ThreePhaseWaveform emt = ts;
    // the same error waveform in all three phases
    for (std::size_t k = 0; k < n; ++k) {
      const double err = dvm * ts.phases[0][k];
      for (auto& ph : emt.phases) ph[k] += err;
    }
    const auto dv = delta_v_diff(emt, ts, 34.5);
    const double mean = error_index(dv, {0.0, 12.0 / 60.0}) / (12.0 / 60.0);
    const double ratio = mean / dvm;
    o.require(std::abs(ratio / (2.0 / kPi) - 1.0) <= kTwoOverPiTol,
              "mean/dVm = " + num(ratio) + " vs 2/pi = " + num(2.0 / kPi));
    // With the 1/(sqrt(6) V_B) normalization, a common error in all three
    // phases averages to (2/pi)/sqrt(3); report how close we are to that.
    const double analytic = 2.0 / (kPi * std::sqrt(3.0));
    o.detail += " (closed form for this normalization " + num(analytic) + ", deviation " +
                num(std::abs(ratio / analytic - 1.0)) + ")";
    return o;
  });

  criterion(2, "index algebra on randomized waveform pairs", 10.0, [&] {
    Outcome o;
    std::mt19937_64 rng(20261017);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double dt = 1e-4;
    const std::size_t n = 400;
    int order_violations = 0, zero_violations = 0, additivity_violations = 0;
    double worst_add = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      ThreePhaseWaveform a{0.0, dt, {}}, b{0.0, dt, {}};
      const double m = 0.1 + 1.2 * u(rng), ph = kTwoPi * u(rng);
      for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt;
        std::array<double, 3> sa{}, sb{};
        for (std::size_t i = 0; i < 3; ++i) {
          sa[i] = peak * std::cos(kTwoPi * 60.0 * t - static_cast<double>(i) * kTwoPi / 3.0);
          sb[i] = peak * m * std::cos(kTwoPi * 60.0 * t + ph - static_cast<double>(i) * kTwoPi / 3.0) +
                  0.05 * peak * (u(rng) - 0.5);
        }
        a.push_back(sa);
        b.push_back(sb);
      }
      PhasorTrajectory vm{0.0, 0.004, 34.5, {}, {}};
      for (int k = 0; k < 11; ++k) vm.push_back(u(rng) * 0.6, 0.0);
      IndexConfig cfg;
      cfg.window = {0.0, static_cast<double>(n) * dt};
      const auto dv = delta_v_diff(a, b, 34.5);
      const double e = error_index(dv, cfg.window);
      const double em = modified_error_index(dv, vm, cfg);
      if (em > e) ++order_violations;
      const double e_same = error_index(delta_v_diff(a, a, 34.5), cfg.window);
      if (e_same > kAlgebraTol || !(e > kAlgebraTol)) ++zero_violations;
      const double split = cfg.window.t_end * u(rng);
      const double parts = error_index(dv, {0.0, split}) + error_index(dv, {split, cfg.window.t_end});
      worst_add = std::max(worst_add, std::abs(parts - e));
      if (std::abs(parts - e) > kAlgebraTol) ++additivity_violations;
    }
    o.require(order_violations == 0, "e' <= e violations " + std::to_string(order_violations));
    o.require(zero_violations == 0, "zero-iff-identical violations " + std::to_string(zero_violations));
    o.require(additivity_violations == 0, "window additivity worst " + num(worst_add));
    return o;
  });

  criterion(3, "transforms and phasor round trips", 1.0, [&] {
    Outcome o;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    double worst_sym = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const PhaseSet v{Complex(g(rng), g(rng)), Complex(g(rng), g(rng)), Complex(g(rng), g(rng))};
      const auto back = seq_to_abc(abc_to_seq(v));
      for (std::size_t i = 0; i < 3; ++i) worst_sym = std::max(worst_sym, std::abs(back[i] - v[i]));
    }
    o.require(worst_sym <= kSymTol, "sym-comp round trip " + num(worst_sym));

    PhasorTrajectory p{0.0, 1.0 / 120.0, 34.5, {}, {}};
    for (int k = 0; k < 240; ++k) {
      const double t = k / 120.0;
      p.push_back(1.0 + 0.05 * std::sin(kTwoPi * 0.5 * t), 0.3 + 0.1 * t);
    }
    const auto w = reconstruct_abc(p, 60.0, 20e-6);
    double worst_mag = 0.0, worst_ang = 0.0;
    for (std::size_t idx = 5000; idx < w.size(); idx += 7919) {
      const auto s = estimate_sequences(w, idx, 60.0, 1.0, peak);
      const double tc = w.time(idx) - 0.5 / 60.0;  // window centre
      worst_mag = std::max(worst_mag, std::abs(std::abs(s.pos) - p.magnitude_at(tc)));
      worst_ang = std::max(worst_ang, std::abs(std::remainder(std::arg(s.pos) - p.angle_at(tc), kTwoPi)));
    }
    o.require(worst_mag <= kRoundTripTol, "estimate/reconstruct magnitude " + num(worst_mag));
    o.require(worst_ang <= kRoundTripTol, "angle " + num(worst_ang) + " rad");
    return o;
  });

  criterion(4, "2 Hz MFO sidebands and SFO tones", 5.0, [&] {
    Outcome o;
    FoSourceSpec s;
    s.v_m = 1.0;
    s.v_fo = 0.1;
    s.f_fo = 2.0;
    const double dt = 1e-4;
    SampledSignal mfo{0.0, dt, {}}, sfo{0.0, dt, {}};
    for (int k = 0; k < 20000; ++k) {  // 2 s: integer periods of 2 Hz and 60 Hz
      const double t = k * dt;
      mfo.values.push_back(synth_mfo(s, t));
      sfo.values.push_back(synth_sfo(s, t));
    }
    const auto bm = spectrum(mfo);
    const double lo = peak_near(bm, 58.0, 0.1).amplitude, hi = peak_near(bm, 62.0, 0.1).amplitude;
    const double c = peak_near(bm, 60.0, 0.1).amplitude;
    o.require(std::abs(lo / hi - 1.0) <= kSidebandTol, "MFO sidebands " + num(lo) + "/" + num(hi));
    o.require(std::abs(lo / (s.v_fo / 2.0) - 1.0) <= kSidebandTol && std::abs(hi / (s.v_fo / 2.0) - 1.0) <= kSidebandTol,
              "sideband = v_fo/2");
    o.require(std::abs(c / s.v_m - 1.0) <= kSidebandTol, "carrier " + num(c));
    const auto bs = spectrum(sfo);
    double leak = 0.0;
    for (const auto& b : bs)
      if (std::abs(b.frequency_hz - 2.0) > 0.25 && std::abs(b.frequency_hz - 60.0) > 0.25) leak = std::max(leak, b.amplitude);
    o.require(std::abs(peak_near(bs, 2.0, 0.1).amplitude / s.v_fo - 1.0) <= kSidebandTol, "SFO 2 Hz tone");
    o.require(std::abs(peak_near(bs, 60.0, 0.1).amplitude / s.v_m - 1.0) <= kSidebandTol, "SFO 60 Hz tone");
    o.require(leak < kSfoLeakTol * s.v_m, "largest other bin " + num(leak));
    return o;
  });

  criterion(5, "solver oracles (LC, RL, power flow)", 30.0, [&] {
    Outcome o;
    auto m1 = [](double x) { return Eigen::MatrixXd::Constant(1, 1, x); };
    {
      const double l = 1e-3, cap = 1e-3, dt = 20e-6;
      Circuit c;
      const int n = c.add_node("n");
      const auto br = c.add_rl({kGround}, {n}, m1(0.0), m1(l));
      c.add_capacitor(n, kGround, cap);
      c.set_rl_emf(br, Eigen::VectorXd::Constant(1, 1.0));
      std::vector<double> cross;
      double prev = -1.0, t = 0.0;
      for (int k = 0; k < 50000; ++k) {
        c.step(dt);
        t += dt;
        const double x = c.voltage(n) - 1.0;
        if (prev < 0.0 && x >= 0.0) cross.push_back(t - dt * x / (x - prev));
        prev = x;
      }
      const double f = static_cast<double>(cross.size() - 1) / (cross.back() - cross.front());
      const double f_exact = 1.0 / (kTwoPi * std::sqrt(l * cap));
      o.require(std::abs(f / f_exact - 1.0) <= kLcTol, "LC " + num(f) + " Hz vs " + num(f_exact));
    }
    {
      const double r = 1.0, l = 0.01, dt = 20e-6;
      Circuit c;
      const int n = c.add_node("n");
      const auto br = c.add_rl({kGround}, {n}, m1(r / 2.0), m1(l));
      c.add_resistor(n, kGround, r / 2.0);
      c.set_rl_emf(br, Eigen::VectorXd::Constant(1, 1.0));
      for (int k = 0; k < static_cast<int>(std::lround(l / r / dt)); ++k) c.step(dt);
      const double rel = c.rl_current(br)[0] / ((1.0 - std::exp(-1.0)) / r);
      o.require(std::abs(rel - 1.0) <= kRlTol, "RL step at tau ratio " + num(rel));
    }
    const auto model = build_four_bus(0.1);
    const auto net = solve_network(model);
    const auto gs = gauss_seidel(model);
    double pf_dev = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i) pf_dev = std::max(pf_dev, std::abs(gs[i] - net.pf.v[i]));
    o.require(pf_dev <= 1e-9, "Newton vs Gauss-Seidel " + num(pf_dev));
    EmtSystem emt(net, {});
    for (int b : {1, 2, 3, 4}) emt.record_bus(b);
    emt.run_until(0.5);
    SeqNetwork ts(net, {}, TsMode::ThreeSeq);
    double emt_dev = 0.0, ts_dev = 0.0;
    for (int b : {1, 2, 3, 4}) {
      const auto& w = emt.recorded_voltage(b);
      const auto s = estimate_sequences(w, w.size() - 1, 60.0, 1.0, phase_peak_base_volts(emt.base_kv(b)));
      emt_dev = std::max(emt_dev, std::abs(s.pos - net.voltage(b)));
      ts_dev = std::max(ts_dev, std::abs(ts.voltage(b, Sequence::Positive) - net.voltage(b)));
    }
    o.require(emt_dev <= kEmtPfTol, "full EMT vs power flow " + num(emt_dev) + " pu");
    o.require(ts_dev <= kTsPfTol, "TS vs power flow " + num(ts_dev) + " pu");
    return o;
  });

  // the single-phase sweep is reused by the determinism check
  SweepResult slg_parallel;
  const std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const ScenarioConfig slg = fault_config(FaultKind::SinglePhaseG, 0.0, 2, Protocol::PosSeqPQ, 0.1);

  criterion(6, "alpha trend for a single-phase fault at bus 2", 600.0, [&] {
    Outcome o;
    slg_parallel = sweep_alpha(slg, alphas, {0, std::nullopt});
    std::vector<double> et, ei;
    for (const auto& p : slg_parallel.points) {
      et.push_back(p.report.e_true.value());
      ei.push_back(p.report.e_idx);
    }
    o.require(non_increasing(et, kTrendRipple), "e_true " + list(et));
    o.require(non_increasing(ei, kTrendRipple), "e_idx " + list(ei));
    o.require(et.front() >= kTrendRatio * et.back(), "e_true ratio " + num(et.front() / et.back()));
    return o;
  });

  criterion(7, "balanced-fault alpha sweep stays accurate", 600.0, [&] {
    Outcome o;
    const auto cfg = fault_config(FaultKind::ThreePhaseG, 0.0, 2, Protocol::PosSeqCurrent, 0.1);
    const auto s = sweep_alpha(cfg, alphas, {0, std::nullopt});
    std::vector<double> et;
    int interface_errors = 0;
    for (const auto& p : s.points) {
      et.push_back(p.report.e_true.value());
      if (p.report.verdict == Verdict::InterfaceError) ++interface_errors;
    }
    double worst = 0.0;
    for (double x : et) worst = std::max(worst, x);
    o.require(worst < kBalancedFaultEtrueBound, "max e_true " + num(worst) + " < locked " + num(kBalancedFaultEtrueBound));
    o.require(interface_errors == 0, "InterfaceError verdicts " + std::to_string(interface_errors));

    ScenarioConfig quiet;
    quiet.duration = 2.5;
    quiet.index.window = {0.5, 2.5};
    const auto r = run_scenario(quiet);
    o.require(r.report.e_idx < kNoDisturbanceEidxBound && r.report.e_idx < kNoDisturbanceEidxLocked,
              "no-disturbance e_idx " + num(r.report.e_idx) + " < locked " + num(kNoDisturbanceEidxLocked));
    o.require(r.report.verdict == Verdict::AccurateInterface, "no-disturbance verdict " + std::string(to_string(r.report.verdict)));
    return o;
  });

  criterion(8, "bolted fault at the boundary bus flags TS-side false dynamics", 120.0, [&] {
    Outcome o;
    auto cfg = fault_config(FaultKind::ThreePhaseG, 0.0, 3, Protocol::PosSeqCurrent, 0.1);
    cfg.reference = Reference::None;
    const auto r = run_scenario(cfg);
    const double gap = r.report.e_idx - r.report.e_idx_mod;
    o.require(gap > equality_tolerance(r.report.e_idx),
              "e_idx " + num(r.report.e_idx) + ", e'_idx " + num(r.report.e_idx_mod) + ", tolerance " + num(equality_tolerance(r.report.e_idx)));
    o.require(r.report.verdict == Verdict::TsSideFalseDynamics, "verdict " + std::string(to_string(r.report.verdict)));
    return o;
  });

  criterion(9, "9 Hz SFO blocked, 9 Hz MFO propagated", 300.0, [&] {
    Outcome o;
    const IndexWindow w{0.5, 2.5};
    const auto sfo = fo_metrics(run_scenario(fo_config(FoKind::SFO, 9.0)).hybrid, 9.0, w);
    o.require(sfo.attenuation_db >= kSfoAttenuationDb, "SFO attenuation " + num(sfo.attenuation_db) + " dB");
    const auto mfo = fo_metrics(run_scenario(fo_config(FoKind::MFO, 9.0)).hybrid, 9.0, w);
    o.require(mfo.ts_mag_amplitude >= kMfoPropagation * mfo.emt_mag_amplitude,
              "MFO magnitude oscillation TS " + num(mfo.ts_mag_amplitude) + " vs EMT " + num(mfo.emt_mag_amplitude));
    return o;
  });

  criterion(10, "three-sequence interface for a 4 ohm ground fault", 300.0, [&] {
    Outcome o;
    const auto c = compare_interfaces(fault_config(FaultKind::SinglePhaseG, 4.0, 2, Protocol::PosSeqPQ, 0.1));
    const double ep = c.pos.report.e_true.value(), e3 = c.three.report.e_true.value();
    o.require(e3 <= kThreeSeqRatio * ep, "e_true 3seq " + num(e3) + " vs pos " + num(ep));
    auto check = [&](const PhasorTrajectory& p, const std::string& label) {
      double during = 1e9, outside = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double t = p.time(k);
        if (t >= kTon + 0.05 && t <= kToff) during = std::min(during, p.magnitude_pu[k]);
        if ((t >= 0.0 && t < kTon) || t > kToff + 0.1) outside = std::max(outside, p.magnitude_pu[k]);
      }
      o.require(during > kSeqPresent && outside < kSeqAbsent,
                label + " min in fault " + num(during) + ", max outside " + num(outside));
    };
    check(c.three.hybrid.ts_voltage[1], "TS V2");
    check(c.three.hybrid.ts_voltage[2], "TS V0");
    check(c.three.hybrid.emt_sequences[1], "EMT V2");
    check(c.three.hybrid.emt_sequences[2], "EMT V0");
    return o;
  });

  criterion(11, "determinism of outputs and sweeps", 0.0, [&] {
    Outcome o;
    const auto serial = sweep_alpha(slg, alphas, {1, std::nullopt});
    o.require(serial == slg_parallel, "parallel sweep equals serial sweep");
    const auto cfg = fault_config(FaultKind::SinglePhaseG, 4.0, 2, Protocol::ThreeSeqCurrent, 0.1);
    const auto base = fs::temp_directory_path() / "hybridsim_acceptance";
    fs::remove_all(base);
    const auto ma = write_run_outputs(run_scenario(cfg), base / "a");
    write_run_outputs(run_scenario(cfg), base / "b");
    int differing = 0, files = 0;
    for (const auto& f : ma["files"]) {
      const auto name = f.at("file").get<std::string>();
      ++files;
      if (slurp(base / "a" / name) != slurp(base / "b" / name)) ++differing;
    }
    if (slurp(base / "a" / "manifest.json") != slurp(base / "b" / "manifest.json")) ++differing;
    o.require(differing == 0, std::to_string(files) + " CSVs compared, " + std::to_string(differing) + " differ");
    fs::remove_all(base);
    return o;
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}

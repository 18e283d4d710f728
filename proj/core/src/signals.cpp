#include "hybridsim/signals.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>

#include "hybridsim/error.hpp"

namespace hybridsim {

namespace {

double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);
  return a;
}

}  // namespace

double phase_peak_base_volts(double base_kv_ll) {
  return std::sqrt(2.0 / 3.0) * base_kv_ll * 1000.0;
}

void ThreePhaseWaveform::push_back(const std::array<double, 3>& sample) {
  for (std::size_t i = 0; i < 3; ++i) phases[i].push_back(sample[i]);
}

void ThreePhaseWaveform::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "waveform dt must be positive");
  if (phases[0].empty()) throw Error(ErrorCode::InvalidArgument, "waveform is empty");
  if (phases[1].size() != phases[0].size() || phases[2].size() != phases[0].size())
    throw Error(ErrorCode::InvalidArgument, "waveform phases differ in length");
}

// ---------------------------------------------------------------------------

void PhasorTrajectory::push_back(Complex phasor_pu) {
  push_back(std::abs(phasor_pu), std::arg(phasor_pu));
}

void PhasorTrajectory::push_back(double magnitude, double angle) {
  if (!angle_rad.empty()) {
    const double prev = angle_rad.back();
    angle += kTwoPi * std::round((prev - angle) / kTwoPi);
  }
  magnitude_pu.push_back(magnitude);
  angle_rad.push_back(angle);
}

namespace {

template <typename F>
double interpolate(const PhasorTrajectory& p, double t, F&& pick) {
  if (p.empty()) throw Error(ErrorCode::InsufficientData, "empty phasor trajectory");
  const double u = (t - p.t0) / p.dt_macro;
  if (p.size() == 1 || u <= 0.0) return pick(0);
  const double last = static_cast<double>(p.size() - 1);
  if (u >= last) return pick(p.size() - 1);
  const auto k = static_cast<std::size_t>(u);
  const double w = u - static_cast<double>(k);
  return (1.0 - w) * pick(k) + w * pick(k + 1);
}

}  // namespace

double PhasorTrajectory::magnitude_at(double t) const {
  return interpolate(*this, t, [this](std::size_t k) { return magnitude_pu[k]; });
}

double PhasorTrajectory::angle_at(double t) const {
  return interpolate(*this, t, [this](std::size_t k) { return angle_rad[k]; });
}

Complex PhasorTrajectory::phasor_at(double t) const {
  return std::polar(magnitude_at(t), angle_at(t));
}

// ---------------------------------------------------------------------------

Complex rotation_a() { return std::polar(1.0, kTwoPi / 3.0); }

SequenceSet abc_to_seq(Complex va, Complex vb, Complex vc) {
  const Complex a = rotation_a();
  const Complex a2 = a * a;
  return {(va + a * vb + a2 * vc) / 3.0, (va + a2 * vb + a * vc) / 3.0, (va + vb + vc) / 3.0};
}

PhaseSet seq_to_abc(const SequenceSet& s) {
  const Complex a = rotation_a();
  const Complex a2 = a * a;
  return {s.zero + s.pos + s.neg, s.zero + a2 * s.pos + a * s.neg, s.zero + a * s.pos + a2 * s.neg};
}

Complex component(const SequenceSet& s, Sequence which) {
  switch (which) {
    case Sequence::Positive: return s.pos;
    case Sequence::Negative: return s.neg;
    case Sequence::Zero: return s.zero;
  }
  return {};
}

void set_component(SequenceSet& s, Sequence which, Complex value) {
  switch (which) {
    case Sequence::Positive: s.pos = value; break;
    case Sequence::Negative: s.neg = value; break;
    case Sequence::Zero: s.zero = value; break;
  }
}

double phasor_sample(Complex phasor, double omega, double t) {
  return std::abs(phasor) * std::sin(omega * t + std::arg(phasor));
}

// ---------------------------------------------------------------------------

void FoSourceSpec::validate() const {
  if (!(f_fo > 0.0)) throw Error(ErrorCode::InvalidArgument, "f_fo must be positive");
  if (!(f_syn > 0.0)) throw Error(ErrorCode::InvalidArgument, "f_syn must be positive");
  if (v_fo < 0.0) throw Error(ErrorCode::InvalidArgument, "v_fo must be non-negative");
}

double synth_steady(const FoSourceSpec& spec, double t) {
  return spec.v_m * std::cos(kTwoPi * spec.f_syn * t + spec.phi_a);
}

double synth_mfo(const FoSourceSpec& spec, double t) {
  if (t < spec.t_enable) return synth_steady(spec, t);
  return (spec.v_m + spec.v_fo * std::cos(kTwoPi * spec.f_fo * t)) *
         std::cos(kTwoPi * spec.f_syn * t + spec.phi_a);
}

double synth_sfo(const FoSourceSpec& spec, double t) {
  if (t < spec.t_enable) return synth_steady(spec, t);
  return spec.v_m * std::cos(kTwoPi * spec.f_syn * t + spec.phi_a) +
         spec.v_fo * std::cos(kTwoPi * spec.f_fo * t);
}

double synth_fo_phase(const FoSourceSpec& spec, double t, int phase) {
  FoSourceSpec shifted = spec;
  shifted.phi_a = spec.phi_a - kTwoPi / 3.0 * static_cast<double>(phase);
  return spec.kind == FoKind::MFO ? synth_mfo(shifted, t) : synth_sfo(shifted, t);
}

// ---------------------------------------------------------------------------

std::size_t window_samples(double dt, double f0, double window_cycles) {
  const double n = window_cycles / (f0 * dt);
  return static_cast<std::size_t>(std::llround(n));
}

PhasorEstimate estimate_phasor(std::span<const double> samples, double t0, double dt,
                               std::size_t end_index, double f0, double window_cycles,
                               double peak_base) {
  if (!(dt > 0.0) || !(f0 > 0.0) || !(window_cycles > 0.0) || !(peak_base > 0.0))
    throw Error(ErrorCode::InvalidArgument, "phasor estimation needs positive dt, f0, window, base");
  const std::size_t n = window_samples(dt, f0, window_cycles);
  if (n < 2 || end_index >= samples.size() || end_index + 1 < n)
    throw Error(ErrorCode::InsufficientData,
                "phasor window of " + std::to_string(n) + " samples exceeds available data");

  const double omega = kTwoPi * f0;
  const std::size_t first = end_index + 1 - n;
  double scc = 0.0, sss = 0.0, scs = 0.0, sxc = 0.0, sxs = 0.0;
  for (std::size_t i = first; i <= end_index; ++i) {
    // local time relative to the window end keeps the trig arguments small
    const double tau = -static_cast<double>(end_index - i) * dt;
    const double c = std::cos(omega * tau);
    const double s = std::sin(omega * tau);
    const double x = samples[i];
    scc += c * c;
    sss += s * s;
    scs += c * s;
    sxc += x * c;
    sxs += x * s;
  }
  const double det = scc * sss - scs * scs;
  const double alpha = (sxc * sss - sxs * scs) / det;  // coefficient of cos
  const double beta = (sxs * scc - sxc * scs) / det;   // coefficient of sin

  PhasorEstimate est;
  const double amplitude = std::hypot(alpha, beta);
  est.magnitude_pu = amplitude / peak_base;
  est.end_phase_rad = std::atan2(alpha, beta);
  const double t_end = t0 + static_cast<double>(end_index) * dt;
  est.angle_rad = wrap_angle(est.end_phase_rad - omega * t_end);
  return est;
}

PhasorEstimate estimate_phasor(const SampledSignal& signal, double f0, double window_cycles,
                               double peak_base) {
  if (signal.values.empty()) throw Error(ErrorCode::InsufficientData, "empty signal");
  return estimate_phasor(signal.values, signal.t0, signal.dt, signal.values.size() - 1, f0,
                         window_cycles, peak_base);
}

SequenceSet estimate_sequences(const ThreePhaseWaveform& w, std::size_t end_index, double f0,
                               double window_cycles, double peak_base) {
  PhaseSet p;
  for (std::size_t i = 0; i < 3; ++i)
    p[i] = estimate_phasor(w.phases[i], w.t0, w.dt, end_index, f0, window_cycles, peak_base)
               .phasor();
  return abc_to_seq(p);
}

std::array<PhasorTrajectory, 3> sequence_trajectories(const ThreePhaseWaveform& w, double f0,
                                                      double window_cycles, double base_kv_ll,
                                                      std::size_t stride) {
  w.validate();
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  const std::size_t n = window_samples(w.dt, f0, window_cycles);
  if (n > w.size()) throw Error(ErrorCode::InsufficientData, "waveform shorter than window");
  std::size_t first = ((n - 1 + stride - 1) / stride) * stride;
  std::array<PhasorTrajectory, 3> out;
  for (auto& p : out) {
    p.t0 = w.time(first);
    p.dt_macro = w.dt * static_cast<double>(stride);
    p.base_kv_ll = base_kv_ll;
  }
  const double peak = phase_peak_base_volts(base_kv_ll);
  for (std::size_t k = first; k < w.size(); k += stride) {
    const SequenceSet s = estimate_sequences(w, k, f0, window_cycles, peak);
    out[0].push_back(s.pos);
    out[1].push_back(s.neg);
    out[2].push_back(s.zero);
  }
  return out;
}

// ---------------------------------------------------------------------------

ThreePhaseWaveform reconstruct_abc(const PhasorTrajectory& p, double f0, double dt_out) {
  if (p.empty()) throw Error(ErrorCode::InsufficientData, "empty phasor trajectory");
  if (!(dt_out > 0.0) || dt_out > p.dt_macro * (1.0 + 1e-12))
    throw Error(ErrorCode::InvalidArgument, "dt_out must satisfy 0 < dt_out <= dt_macro");
  const double span = p.time(p.size() - 1) - p.t0;
  const auto count = static_cast<std::size_t>(std::floor(span / dt_out + 1e-9)) + 1;
  return reconstruct_abc(p, f0, TimeGrid{p.t0, dt_out, count});
}

ThreePhaseWaveform reconstruct_abc(const PhasorTrajectory& p, double f0, const TimeGrid& grid) {
  if (p.empty()) throw Error(ErrorCode::InsufficientData, "empty phasor trajectory");
  if (!(grid.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid dt must be positive");
  const double peak = phase_peak_base_volts(p.base_kv_ll);
  const double omega = kTwoPi * f0;
  static constexpr std::array<double, 3> offsets{0.0, -kTwoPi / 3.0, kTwoPi / 3.0};
  ThreePhaseWaveform w;
  w.t0 = grid.t0;
  w.dt = grid.dt;
  for (auto& ph : w.phases) ph.reserve(grid.count);
  for (std::size_t n = 0; n < grid.count; ++n) {
    const double t = grid.t0 + static_cast<double>(n) * grid.dt;
    const double vm = p.magnitude_at(t);
    const double th = p.angle_at(t);
    for (std::size_t i = 0; i < 3; ++i)
      w.phases[i].push_back(peak * vm * std::sin(omega * t + th + offsets[i]));
  }
  return w;
}

ThreePhaseWaveform reconstruct_abc(const std::array<PhasorTrajectory, 3>& seq, double f0,
                                   const TimeGrid& grid) {
  for (const auto& p : seq)
    if (p.empty()) throw Error(ErrorCode::InsufficientData, "empty phasor trajectory");
  const double peak = phase_peak_base_volts(seq[0].base_kv_ll);
  const double omega = kTwoPi * f0;
  ThreePhaseWaveform w;
  w.t0 = grid.t0;
  w.dt = grid.dt;
  for (auto& ph : w.phases) ph.reserve(grid.count);
  for (std::size_t n = 0; n < grid.count; ++n) {
    const double t = grid.t0 + static_cast<double>(n) * grid.dt;
    const SequenceSet s{seq[0].phasor_at(t), seq[1].phasor_at(t), seq[2].phasor_at(t)};
    const PhaseSet abc = seq_to_abc(s);
    for (std::size_t i = 0; i < 3; ++i) w.phases[i].push_back(peak * phasor_sample(abc[i], omega, t));
  }
  return w;
}

// ---------------------------------------------------------------------------

std::vector<SpectrumBin> spectrum(const SampledSignal& signal) {
  const std::size_t n = signal.values.size();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "spectrum needs at least two samples");
  if (!(signal.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "spectrum needs dt > 0");

  std::vector<double> in(signal.values);
  const std::size_t nbins = n / 2 + 1;
  std::unique_ptr<fftw_complex[], decltype(&fftw_free)> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nbins)), &fftw_free);
  // FFTW's planner is not reentrant; estimate-mode plans are cheap.
  static std::mutex planner_mutex;
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(plan);
  }

  const double nd = static_cast<double>(n);
  std::vector<SpectrumBin> bins(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    const double mag = std::hypot(out[k][0], out[k][1]);
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    bins[k].frequency_hz = static_cast<double>(k) / (nd * signal.dt);
    bins[k].amplitude = (edge ? 1.0 : 2.0) * mag / nd;
  }
  return bins;
}

std::vector<SpectrumBin> spectrum(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size())
    throw Error(ErrorCode::InvalidArgument, "times and values differ in length");
  if (times.size() < 2) throw Error(ErrorCode::InsufficientData, "spectrum needs at least two samples");
  const double dt = times[1] - times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - dt) > 1e-9 * std::abs(dt))
      throw Error(ErrorCode::InvalidArgument, "spectrum requires uniform sampling");
  }
  return spectrum(SampledSignal{times[0], dt, {values.begin(), values.end()}});
}

SpectrumBin peak_near(const std::vector<SpectrumBin>& bins, double f, double tol_hz) {
  SpectrumBin best{f, 0.0};
  for (const auto& b : bins) {
    if (std::abs(b.frequency_hz - f) <= tol_hz && b.amplitude > best.amplitude) best = b;
  }
  return best;
}

ToneFit fit_tone(const SampledSignal& signal, double f, double t_start, double t_end) {
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  const double omega = kTwoPi * f;
  std::size_t used = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double t = signal.time(i);
    if (t < t_start || t >= t_end) continue;
    const Eigen::Vector3d basis(1.0, std::cos(omega * t), std::sin(omega * t));
    gram += basis * basis.transpose();
    rhs += basis * signal.values[i];
    ++used;
  }
  if (used < 3) throw Error(ErrorCode::InsufficientData, "too few samples for a tone fit");
  const Eigen::Vector3d c = gram.ldlt().solve(rhs);
  // c1 cos + c2 sin = A cos(wt + phi) with A cos phi = c1, -A sin phi = c2
  return ToneFit{std::hypot(c(1), c(2)), std::atan2(-c(2), c(1)), c(0)};
}

}  // namespace hybridsim

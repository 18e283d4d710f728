#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hybridsim {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Peak phase-to-ground volts that correspond to 1.0 pu for a line-to-line
/// base of `base_kv_ll` kilovolts: sqrt(2/3) * V_B.
double phase_peak_base_volts(double base_kv_ll);

/// Uniformly sampled scalar signal.
struct SampledSignal {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  /// Time just past the last sample's left-Riemann interval.
  double end_time() const { return time(values.size()); }
};

/// Instantaneous three-phase quantities (volts or amperes) on a uniform grid.
struct ThreePhaseWaveform {
  double t0 = 0.0;
  double dt = 0.0;
  std::array<std::vector<double>, 3> phases;

  std::size_t size() const { return phases[0].size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double end_time() const { return time(size()); }
  SampledSignal phase(std::size_t i) const { return {t0, dt, phases.at(i)}; }

  void push_back(const std::array<double, 3>& sample);
  /// Throws InvalidArgument unless dt > 0, length >= 1 and phase lengths agree.
  void validate() const;
};

/// Per-macro-step phasor samples for one sequence at one bus. Angles are
/// unwrapped on insertion so consecutive samples never jump by more than pi.
struct PhasorTrajectory {
  double t0 = 0.0;
  double dt_macro = 0.0;
  double base_kv_ll = 1.0;
  std::vector<double> magnitude_pu;
  std::vector<double> angle_rad;

  std::size_t size() const { return magnitude_pu.size(); }
  bool empty() const { return magnitude_pu.empty(); }
  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt_macro; }
  double end_time() const { return time(size()); }

  void push_back(Complex phasor_pu);
  void push_back(double magnitude, double angle);

  /// Linear interpolation of magnitude and unwrapped angle; holds the end
  /// values outside the sampled span.
  double magnitude_at(double t) const;
  double angle_at(double t) const;
  Complex phasor_at(double t) const;

  SampledSignal magnitude_signal() const { return {t0, dt_macro, magnitude_pu}; }
};

struct SequenceSet {
  Complex pos{};
  Complex neg{};
  Complex zero{};

  bool operator==(const SequenceSet&) const = default;
};

using PhaseSet = std::array<Complex, 3>;

enum class Sequence { Positive = 0, Negative = 1, Zero = 2 };

/// Rotation operator a = exp(j*2*pi/3).
Complex rotation_a();

SequenceSet abc_to_seq(Complex va, Complex vb, Complex vc);
inline SequenceSet abc_to_seq(const PhaseSet& v) { return abc_to_seq(v[0], v[1], v[2]); }
PhaseSet seq_to_abc(const SequenceSet& s);

Complex component(const SequenceSet& s, Sequence which);
void set_component(SequenceSet& s, Sequence which, Complex value);

/// Phasor <-> waveform convention used throughout: x(t) = |X| sin(w0 t + arg X),
/// with t absolute simulation time.
double phasor_sample(Complex phasor, double omega, double t);

// ---------------------------------------------------------------------------
// Forced-oscillation sources

enum class FoKind { MFO, SFO };

struct FoSourceSpec {
  FoKind kind = FoKind::MFO;
  double v_m = 0.0;    // carrier amplitude, volts
  double v_fo = 0.0;   // oscillation amplitude, volts
  double f_fo = 1.0;   // Hz
  double f_syn = 60.0; // Hz
  double phi_a = 0.0;  // rad
  double t_enable = 0.0;

  bool operator==(const FoSourceSpec&) const = default;
  void validate() const;
};

double synth_steady(const FoSourceSpec& spec, double t);
double synth_mfo(const FoSourceSpec& spec, double t);
double synth_sfo(const FoSourceSpec& spec, double t);

/// Waveform of phase `phase` (0=a, 1=b, 2=c): the carrier is shifted by
/// -2pi/3 per phase, the oscillation term is common to all phases. Before
/// `t_enable` the steady carrier is returned.
double synth_fo_phase(const FoSourceSpec& spec, double t, int phase);

// ---------------------------------------------------------------------------
// Phasor estimation

struct PhasorEstimate {
  double magnitude_pu = 0.0;
  /// Absolute-time angle: x(t) ~ M sin(w0 t + angle).
  double angle_rad = 0.0;
  /// Instantaneous phase w0*t_end + angle at the last sample of the window.
  double end_phase_rad = 0.0;

  Complex phasor() const { return std::polar(magnitude_pu, angle_rad); }
};

/// Number of samples spanned by `window_cycles` fundamental cycles.
std::size_t window_samples(double dt, double f0, double window_cycles);

/// Fundamental phasor of the trailing window that ends at sample `end_index`
/// (inclusive). Single-bin DFT at f0 with a 2x2 Gram correction so windows that
/// are not an integer number of samples per cycle stay exact on pure
/// sinusoids. `peak_base` is the instantaneous amplitude that maps to 1.0 pu.
PhasorEstimate estimate_phasor(std::span<const double> samples, double t0, double dt,
                               std::size_t end_index, double f0, double window_cycles,
                               double peak_base);

/// Convenience overload over the whole signal (window ends at its last sample).
PhasorEstimate estimate_phasor(const SampledSignal& signal, double f0, double window_cycles,
                               double peak_base);

/// Per-phase estimate followed by abc_to_seq at sample `end_index`.
SequenceSet estimate_sequences(const ThreePhaseWaveform& w, std::size_t end_index, double f0,
                               double window_cycles, double peak_base);

/// Sequence phasor trajectories of a recorded waveform, estimated every
/// `stride` samples starting at the first index with a full window.
std::array<PhasorTrajectory, 3> sequence_trajectories(const ThreePhaseWaveform& w, double f0,
                                                      double window_cycles, double base_kv_ll,
                                                      std::size_t stride);

// ---------------------------------------------------------------------------
// Reconstruction

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t count = 0;
};

/// Three-phase waveform (volts) rebuilt from a positive-sequence trajectory:
/// phase i = sqrt(2/3) V_B V_m(t) sin(2 pi f0 t + theta(t) + offset_i),
/// offsets {0, -2pi/3, +2pi/3}.
ThreePhaseWaveform reconstruct_abc(const PhasorTrajectory& p, double f0, double dt_out);
ThreePhaseWaveform reconstruct_abc(const PhasorTrajectory& p, double f0, const TimeGrid& grid);

/// Same, from all three sequence trajectories (sampled on one grid): inverse
/// symmetrical components, then phase-by-phase waveform synthesis.
ThreePhaseWaveform reconstruct_abc(const std::array<PhasorTrajectory, 3>& seq, double f0,
                                   const TimeGrid& grid);

// ---------------------------------------------------------------------------
// Spectra

struct SpectrumBin {
  double frequency_hz = 0.0;
  double amplitude = 0.0;
};

/// One-sided amplitude spectrum (rectangular window). A cosine of amplitude A
/// over an integer number of periods reports A in its bin; DC reports its value.
std::vector<SpectrumBin> spectrum(const SampledSignal& signal);

/// Spectrum of an explicitly time-stamped signal; throws InvalidArgument if the
/// stamps are not uniform.
std::vector<SpectrumBin> spectrum(std::span<const double> times, std::span<const double> values);

/// Largest bin with frequency within `tol_hz` of `f`.
SpectrumBin peak_near(const std::vector<SpectrumBin>& bins, double f, double tol_hz);

struct ToneFit {
  double amplitude = 0.0;
  double phase_rad = 0.0;  // x(t) ~ offset + amplitude cos(2 pi f t + phase)
  double offset = 0.0;
};

/// Least-squares fit of offset + cosine at frequency f over samples with
/// times in [t_start, t_end).
ToneFit fit_tone(const SampledSignal& signal, double f, double t_start, double t_end);

}  // namespace hybridsim

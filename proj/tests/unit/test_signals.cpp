#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hybridsim/error.hpp"
#include "hybridsim/signals.hpp"

using namespace hybridsim;

namespace {

// Plain complex DFT bin over an integer number of cycles; independent of the
// library's Gram-corrected estimator.
Complex naive_dft_phasor(const std::vector<double>& x, double dt, double f0, double t0) {
  Complex acc{};
  const double w = kTwoPi * f0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    acc += x[i] * std::polar(1.0, -(w * t));
  }
  // x = M sin(wt + th) = M cos(wt + th - pi/2) -> bin = (N/2) M e^{j(th - pi/2)}
  const Complex bin = acc * (2.0 / static_cast<double>(x.size()));
  return bin * Complex(0.0, 1.0);
}

}  // namespace

TEST(SymmetricalComponents, RoundTripRandom) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const PhaseSet v{Complex(u(rng), u(rng)), Complex(u(rng), u(rng)), Complex(u(rng), u(rng))};
    const PhaseSet back = seq_to_abc(abc_to_seq(v));
    for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(back[i] - v[i]), 1e-12);
  }
}

TEST(SymmetricalComponents, BalancedSetIsPurePositive) {
  const Complex a = rotation_a();
  const Complex va = std::polar(1.3, 0.4);
  const SequenceSet s = abc_to_seq(va, a * a * va, a * va);
  EXPECT_LT(std::abs(s.pos - va), 1e-12);
  EXPECT_LT(std::abs(s.neg), 1e-12);
  EXPECT_LT(std::abs(s.zero), 1e-12);
}

TEST(SymmetricalComponents, CommonModeIsPureZero) {
  const Complex v{0.3, -0.2};
  const SequenceSet s = abc_to_seq(v, v, v);
  EXPECT_LT(std::abs(s.zero - v), 1e-15);
  EXPECT_LT(std::abs(s.pos), 1e-15);
  EXPECT_LT(std::abs(s.neg), 1e-15);
}

TEST(SymmetricalComponents, ComponentAccessors) {
  SequenceSet s;
  set_component(s, Sequence::Negative, {1.0, 2.0});
  EXPECT_EQ(component(s, Sequence::Negative), Complex(1.0, 2.0));
  EXPECT_EQ(component(s, Sequence::Positive), Complex{});
}

TEST(PhasorEstimate, MatchesNaiveDftOnIntegerWindow) {
  // 800 samples per cycle, so the plain DFT bin is exact too
  const double f0 = 60.0, dt = 1.0 / (60.0 * 800.0), t0 = 0.0137;
  std::vector<double> x(800);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = 2.5 * std::sin(kTwoPi * f0 * (t0 + static_cast<double>(i) * dt) + 0.7);
  const auto est = estimate_phasor(x, t0, dt, x.size() - 1, f0, 1.0, 1.0);
  const Complex ref = naive_dft_phasor(x, dt, f0, t0);
  EXPECT_NEAR(est.magnitude_pu, std::abs(ref), 1e-9);
  EXPECT_NEAR(std::remainder(est.angle_rad - std::arg(ref), kTwoPi), 0.0, 1e-9);
  EXPECT_NEAR(est.magnitude_pu, 2.5, 1e-9);
  EXPECT_NEAR(est.angle_rad, 0.7, 1e-9);
}

TEST(PhasorEstimate, ExactOnNonIntegerSamplesPerCycle) {
  // 20 us steps give 833.33 samples per cycle
  const double dt = 20e-6;
  std::vector<double> x(3000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = 100.0 * std::sin(kTwoPi * 60.0 * (static_cast<double>(i) * dt) - 2.1);
  const auto est = estimate_phasor(x, 0.0, dt, 2500, 60.0, 1.0, 100.0);
  EXPECT_NEAR(est.magnitude_pu, 1.0, 1e-10);
  EXPECT_NEAR(est.angle_rad, -2.1, 1e-10);
  const double t_end = 2500 * dt;
  EXPECT_NEAR(std::remainder(est.end_phase_rad - (kTwoPi * 60.0 * t_end - 2.1), kTwoPi), 0.0, 1e-9);
}

TEST(PhasorEstimate, InsufficientDataThrows) {
  std::vector<double> x(100, 0.0);
  try {
    estimate_phasor(x, 0.0, 20e-6, 99, 60.0, 1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(PhasorTrajectory, UnwrapsAndInterpolates) {
  PhasorTrajectory p{0.0, 0.01, 1.0, {}, {}};
  p.push_back(1.0, 3.0);
  p.push_back(2.0, -3.0);  // +0.283 rad step after unwrapping
  EXPECT_NEAR(p.angle_rad[1], -3.0 + kTwoPi, 1e-15);
  EXPECT_NEAR(p.magnitude_at(0.005), 1.5, 1e-15);
  EXPECT_NEAR(p.angle_at(0.005), 0.5 * (3.0 + kTwoPi - 3.0), 1e-12);
  EXPECT_EQ(p.magnitude_at(-1.0), 1.0);
  EXPECT_EQ(p.magnitude_at(5.0), 2.0);
}

TEST(Reconstruction, EstimateReconstructRoundTrip) {
  // slowly varying positive-sequence phasor
  PhasorTrajectory p{0.0, 1.0 / 120.0, 34.5, {}, {}};
  for (int k = 0; k < 240; ++k) {
    const double t = k / 120.0;
    p.push_back(1.0 + 0.05 * std::sin(kTwoPi * 0.5 * t), 0.3 + 0.1 * t);
  }
  const auto w = reconstruct_abc(p, 60.0, 20e-6);
  const double peak = phase_peak_base_volts(34.5);
  for (std::size_t idx : {20000u, 50000u, 90000u}) {
    const auto s = estimate_sequences(w, idx, 60.0, 1.0, peak);
    // the window is centred half a cycle before its end
    const double tc = w.time(idx) - 0.5 / 60.0;
    EXPECT_NEAR(std::abs(s.pos), p.magnitude_at(tc), 1e-3);
    EXPECT_NEAR(std::remainder(std::arg(s.pos) - p.angle_at(tc), kTwoPi), 0.0, 1e-3);
    EXPECT_LT(std::abs(s.neg), 1e-3);
    EXPECT_LT(std::abs(s.zero), 1e-3);
  }
}

TEST(Reconstruction, SequenceReconstructionMatchesPositiveOnly) {
  PhasorTrajectory pos{0.0, 0.01, 1.0, {}, {}};
  PhasorTrajectory neg = pos, zero = pos;
  for (int k = 0; k < 10; ++k) {
    pos.push_back(std::polar(1.0 + 0.01 * k, 0.2 * k));
    neg.push_back(Complex{});
    zero.push_back(Complex{});
  }
  const TimeGrid g{0.0, 1e-4, 900};
  const auto a = reconstruct_abc(pos, 60.0, g);
  const auto b = reconstruct_abc({pos, neg, zero}, 60.0, g);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t n = 0; n < g.count; ++n) EXPECT_NEAR(a.phases[i][n], b.phases[i][n], 1e-9);
}

TEST(ForcedOscillation, FormulasByHand) {
  FoSourceSpec s{FoKind::MFO, 10.0, 1.0, 2.0, 60.0, 0.25, 0.5};
  const double t = 0.73;
  EXPECT_DOUBLE_EQ(synth_mfo(s, t), (10.0 + std::cos(kTwoPi * 2.0 * t)) * std::cos(kTwoPi * 60.0 * t + 0.25));
  EXPECT_DOUBLE_EQ(synth_sfo(s, t), 10.0 * std::cos(kTwoPi * 60.0 * t + 0.25) + std::cos(kTwoPi * 2.0 * t));
  EXPECT_DOUBLE_EQ(synth_mfo(s, 0.2), 10.0 * std::cos(kTwoPi * 60.0 * 0.2 + 0.25));
  // phase b carrier lags by 2pi/3, oscillation term common
  s.kind = FoKind::SFO;
  EXPECT_NEAR(synth_fo_phase(s, t, 1),
              10.0 * std::cos(kTwoPi * 60.0 * t + 0.25 - kTwoPi / 3.0) + std::cos(kTwoPi * 2.0 * t), 1e-12);
}

TEST(ForcedOscillation, ValidateRejectsBadFrequency) {
  FoSourceSpec s;
  s.f_fo = 0.0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Spectrum, CosineAmplitudeInItsBin) {
  SampledSignal s{0.0, 1e-3, {}};
  for (int i = 0; i < 1000; ++i) s.values.push_back(3.0 + 2.0 * std::cos(kTwoPi * 50.0 * i * 1e-3));
  const auto bins = spectrum(s);
  EXPECT_NEAR(bins[0].amplitude, 3.0, 1e-12);
  EXPECT_NEAR(peak_near(bins, 50.0, 0.1).amplitude, 2.0, 1e-12);
  EXPECT_NEAR(bins[50].frequency_hz, 50.0, 1e-12);
}

TEST(Spectrum, NonUniformStampsRejected) {
  std::vector<double> t{0.0, 0.1, 0.25}, v{1.0, 2.0, 3.0};
  EXPECT_THROW(spectrum(t, v), Error);
}

TEST(ToneFit, RecoversAmplitudePhaseOffset) {
  SampledSignal s{0.0, 1e-3, {}};
  for (int i = 0; i < 3000; ++i) s.values.push_back(0.5 + 1.5 * std::cos(kTwoPi * 9.0 * i * 1e-3 - 0.4));
  const auto f = fit_tone(s, 9.0, 0.5, 2.5);
  EXPECT_NEAR(f.amplitude, 1.5, 1e-10);
  EXPECT_NEAR(f.phase_rad, -0.4, 1e-10);
  EXPECT_NEAR(f.offset, 0.5, 1e-10);
}

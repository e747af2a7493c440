#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "helpers.hpp"
#include "srosync/dsp/stft.hpp"
#include "srosync/error.hpp"
#include "srosync/sro/sro.hpp"
#include "srosync/sro/trace.hpp"

using namespace srosync;
using sro::SroPpm;

namespace {

constexpr double kFs = 16000.0;

TimeSignal mono(std::vector<double> x) { return TimeSignal::mono(std::move(x), kFs); }

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no srosync::Error thrown";
  return ErrorKind::kInput;
}

sro::SroTrace trace_for(std::size_t len, const dsp::StftConfig& c, double ppm) {
  dsp::FrameAnalyzer a(c, len);
  return sro::SroTrace::constant(ppm, a.num_frames(), c.sample_rate, c.hop_size, a.frame_center(0));
}

}  // namespace

TEST(SroPpm, Bounds) {
  EXPECT_NO_THROW(SroPpm(500.0));
  EXPECT_NO_THROW(SroPpm(-500.0));
  EXPECT_EQ(kind_of([] { SroPpm(500.1); }), ErrorKind::kDomain);
  EXPECT_EQ(kind_of([] { SroPpm(std::nan("")); }), ErrorKind::kDomain);
  EXPECT_DOUBLE_EQ(SroPpm(100.0).ratio(), 1e-4);
  EXPECT_EQ((SroPpm(10.0) + SroPpm(-30.0)).ppm(), -20.0);
}

TEST(PhaseTerm, TrivialCases) {
  dsp::StftConfig c;
  for (std::size_t l : {0u, 1u, 50u}) {
    EXPECT_EQ(sro::sro_phase_term(0, l, SroPpm(100.0), c), sro::cplx(1.0, 0.0));
    EXPECT_EQ(sro::sro_phase_term(1234, l, SroPpm(0.0), c), sro::cplx(1.0, 0.0));
  }
  for (std::size_t k : {0u, 7u, 4096u}) EXPECT_EQ(sro::sro_phase_term(k, 0, SroPpm(-80.0), c), sro::cplx(1.0, 0.0));
}

TEST(PhaseTerm, HandEvaluatedExample) {
  // k = 2048, l = 100, N = 8192, N_h = 2048, eps = 100 ppm; drift in samples.
  dsp::StftConfig c;
  const double drift = 100.0 * 2048.0 * 100e-6;  // 20.48 samples
  const double want = -2.0 * std::numbers::pi * 2048.0 * drift / 8192.0;
  EXPECT_NEAR(sro::sro_phase(2048, 100, SroPpm(100.0), c), want, 1e-12);
  const auto v = sro::sro_phase_term(2048, 100, SroPpm(100.0), c);
  EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
  EXPECT_NEAR(std::arg(v), std::remainder(want, 2.0 * std::numbers::pi), 1e-12);
}

TEST(PhaseTerm, UnitMagnitudeAndComposition) {
  dsp::StftConfig c;
  for (std::size_t k : {1u, 100u, 3000u, 4096u}) {
    for (std::size_t l : {1u, 20u, 60u}) {
      const auto a = sro::sro_phase_term(k, l, SroPpm(30.0), c);
      const auto b = sro::sro_phase_term(k, l, SroPpm(-45.0), c);
      const auto ab = sro::sro_phase_term(k, l, SroPpm(-15.0), c);
      EXPECT_NEAR(std::abs(a), 1.0, 1e-14);
      EXPECT_NEAR(std::abs(a * b - ab), 0.0, 1e-12);
      EXPECT_NEAR(sro::sro_phase(k, l, SroPpm(30.0), c) + sro::sro_phase(k, l, SroPpm(-45.0), c),
                  sro::sro_phase(k, l, SroPpm(-15.0), c), 1e-12);
    }
  }
}

TEST(PhaseTerm, ValidityViolationNamesFrame) {
  dsp::StftConfig c;
  // N_w/4 = 2048 samples of drift; 2048 * 100e-6 = 0.2048 per frame -> frame 10001.
  EXPECT_EQ(sro::first_invalid_frame(SroPpm(100.0), 20000, c), 10001u);
  EXPECT_EQ(sro::first_invalid_frame(SroPpm(100.0), 100, c), 100u);
  EXPECT_EQ(sro::first_invalid_frame(SroPpm(0.0), 100, c), 100u);
  try {
    sro::sro_phase_term(5, 10001, SroPpm(100.0), c);
    FAIL() << "expected a domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
    EXPECT_NE(std::string(e.what()).find("frame 10001"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(sro::sro_phase_term(5, 10000, SroPpm(100.0), c));
}

TEST(ApplySro, ZeroOffsetIsIdentity) {
  const auto x = test::white_noise(50000, 1);
  const auto y = sro::apply_sro(mono(x), SroPpm(0.0)).channels[0];
  ASSERT_EQ(y.size(), x.size());
  double worst = 0.0, scale = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    worst = std::max(worst, std::abs(y[n] - x[n]));
    scale = std::max(scale, std::abs(x[n]));
  }
  EXPECT_LE(worst / scale, 1e-9);
}

TEST(ApplySro, Errors) {
  EXPECT_EQ(kind_of([] { sro::apply_sro(TimeSignal(2, 100, kFs), SroPpm(1.0)); }), ErrorKind::kShape);
  EXPECT_EQ(kind_of([] { sro::apply_sro(TimeSignal(1, 100, kFs), SroPpm(1.0), 1000); }), ErrorKind::kConfig);
  EXPECT_EQ(sro::apply_sro(TimeSignal(1, 0, kFs), SroPpm(10.0)).length(), 0u);
}

TEST(ApplySro, SinusoidZeroCrossingRate) {
  const double f = 440.0, eps = 100e-6;
  const std::size_t len = static_cast<std::size_t>(60 * kFs);
  std::vector<double> x(len);
  for (std::size_t n = 0; n < len; ++n) x[n] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / kFs);
  const auto y = sro::apply_sro(mono(x), SroPpm(100.0)).channels[0];
  // Frequency from the first and last rising zero crossing away from the edges.
  auto crossings = [&](const std::vector<double>& s) {
    std::vector<double> out;
    for (std::size_t n = 8192; n + 8192 < s.size(); ++n) {
      if (s[n - 1] < 0.0 && s[n] >= 0.0) out.push_back(static_cast<double>(n - 1) + s[n - 1] / (s[n - 1] - s[n]));
    }
    return out;
  };
  const auto cx = crossings(x), cy = crossings(y);
  const double fx = static_cast<double>(cx.size() - 1) / (cx.back() - cx.front());
  const double fy = static_cast<double>(cy.size() - 1) / (cy.back() - cy.front());
  EXPECT_NEAR(fx / fy, 1.0 + eps, 1e-6);
}

TEST(ApplySro, AgreesWithSincOracle) {
  // 30 s at 50 ppm; the oracle is evaluated on interior blocks spread over the signal.
  const std::size_t len = static_cast<std::size_t>(30 * kFs);
  const auto x = test::lowpass(test::white_noise(len, 2), 0.9);
  const auto y = sro::apply_sro(mono(x), SroPpm(50.0)).channels[0];
  double sig = 0.0, err = 0.0;
  for (std::size_t b = 1; b < 30; b += 4) {
    const std::size_t start = b * static_cast<std::size_t>(kFs);
    for (std::size_t n = start; n < start + 2000; ++n) {
      const double ref = test::sinc_at(x, static_cast<double>(n) / (1.0 + 50e-6));
      sig += ref * ref;
      err += (ref - y[n]) * (ref - y[n]);
    }
  }
  EXPECT_GE(10.0 * std::log10(sig / err), 40.0);
}

TEST(ApplySro, RoundTripForwardBackward) {
  const std::size_t len = static_cast<std::size_t>(10 * kFs);
  const auto x = test::white_noise(len, 3);
  for (double ppm : {100.0, 10.0}) {
    const auto y = sro::apply_sro(sro::apply_sro(mono(x), SroPpm(ppm)), SroPpm(-ppm)).channels[0];
    EXPECT_GE(test::snr_db(x, y, 16000, len - 16000), 40.0) << ppm;
  }
  // Starting with a negative offset raises every frequency by (1 + |eps|), so
  // the top |eps| of a full-band signal aliases; use noise below 0.99 Nyquist.
  const auto b = test::lowpass(x, 0.99, 1023);
  const auto y = sro::apply_sro(sro::apply_sro(mono(b), SroPpm(-100.0)), SroPpm(100.0)).channels[0];
  EXPECT_GE(test::snr_db(b, y, 16000, len - 16000), 40.0);
}

TEST(ApplySro, AccumulatedDrift) {
  const std::size_t len = static_cast<std::size_t>(30 * kFs);
  const auto x = test::white_noise(len, 4);
  const double eps = 50e-6;
  const auto y = sro::apply_sro(mono(x), SroPpm(50.0)).channels[0];
  for (double t : {5.0, 15.0, 25.0}) {
    const double d = test::measure_delay(x, y, static_cast<std::size_t>(t * kFs), static_cast<std::size_t>(10 * kFs));
    EXPECT_NEAR(d, eps * t * kFs / (1.0 + eps), 0.1) << "t=" << t;
  }
}

TEST(Compensate, ZeroTraceLeavesPlaybackUnchanged) {
  dsp::StftConfig c;
  const auto x = test::white_noise(40000, 5);
  const auto spec = dsp::stft(mono(x), c);
  const auto out = sro::compensate_sro(spec, trace_for(x.size(), c, 0.0));
  for (std::size_t i = 0; i < spec.data().size(); ++i) EXPECT_EQ(out.data()[i], spec.data()[i]);
}

TEST(Compensate, AlignmentError) {
  dsp::StftConfig c;
  const auto spec = dsp::stft(mono(test::white_noise(40000, 6)), c);
  auto t = trace_for(40000, c, 0.0);
  t.frames.pop_back();
  EXPECT_EQ(kind_of([&] { sro::compensate_sro(spec, t); }), ErrorKind::kAlignment);
  EXPECT_EQ(kind_of([&] { sro::compensate_signal(test::white_noise(40000, 6), t, c); }), ErrorKind::kAlignment);
}

TEST(Compensate, ConstantTraceRoundTrip) {
  dsp::StftConfig c;
  const std::size_t len = static_cast<std::size_t>(30 * kFs);
  const auto x = test::lowpass(test::white_noise(len, 7), 0.99, 1023);
  for (double ppm : {10.0, 50.0, -50.0}) {
    const auto comp = dsp::istft(sro::compensate_sro(dsp::stft(mono(x), c), trace_for(len, c, ppm)));
    const auto y = sro::apply_sro(comp, SroPpm(ppm)).channels[0];
    EXPECT_GE(test::snr_db(x, y, 16000, len - 16000), 40.0) << ppm;
  }
}

TEST(Compensate, ConstantTraceRemovesDrift) {
  // At 100 ppm one frame spans 0.8 samples of drift, so the waveform match is
  // limited, but the residual delay after compensation is zero.
  dsp::StftConfig c;
  const std::size_t len = static_cast<std::size_t>(20 * kFs);
  const auto x = test::white_noise(len, 11);
  const auto comp = sro::compensate_signal(x, trace_for(len, c, -100.0), c);
  const auto y = sro::apply_sro(mono(comp), SroPpm(-100.0)).channels[0];
  for (double t : {3.0, 10.0, 17.0}) {
    EXPECT_NEAR(test::measure_delay(x, y, static_cast<std::size_t>(t * kFs), 16000), 0.0, 0.02) << t;
  }
  EXPECT_GE(test::snr_db(x, y, 16000, len - 16000), 25.0);
}

TEST(Compensate, StreamingMatchesSpectrogramPath) {
  dsp::StftConfig c;
  const std::size_t len = 100000;
  const auto x = test::white_noise(len, 8);
  auto t = trace_for(len, c, 0.0);
  for (std::size_t l = 0; l < t.size(); ++l) t.frames[l].smoothed_ppm = 20.0 * std::sin(0.3 * static_cast<double>(l));
  const auto batch = dsp::istft(sro::compensate_sro(dsp::stft(mono(x), c), t)).channels[0];
  const auto stream = sro::compensate_signal(x, t, c);
  ASSERT_EQ(batch.size(), stream.size());
  for (std::size_t n = 0; n < len; ++n) EXPECT_NEAR(stream[n], batch[n], 1e-10);
}

TEST(Compensate, StepTraceIsContinuous) {
  // 0 ppm for 10 s, then 50 ppm: the compensated signal advances smoothly.
  dsp::StftConfig c;
  const std::size_t len = static_cast<std::size_t>(20 * kFs);
  const auto x = test::white_noise(len, 9);
  auto t = trace_for(len, c, 0.0);
  for (std::size_t l = 0; l < t.size(); ++l) {
    if (t.time_of(l) >= 10.0) t.frames[l].smoothed_ppm = 50.0;
  }
  const auto y = sro::compensate_signal(x, t, c);
  std::vector<double> drift;
  for (std::size_t s = 1; s < 19; ++s) {
    drift.push_back(test::measure_delay(x, y, s * static_cast<std::size_t>(kFs), static_cast<std::size_t>(kFs)));
  }
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(drift[i], 0.0, 0.05) << i;
  for (std::size_t i = 1; i < drift.size(); ++i) {
    // At most one second of drift (0.8 samples) between neighbouring blocks.
    EXPECT_LE(std::abs(drift[i] - drift[i - 1]), 0.8 + 0.1) << i;
    EXPECT_LE(drift[i], drift[i - 1] + 0.05) << "compensation advances, so the delay only decreases";
  }
  EXPECT_NEAR(drift.back(), -50e-6 * 8.0 * kFs, 0.5);
}

TEST(Trace, CsvRoundTrip) {
  auto t = sro::SroTrace::constant(12.5, 5, kFs, 2048, -2048.0);
  t.frames[0].raw_ppm = std::nan("");
  t.frames[2].active = false;
  t.frames[3].gcc_peak = 0.75;
  std::stringstream ss;
  sro::write_trace_csv(ss, t);
  const auto back = sro::read_trace_csv(ss, kFs, 2048);
  ASSERT_EQ(back.size(), t.size());
  EXPECT_DOUBLE_EQ(back.first_center, t.first_center);
  EXPECT_TRUE(std::isnan(back.frames[0].raw_ppm));
  for (std::size_t l = 0; l < t.size(); ++l) {
    EXPECT_EQ(back.frames[l].smoothed_ppm, t.frames[l].smoothed_ppm);
    EXPECT_EQ(back.frames[l].active, t.frames[l].active);
    EXPECT_EQ(back.frames[l].gcc_peak, t.frames[l].gcc_peak);
  }
  std::stringstream bad("nope\n");
  EXPECT_EQ(kind_of([&] { sro::read_trace_csv(bad, kFs, 2048); }), ErrorKind::kData);
}

TEST(Trace, DelayedShiftsFrames) {
  auto t = sro::SroTrace::constant(7.0, 4, kFs, 2048, 0.0);
  t.frames[0].smoothed_ppm = 1.0;
  const auto d = t.delayed(1);
  EXPECT_EQ(d.frames[0].smoothed_ppm, 0.0);
  EXPECT_EQ(d.frames[1].smoothed_ppm, 1.0);
  EXPECT_EQ(d.frames[3].smoothed_ppm, 7.0);
}

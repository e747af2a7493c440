#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "srosync/dsp/stft.hpp"
#include "srosync/error.hpp"
#include "srosync/estimator/activity.hpp"
#include "srosync/estimator/dwacd.hpp"
#include "srosync/sro/sro.hpp"

using namespace srosync;
using estimator::cplx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFs = 16000.0;

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

std::vector<cplx> ramp(std::size_t n, double beta) {
  std::vector<cplx> p(n / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) * beta / static_cast<double>(n));
  return p;
}

dsp::StftConfig default_stft() { return dsp::StftConfig{}; }

dsp::Spectrogram spec_of(std::vector<double> x) {
  return dsp::stft(TimeSignal::mono(std::move(x), kFs), default_stft());
}

}  // namespace

TEST(Activity, Examples) {
  estimator::ActivityDetector gate(40.0, 0.999);
  const std::vector<cplx> zero(16, 0.0);
  EXPECT_FALSE(gate.update(zero));
  EXPECT_TRUE(gate.update_energy(1.0));   // at the running peak
  EXPECT_FALSE(gate.update_energy(1e-6)); // -60 dB
  EXPECT_TRUE(gate.update_energy(1e-3));  // -30 dB
  EXPECT_FALSE(gate.update(zero));
  std::vector<cplx> f(16, cplx{0.5, 0.0});
  EXPECT_TRUE(gate.update(f));
  EXPECT_NEAR(gate.peak(), std::max(16 * 0.25, 0.999 * 0.999 * 0.999 * 0.999), 1e-12);
}

TEST(Activity, PeakDecays) {
  estimator::ActivityDetector gate(10.0, 0.5);
  EXPECT_TRUE(gate.update_energy(1.0));
  EXPECT_FALSE(gate.update_energy(0.04));  // peak decays to 0.5 first, floor 0.05
  EXPECT_TRUE(gate.update_energy(0.025));  // peak 0.25, on the floor counts as active
  EXPECT_FALSE(gate.update_energy(0.0124)); // peak 0.125, floor 0.0125
}

TEST(Coherence, SelfCoherenceIsOne) {
  estimator::CoherenceTracker t(64, 0.5);
  std::vector<cplx> g(64);
  for (int i = 0; i < 10; ++i) {
    const auto x = test::complex_noise(64, i);
    t.update(x, x, g);
  }
  for (const cplx& v : g) EXPECT_NEAR(std::abs(v - 1.0), 0.0, 1e-12);
}

TEST(Coherence, IndependentNoiseDecoheres) {
  estimator::CoherenceTracker t(257, 0.999);
  std::vector<cplx> g(257);
  for (int i = 0; i < 20000; ++i) t.update(test::complex_noise(257, 2 * i + 1), test::complex_noise(257, 2 * i + 2), g);
  for (const cplx& v : g) EXPECT_LE(std::abs(v), 0.1);
}

TEST(Coherence, DelayPhase) {
  const std::size_t tau = 5;
  const auto src = test::white_noise(200000 + tau, 3);
  const std::vector<double> x(src.begin() + tau, src.end());
  const std::vector<double> z(src.begin(), src.end() - tau);  // z[n] = x[n - tau]
  const auto sx = spec_of(x), sz = spec_of(z);
  estimator::CoherenceTracker t(sx.num_bins(), 0.5);
  std::vector<cplx> g(sx.num_bins());
  for (std::size_t l = 10; l < sx.num_frames() - 10; ++l) t.update(sz.frame(0, l), sx.frame(0, l), g);
  for (std::size_t k = 400; k < 3700; k += 13) {
    const double want = -kTwoPi * static_cast<double>(k * tau) / 8192.0;
    EXPECT_NEAR(std::remainder(std::arg(g[k]) - want, kTwoPi), 0.0, 0.05) << k;
  }
}

TEST(Coherence, BoundedAndZeroSafe) {
  estimator::CoherenceTracker t(33, 0.5);
  std::vector<cplx> g(33);
  for (int i = 0; i < 200; ++i) {
    auto z = test::complex_noise(33, 100 + i);
    auto x = test::complex_noise(33, 500 + i);
    for (std::size_t k = 0; k < 33; ++k) x[k] = 0.3 * x[k] + 0.7 * z[k] * std::polar(1e3, 0.1 * static_cast<double>(k));
    z[0] = 0.0;  // never any energy in bin 0 of z
    t.update(z, x, g);
    for (std::size_t k = 0; k < 33; ++k) ASSERT_LE(std::abs(g[k]), 1.0 + 1e-9);
    EXPECT_EQ(g[0], cplx(0.0, 0.0));
  }
}

TEST(Coherence, GainInvariance) {
  estimator::CoherenceTracker a(65, 0.5), b(65, 0.5);
  std::vector<cplx> ga(65), gb(65);
  for (int i = 0; i < 50; ++i) {
    const auto z = test::complex_noise(65, 10 + i);
    const auto x = test::complex_noise(65, 90 + i);
    std::vector<cplx> zs(z), xs(x);
    for (auto& v : zs) v *= 3.7;
    for (auto& v : xs) v *= cplx(-0.2, 0.05);
    a.update(z, x, ga);
    b.update(zs, xs, gb);
    for (std::size_t k = 0; k < 65; ++k) {
      EXPECT_NEAR(std::abs(ga[k]), std::abs(gb[k]), 1e-9);
    }
  }
}

TEST(Gcc, ConstructedRampsIntegerAndFractional) {
  estimator::GccSearch search(8192, 50, 1e-4);
  for (double beta : {0.0, 3.0, 2.4, -7.6, 49.3, -0.45}) {
    const auto p = ramp(8192, beta);
    const auto peak = search.find_peak(p);
    EXPECT_NEAR(peak.lag, beta, 0.01) << beta;
    EXPECT_EQ(peak.integer_lag, std::lround(beta)) << beta;
    EXPECT_NEAR(peak.peak, std::abs(search.evaluate(p, peak.lag)) / 8192.0, 1e-12);
  }
  EXPECT_NEAR(search.find_peak(ramp(8192, 3.0)).peak, 1.0, 1e-9);
}

TEST(Gcc, GoldenMatchesDenseGrid) {
  estimator::GccSearch search(8192, 50, 1e-4);
  for (double beta : {2.4, -7.6}) {
    auto p = ramp(8192, beta);
    // Non-flat magnitude so the peak is not symmetric by construction.
    for (std::size_t k = 0; k < p.size(); ++k) p[k] *= 1.0 + 0.5 * std::cos(0.002 * static_cast<double>(k));
    const auto peak = search.find_peak(p);
    double best = -1.0, at = 0.0;
    const double c = static_cast<double>(peak.integer_lag);
    for (double b = c - 0.5; b <= c + 0.5; b += 1e-4) {
      const double v = std::abs(search.evaluate(p, b));
      if (v > best) best = v, at = b;
    }
    EXPECT_NEAR(peak.lag, at, 1e-3) << beta;
  }
}

TEST(Gcc, EvaluateMatchesInverseFft) {
  estimator::GccSearch search(256, 20, 1e-4);
  const auto p = test::complex_noise(129, 4);
  dsp::RealFft fft(256);
  std::vector<double> t(256);
  fft.inverse(p, t);
  for (int b : {0, 1, 7, -3}) {
    const std::size_t idx = b < 0 ? 256 - static_cast<std::size_t>(-b) : static_cast<std::size_t>(b);
    EXPECT_NEAR(search.evaluate(p, b), 256.0 * t[idx], 1e-9);
  }
}

TEST(Dwacd, ConfigValidation) {
  estimator::DwacdConfig c;
  EXPECT_NO_THROW(c.validate());
  c.smoothing = 1.0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::kConfig);
  c = {};
  c.temporal_distance = 0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::kConfig);
  c = {};
  c.estimate_smoothing = 0.0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::kConfig);
}

TEST(Dwacd, ConstructedPhaseThroughStreamingPath) {
  // Gamma[k, l] = exp(j 2 pi k l beta0 / (L N)) gives P~ = exp(-j 2 pi k beta0 / N).
  estimator::DwacdConfig cfg;
  const double L = static_cast<double>(cfg.temporal_distance);
  for (double beta0 : {0.0, 3.0, 2.4, -7.6}) {
    estimator::DwacdEstimator est(cfg);
    std::vector<cplx> g(cfg.fft_size / 2 + 1);
    sro::SroTrace::Frame f;
    for (std::size_t l = 0; l < 60; ++l) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] = std::polar(1.0, kTwoPi * static_cast<double>(k * l) * beta0 / (L * 8192.0));
      }
      f = est.process_coherence(g, true);
      if (l + 1 < cfg.temporal_distance + cfg.warmup_extra) EXPECT_TRUE(std::isnan(f.raw_ppm)) << l;
    }
    const double want = -beta0 / (L * 2048.0) * 1e6;
    EXPECT_NEAR(f.raw_ppm, want, 0.01 / (L * 2048.0) * 1e6) << beta0;
    EXPECT_NEAR(f.smoothed_ppm, want, 0.01 / (L * 2048.0) * 1e6) << beta0;
  }
}

TEST(Dwacd, SignConventionOnDriftingCoherence) {
  // Z lags X by l N_h eps samples: Gamma phase -2 pi k l N_h eps / N.
  estimator::DwacdConfig cfg;
  const double eps = 50e-6;
  estimator::DwacdEstimator est(cfg);
  std::vector<cplx> g(cfg.fft_size / 2 + 1);
  sro::SroTrace::Frame f;
  for (std::size_t l = 0; l < 40; ++l) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) * static_cast<double>(l) * 2048.0 * eps / 8192.0);
    }
    f = est.process_coherence(g, true);
  }
  EXPECT_NEAR(f.raw_ppm, 50.0, 0.07);
  estimator::GccSearch search(8192, 50, 1e-4);
  EXPECT_LT(search.find_peak(est.phase_function()).lag, 0.0);
}

TEST(Dwacd, InactiveFramesHoldEstimate) {
  estimator::DwacdConfig cfg;
  estimator::DwacdEstimator est(cfg);
  std::vector<cplx> g(cfg.fft_size / 2 + 1);
  sro::SroTrace::Frame f;
  for (std::size_t l = 0; l < 30; ++l) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::polar(1.0, kTwoPi * static_cast<double>(k * l) * 2.0 / (8.0 * 8192.0));
    f = est.process_coherence(g, true);
  }
  const double held = f.smoothed_ppm;
  const std::size_t count = est.active_frames();
  for (int i = 0; i < 5; ++i) {
    const auto h = est.process_coherence(g, false);
    EXPECT_FALSE(h.active);
    EXPECT_TRUE(std::isnan(h.raw_ppm));
    EXPECT_EQ(h.smoothed_ppm, held);
  }
  EXPECT_EQ(est.active_frames(), count);
}

TEST(Dwacd, IdenticalSignalsGiveZero) {
  const auto x = spec_of(test::white_noise(static_cast<std::size_t>(20 * kFs), 5));
  const auto trace = estimator::run_dwacd(x, x, estimator::DwacdConfig{});
  std::size_t emitted = 0;
  for (const auto& f : trace.frames) {
    if (std::isnan(f.raw_ppm)) continue;
    ++emitted;
    EXPECT_NEAR(f.raw_ppm, 0.0, 1e-9);
    EXPECT_NEAR(f.smoothed_ppm, 0.0, 1e-9);
  }
  EXPECT_GT(emitted, 100u);
}

TEST(Dwacd, CleanInjectedOffset) {
  const std::size_t len = static_cast<std::size_t>(32 * kFs);
  const auto x = test::white_noise(len, 6);
  for (double ppm : {50.0, -30.0}) {
    const auto z = sro::apply_sro(TimeSignal::mono(x, kFs), sro::SroPpm(ppm)).channels[0];
    const auto trace = estimator::run_dwacd(spec_of(z), spec_of(x), estimator::DwacdConfig{});
    for (std::size_t l = 0; l < trace.size(); ++l) {
      if (trace.time_of(l) >= 30.0) {
        EXPECT_NEAR(trace.frames[l].smoothed_ppm, ppm, 0.5) << "frame " << l;
      }
    }
  }
}

TEST(Dwacd, GainInvariantTrace) {
  const std::size_t len = static_cast<std::size_t>(12 * kFs);
  const auto x = test::white_noise(len, 7);
  auto z = sro::apply_sro(TimeSignal::mono(x, kFs), sro::SroPpm(20.0)).channels[0];
  const auto ref = estimator::run_dwacd(spec_of(z), spec_of(x), estimator::DwacdConfig{});
  for (double& v : z) v *= -4.5;
  auto xs = x;
  for (double& v : xs) v *= 0.01;
  const auto scaled = estimator::run_dwacd(spec_of(z), spec_of(xs), estimator::DwacdConfig{});
  ASSERT_EQ(ref.size(), scaled.size());
  for (std::size_t l = 0; l < ref.size(); ++l) {
    EXPECT_EQ(std::isnan(ref.frames[l].raw_ppm), std::isnan(scaled.frames[l].raw_ppm));
    EXPECT_NEAR(ref.frames[l].smoothed_ppm, scaled.frames[l].smoothed_ppm, 1e-9);
  }
}

TEST(Dwacd, Errors) {
  const auto x = spec_of(test::white_noise(40000, 8));
  const auto y = spec_of(test::white_noise(50000, 9));
  EXPECT_EQ(kind_of([&] { estimator::run_dwacd(x, y, estimator::DwacdConfig{}); }), ErrorKind::kAlignment);
  estimator::DwacdConfig small;
  small.fft_size = 1024;
  EXPECT_EQ(kind_of([&] { estimator::run_dwacd(x, x, small); }), ErrorKind::kShape);
  estimator::DwacdEstimator est{estimator::DwacdConfig{}};
  std::vector<cplx> wrong(10);
  EXPECT_EQ(kind_of([&] { est.process(wrong, wrong); }), ErrorKind::kShape);
}

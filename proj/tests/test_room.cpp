#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "srosync/error.hpp"
#include "srosync/io/wav.hpp"
#include "srosync/room/room.hpp"

using namespace srosync;
using room::Vec3;

namespace {

constexpr double kFs = 16000.0;
const Vec3 kRoom{7.0, 7.0, 6.0};

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

std::size_t peak_index(const std::vector<double>& h) {
  std::size_t best = 0;
  for (std::size_t n = 1; n < h.size(); ++n) {
    if (std::abs(h[n]) > std::abs(h[best])) best = n;
  }
  return best;
}

std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(n + 1, h.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

room::SceneConfig quiet_scene() {
  auto cfg = room::SceneConfig::reference_scene();
  cfg.noise_level_db = -std::numeric_limits<double>::infinity();
  return cfg;
}

// Paper scene with 1 s of independent noise per loudspeaker.
TimeSignal short_playback(std::uint64_t seed, std::size_t len = 16000) {
  TimeSignal p(2, len, kFs);
  p.channels[0] = test::white_noise(len, seed);
  p.channels[1] = test::white_noise(len, seed + 1);
  return p;
}

}  // namespace

TEST(ImageSource, DirectPathAt160Samples) {
  const Vec3 src{1.5, 3.5, 3.0}, rcv{4.93, 3.5, 3.0};
  const auto h = room::image_source_rir(kRoom, 0.3, src, rcv, 4000, kFs);
  EXPECT_NEAR(static_cast<double>(peak_index(h)), 160.0, 1.0);
}

TEST(ImageSource, CoincidentSourceAndReceiver) {
  const Vec3 p{2.0, 3.0, 1.5};
  const auto h = room::image_source_rir(kRoom, 0.3, p, p, 4000, kFs);
  EXPECT_EQ(peak_index(h), 0u);
  double second = 0.0;
  for (std::size_t n = 40; n < h.size(); ++n) second = std::max(second, std::abs(h[n]));
  EXPECT_GT(std::abs(h[0]), 5.0 * second);
}

TEST(ImageSource, ReciprocalDelay) {
  const Vec3 a{1.2, 2.2, 1.1}, b{5.7, 4.1, 2.9};
  const auto hab = room::image_source_rir(kRoom, 0.3, a, b, 3000, kFs);
  const auto hba = room::image_source_rir(kRoom, 0.3, b, a, 3000, kFs);
  EXPECT_EQ(peak_index(hab), peak_index(hba));
  EXPECT_NEAR(static_cast<double>(peak_index(hab)), room::distance(a, b) / room::kSpeedOfSound * kFs, 1.0);
  double diff = 0.0, norm = 0.0;
  for (std::size_t n = 0; n < hab.size(); ++n) {
    diff += std::pow(hab[n] - hba[n], 2);
    norm += hab[n] * hab[n];
  }
  EXPECT_LT(diff / norm, 1e-20);
}

TEST(ImageSource, Rt60WithinTwentyPercent) {
  const auto cfg = quiet_scene();
  const double alpha = room::calibrated_absorption(kRoom, 0.3, kFs);
  const auto mics = cfg.mic_positions();
  const auto h = room::image_source_rir_alpha(kRoom, alpha, cfg.source_positions[0], mics[0],
                                              room::default_rir_length(cfg) + 4000, kFs);
  EXPECT_NEAR(room::measure_rt60(h, kFs), 0.3, 0.06);
  // The other source-receiver pair was not used for calibration.
  const auto h2 = room::image_source_rir_alpha(kRoom, alpha, cfg.source_positions[1], mics[2],
                                               room::default_rir_length(cfg) + 4000, kFs);
  EXPECT_NEAR(room::measure_rt60(h2, kFs), 0.3, 0.06);
}

TEST(ImageSource, Errors) {
  EXPECT_EQ(kind_of([] { room::image_source_rir(kRoom, 0.3, {7.5, 1, 1}, {1, 1, 1}, 100, kFs); }),
            ErrorKind::kGeometry);
  EXPECT_EQ(kind_of([] { room::image_source_rir(kRoom, 0.3, {1, 1, 1}, {1, -1, 1}, 100, kFs); }),
            ErrorKind::kGeometry);
  EXPECT_EQ(kind_of([] { room::sabine_absorption(kRoom, 0.02); }), ErrorKind::kDomain);
  EXPECT_EQ(kind_of([] { room::sabine_absorption(kRoom, -1.0); }), ErrorKind::kDomain);
  const double a = room::sabine_absorption(kRoom, 0.3);
  EXPECT_NEAR(a, 0.1611 * 294.0 / (2.0 * (49.0 + 42.0 + 42.0) * 0.3), 1e-12);
}

TEST(Convolve, MatchesDirectSum) {
  const auto x = test::white_noise(5000, 1);
  const auto h = test::white_noise(777, 2);
  const auto fast = room::convolve(x, h);
  const auto slow = direct_convolution(x, h);
  ASSERT_EQ(fast.size(), x.size());
  EXPECT_GE(test::snr_db(slow, fast, 0, x.size()), 200.0);
}

TEST(Scene, GeometryConventions) {
  const auto cfg = quiet_scene();
  const auto mics = cfg.mic_positions();
  ASSERT_EQ(mics.size(), 4u);
  EXPECT_NEAR(mics[0].x, 3.85, 1e-12);
  EXPECT_NEAR(mics[0].y, 3.35, 1e-12);
  EXPECT_NEAR(mics[1].y, 3.45, 1e-12);
  for (const auto& m : mics) {
    EXPECT_NEAR(room::distance(m, cfg.array_center), 0.10, 1e-12);
    EXPECT_EQ(m.z, 2.0);
  }
  const auto ears = cfg.ears();
  EXPECT_NEAR(room::distance(ears[0], ears[1]), 0.18, 1e-12);
  const Vec3 head{0.5 * (ears[0].x + ears[1].x), 0.5 * (ears[0].y + ears[1].y), ears[0].z};
  EXPECT_NEAR(room::distance(head, cfg.array_center), 1.5, 1e-12);
  // Facing the loudspeaker midpoint: the ear axis is perpendicular to it.
  const Vec3 mid{3.7, 3.45, head.z};
  const double fx = mid.x - head.x, fy = mid.y - head.y;
  EXPECT_NEAR(fx * (ears[0].x - ears[1].x) + fy * (ears[0].y - ears[1].y), 0.0, 1e-12);
  // Left ear is on the left when facing forward.
  EXPECT_GT(fx * (ears[0].y - head.y) - fy * (ears[0].x - head.x), 0.0);
}

TEST(Scene, ReferenceGeometryDirectDelays) {
  const auto cfg = quiet_scene();
  const auto rirs = room::generate_rirs(cfg);
  const auto mics = cfg.mic_positions();
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t m = 0; m < 4; ++m) {
      const double want = room::distance(cfg.source_positions[q], mics[m]) / room::kSpeedOfSound * kFs;
      EXPECT_NEAR(static_cast<double>(peak_index(rirs.mic(q, m))), want, 1.0) << q << "," << m;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const double want = room::distance(cfg.source_positions[q], cfg.ears()[i]) / room::kSpeedOfSound * kFs;
      EXPECT_NEAR(static_cast<double>(peak_index(rirs.ear(q, i))), want, 1.0);
    }
  }
  for (const auto& per_source : rirs.h) {
    for (const auto& h : per_source) {
      double e = 0.0;
      for (double v : h) e += v * v;
      EXPECT_TRUE(std::isfinite(e) && e > 0.0);
    }
  }
}

TEST(Scene, NoSroMatchesDirectConvolution) {
  const auto cfg = quiet_scene();
  const auto rirs = room::generate_rirs(cfg);
  const auto play = short_playback(3);
  const auto scene = room::synthesize_scene(cfg, play, rirs);
  for (std::size_t m = 0; m < 4; ++m) {
    auto want = direct_convolution(play.channels[0], rirs.mic(0, m));
    const auto other = direct_convolution(play.channels[1], rirs.mic(1, m));
    for (std::size_t n = 0; n < want.size(); ++n) want[n] += other[n];
    EXPECT_GE(test::snr_db(want, scene.mic.channels[m], 0, want.size()), 100.0) << m;
  }
}

TEST(Scene, SuperpositionWithSro) {
  auto cfg = quiet_scene();
  cfg.sro_ppm = {10.0, 10.0, -100.0};
  const auto rirs = room::generate_rirs(cfg);
  const auto both = short_playback(4, 24000);
  TimeSignal only1 = both, only2 = both;
  std::fill(only1.channels[1].begin(), only1.channels[1].end(), 0.0);
  std::fill(only2.channels[0].begin(), only2.channels[0].end(), 0.0);
  const auto s = room::synthesize_scene(cfg, both, rirs);
  const auto s1 = room::synthesize_scene(cfg, only1, rirs);
  const auto s2 = room::synthesize_scene(cfg, only2, rirs);
  double worst = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t n = 0; n < s.mic.length(); ++n) {
      worst = std::max(worst, std::abs(s.mic.channels[m][n] - s1.mic.channels[m][n] - s2.mic.channels[m][n]));
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t n = 0; n < s.ears.length(); ++n) {
      worst = std::max(worst, std::abs(s.ears.channels[i][n] - s1.ears.channels[i][n] - s2.ears.channels[i][n]));
    }
  }
  EXPECT_LE(worst, 1e-9);
  // A silent loudspeaker contributes nothing: solo 1 equals loudspeaker 1's render.
  const auto r1 = room::render_source(cfg, rirs, 0, both.channels[0]);
  for (std::size_t n = 0; n < s1.mic.length(); n += 97) EXPECT_NEAR(s1.mic.channels[2][n], r1.mic.channels[2][n], 1e-12);
}

TEST(Scene, SroAppliedPerPath) {
  auto cfg = quiet_scene();
  cfg.sro_ppm = {20.0, 30.0, -50.0};
  EXPECT_EQ(cfg.mic_path_sro(1).ppm(), 50.0);
  EXPECT_EQ(cfg.mic_path_sro(2).ppm(), -30.0);
  EXPECT_EQ(cfg.ear_path_sro(2).ppm(), -50.0);
  // Direct ear rendering: left ear = apply_sro(x_1, eps_1).
  const auto rirs = room::generate_rirs(cfg);
  const auto play = short_playback(5, 20000);
  const auto s = room::synthesize_scene(cfg, play, rirs);
  const auto want = sro::apply_sro(TimeSignal::mono(play.channels[0], kFs), sro::SroPpm(30.0)).channels[0];
  for (std::size_t n = 0; n < want.size(); n += 101) EXPECT_NEAR(s.ears.channels[0][n], want[n], 1e-12);
  // Mic path with playback injection: apply_sro(x_1, eps_1 + eps_0) then the RIR.
  TimeSignal solo = play;
  std::fill(solo.channels[1].begin(), solo.channels[1].end(), 0.0);
  const auto s1 = room::synthesize_scene(cfg, solo, rirs);
  const auto shifted = sro::apply_sro(TimeSignal::mono(play.channels[0], kFs), sro::SroPpm(50.0)).channels[0];
  const auto mic0 = room::convolve(shifted, rirs.mic(0, 0));
  EXPECT_GE(test::snr_db(mic0, s1.mic.channels[0], 0, mic0.size()), 200.0);
}

TEST(Scene, NoiseLevel) {
  auto cfg = quiet_scene();
  const auto rirs = room::generate_rirs(cfg);
  const auto play = short_playback(6, 48000);
  const auto clean = room::synthesize_scene(cfg, play, rirs);
  for (double level : {-40.0, -20.0, -10.0}) {
    cfg.noise_level_db = level;
    const auto noisy = room::synthesize_scene(cfg, play, rirs);
    double s = 0.0, e = 0.0;
    for (std::size_t m = 0; m < 4; ++m) {
      for (std::size_t n = 0; n < clean.mic.length(); ++n) {
        s += clean.mic.channels[m][n] * clean.mic.channels[m][n];
        e += std::pow(noisy.mic.channels[m][n] - clean.mic.channels[m][n], 2);
      }
    }
    EXPECT_NEAR(10.0 * std::log10(s / e), -level, 0.5) << level;
  }
  // Fixed seed: bit-identical; different seed: different noise.
  cfg.noise_level_db = -30.0;
  const auto a = room::synthesize_scene(cfg, play, rirs);
  const auto b = room::synthesize_scene(cfg, play, rirs);
  EXPECT_EQ(a.mic.channels, b.mic.channels);
  cfg.noise_seed = 99;
  const auto c = room::synthesize_scene(cfg, play, rirs);
  EXPECT_NE(a.mic.channels, c.mic.channels);
}

TEST(Scene, ValidationErrors) {
  auto cfg = quiet_scene();
  cfg.source_positions[1] = {7.2, 3.5, 2.1};
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kGeometry);
  cfg = quiet_scene();
  cfg.array_center = {0.05, 3.0, 2.0};
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kGeometry);
  cfg = quiet_scene();
  cfg.mic_count = 1;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kConfig);
  cfg = quiet_scene();
  cfg.rt60 = 0.0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kDomain);
  cfg = quiet_scene();
  cfg.sro_ppm = {300.0, 300.0, 0.0};
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::kDomain);
  cfg = quiet_scene();
  EXPECT_EQ(kind_of([&] { room::synthesize_scene(cfg, TimeSignal(3, 100, kFs)); }), ErrorKind::kShape);
}

TEST(Scene, ExternalRirs) {
  const auto dir = std::filesystem::temp_directory_path() / "srosync_ext_rirs";
  std::filesystem::create_directories(dir);
  // Source 1 from raw float32 files, source 2 from a multi-channel WAV.
  std::vector<std::vector<double>> want(4);
  for (std::size_t r = 0; r < 4; ++r) {
    want[r] = test::white_noise(50 + 10 * r, 10 + r, 0.1);
    std::ofstream f(dir / ("rir_s1_r" + std::to_string(r) + ".f32"), std::ios::binary);
    for (double v : want[r]) {
      const float s = static_cast<float>(v);
      f.write(reinterpret_cast<const char*>(&s), sizeof s);
    }
  }
  TimeSignal wav(4, 64, kFs);
  for (std::size_t r = 0; r < 4; ++r) wav.channels[r] = test::white_noise(64, 20 + r, 0.1);
  io::write_wav(dir / "rir_s2.wav", wav);
  const auto set = room::load_external_rirs(dir, 2, kFs);
  EXPECT_EQ(set.length, 80u);
  EXPECT_EQ(set.num_receivers(), 4u);
  EXPECT_NEAR(set.ear(0, 1)[79], static_cast<float>(want[3][79]), 1e-7);
  EXPECT_EQ(set.mic(0, 0)[60], 0.0);  // zero-padded to the common length
  EXPECT_NEAR(set.mic(1, 1)[10], wav.channels[1][10], 1e-7);
  std::filesystem::remove(dir / "rir_s1_r3.f32");
  std::filesystem::remove(dir / "rir_s2.wav");
  EXPECT_ANY_THROW(room::load_external_rirs(dir, 2, kFs));
  std::filesystem::remove_all(dir);
}

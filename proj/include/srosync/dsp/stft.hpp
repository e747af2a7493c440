#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "srosync/signal.hpp"

namespace srosync::dsp {

using cplx = std::complex<double>;

enum class WindowType { kHann, kSqrtHann };

std::string to_string(WindowType w);
WindowType window_from_string(const std::string& name);

struct StftConfig {
  std::size_t window_size = 8192;  // N_w
  std::size_t hop_size = 2048;     // N_h
  WindowType window = WindowType::kHann;
  std::size_t fft_size = 8192;     // >= window_size, zero-padded above N_w
  double sample_rate = 16000.0;

  std::size_t num_bins() const { return fft_size / 2 + 1; }
  // Zero padding applied before the first sample (and at least as much after
  // the last) so every sample is covered by N_w/N_h frames.
  std::size_t edge_padding() const { return window_size - hop_size; }

  // Throws kConfig on a violated invariant.
  void validate() const;
  bool operator==(const StftConfig&) const = default;
};

// Periodic analysis window of length N_w.
std::vector<double> analysis_window(const StftConfig& config);

// Synthesis window g such that sum_r w[n - rH] g[n - rH] = 1 for every n.
std::vector<double> synthesis_window(const StftConfig& config);

// Worst deviation of sum_r w[n - rH] g[n - rH] from 1 over one hop.
double cola_deviation(const StftConfig& config);

// Complex STFT, indexed [channel][frame][bin], one-sided.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t num_channels, std::size_t num_frames, StftConfig config,
              std::ptrdiff_t start_offset, std::size_t source_length);

  std::size_t num_channels() const { return num_channels_; }
  std::size_t num_frames() const { return num_frames_; }
  std::size_t num_bins() const { return config_.num_bins(); }
  const StftConfig& config() const { return config_; }
  // Sample index (in the source signal) where frame 0 begins; negative when padded.
  std::ptrdiff_t start_offset() const { return start_offset_; }
  std::size_t source_length() const { return source_length_; }

  // Source-signal sample at the centre of frame l.
  double frame_center(std::size_t frame) const;

  std::span<cplx> frame(std::size_t channel, std::size_t frame);
  std::span<const cplx> frame(std::size_t channel, std::size_t frame) const;

  cplx& at(std::size_t channel, std::size_t frame, std::size_t bin) {
    return data_[index(channel, frame) + bin];
  }
  const cplx& at(std::size_t channel, std::size_t frame, std::size_t bin) const {
    return data_[index(channel, frame) + bin];
  }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  // New single-channel spectrogram holding a copy of `channel`.
  Spectrogram extract_channel(std::size_t channel) const;

 private:
  std::size_t index(std::size_t channel, std::size_t frame) const {
    return (channel * num_frames_ + frame) * config_.num_bins();
  }

  std::size_t num_channels_ = 0;
  std::size_t num_frames_ = 0;
  StftConfig config_{};
  std::ptrdiff_t start_offset_ = 0;
  std::size_t source_length_ = 0;
  std::vector<cplx> data_;
};

// Frame-at-a-time analysis with the same framing as stft(), for passes that
// cannot hold a whole spectrogram in memory. Not thread-safe (owns scratch).
class FrameAnalyzer {
 public:
  FrameAnalyzer(const StftConfig& config, std::size_t source_length);

  std::size_t num_frames() const { return num_frames_; }
  std::ptrdiff_t start_offset() const { return start_offset_; }
  double frame_center(std::size_t frame) const;

  void analyze(std::span<const double> x, std::size_t frame, std::span<cplx> out) const;

 private:
  StftConfig config_;
  std::size_t length_;
  std::size_t num_frames_;
  std::ptrdiff_t start_offset_;
  std::vector<double> window_;
  mutable std::vector<double> buf_;
  std::shared_ptr<const class RealFft> fft_;
};

// Weighted overlap-add counterpart of FrameAnalyzer.
class FrameSynthesizer {
 public:
  FrameSynthesizer(const StftConfig& config, std::size_t source_length);

  // y += g * IFFT(frame) at the frame's position.
  void add(std::span<const cplx> frame, std::size_t index, std::span<double> y) const;

 private:
  StftConfig config_;
  std::size_t length_;
  std::ptrdiff_t start_offset_;
  std::vector<double> window_;
  mutable std::vector<double> buf_;
  std::shared_ptr<const class RealFft> fft_;
};

// Frames the signal after padding by edge_padding() in front and enough zeros
// behind for the last partial hop. Throws kEmptyInput if shorter than N_w and
// kData on non-finite samples.
Spectrogram stft(const TimeSignal& signal, const StftConfig& config);

// Weighted overlap-add inverse; returns source_length() samples per channel.
TimeSignal istft(const Spectrogram& spec);

// Number of frames stft() produces for a signal of `length` samples.
std::size_t frame_count(std::size_t length, const StftConfig& config);

}  // namespace srosync::dsp

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace srosync {

// Multi-channel sampled audio at a nominal rate. All channels share one length.
struct TimeSignal {
  std::vector<std::vector<double>> channels;
  double sample_rate = 16000.0;

  TimeSignal() = default;
  TimeSignal(std::size_t num_channels, std::size_t length, double rate)
      : channels(num_channels, std::vector<double>(length, 0.0)), sample_rate(rate) {}

  static TimeSignal mono(std::vector<double> samples, double rate) {
    TimeSignal s;
    s.channels.push_back(std::move(samples));
    s.sample_rate = rate;
    return s;
  }

  std::size_t num_channels() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }

  std::span<double> channel(std::size_t c) { return channels[c]; }
  std::span<const double> channel(std::size_t c) const { return channels[c]; }
};

}  // namespace srosync

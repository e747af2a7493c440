#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <vector>

namespace srosync::sro {

// Per-frame SRO estimates of one loudspeaker path, frame-aligned with the STFT
// used by the estimator.
struct SroTrace {
  struct Frame {
    double raw_ppm = std::numeric_limits<double>::quiet_NaN();  // NaN until ready
    double smoothed_ppm = 0.0;
    bool active = false;
    double gcc_peak = 0.0;
  };

  double sample_rate = 16000.0;
  std::size_t hop_size = 2048;
  double first_center = 0.0;  // source sample at the centre of frame 0
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  double time_of(std::size_t frame) const {
    return (first_center + static_cast<double>(frame * hop_size)) / sample_rate;
  }

  // Trace holding the same smoothed value on every frame.
  static SroTrace constant(double ppm, std::size_t num_frames, double sample_rate,
                           std::size_t hop_size, double first_center);

  // Copy delayed by `frames` frames; the first `frames` entries hold 0 ppm.
  SroTrace delayed(std::size_t frames) const;
};

// CSV: frame_index,time_s,raw_ppm,smoothed_ppm,active,gcc_peak
void write_trace_csv(std::ostream& out, const SroTrace& trace);
SroTrace read_trace_csv(std::istream& in, double sample_rate, std::size_t hop_size);

}  // namespace srosync::sro

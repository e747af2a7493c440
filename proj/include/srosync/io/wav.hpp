#pragma once

#include <filesystem>

#include "srosync/signal.hpp"

namespace srosync::io {

// RIFF/WAVE, IEEE float32, interleaved channels.
void write_wav(const std::filesystem::path& path, const TimeSignal& signal);

// Reads float32 or 16/24/32-bit PCM WAV into doubles in [-1, 1).
TimeSignal read_wav(const std::filesystem::path& path);

// Raw little-endian float32 samples, single channel.
std::vector<double> read_raw_f32(const std::filesystem::path& path);

}  // namespace srosync::io

#include "srosync/io/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "srosync/error.hpp"

namespace srosync::io {

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

void write_wav(const std::filesystem::path& path, const TimeSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const auto channels = static_cast<std::uint16_t>(signal.num_channels());
  const auto frames = static_cast<std::uint32_t>(signal.length());
  const auto rate = static_cast<std::uint32_t>(signal.sample_rate);
  const std::uint32_t data_bytes = frames * channels * 4u;

  out.write("RIFF", 4);
  put<std::uint32_t>(out, 4 + (8 + 18) + (8 + 4) + (8 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 18);
  put<std::uint16_t>(out, 3);  // WAVE_FORMAT_IEEE_FLOAT
  put<std::uint16_t>(out, channels);
  put<std::uint32_t>(out, rate);
  put<std::uint32_t>(out, rate * channels * 4u);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4u));
  put<std::uint16_t>(out, 32);
  put<std::uint16_t>(out, 0);
  out.write("fact", 4);
  put<std::uint32_t>(out, 4);
  put<std::uint32_t>(out, frames);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  std::vector<float> block(channels);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) block[c] = static_cast<float>(signal.channels[c][n]);
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

TimeSignal read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kData, path.string() + " is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    if (pos + 8 + size > bytes.size()) break;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = get_u16(chunk + 8);
      channels = get_u16(chunk + 10);
      rate = get_u32(chunk + 12);
      bits = get_u16(chunk + 22);
      if (format == 0xFFFE && size >= 40) format = get_u16(chunk + 32);  // extensible
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1u);
  }
  if (!data || channels == 0 || rate == 0) {
    throw Error(ErrorKind::kData, path.string() + ": missing fmt or data chunk");
  }
  const std::size_t width = bits / 8;
  const bool is_float = format == 3 && bits == 32;
  const bool is_pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  if (!is_float && !is_pcm) {
    throw Error(ErrorKind::kData, path.string() + ": unsupported sample format");
  }
  const std::size_t frames = data_size / (width * channels);
  TimeSignal sig(channels, frames, static_cast<double>(rate));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (n * channels + c) * width;
      double v = 0.0;
      if (is_float) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(get_u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(get_u32(p)) / 2147483648.0;
      }
      sig.channels[c][n] = v;
    }
  }
  return sig;
}

std::vector<double> read_raw_f32(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorKind::kData, path.string() + ": size is not a multiple of 4 bytes");
  }
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    out[i] = f;
  }
  return out;
}

}  // namespace srosync::io

#include "srosync/sro/trace.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "srosync/error.hpp"

namespace srosync::sro {

SroTrace SroTrace::constant(double ppm, std::size_t num_frames, double sample_rate,
                            std::size_t hop_size, double first_center) {
  SroTrace t;
  t.sample_rate = sample_rate;
  t.hop_size = hop_size;
  t.first_center = first_center;
  t.frames.resize(num_frames);
  for (auto& f : t.frames) {
    f.raw_ppm = ppm;
    f.smoothed_ppm = ppm;
    f.active = true;
  }
  return t;
}

SroTrace SroTrace::delayed(std::size_t frames_delay) const {
  SroTrace out = *this;
  for (std::size_t l = 0; l < frames.size(); ++l) {
    out.frames[l] = l >= frames_delay ? frames[l - frames_delay] : Frame{};
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, const SroTrace& trace) {
  out << "frame_index,time_s,raw_ppm,smoothed_ppm,active,gcc_peak\n";
  for (std::size_t l = 0; l < trace.frames.size(); ++l) {
    const auto& f = trace.frames[l];
    out << l << ',' << fmt(trace.time_of(l)) << ',' << fmt(f.raw_ppm) << ','
        << fmt(f.smoothed_ppm) << ',' << (f.active ? 1 : 0) << ',' << fmt(f.gcc_peak) << '\n';
  }
}

SroTrace read_trace_csv(std::istream& in, double sample_rate, std::size_t hop_size) {
  std::string line;
  if (!std::getline(in, line) || line != "frame_index,time_s,raw_ppm,smoothed_ppm,active,gcc_peak") {
    throw Error(ErrorKind::kData, "SRO trace CSV: missing or unexpected header");
  }
  SroTrace trace;
  trace.sample_rate = sample_rate;
  trace.hop_size = hop_size;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[6];
    for (auto& c : cell) {
      if (!std::getline(ss, c, ',')) {
        throw Error(ErrorKind::kData, "SRO trace CSV: short row " + std::to_string(row));
      }
    }
    if (std::stoull(cell[0]) != row) {
      throw Error(ErrorKind::kData, "SRO trace CSV: frames out of order at row " +
                                        std::to_string(row));
    }
    if (row == 0) trace.first_center = std::strtod(cell[1].c_str(), nullptr) * sample_rate;
    SroTrace::Frame f;
    f.raw_ppm = std::strtod(cell[2].c_str(), nullptr);
    f.smoothed_ppm = std::strtod(cell[3].c_str(), nullptr);
    f.active = cell[4] == "1";
    f.gcc_peak = std::strtod(cell[5].c_str(), nullptr);
    trace.frames.push_back(f);
    ++row;
  }
  return trace;
}

}  // namespace srosync::sro

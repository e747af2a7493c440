#include "srosync/dsp/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srosync/dsp/fft.hpp"
#include "srosync/error.hpp"

namespace srosync::dsp {

std::string to_string(WindowType w) {
  return w == WindowType::kHann ? "hann" : "sqrt_hann";
}

WindowType window_from_string(const std::string& name) {
  if (name == "hann") return WindowType::kHann;
  if (name == "sqrt_hann") return WindowType::kSqrtHann;
  throw Error(ErrorKind::kConfig, "unknown window '" + name + "'");
}

namespace {

std::vector<double> window_overlap_sum(const std::vector<double>& w, const std::vector<double>& g,
                                       std::size_t hop) {
  std::vector<double> sum(hop, 0.0);
  for (std::size_t n = 0; n < w.size(); ++n) sum[n % hop] += w[n] * g[n];
  return sum;
}

}  // namespace

void StftConfig::validate() const {
  if (window_size == 0 || hop_size == 0) throw Error(ErrorKind::kConfig, "N_w and N_h must be > 0");
  if (window_size % hop_size != 0) {
    throw Error(ErrorKind::kConfig, "hop size " + std::to_string(hop_size) +
                                        " does not divide window size " +
                                        std::to_string(window_size));
  }
  if (fft_size < window_size) {
    throw Error(ErrorKind::kConfig, "fft_size must be >= window size");
  }
  if (fft_size % 2 != 0) throw Error(ErrorKind::kConfig, "fft_size must be even");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw Error(ErrorKind::kConfig, "sample_rate must be positive");
  }
  const auto w = analysis_window(*this);
  const auto sum = window_overlap_sum(w, w, hop_size);
  if (*std::min_element(sum.begin(), sum.end()) < 1e-12) {
    throw Error(ErrorKind::kConfig, "window/hop pair leaves samples uncovered");
  }
}

std::vector<double> analysis_window(const StftConfig& config) {
  const std::size_t n = config.window_size;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                             static_cast<double>(n));
    w[i] = config.window == WindowType::kHann ? hann : std::sqrt(hann);
  }
  return w;
}

std::vector<double> synthesis_window(const StftConfig& config) {
  const auto w = analysis_window(config);
  const auto sum = window_overlap_sum(w, w, config.hop_size);
  std::vector<double> g(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) g[n] = w[n] / sum[n % config.hop_size];
  return g;
}

double cola_deviation(const StftConfig& config) {
  const auto w = analysis_window(config);
  const auto g = synthesis_window(config);
  const auto sum = window_overlap_sum(w, g, config.hop_size);
  double dev = 0.0;
  for (double s : sum) dev = std::max(dev, std::abs(s - 1.0));
  return dev;
}

Spectrogram::Spectrogram(std::size_t num_channels, std::size_t num_frames, StftConfig config,
                         std::ptrdiff_t start_offset, std::size_t source_length)
    : num_channels_(num_channels),
      num_frames_(num_frames),
      config_(config),
      start_offset_(start_offset),
      source_length_(source_length),
      data_(num_channels * num_frames * config.num_bins()) {}

double Spectrogram::frame_center(std::size_t frame) const {
  return static_cast<double>(start_offset_) +
         static_cast<double>(frame * config_.hop_size) +
         static_cast<double>(config_.window_size) / 2.0;
}

std::span<cplx> Spectrogram::frame(std::size_t channel, std::size_t frame) {
  return std::span<cplx>(data_).subspan(index(channel, frame), config_.num_bins());
}

std::span<const cplx> Spectrogram::frame(std::size_t channel, std::size_t frame) const {
  return std::span<const cplx>(data_).subspan(index(channel, frame), config_.num_bins());
}

Spectrogram Spectrogram::extract_channel(std::size_t channel) const {
  Spectrogram out(1, num_frames_, config_, start_offset_, source_length_);
  for (std::size_t l = 0; l < num_frames_; ++l) {
    auto src = frame(channel, l);
    std::copy(src.begin(), src.end(), out.frame(0, l).begin());
  }
  return out;
}

std::size_t frame_count(std::size_t length, const StftConfig& config) {
  const std::size_t h = config.hop_size;
  const std::size_t pad_front = config.edge_padding();
  const std::size_t pad_back = config.edge_padding() + (h - length % h) % h;
  const std::size_t padded = length + pad_front + pad_back;
  return (padded - config.window_size) / h + 1;
}

FrameAnalyzer::FrameAnalyzer(const StftConfig& config, std::size_t source_length)
    : config_(config),
      length_(source_length),
      num_frames_(frame_count(source_length, config)),
      start_offset_(-static_cast<std::ptrdiff_t>(config.edge_padding())),
      window_(analysis_window(config)),
      buf_(config.fft_size),
      fft_(std::make_shared<RealFft>(config.fft_size)) {}

double FrameAnalyzer::frame_center(std::size_t frame) const {
  return static_cast<double>(start_offset_) + static_cast<double>(frame * config_.hop_size) +
         static_cast<double>(config_.window_size) / 2.0;
}

void FrameAnalyzer::analyze(std::span<const double> x, std::size_t frame,
                            std::span<cplx> out) const {
  std::fill(buf_.begin(), buf_.end(), 0.0);
  const std::ptrdiff_t begin = start_offset_ + static_cast<std::ptrdiff_t>(frame * config_.hop_size);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(std::min(length_, x.size()));
  const std::ptrdiff_t n0 = std::max<std::ptrdiff_t>(0, -begin);
  const std::ptrdiff_t n1 =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(config_.window_size), len - begin);
  for (std::ptrdiff_t n = n0; n < n1; ++n) buf_[n] = window_[n] * x[begin + n];
  fft_->forward(buf_, out);
}

FrameSynthesizer::FrameSynthesizer(const StftConfig& config, std::size_t source_length)
    : config_(config),
      length_(source_length),
      start_offset_(-static_cast<std::ptrdiff_t>(config.edge_padding())),
      window_(synthesis_window(config)),
      buf_(config.fft_size),
      fft_(std::make_shared<RealFft>(config.fft_size)) {}

void FrameSynthesizer::add(std::span<const cplx> frame, std::size_t index,
                           std::span<double> y) const {
  fft_->inverse(frame, buf_);
  const std::ptrdiff_t begin = start_offset_ + static_cast<std::ptrdiff_t>(index * config_.hop_size);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(std::min(length_, y.size()));
  const std::ptrdiff_t n0 = std::max<std::ptrdiff_t>(0, -begin);
  const std::ptrdiff_t n1 =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(config_.window_size), len - begin);
  for (std::ptrdiff_t n = n0; n < n1; ++n) y[begin + n] += window_[n] * buf_[n];
}

Spectrogram stft(const TimeSignal& signal, const StftConfig& config) {
  config.validate();
  if (signal.num_channels() == 0) throw Error(ErrorKind::kEmptyInput, "signal has no channels");
  const std::size_t len = signal.length();
  for (const auto& ch : signal.channels) {
    if (ch.size() != len) throw Error(ErrorKind::kShape, "channels differ in length");
  }
  if (len < config.window_size) {
    throw Error(ErrorKind::kEmptyInput, "signal of " + std::to_string(len) +
                                            " samples is shorter than one window (" +
                                            std::to_string(config.window_size) + ")");
  }
  for (const auto& ch : signal.channels) {
    for (double v : ch) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite sample in STFT input");
    }
  }

  const FrameAnalyzer analyzer(config, len);
  Spectrogram spec(signal.num_channels(), analyzer.num_frames(), config, analyzer.start_offset(),
                   len);
  for (std::size_t c = 0; c < signal.num_channels(); ++c) {
    for (std::size_t l = 0; l < analyzer.num_frames(); ++l) {
      analyzer.analyze(signal.channels[c], l, spec.frame(c, l));
    }
  }
  return spec;
}

TimeSignal istft(const Spectrogram& spec) {
  const StftConfig& config = spec.config();
  config.validate();
  const std::size_t len = spec.source_length();
  if (spec.num_frames() != frame_count(len, config) ||
      spec.start_offset() != -static_cast<std::ptrdiff_t>(config.edge_padding())) {
    throw Error(ErrorKind::kConfig, "spectrogram framing inconsistent with its source length");
  }
  TimeSignal out(spec.num_channels(), len, config.sample_rate);
  const FrameSynthesizer synth(config, len);
  for (std::size_t c = 0; c < spec.num_channels(); ++c) {
    for (std::size_t l = 0; l < spec.num_frames(); ++l) {
      synth.add(spec.frame(c, l), l, out.channels[c]);
    }
  }
  return out;
}

}  // namespace srosync::dsp

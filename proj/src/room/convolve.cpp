#include <algorithm>
#include <bit>

#include "srosync/dsp/fft.hpp"
#include "srosync/room/room.hpp"
#include "srosync/simd/kernels.hpp"

namespace srosync::room {

std::vector<double> convolve(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  if (x.empty() || h.empty()) return y;

  // Short filters: direct form.
  if (h.size() <= 32) {
    const auto& k = simd::active_kernels();
    for (std::size_t j = 0; j < h.size() && j < x.size(); ++j) {
      k.axpy(std::span<double>(y).subspan(j), h[j], x.first(x.size() - j));
    }
    return y;
  }

  const std::size_t fft_len = std::bit_ceil(std::max<std::size_t>(4 * h.size(), 4096));
  const std::size_t block = fft_len - h.size() + 1;
  const dsp::RealFft fft(fft_len);
  std::vector<double> buf(fft_len, 0.0);
  std::vector<dsp::cplx> hspec(fft.num_bins()), xspec(fft.num_bins());
  std::copy(h.begin(), h.end(), buf.begin());
  fft.forward(buf, hspec);
  const auto& kernels = simd::active_kernels();

  for (std::size_t start = 0; start < x.size(); start += block) {
    const std::size_t count = std::min(block, x.size() - start);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), count, buf.begin());
    fft.forward(buf, xspec);
    kernels.complex_multiply(xspec, hspec);
    fft.inverse(xspec, buf);
    const std::size_t out_count = std::min(fft_len, x.size() - start);
    kernels.axpy(std::span<double>(y).subspan(start, out_count), 1.0,
                 std::span<const double>(buf).first(out_count));
  }
  return y;
}

}  // namespace srosync::room

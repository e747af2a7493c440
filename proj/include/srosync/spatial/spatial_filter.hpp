#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "srosync/dsp/stft.hpp"

namespace srosync::spatial {

using cplx = std::complex<double>;

// One relative transfer function per bin for a single loudspeaker, normalised
// to the reference microphone 0.
struct RtfColumn {
  std::size_t num_bins = 0;
  std::size_t num_mics = 0;
  std::vector<cplx> a;            // [bin * num_mics + mic]
  std::vector<bool> degenerate;   // per bin; a is all-ones there
  std::size_t frames_used = 0;

  cplx at(std::size_t bin, std::size_t mic) const { return a[bin * num_mics + mic]; }
};

// A[k] = [a_1, a_2], M x 2 per bin.
struct RtfMatrix {
  std::size_t num_bins = 0;
  std::size_t num_mics = 0;
  std::vector<cplx> data;         // [(bin * 2 + column) * num_mics + mic]
  std::vector<bool> degenerate;   // [bin], either column degenerate

  static RtfMatrix from_columns(const RtfColumn& first, const RtfColumn& second);

  cplx& at(std::size_t bin, std::size_t column, std::size_t mic) {
    return data[(bin * 2 + column) * num_mics + mic];
  }
  cplx at(std::size_t bin, std::size_t column, std::size_t mic) const {
    return data[(bin * 2 + column) * num_mics + mic];
  }
};

struct OracleRtfOptions {
  double degenerate_floor = 1e-12;  // on |E{Y_0 X*}|
  double activity_threshold_db = 40.0;
  double activity_peak_decay = 0.999;
};

// a_q = E{z X*} / E{z_0 X*} averaged over frames [frame_begin, frame_end) in
// which the playback frame is active. DC, Nyquist and bins whose reference
// cross-PSD falls below the floor are flagged degenerate with a = 1.
RtfColumn estimate_oracle_rtf(const dsp::Spectrogram& solo_mics, const dsp::Spectrogram& playback,
                              std::size_t frame_begin, std::size_t frame_end,
                              const OracleRtfOptions& options = {});
RtfColumn estimate_oracle_rtf(const dsp::Spectrogram& solo_mics, const dsp::Spectrogram& playback,
                              const OracleRtfOptions& options = {});

struct BeamformerWeights {
  std::size_t num_bins = 0;
  std::size_t num_mics = 0;
  std::size_t target = 0;          // column index of the source of interest
  double diagonal_loading = 1e-6;
  std::vector<std::vector<cplx>> w;  // [mic][bin]
  std::vector<double> residual;      // ||w^H A - g^T|| per bin
  std::vector<bool> passthrough;     // degenerate bins use the reference mic

  cplx at(std::size_t bin, std::size_t mic) const { return w[mic][bin]; }
};

// w_q = A (A^H A + alpha I)^{-1} g_q per bin, with the 2x2 inverse in closed
// form. Throws kInput on non-finite A and kDomain unless alpha >= 0.
BeamformerWeights lcmv_weights(const RtfMatrix& a, std::size_t target, double alpha);

// Z[k, l] = w^H[k] y[k, l]. Throws kShape on mismatched mic or bin counts.
dsp::Spectrogram beamform(const BeamformerWeights& w, const dsp::Spectrogram& mics);

// Text table: header line then "column bin mic re im" rows.
void write_rtf_table(std::ostream& out, const RtfMatrix& a);
RtfMatrix read_rtf_table(std::istream& in);

}  // namespace srosync::spatial

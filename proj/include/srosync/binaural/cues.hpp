#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "srosync/signal.hpp"

namespace srosync::binaural {

struct CueOptions {
  std::size_t num_bands = 24;
  double f_lo = 100.0;
  double f_hi = 7500.0;
  double block_len = 1.0;        // s
  double block_overlap = 0.5;    // fraction
  std::size_t frame_size = 512;  // STFT for the coherence
  std::size_t frame_hop = 256;
  double itd_max = 1e-3;         // s, search window
  double reliability_floor = 0.1;
  double silence_floor = 1e-12;  // mean band power below which a block is silent

  void validate() const;
};

// Interaural cues indexed [band][block], stored band-major.
struct CueMap {
  std::vector<double> band_centers;  // Hz
  std::vector<double> block_times;   // s, block centres
  std::vector<double> ic;
  std::vector<double> itd;           // s
  std::vector<std::uint8_t> ic_defined;
  std::vector<std::uint8_t> itd_reliable;

  std::size_t num_bands() const { return band_centers.size(); }
  std::size_t num_blocks() const { return block_times.size(); }
  std::size_t index(std::size_t band, std::size_t block) const {
    return band * block_times.size() + block;
  }
  double ic_at(std::size_t band, std::size_t block) const { return ic[index(band, block)]; }
  double itd_at(std::size_t band, std::size_t block) const { return itd[index(band, block)]; }
  bool ic_ok(std::size_t band, std::size_t block) const { return ic_defined[index(band, block)]; }
  bool itd_ok(std::size_t band, std::size_t block) const {
    return itd_reliable[index(band, block)];
  }

  bool same_grid(const CueMap& other) const;
};

// Empty map on the band/block grid for a signal of `length` samples.
CueMap make_cue_grid(std::size_t length, double sample_rate, const CueOptions& options);

// Per band and block: sum_k W_b[k] |Phi_LR[k]| / sqrt(sum_k W_b[k] Phi_LL[k] *
// sum_k W_b[k] Phi_RR[k]), with the PSDs averaged over the STFT frames whose
// centre falls in the block and W_b the squared gammatone response. Only the
// IC fields are filled. Throws kShape on unequal lengths.
CueMap interaural_coherence_map(std::span<const double> left, std::span<const double> right,
                                double sample_rate, const CueOptions& options = {});

// Lag of the normalised cross-correlation peak between the band signals,
// searched over +/- itd_max with parabolic refinement. Positive when the right
// channel lags. A peak below the reliability floor or on the window edge is
// flagged unreliable. Only the ITD fields are filled.
CueMap itd_map(std::span<const double> left, std::span<const double> right, double sample_rate,
               const CueOptions& options = {});

// Both cue types on one grid.
CueMap compute_cue_map(std::span<const double> left, std::span<const double> right,
                       double sample_rate, const CueOptions& options = {});
CueMap compute_cue_map(const TimeSignal& ears, const CueOptions& options = {});

// Element-wise map - reference; undefined cells stay undefined. Throws kShape
// on a grid mismatch.
CueMap cue_difference(const CueMap& map, const CueMap& reference);

struct CueSummary {
  double mean_abs_ic = 0.0;   // over defined cells
  double mean_abs_itd = 0.0;  // over reliable cells, s
  std::size_t ic_cells = 0;
  std::size_t itd_cells = 0;
};

// Means of |ic| and |itd| over usable cells whose band centre lies in
// [f_min, f_max].
CueSummary summarize(const CueMap& map, double f_min = 0.0, double f_max = 1e12);

// CSV: band_hz,time_s,ic,itd_s,reliable. Undefined IC is written as nan; the
// reliable column refers to the ITD.
void write_cue_csv(std::ostream& out, const CueMap& map);
CueMap read_cue_csv(std::istream& in);

// Gridded text: header, a row of block times, then one row per band starting
// with the band centre. `quantity` is "ic" or "itd".
void write_cue_grid(std::ostream& out, const CueMap& map, const char* quantity);

}  // namespace srosync::binaural

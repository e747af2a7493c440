#include "srosync/binaural/cues.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "srosync/binaural/gammatone.hpp"
#include "srosync/dsp/fft.hpp"
#include "srosync/error.hpp"
#include "srosync/simd/kernels.hpp"

namespace srosync::binaural {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BlockGrid {
  std::size_t block = 0;
  std::size_t hop = 0;
  std::size_t count = 0;
};

BlockGrid block_grid(std::size_t length, double fs, const CueOptions& o) {
  BlockGrid g;
  g.block = static_cast<std::size_t>(std::llround(o.block_len * fs));
  g.hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(g.block) * (1.0 - o.block_overlap))));
  if (g.block == 0 || length < g.block) {
    throw Error(ErrorKind::kEmptyInput, "signal shorter than one cue block (" +
                                            std::to_string(g.block) + " samples)");
  }
  g.count = (length - g.block) / g.hop + 1;
  return g;
}

void check_inputs(std::span<const double> left, std::span<const double> right, double fs,
                  const CueOptions& o) {
  o.validate();
  if (left.size() != right.size()) {
    throw Error(ErrorKind::kShape, "ear signals differ in length (" +
                                       std::to_string(left.size()) + " vs " +
                                       std::to_string(right.size()) + ")");
  }
  if (!(fs > 0.0)) throw Error(ErrorKind::kConfig, "sample rate must be positive");
  if (o.f_hi >= fs / 2.0) throw Error(ErrorKind::kConfig, "top band must lie below fs/2");
}

// Squared gammatone responses on the frame grid, restricted to the bins that matter.
struct BandWeights {
  std::size_t k0, k1;
  std::vector<double> w;
};

std::vector<BandWeights> band_weights(const CueMap& map, double fs, std::size_t n) {
  const std::size_t bins = n / 2 + 1;
  std::vector<BandWeights> bands;
  for (double fc : map.band_centers) {
    const GammatoneFilter g(fc, fs);
    std::vector<double> w(bins);
    for (std::size_t k = 1; k < bins; ++k) {
      const double m = g.magnitude(fs * static_cast<double>(k) / static_cast<double>(n));
      w[k] = m * m;
    }
    const double peak = *std::max_element(w.begin(), w.end());
    std::size_t k0 = bins, k1 = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      if (w[k] >= 1e-8 * peak) {
        k0 = std::min(k0, k);
        k1 = k + 1;
      }
    }
    bands.push_back({k0, k1, std::vector<double>(w.begin() + k0, w.begin() + k1)});
  }
  return bands;
}

// Hann-windowed short-time spectra summed per cue block: cross = sum L conj(R),
// ll and rr the auto spectra. A frame belongs to every block holding its centre.
struct BlockSpectra {
  std::size_t bins = 0;
  std::vector<dsp::cplx> cross;
  std::vector<double> ll, rr;
};

BlockSpectra block_spectra(std::span<const double> left, std::span<const double> right,
                           const BlockGrid& grid, const CueOptions& o) {
  const std::size_t n = o.frame_size;
  const std::size_t hop = o.frame_hop;
  const dsp::RealFft fft(n);
  BlockSpectra out;
  out.bins = n / 2 + 1;
  const std::size_t bins = out.bins;

  std::vector<double> window(n);
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n));
  }

  const std::size_t blocks = grid.count;
  out.cross.assign(blocks * bins, dsp::cplx{});
  out.ll.assign(blocks * bins, 0.0);
  out.rr.assign(blocks * bins, 0.0);
  std::vector<double> fl(n), fr(n);
  std::vector<dsp::cplx> sl(bins), sr(bins);
  for (std::size_t start = 0; start + n <= left.size(); start += hop) {
    const double c = static_cast<double>(start) + static_cast<double>(n) / 2.0;
    const std::size_t b_hi = std::min(blocks - 1, static_cast<std::size_t>(c / static_cast<double>(grid.hop)));
    std::size_t b_lo = b_hi + 1;
    for (std::size_t b = b_hi + 1; b-- > 0;) {
      const double s = static_cast<double>(b * grid.hop);
      if (c >= s && c < s + static_cast<double>(grid.block)) {
        b_lo = b;
      } else if (c >= s + static_cast<double>(grid.block)) {
        break;
      }
    }
    if (b_lo > b_hi) continue;
    for (std::size_t i = 0; i < n; ++i) {
      fl[i] = left[start + i] * window[i];
      fr[i] = right[start + i] * window[i];
    }
    fft.forward(fl, sl);
    fft.forward(fr, sr);
    for (std::size_t b = b_lo; b <= b_hi; ++b) {
      const double s = static_cast<double>(b * grid.hop);
      if (!(c >= s && c < s + static_cast<double>(grid.block))) continue;
      dsp::cplx* cx = &out.cross[b * bins];
      double* ll = &out.ll[b * bins];
      double* rr = &out.rr[b * bins];
      for (std::size_t k = 0; k < bins; ++k) {
        cx[k] += sl[k] * std::conj(sr[k]);
        ll[k] += std::norm(sl[k]);
        rr[k] += std::norm(sr[k]);
      }
    }
  }
  return out;
}

void fill_ic(CueMap& map, std::span<const double> left, std::span<const double> right, double fs,
             const CueOptions& o) {
  const BlockGrid grid = block_grid(left.size(), fs, o);
  const auto bands = band_weights(map, fs, o.frame_size);
  const BlockSpectra sp = block_spectra(left, right, grid, o);
  const std::size_t bins = sp.bins;

  const double floor_power = o.silence_floor * static_cast<double>(o.frame_size);
  const double frames = static_cast<double>(grid.block) / static_cast<double>(o.frame_hop);
  for (std::size_t bi = 0; bi < bands.size(); ++bi) {
    const BandWeights& band = bands[bi];
    for (std::size_t b = 0; b < grid.count; ++b) {
      double num = 0.0, el = 0.0, er = 0.0, wsum = 0.0;
      for (std::size_t k = band.k0; k < band.k1; ++k) {
        const double w = band.w[k - band.k0];
        num += w * std::abs(sp.cross[b * bins + k]);
        el += w * sp.ll[b * bins + k];
        er += w * sp.rr[b * bins + k];
        wsum += w;
      }
      const std::size_t idx = map.index(bi, b);
      // Mean band power per frame and bin against the silence floor.
      const bool silent = wsum <= 0.0 || el / (wsum * frames) <= floor_power ||
                          er / (wsum * frames) <= floor_power;
      if (silent) {
        map.ic[idx] = kNaN;
        map.ic_defined[idx] = 0;
      } else {
        map.ic[idx] = std::clamp(num / std::sqrt(el * er), 0.0, 1.0);
        map.ic_defined[idx] = 1;
      }
    }
  }
}

double parabolic_offset(const std::vector<double>& v, long i) {
  const double ym = v[static_cast<std::size_t>(i - 1)];
  const double y0 = v[static_cast<std::size_t>(i)];
  const double yp = v[static_cast<std::size_t>(i + 1)];
  const double den = ym - 2.0 * y0 + yp;
  return den < 0.0 ? 0.5 * (ym - yp) / den : 0.0;
}

void fill_itd(CueMap& map, std::span<const double> left, std::span<const double> right,
              double fs, const CueOptions& o) {
  const BlockGrid grid = block_grid(left.size(), fs, o);
  const long max_lag = static_cast<long>(std::floor(o.itd_max * fs));
  const std::size_t lags = static_cast<std::size_t>(2 * max_lag + 1);
  const auto& kernels = simd::active_kernels();
  std::vector<double> bl(left.size()), br(right.size());
  std::vector<double> corr(lags);
  std::vector<double> cum_l(grid.block + 1), cum_r(grid.block + 1);

  // The correlation fine structure repeats every carrier period. Its envelope,
  // taken from positive-frequency bins of the band cross-spectrum, does not and
  // picks the cycle.
  const std::size_t n = o.frame_size;
  const auto bands = band_weights(map, fs, n);
  const BlockSpectra sp = block_spectra(left, right, grid, o);
  // The envelope covers every lag a frame can hold, -n/2 .. n/2 - 1, so a
  // delay that has left the correlation window is seen as such. Its real and
  // imaginary parts come from two real inverse transforms.
  const long env_lag = static_cast<long>(n / 2);
  const dsp::RealFft fft(n);
  std::vector<dsp::cplx> spec(fft.num_bins());
  std::vector<double> re(n), im(n), env(n);
  std::vector<long> crest_buf;

  for (std::size_t bi = 0; bi < map.num_bands(); ++bi) {
    const GammatoneFilter g(map.band_centers[bi], fs);
    g.process(left, bl);
    g.process(right, br);
    const BandWeights& band = bands[bi];
    const double half_period = 0.5 * fs / map.band_centers[bi];
    for (std::size_t b = 0; b < grid.count; ++b) {
      const std::size_t s = b * grid.hop;
      const std::size_t len = grid.block;
      const double* pl = bl.data() + s;
      const double* pr = br.data() + s;
      cum_l[0] = cum_r[0] = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        cum_l[i + 1] = cum_l[i] + pl[i] * pl[i];
        cum_r[i + 1] = cum_r[i] + pr[i] * pr[i];
      }
      const std::size_t idx = map.index(bi, b);
      const double mean_l = cum_l[len] / static_cast<double>(len);
      const double mean_r = cum_r[len] / static_cast<double>(len);
      if (mean_l <= o.silence_floor || mean_r <= o.silence_floor) {
        map.itd[idx] = kNaN;
        map.itd_reliable[idx] = 0;
        continue;
      }
      // c(tau) = sum L[n] R[n + tau] over n, n + tau inside the block.
      for (long tau = -max_lag; tau <= max_lag; ++tau) {
        const std::size_t a = tau >= 0 ? 0 : static_cast<std::size_t>(-tau);
        const std::size_t m = len - static_cast<std::size_t>(std::labs(tau));
        const double* lp = pl + a;
        const double* rp = pr + a + tau;
        const double c = kernels.dot({lp, m}, {rp, m});
        const double el = cum_l[a + m] - cum_l[a];
        const double er = cum_r[a + tau + m] - cum_r[a + tau];
        corr[static_cast<std::size_t>(tau + max_lag)] = el > 0.0 && er > 0.0 ? c / std::sqrt(el * er) : 0.0;
      }
      const dsp::cplx* cx = &sp.cross[b * sp.bins + band.k0];
      std::fill(spec.begin(), spec.end(), dsp::cplx{});
      for (std::size_t k = std::max<std::size_t>(band.k0, 1); k < std::min(band.k1, n / 2); ++k) {
        spec[k] = band.w[k - band.k0] * std::conj(cx[k - band.k0]);
      }
      fft.inverse(spec, re);
      for (auto& z : spec) z *= dsp::cplx{0.0, -1.0};
      fft.inverse(spec, im);
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t i = (t + n / 2) % n;
        env[t] = std::hypot(re[i], im[i]);
      }
      std::vector<long>& crests = crest_buf;
      crests.clear();
      for (long i = 1; i < 2 * max_lag; ++i) {
        const double y0 = corr[static_cast<std::size_t>(i)];
        if (y0 >= corr[static_cast<std::size_t>(i - 1)] && y0 >= corr[static_cast<std::size_t>(i + 1)]) {
          crests.push_back(i);
        }
      }
      // With the envelope peak outside the window any crest inside belongs to a
      // wrapped cycle.
      const long e0 = static_cast<long>(std::max_element(env.begin(), env.end()) - env.begin());
      const double target = static_cast<double>(e0 - env_lag) +
                            (e0 > 0 && e0 + 1 < 2 * env_lag ? parabolic_offset(env, e0) : 0.0) +
                            static_cast<double>(max_lag);
      long i0 = -1;
      if (!crests.empty() && target >= -0.5 && target <= 2.0 * static_cast<double>(max_lag) + 0.5) {
        i0 = *std::min_element(crests.begin(), crests.end(), [&](long a, long c) {
          return std::abs(static_cast<double>(a) - target) < std::abs(static_cast<double>(c) - target);
        });
        if (std::abs(static_cast<double>(i0) - target) > half_period) i0 = -1;
      }
      if (i0 < 0) {
        const long j = static_cast<long>(std::max_element(corr.begin(), corr.end()) - corr.begin());
        map.itd[idx] = static_cast<double>(j - max_lag) / fs;
        map.itd_reliable[idx] = 0;
        continue;
      }
      const double peak = corr[static_cast<std::size_t>(i0)];
      map.itd[idx] = (static_cast<double>(i0 - max_lag) + parabolic_offset(corr, i0)) / fs;
      map.itd_reliable[idx] = peak >= o.reliability_floor;
    }
  }
}

}  // namespace

void CueOptions::validate() const {
  if (num_bands == 0) throw Error(ErrorKind::kConfig, "cues.num_bands must be >= 1");
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw Error(ErrorKind::kConfig, "cues band edges invalid");
  if (!(block_len > 0.0)) throw Error(ErrorKind::kConfig, "cues.block_len must be positive");
  if (!(block_overlap >= 0.0 && block_overlap < 1.0)) {
    throw Error(ErrorKind::kConfig, "cues.block_overlap must lie in [0, 1)");
  }
  if (frame_size < 4 || frame_size % 2 != 0 || frame_hop == 0 || frame_hop > frame_size) {
    throw Error(ErrorKind::kConfig, "cues frame size/hop invalid");
  }
  if (!(itd_max > 0.0)) throw Error(ErrorKind::kConfig, "cues.itd_max must be positive");
}

bool CueMap::same_grid(const CueMap& other) const {
  return band_centers == other.band_centers && block_times == other.block_times;
}

CueMap make_cue_grid(std::size_t length, double fs, const CueOptions& o) {
  o.validate();
  const BlockGrid grid = block_grid(length, fs, o);
  CueMap map;
  map.band_centers = erb_space(o.f_lo, o.f_hi, o.num_bands);
  map.block_times.resize(grid.count);
  for (std::size_t b = 0; b < grid.count; ++b) {
    map.block_times[b] =
        (static_cast<double>(b * grid.hop) + 0.5 * static_cast<double>(grid.block)) / fs;
  }
  const std::size_t cells = map.num_bands() * grid.count;
  map.ic.assign(cells, kNaN);
  map.itd.assign(cells, kNaN);
  map.ic_defined.assign(cells, 0);
  map.itd_reliable.assign(cells, 0);
  return map;
}

CueMap interaural_coherence_map(std::span<const double> left, std::span<const double> right,
                                double fs, const CueOptions& o) {
  check_inputs(left, right, fs, o);
  CueMap map = make_cue_grid(left.size(), fs, o);
  fill_ic(map, left, right, fs, o);
  return map;
}

CueMap itd_map(std::span<const double> left, std::span<const double> right, double fs,
               const CueOptions& o) {
  check_inputs(left, right, fs, o);
  CueMap map = make_cue_grid(left.size(), fs, o);
  fill_itd(map, left, right, fs, o);
  return map;
}

CueMap compute_cue_map(std::span<const double> left, std::span<const double> right, double fs,
                       const CueOptions& o) {
  check_inputs(left, right, fs, o);
  CueMap map = make_cue_grid(left.size(), fs, o);
  fill_ic(map, left, right, fs, o);
  fill_itd(map, left, right, fs, o);
  return map;
}

CueMap compute_cue_map(const TimeSignal& ears, const CueOptions& o) {
  if (ears.num_channels() != 2) {
    throw Error(ErrorKind::kShape, "ear signal must have two channels");
  }
  return compute_cue_map(ears.channels[0], ears.channels[1], ears.sample_rate, o);
}

CueMap cue_difference(const CueMap& map, const CueMap& reference) {
  if (!map.same_grid(reference)) {
    throw Error(ErrorKind::kShape, "cue maps have different band/block grids");
  }
  CueMap out = map;
  for (std::size_t i = 0; i < out.ic.size(); ++i) {
    out.ic_defined[i] = map.ic_defined[i] && reference.ic_defined[i];
    out.ic[i] = out.ic_defined[i] ? map.ic[i] - reference.ic[i] : kNaN;
    out.itd_reliable[i] = map.itd_reliable[i] && reference.itd_reliable[i];
    out.itd[i] = out.itd_reliable[i] ? map.itd[i] - reference.itd[i] : kNaN;
  }
  return out;
}

CueSummary summarize(const CueMap& map, double f_min, double f_max) {
  CueSummary s;
  for (std::size_t b = 0; b < map.num_bands(); ++b) {
    const double fc = map.band_centers[b];
    if (fc < f_min || fc > f_max) continue;
    for (std::size_t t = 0; t < map.num_blocks(); ++t) {
      if (map.ic_ok(b, t)) {
        s.mean_abs_ic += std::abs(map.ic_at(b, t));
        ++s.ic_cells;
      }
      if (map.itd_ok(b, t)) {
        s.mean_abs_itd += std::abs(map.itd_at(b, t));
        ++s.itd_cells;
      }
    }
  }
  if (s.ic_cells) s.mean_abs_ic /= static_cast<double>(s.ic_cells);
  if (s.itd_cells) s.mean_abs_itd /= static_cast<double>(s.itd_cells);
  return s;
}

void write_cue_csv(std::ostream& out, const CueMap& map) {
  out << "band_hz,time_s,ic,itd_s,reliable\n";
  char buf[160];
  for (std::size_t b = 0; b < map.num_bands(); ++b) {
    for (std::size_t t = 0; t < map.num_blocks(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d\n", map.band_centers[b],
                    map.block_times[t], map.ic_ok(b, t) ? map.ic_at(b, t) : kNaN,
                    map.itd_at(b, t), map.itd_ok(b, t) ? 1 : 0);
      out << buf;
    }
  }
}

CueMap read_cue_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("band_hz,time_s,ic,itd_s,reliable", 0) != 0) {
    throw Error(ErrorKind::kData, "cue CSV: unexpected header");
  }
  struct Row {
    double f, t, ic, itd;
    int rel;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    std::istringstream ss(line);
    std::string f[5];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) throw Error(ErrorKind::kData, "cue CSV: short row");
    }
    try {
      r.f = std::stod(f[0]);
      r.t = std::stod(f[1]);
      r.ic = std::stod(f[2]);
      r.itd = std::stod(f[3]);
      r.rel = std::stoi(f[4]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kData, "cue CSV: bad number in '" + line + "'");
    }
    rows.push_back(r);
  }
  CueMap map;
  for (const Row& r : rows) {
    if (map.band_centers.empty() || map.band_centers.back() != r.f) map.band_centers.push_back(r.f);
    if (map.band_centers.size() == 1) map.block_times.push_back(r.t);
  }
  if (rows.size() != map.band_centers.size() * map.block_times.size() || rows.empty()) {
    throw Error(ErrorKind::kData, "cue CSV: rows do not form a full grid");
  }
  for (const Row& r : rows) {
    map.ic.push_back(r.ic);
    map.ic_defined.push_back(std::isnan(r.ic) ? 0 : 1);
    map.itd.push_back(r.itd);
    map.itd_reliable.push_back(r.rel ? 1 : 0);
  }
  return map;
}

void write_cue_grid(std::ostream& out, const CueMap& map, const char* quantity) {
  const std::string q = quantity;
  if (q != "ic" && q != "itd") throw Error(ErrorKind::kConfig, "grid quantity must be ic or itd");
  out << "# srosync-cue-grid v1 quantity=" << q << " bands=" << map.num_bands()
      << " blocks=" << map.num_blocks() << "\n";
  char buf[64];
  out << "time_s";
  for (double t : map.block_times) {
    std::snprintf(buf, sizeof buf, " %.17g", t);
    out << buf;
  }
  out << "\n";
  for (std::size_t b = 0; b < map.num_bands(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g", map.band_centers[b]);
    out << buf;
    for (std::size_t t = 0; t < map.num_blocks(); ++t) {
      const bool ok = q == "ic" ? map.ic_ok(b, t) : map.itd_ok(b, t);
      const double v = q == "ic" ? map.ic_at(b, t) : map.itd_at(b, t);
      std::snprintf(buf, sizeof buf, " %.17g", ok ? v : kNaN);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace srosync::binaural

#include "srosync/spatial/spatial_filter.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "srosync/error.hpp"
#include "srosync/estimator/activity.hpp"
#include "srosync/simd/kernels.hpp"

namespace srosync::spatial {

RtfColumn estimate_oracle_rtf(const dsp::Spectrogram& mics, const dsp::Spectrogram& playback,
                              const OracleRtfOptions& options) {
  return estimate_oracle_rtf(mics, playback, 0, mics.num_frames(), options);
}

RtfColumn estimate_oracle_rtf(const dsp::Spectrogram& mics, const dsp::Spectrogram& playback,
                              std::size_t frame_begin, std::size_t frame_end,
                              const OracleRtfOptions& options) {
  if (mics.num_frames() != playback.num_frames()) {
    throw Error(ErrorKind::kAlignment, "microphone and playback frame counts differ");
  }
  if (mics.num_bins() != playback.num_bins() || playback.num_channels() != 1) {
    throw Error(ErrorKind::kShape, "oracle RTF needs matching bins and a mono playback");
  }
  if (frame_begin >= frame_end || frame_end > mics.num_frames()) {
    throw Error(ErrorKind::kDomain, "invalid solo frame range");
  }
  const std::size_t bins = mics.num_bins();
  const std::size_t m_count = mics.num_channels();
  estimator::ActivityDetector gate(options.activity_threshold_db, options.activity_peak_decay);
  const auto& kernels = simd::active_kernels();

  // E{y_m X*}: conj-multiply-accumulate of X against each mic, i.e. conj(X) * y.
  std::vector<std::vector<cplx>> acc(m_count, std::vector<cplx>(bins, cplx{}));
  std::size_t used = 0;
  for (std::size_t l = frame_begin; l < frame_end; ++l) {
    const auto x = playback.frame(0, l);
    if (!gate.update(x)) continue;
    ++used;
    for (std::size_t m = 0; m < m_count; ++m) kernels.conj_multiply_accumulate(acc[m], x, mics.frame(m, l));
  }

  RtfColumn col;
  col.num_bins = bins;
  col.num_mics = m_count;
  col.a.assign(bins * m_count, cplx{1.0, 0.0});
  col.degenerate.assign(bins, true);
  col.frames_used = used;
  if (used == 0) return col;

  const double scale = 1.0 / static_cast<double>(used);
  for (std::size_t k = 1; k + 1 < bins; ++k) {
    const cplx ref = acc[0][k] * scale;
    if (std::abs(ref) < options.degenerate_floor) continue;
    bool finite = true;
    for (std::size_t m = 0; m < m_count; ++m) {
      const cplx v = (acc[m][k] * scale) / ref;
      finite = finite && std::isfinite(v.real()) && std::isfinite(v.imag());
      col.a[k * m_count + m] = v;
    }
    if (!finite) {
      for (std::size_t m = 0; m < m_count; ++m) col.a[k * m_count + m] = 1.0;
      continue;
    }
    col.a[k * m_count] = 1.0;
    col.degenerate[k] = false;
  }
  return col;
}

RtfMatrix RtfMatrix::from_columns(const RtfColumn& first, const RtfColumn& second) {
  if (first.num_bins != second.num_bins || first.num_mics != second.num_mics) {
    throw Error(ErrorKind::kShape, "RTF columns differ in shape");
  }
  RtfMatrix a;
  a.num_bins = first.num_bins;
  a.num_mics = first.num_mics;
  a.data.resize(a.num_bins * 2 * a.num_mics);
  a.degenerate.resize(a.num_bins);
  for (std::size_t k = 0; k < a.num_bins; ++k) {
    for (std::size_t m = 0; m < a.num_mics; ++m) {
      a.at(k, 0, m) = first.at(k, m);
      a.at(k, 1, m) = second.at(k, m);
    }
    a.degenerate[k] = first.degenerate[k] || second.degenerate[k];
  }
  return a;
}

BeamformerWeights lcmv_weights(const RtfMatrix& a, std::size_t target, double alpha) {
  if (target > 1) throw Error(ErrorKind::kDomain, "target column must be 0 or 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::kDomain, "diagonal loading must be finite and >= 0");
  }
  for (const cplx& v : a.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw Error(ErrorKind::kInput, "RTF matrix has non-finite entries");
    }
  }
  const std::size_t bins = a.num_bins;
  const std::size_t m_count = a.num_mics;
  BeamformerWeights out;
  out.num_bins = bins;
  out.num_mics = m_count;
  out.target = target;
  out.diagonal_loading = alpha;
  out.w.assign(m_count, std::vector<cplx>(bins, cplx{}));
  out.residual.assign(bins, 0.0);
  out.passthrough.assign(bins, false);

  for (std::size_t k = 0; k < bins; ++k) {
    const bool degenerate = !a.degenerate.empty() && a.degenerate[k];
    // Gram matrix G = A^H A + alpha I (Hermitian 2x2).
    double g00 = alpha, g11 = alpha;
    cplx g01{};
    for (std::size_t m = 0; m < m_count; ++m) {
      const cplx a0 = a.at(k, 0, m), a1 = a.at(k, 1, m);
      g00 += std::norm(a0);
      g11 += std::norm(a1);
      g01 += std::conj(a0) * a1;
    }
    const double det = g00 * g11 - std::norm(g01);
    if (degenerate || !(det > 0.0) || !std::isfinite(det)) {
      out.passthrough[k] = true;
      out.w[0][k] = 1.0;
    } else {
      // Column `target` of G^{-1}.
      const cplx c0 = target == 0 ? cplx(g11 / det) : -g01 / det;
      const cplx c1 = target == 0 ? -std::conj(g01) / det : cplx(g00 / det);
      for (std::size_t m = 0; m < m_count; ++m) {
        out.w[m][k] = a.at(k, 0, m) * c0 + a.at(k, 1, m) * c1;
      }
    }
    double r2 = 0.0;
    for (std::size_t col = 0; col < 2; ++col) {
      cplx resp{};
      for (std::size_t m = 0; m < m_count; ++m) resp += std::conj(out.w[m][k]) * a.at(k, col, m);
      r2 += std::norm(resp - (col == target ? 1.0 : 0.0));
    }
    out.residual[k] = std::sqrt(r2);
  }
  return out;
}

dsp::Spectrogram beamform(const BeamformerWeights& w, const dsp::Spectrogram& mics) {
  if (mics.num_channels() != w.num_mics) {
    throw Error(ErrorKind::kShape, "beamformer has " + std::to_string(w.num_mics) +
                                       " weights but the input has " +
                                       std::to_string(mics.num_channels()) + " channels");
  }
  if (mics.num_bins() != w.num_bins) throw Error(ErrorKind::kShape, "bin counts differ");
  dsp::Spectrogram out(1, mics.num_frames(), mics.config(), mics.start_offset(),
                       mics.source_length());
  const auto& kernels = simd::active_kernels();
  for (std::size_t l = 0; l < mics.num_frames(); ++l) {
    auto z = out.frame(0, l);
    for (std::size_t m = 0; m < w.num_mics; ++m) {
      kernels.conj_multiply_accumulate(z, w.w[m], mics.frame(m, l));
    }
  }
  return out;
}

void write_rtf_table(std::ostream& out, const RtfMatrix& a) {
  out << "# srosync-rtf v1 bins=" << a.num_bins << " mics=" << a.num_mics << " columns=2\n";
  out << "column bin mic re im degenerate\n";
  char buf[128];
  for (std::size_t col = 0; col < 2; ++col) {
    for (std::size_t k = 0; k < a.num_bins; ++k) {
      for (std::size_t m = 0; m < a.num_mics; ++m) {
        const cplx v = a.at(k, col, m);
        std::snprintf(buf, sizeof buf, "%zu %zu %zu %.17g %.17g %d\n", col, k, m, v.real(),
                      v.imag(), a.degenerate[k] ? 1 : 0);
        out << buf;
      }
    }
  }
}

RtfMatrix read_rtf_table(std::istream& in) {
  std::string line;
  RtfMatrix a;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "# srosync-rtf v1 bins=%zu mics=%zu", &a.num_bins, &a.num_mics) != 2) {
    throw Error(ErrorKind::kData, "RTF table: bad header");
  }
  std::getline(in, line);
  a.data.assign(a.num_bins * 2 * a.num_mics, cplx{});
  a.degenerate.assign(a.num_bins, false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t col, k, m;
    double re, im;
    int deg;
    if (!(ss >> col >> k >> m >> re >> im >> deg) || col > 1 || k >= a.num_bins ||
        m >= a.num_mics) {
      throw Error(ErrorKind::kData, "RTF table: bad row '" + line + "'");
    }
    a.at(k, col, m) = {re, im};
    if (deg) a.degenerate[k] = true;
    ++rows;
  }
  if (rows != a.data.size()) throw Error(ErrorKind::kData, "RTF table: missing rows");
  return a;
}

}  // namespace srosync::spatial

#include <algorithm>
#include <cmath>
#include <numbers>

#include "srosync/error.hpp"
#include "srosync/room/room.hpp"

namespace srosync::room {

namespace {

constexpr int kSincHalfWidth = 20;
constexpr double kPi = std::numbers::pi;

bool inside(const Vec3& p, const Vec3& dims) {
  return p.x > 0 && p.y > 0 && p.z > 0 && p.x < dims.x && p.y < dims.y && p.z < dims.z;
}

void require_inside(const Vec3& p, const Vec3& dims, const char* what) {
  if (!inside(p, dims)) {
    throw Error(ErrorKind::kGeometry, std::string(what) + " [" + std::to_string(p.x) + ", " +
                                          std::to_string(p.y) + ", " + std::to_string(p.z) +
                                          "] is not strictly inside the room");
  }
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

double sabine_absorption(const Vec3& d, double rt60) {
  if (!(rt60 > 0.0)) throw Error(ErrorKind::kDomain, "rt60 must be positive");
  const double volume = d.x * d.y * d.z;
  const double surface = 2.0 * (d.x * d.y + d.x * d.z + d.y * d.z);
  const double alpha = 0.1611 * volume / (surface * rt60);
  if (alpha >= 1.0) {
    throw Error(ErrorKind::kDomain, "infeasible rt60 " + std::to_string(rt60) +
                                        " s: Sabine absorption " + std::to_string(alpha) +
                                        " >= 1");
  }
  return alpha;
}

double calibrated_absorption(const Vec3& d, double rt60, double sample_rate) {
  double alpha = sabine_absorption(d, rt60);
  const Vec3 src{0.31 * d.x, 0.43 * d.y, 0.37 * d.z};
  const Vec3 rcv{0.64 * d.x, 0.58 * d.y, 0.52 * d.z};
  const auto len = static_cast<std::size_t>(std::ceil(2.0 * rt60 * sample_rate));
  for (int iter = 0; iter < 6; ++iter) {
    const auto probe = image_source_rir_alpha(d, alpha, src, rcv, len, sample_rate);
    const double measured = measure_rt60(probe, sample_rate);
    if (std::abs(measured / rt60 - 1.0) < 0.01) break;
    // Decay rate scales with -ln(1 - alpha).
    alpha = 1.0 - std::pow(1.0 - alpha, measured / rt60);
    alpha = std::clamp(alpha, 1e-6, 1.0 - 1e-6);
  }
  return alpha;
}

double wall_absorption(const Vec3& room_dims, double rt60, double sample_rate,
                       AbsorptionModel model) {
  return model == AbsorptionModel::kSabine ? sabine_absorption(room_dims, rt60)
                                           : calibrated_absorption(room_dims, rt60, sample_rate);
}

std::vector<double> image_source_rir_alpha(const Vec3& dims, double alpha, const Vec3& src,
                                           const Vec3& rcv, std::size_t max_len,
                                           double sample_rate) {
  require_inside(src, dims, "source");
  require_inside(rcv, dims, "receiver");
  if (!(alpha > 0.0) || alpha >= 1.0) {
    throw Error(ErrorKind::kDomain, "wall absorption must lie in (0, 1)");
  }
  std::vector<double> h(max_len, 0.0);
  const double beta = std::sqrt(1.0 - alpha);
  const double max_dist = (static_cast<double>(max_len) + kSincHalfWidth) / sample_rate *
                          kSpeedOfSound;
  const int nx = static_cast<int>(std::ceil(max_dist / (2.0 * dims.x))) + 1;
  const int ny = static_cast<int>(std::ceil(max_dist / (2.0 * dims.y))) + 1;
  const int nz = static_cast<int>(std::ceil(max_dist / (2.0 * dims.z))) + 1;
  const double min_dist = kSpeedOfSound / sample_rate;

  for (int px = 0; px <= 1; ++px) {
    for (int py = 0; py <= 1; ++py) {
      for (int pz = 0; pz <= 1; ++pz) {
        for (int rx = -nx; rx <= nx; ++rx) {
          const double dx = (1 - 2 * px) * src.x + 2.0 * rx * dims.x - rcv.x;
          const int ox = std::abs(rx - px) + std::abs(rx);
          for (int ry = -ny; ry <= ny; ++ry) {
            const double dy = (1 - 2 * py) * src.y + 2.0 * ry * dims.y - rcv.y;
            const int oy = std::abs(ry - py) + std::abs(ry);
            for (int rz = -nz; rz <= nz; ++rz) {
              const double dz = (1 - 2 * pz) * src.z + 2.0 * rz * dims.z - rcv.z;
              const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
              if (dist > max_dist) continue;
              const int oz = std::abs(rz - pz) + std::abs(rz);
              const double gain =
                  std::pow(beta, ox + oy + oz) / (4.0 * kPi * std::max(dist, min_dist));
              const double t = dist / kSpeedOfSound * sample_rate;
              const long first = std::max(0L, static_cast<long>(std::ceil(t - kSincHalfWidth)));
              const long last = std::min(static_cast<long>(max_len) - 1,
                                         static_cast<long>(std::floor(t + kSincHalfWidth)));
              const double sin_pt = std::sin(kPi * t);
              for (long n = first; n <= last; ++n) {
                const double u = static_cast<double>(n) - t;
                double sinc;
                if (std::abs(u) < 1e-12) {
                  sinc = 1.0;
                } else {
                  // sin(pi (n - t)) = -(-1)^n sin(pi t)
                  const double s = (n % 2 == 0) ? -sin_pt : sin_pt;
                  sinc = s / (kPi * u);
                }
                const double win = 0.5 * (1.0 + std::cos(kPi * u / kSincHalfWidth));
                h[n] += gain * sinc * win;
              }
            }
          }
        }
      }
    }
  }
  return h;
}

std::vector<double> image_source_rir(const Vec3& room_dims, double rt60, const Vec3& src,
                                     const Vec3& rcv, std::size_t max_len, double sample_rate) {
  return image_source_rir_alpha(room_dims, sabine_absorption(room_dims, rt60), src, rcv, max_len,
                                sample_rate);
}

double measure_rt60(std::span<const double> rir, double sample_rate) {
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw Error(ErrorKind::kNumeric, "RIR has no energy");
  auto first_below = [&](double db) -> std::size_t {
    const double thresh = acc * std::pow(10.0, db / 10.0);
    for (std::size_t i = 0; i < edc.size(); ++i) {
      if (edc[i] <= thresh) return i;
    }
    return edc.size();
  };
  const std::size_t i5 = first_below(-5.0);
  std::size_t i_end = first_below(-35.0);
  if (i_end >= edc.size()) i_end = first_below(-25.0);
  if (i_end >= edc.size() || i_end <= i5 + 1) {
    throw Error(ErrorKind::kNumeric, "RIR too short to measure its decay");
  }
  // Least-squares line through the EDC in dB.
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(i_end - i5);
  for (std::size_t i = i5; i < i_end; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double y = 10.0 * std::log10(edc[i] / acc);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  return -60.0 / slope;
}

}  // namespace srosync::room

#ifndef FOVSTREAM_TRACES_H_
#define FOVSTREAM_TRACES_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fovstream/geometry.h"

namespace fovstream {

struct FovSample {
  double t_ms = 0.0;
  Vec3 dir;
};

struct FovTrace {
  std::vector<FovSample> samples;
  double fps = 30.0;

  std::size_t size() const { return samples.size(); }
  // Nominal length: one frame period per sample.
  double duration_ms() const { return samples.size() * 1000.0 / fps; }
  std::vector<Vec3> Directions() const;
};

enum class FovFormat {
  kXyz,         // timestamp_ms,x,y,z
  kYawPitch,    // timestamp_ms,yaw_deg,pitch_deg
  kQuaternion,  // timestamp_ms,qw,qx,qy,qz (rotates the +x forward axis)
  kTsinghua,    // PlaybackTime (s), UnitQuaternion.x/y/z/w, Unity axes
};

FovFormat ParseFovFormat(const std::string& name);

struct ParseOptions {
  bool strict = true;
  // Lenient mode appends one message per repaired or dropped row.
  std::vector<std::string>* warnings = nullptr;
};

FovTrace ParseFovTraceText(const std::string& text, FovFormat format,
                           const ParseOptions& opts = {},
                           const std::string& source = "<text>");
FovTrace ParseFovTrace(const std::string& path, FovFormat format,
                       const ParseOptions& opts = {});
// Spherical interpolation onto a regular grid t0 + i / fps.
FovTrace ResampleFovTrace(const FovTrace& trace, double fps);
void WriteFovTrace(const FovTrace& trace, const std::string& path);

Vec3 QuaternionForward(double w, double x, double y, double z);

// Per-axis constant-velocity Kalman filter with Rauch-Tung-Striebel
// smoothing, renormalized to unit length.
FovTrace KalmanSmooth(const FovTrace& trace, double process_noise = 1e-4,
                      double measurement_noise = 1e-2);

// Trace, reversed trace, trace, ... with the turning sample repeated, cut
// at ceil(target / frame period) samples.
FovTrace FlipExtend(const FovTrace& trace, double target_ms);

// Piecewise-constant link capacity over contiguous intervals.
class BandwidthTrace {
 public:
  BandwidthTrace() = default;
  // `edges_ms` has one more entry than `rate_bps`.
  BandwidthTrace(std::vector<double> edges_ms, std::vector<double> rate_bps);
  static BandwidthTrace Constant(double rate_bps, double duration_ms);

  const std::vector<double>& edges_ms() const { return edges_; }
  const std::vector<double>& rates_bps() const { return rates_; }
  double start_ms() const { return edges_.front(); }
  double end_ms() const { return edges_.back(); }
  double RateAt(double t_ms) const;  // 0 outside the trace
  // Capacity delivered over [start, t], bits.
  double CumulativeBits(double t_ms) const;
  // Earliest time by which `bits` more bits fit after `from_ms`; +inf when
  // the trace ends first.
  double TimeToDeliver(double from_ms, double bits) const;
  double MaxRate() const;
  double MeanRate() const;  // time-weighted
  double StdOverMean() const;

 private:
  std::vector<double> edges_;
  std::vector<double> rates_;
  std::vector<double> cum_;  // capacity at each edge
};

enum class BandwidthFormat {
  kBytes,    // timestamp_ms,bytes: bytes delivered from this row to the next
  kRate,     // start_ms,end_ms,rate_bps
  kPackets,  // timestamp_ms,bytes per packet arrival, binned
};

BandwidthFormat ParseBandwidthFormat(const std::string& name);

BandwidthTrace ParseBandwidthTraceText(const std::string& text, BandwidthFormat format,
                                       const ParseOptions& opts = {},
                                       const std::string& source = "<text>",
                                       double packet_bin_ms = 100.0);
BandwidthTrace ParseBandwidthTrace(const std::string& path, BandwidthFormat format,
                                   const ParseOptions& opts = {},
                                   double packet_bin_ms = 100.0);
void WriteBandwidthTrace(const BandwidthTrace& trace, const std::string& path);

BandwidthTrace ScaleBandwidth(const BandwidthTrace& trace, double target_peak_bps);

// Delivered bits per bin of `bin_ms` over [start_ms, end_ms). Deliveries
// are (time_ms, bits) pairs.
std::vector<double> BinThroughput(const std::vector<std::pair<double, double>>& deliveries,
                                  double start_ms, double end_ms, double bin_ms = 200.0);
// Link capacity per bin.
std::vector<double> BinCapacity(const BandwidthTrace& trace, double start_ms,
                                double end_ms, double bin_ms = 200.0);

// Synthetic head-motion traces: "static", "smooth", "pole", "explore".
FovTrace SyntheticFovTrace(const std::string& kind, double duration_s, double fps,
                           std::uint64_t seed);
// Log-normal AR(1) capacity at 100 ms steps; `dropout_prob` is the chance
// per second of a zero-capacity outage lasting between the two bounds
// (rounded to whole steps).
BandwidthTrace SyntheticBandwidthTrace(double duration_s, double mean_bps,
                                       double std_over_mean, std::uint64_t seed,
                                       double dropout_prob = 0.0,
                                       double outage_min_ms = 500.0,
                                       double outage_max_ms = 2000.0);

}  // namespace fovstream

#endif  // FOVSTREAM_TRACES_H_

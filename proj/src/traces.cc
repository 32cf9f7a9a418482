#include "fovstream/traces.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Dense>

#include "csv.h"

namespace fovstream {

namespace {

void Reject(const ParseOptions& opts, const std::string& msg) {
  if (opts.strict) throw InputError(msg);
  if (opts.warnings) opts.warnings->push_back(msg);
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vec3 Slerp(const Vec3& a, const Vec3& b, double t) {
  const double theta = AngleBetween(a, b);
  if (theta < 1e-12) return a;
  const double s = std::sin(theta);
  if (s < 1e-12) return (a * (1 - t) + b * t).Normalized();
  return (a * (std::sin((1 - t) * theta) / s) + b * (std::sin(t * theta) / s)).Normalized();
}

}  // namespace

std::vector<Vec3> FovTrace::Directions() const {
  std::vector<Vec3> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.dir);
  return out;
}

FovFormat ParseFovFormat(const std::string& name) {
  if (name == "xyz") return FovFormat::kXyz;
  if (name == "yawpitch") return FovFormat::kYawPitch;
  if (name == "quat") return FovFormat::kQuaternion;
  if (name == "tsinghua") return FovFormat::kTsinghua;
  throw ArgumentError("unknown FoV trace format '" + name + "'");
}

Vec3 QuaternionForward(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0)) throw InputError("zero quaternion");
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  return {1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)};
}

FovTrace ParseFovTraceText(const std::string& text, FovFormat format,
                           const ParseOptions& opts, const std::string& source) {
  csv::Table t = csv::Parse(text);
  std::vector<int> cols;
  auto need = [&](std::initializer_list<const char*> names) {
    for (const char* n : names) {
      const int c = csv::Column(t, n);
      if (c < 0) throw InputError(source + ": missing column '" + n + "'");
      cols.push_back(c);
    }
  };
  switch (format) {
    case FovFormat::kXyz: need({"timestamp_ms", "x", "y", "z"}); break;
    case FovFormat::kYawPitch: need({"timestamp_ms", "yaw_deg", "pitch_deg"}); break;
    case FovFormat::kQuaternion: need({"timestamp_ms", "qw", "qx", "qy", "qz"}); break;
    case FovFormat::kTsinghua:
      need({"PlaybackTime", "UnitQuaternion.x", "UnitQuaternion.y", "UnitQuaternion.z",
            "UnitQuaternion.w"});
      break;
  }
  FovTrace trace;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = source + ":" + std::to_string(t.line_numbers[r]);
    try {
      if (row.size() != t.header.size()) throw InputError(where + ": wrong field count");
      std::vector<double> v;
      for (int c : cols) v.push_back(csv::ToDouble(row[c], where));
      for (double x : v) {
        if (!std::isfinite(x)) throw InputError(where + ": non-finite value");
      }
      FovSample s;
      switch (format) {
        case FovFormat::kXyz:
          s.t_ms = v[0];
          s.dir = {v[1], v[2], v[3]};
          if (!(s.dir.Norm() > 0)) throw InputError(where + ": zero direction");
          // Already-unit input is kept bit-exact.
          if (std::abs(s.dir.Norm() - 1.0) > 1e-12) s.dir = s.dir.Normalized();
          break;
        case FovFormat::kYawPitch:
          s.t_ms = v[0];
          s.dir = DirectionFromYawPitch(v[1], v[2]);
          break;
        case FovFormat::kQuaternion:
          s.t_ms = v[0];
          s.dir = QuaternionForward(v[1], v[2], v[3], v[4]);
          break;
        case FovFormat::kTsinghua: {
          // Unity frame: x right, y up, z forward; forward is q * (0,0,1).
          const double x = v[1], y = v[2], z = v[3], w = v[4];
          const double n = std::sqrt(w * w + x * x + y * y + z * z);
          if (!(n > 0)) throw InputError(where + ": zero quaternion");
          const double qx = x / n, qy = y / n, qz = z / n, qw = w / n;
          const Vec3 f{2 * (qx * qz + qw * qy), 2 * (qy * qz - qw * qx),
                       1 - 2 * (qx * qx + qy * qy)};
          s.t_ms = v[0] * 1000.0;
          s.dir = Vec3{f.z, -f.x, f.y}.Normalized();
          break;
        }
      }
      if (!trace.samples.empty() && !(s.t_ms > trace.samples.back().t_ms)) {
        throw InputError(where + ": timestamps must increase");
      }
      trace.samples.push_back(s);
    } catch (const InputError& e) {
      Reject(opts, e.what());
    }
  }
  if (trace.samples.empty()) throw InputError(source + ": no samples");
  return trace;
}

FovTrace ParseFovTrace(const std::string& path, FovFormat format, const ParseOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ParseFovTraceText(text, format, opts, path);
}

FovTrace ResampleFovTrace(const FovTrace& trace, double fps) {
  if (trace.samples.empty()) throw ArgumentError("empty FoV trace");
  if (!(fps > 0)) throw ArgumentError("fps must be positive");
  FovTrace out;
  out.fps = fps;
  const double t0 = trace.samples.front().t_ms;
  const double t1 = trace.samples.back().t_ms;
  std::size_t k = 0;
  for (std::int64_t i = 0;; ++i) {
    const double t = t0 + i * 1000.0 / fps;
    if (t > t1 + 1e-9) break;
    while (k + 1 < trace.samples.size() && trace.samples[k + 1].t_ms <= t) ++k;
    Vec3 d = trace.samples[k].dir;
    if (k + 1 < trace.samples.size()) {
      const auto& a = trace.samples[k];
      const auto& b = trace.samples[k + 1];
      d = Slerp(a.dir, b.dir, (t - a.t_ms) / (b.t_ms - a.t_ms));
    }
    out.samples.push_back({t, d});
  }
  return out;
}

void WriteFovTrace(const FovTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "timestamp_ms,x,y,z\n";
  for (const auto& s : trace.samples) {
    os << Fmt(s.t_ms) << ',' << Fmt(s.dir.x) << ',' << Fmt(s.dir.y) << ',' << Fmt(s.dir.z)
       << '\n';
  }
}

FovTrace KalmanSmooth(const FovTrace& trace, double q, double r) {
  const std::size_t n = trace.samples.size();
  if (n < 2) return trace;
  Eigen::Matrix2d f;
  f << 1, 1, 0, 1;
  Eigen::Matrix2d qm;
  qm << 0.25, 0.5, 0.5, 1.0;
  qm *= q;
  const Eigen::RowVector2d h(1, 0);
  std::vector<std::array<double, 3>> smoothed(n);
  for (int axis = 0; axis < 3; ++axis) {
    auto z = [&](std::size_t i) {
      const Vec3& d = trace.samples[i].dir;
      return axis == 0 ? d.x : axis == 1 ? d.y : d.z;
    };
    std::vector<Eigen::Vector2d> xf(n), xp(n);
    std::vector<Eigen::Matrix2d> pf(n), pp(n);
    Eigen::Vector2d x(z(0), 0.0);
    Eigen::Matrix2d p = Eigen::Matrix2d::Identity() * r;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) {
        x = f * x;
        p = f * p * f.transpose() + qm;
      }
      xp[i] = x;
      pp[i] = p;
      const double s = (h * p * h.transpose())(0, 0) + r;
      const Eigen::Vector2d k = p * h.transpose() / s;
      x = x + k * (z(i) - (h * x)(0, 0));
      p = (Eigen::Matrix2d::Identity() - k * h) * p;
      xf[i] = x;
      pf[i] = p;
    }
    Eigen::Vector2d xs = xf[n - 1];
    smoothed[n - 1][axis] = xs[0];
    for (std::size_t i = n - 1; i-- > 0;) {
      const Eigen::Matrix2d c = pf[i] * f.transpose() * pp[i + 1].inverse();
      xs = xf[i] + c * (xs - xp[i + 1]);
      smoothed[i][axis] = xs[0];
    }
  }
  FovTrace out = trace;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 v{smoothed[i][0], smoothed[i][1], smoothed[i][2]};
    out.samples[i].dir = v.Norm() > 1e-12 ? v.Normalized() : trace.samples[i].dir;
  }
  return out;
}

FovTrace FlipExtend(const FovTrace& trace, double target_ms) {
  const std::int64_t n = static_cast<std::int64_t>(trace.samples.size());
  if (n == 0) throw ArgumentError("empty FoV trace");
  const double period = 1000.0 / trace.fps;
  const std::int64_t want =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(target_ms / period - 1e-9)));
  FovTrace out;
  out.fps = trace.fps;
  const double t0 = trace.samples.front().t_ms;
  for (std::int64_t i = 0; i < want; ++i) {
    const std::int64_t pass = i / n;
    const std::int64_t k = i % n;
    const std::int64_t src = (pass % 2 == 0) ? k : n - 1 - k;
    out.samples.push_back({t0 + i * period, trace.samples[src].dir});
  }
  return out;
}

BandwidthTrace::BandwidthTrace(std::vector<double> edges_ms, std::vector<double> rate_bps)
    : edges_(std::move(edges_ms)), rates_(std::move(rate_bps)) {
  if (rates_.empty() || edges_.size() != rates_.size() + 1) {
    throw InputError("bandwidth trace needs n rates and n+1 edges");
  }
  cum_.assign(edges_.size(), 0.0);
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    if (!(edges_[i + 1] > edges_[i])) throw InputError("bandwidth intervals must increase");
    if (!(rates_[i] >= 0.0) || !std::isfinite(rates_[i])) {
      throw InputError("bandwidth rates must be finite and non-negative");
    }
    cum_[i + 1] = cum_[i] + rates_[i] * (edges_[i + 1] - edges_[i]) / 1000.0;
  }
}

BandwidthTrace BandwidthTrace::Constant(double rate_bps, double duration_ms) {
  return BandwidthTrace({0.0, duration_ms}, {rate_bps});
}

double BandwidthTrace::RateAt(double t_ms) const {
  if (t_ms < edges_.front() || t_ms >= edges_.back()) return 0.0;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), t_ms);
  return rates_[it - edges_.begin() - 1];
}

double BandwidthTrace::CumulativeBits(double t_ms) const {
  if (t_ms <= edges_.front()) return 0.0;
  if (t_ms >= edges_.back()) return cum_.back();
  const std::size_t i = std::upper_bound(edges_.begin(), edges_.end(), t_ms) - edges_.begin() - 1;
  return cum_[i] + rates_[i] * (t_ms - edges_[i]) / 1000.0;
}

double BandwidthTrace::TimeToDeliver(double from_ms, double bits) const {
  if (bits <= 0.0) return from_ms;
  const double target = CumulativeBits(from_ms) + bits;
  if (target > cum_.back()) return std::numeric_limits<double>::infinity();
  // First edge whose cumulative capacity reaches the target.
  std::size_t j = std::lower_bound(cum_.begin(), cum_.end(), target) - cum_.begin();
  const std::size_t i = j - 1;
  double t = edges_[i] + (target - cum_[i]) / rates_[i] * 1000.0;
  return std::max(t, from_ms);
}

double BandwidthTrace::MaxRate() const { return *std::max_element(rates_.begin(), rates_.end()); }

double BandwidthTrace::MeanRate() const {
  return cum_.back() / ((edges_.back() - edges_.front()) / 1000.0);
}

double BandwidthTrace::StdOverMean() const {
  const double mean = MeanRate();
  double var = 0.0;
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    var += (rates_[i] - mean) * (rates_[i] - mean) * (edges_[i + 1] - edges_[i]);
  }
  var /= edges_.back() - edges_.front();
  return mean > 0 ? std::sqrt(var) / mean : 0.0;
}

BandwidthFormat ParseBandwidthFormat(const std::string& name) {
  if (name == "bytes") return BandwidthFormat::kBytes;
  if (name == "rate") return BandwidthFormat::kRate;
  if (name == "packets") return BandwidthFormat::kPackets;
  throw ArgumentError("unknown bandwidth trace format '" + name + "'");
}

BandwidthTrace ParseBandwidthTraceText(const std::string& text, BandwidthFormat format,
                                       const ParseOptions& opts, const std::string& source,
                                       double packet_bin_ms) {
  csv::Table t = csv::Parse(text);
  std::vector<int> cols;
  std::vector<std::string> names =
      format == BandwidthFormat::kRate ? std::vector<std::string>{"start_ms", "end_ms", "rate_bps"}
                                       : std::vector<std::string>{"timestamp_ms", "bytes"};
  for (const auto& n : names) {
    const int c = csv::Column(t, n);
    if (c < 0) throw InputError(source + ": missing column '" + n + "'");
    cols.push_back(c);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = source + ":" + std::to_string(t.line_numbers[r]);
    try {
      if (t.rows[r].size() != t.header.size()) throw InputError(where + ": wrong field count");
      std::vector<double> v;
      for (int c : cols) v.push_back(csv::ToDouble(t.rows[r][c], where));
      for (double x : v) {
        if (!std::isfinite(x)) throw InputError(where + ": non-finite value");
      }
      if (v.back() < 0) throw InputError(where + ": negative amount");
      if (!rows.empty()) {
        const bool ordered = format == BandwidthFormat::kRate
                                 ? std::abs(v[0] - rows.back()[1]) < 1e-9 && v[1] > v[0]
                             : format == BandwidthFormat::kPackets ? v[0] >= rows.back()[0]
                                                                   : v[0] > rows.back()[0];
        if (!ordered) throw InputError(where + ": intervals not contiguous and increasing");
      } else if (format == BandwidthFormat::kRate && !(v[1] > v[0])) {
        throw InputError(where + ": empty interval");
      }
      rows.push_back(v);
    } catch (const InputError& e) {
      Reject(opts, e.what());
    }
  }
  if (rows.empty()) throw InputError(source + ": no samples");
  std::vector<double> edges, rates;
  switch (format) {
    case BandwidthFormat::kRate:
      edges.push_back(rows[0][0]);
      for (const auto& v : rows) {
        edges.push_back(v[1]);
        rates.push_back(v[2]);
      }
      break;
    case BandwidthFormat::kBytes: {
      if (rows.size() < 2) throw InputError(source + ": need at least two rows");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double start = rows[i][0];
        const double end = i + 1 < rows.size() ? rows[i + 1][0]
                                               : start + (rows[i][0] - rows[i - 1][0]);
        edges.push_back(start);
        rates.push_back(rows[i][1] * 8.0 / ((end - start) / 1000.0));
        if (i + 1 == rows.size()) edges.push_back(end);
      }
      break;
    }
    case BandwidthFormat::kPackets: {
      if (!(packet_bin_ms > 0)) throw ArgumentError("packet bin must be positive");
      const double t0 = rows.front()[0];
      const std::size_t bins =
          static_cast<std::size_t>((rows.back()[0] - t0) / packet_bin_ms) + 1;
      std::vector<double> bits(bins, 0.0);
      for (const auto& v : rows) {
        bits[static_cast<std::size_t>((v[0] - t0) / packet_bin_ms)] += v[1] * 8.0;
      }
      for (std::size_t i = 0; i < bins; ++i) {
        edges.push_back(t0 + i * packet_bin_ms);
        rates.push_back(bits[i] / (packet_bin_ms / 1000.0));
      }
      edges.push_back(t0 + bins * packet_bin_ms);
      break;
    }
  }
  return BandwidthTrace(std::move(edges), std::move(rates));
}

BandwidthTrace ParseBandwidthTrace(const std::string& path, BandwidthFormat format,
                                   const ParseOptions& opts, double packet_bin_ms) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ParseBandwidthTraceText(text, format, opts, path, packet_bin_ms);
}

void WriteBandwidthTrace(const BandwidthTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "start_ms,end_ms,rate_bps\n";
  for (std::size_t i = 0; i < trace.rates_bps().size(); ++i) {
    os << Fmt(trace.edges_ms()[i]) << ',' << Fmt(trace.edges_ms()[i + 1]) << ','
       << Fmt(trace.rates_bps()[i]) << '\n';
  }
}

BandwidthTrace ScaleBandwidth(const BandwidthTrace& trace, double target_peak_bps) {
  const double peak = trace.MaxRate();
  if (!(peak > 0.0)) throw InputError("cannot scale an all-zero bandwidth trace");
  if (!(target_peak_bps > 0.0)) throw ArgumentError("target peak must be positive");
  std::vector<double> rates = trace.rates_bps();
  const double k = target_peak_bps / peak;
  for (double& r : rates) r *= k;
  return BandwidthTrace(trace.edges_ms(), std::move(rates));
}

std::vector<double> BinThroughput(const std::vector<std::pair<double, double>>& deliveries,
                                  double start_ms, double end_ms, double bin_ms) {
  if (!(bin_ms > 0) || end_ms < start_ms) throw ArgumentError("bad bin range");
  const std::size_t n = static_cast<std::size_t>(std::ceil((end_ms - start_ms) / bin_ms - 1e-12));
  std::vector<double> bins(n, 0.0);
  for (const auto& [t, bits] : deliveries) {
    if (t < start_ms || t >= end_ms) continue;
    bins[std::min(n - 1, static_cast<std::size_t>((t - start_ms) / bin_ms))] += bits;
  }
  return bins;
}

std::vector<double> BinCapacity(const BandwidthTrace& trace, double start_ms, double end_ms,
                                double bin_ms) {
  if (!(bin_ms > 0) || end_ms < start_ms) throw ArgumentError("bad bin range");
  std::vector<double> bins;
  for (double t = start_ms; t < end_ms - 1e-9; t += bin_ms) {
    const double e = std::min(t + bin_ms, end_ms);
    bins.push_back(trace.CumulativeBits(e) - trace.CumulativeBits(t));
  }
  return bins;
}

FovTrace SyntheticFovTrace(const std::string& kind, double duration_s, double fps,
                           std::uint64_t seed) {
  if (!(duration_s > 0) || !(fps > 0)) throw ArgumentError("bad trace length");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::int64_t n = static_cast<std::int64_t>(std::llround(duration_s * fps));
  FovTrace out;
  out.fps = fps;
  auto push = [&](std::int64_t i, double yaw, double pitch) {
    out.samples.push_back({i * 1000.0 / fps, DirectionFromYawPitch(yaw, pitch)});
  };
  if (kind == "static") {
    const double yaw = 360 * u(rng) - 180, pitch = 20 * u(rng) - 10;
    for (std::int64_t i = 0; i < n; ++i) push(i, yaw, pitch);
  } else if (kind == "smooth") {
    double ph[4], fr[4];
    for (int k = 0; k < 4; ++k) {
      ph[k] = 2 * kPi * u(rng);
      fr[k] = 0.05 + 0.25 * u(rng);  // Hz
    }
    const double yaw0 = 360 * u(rng) - 180;
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = i / fps;
      const double yaw = yaw0 + 50 * std::sin(2 * kPi * fr[0] * t + ph[0]) +
                         20 * std::sin(2 * kPi * fr[1] * t + ph[1]);
      const double pitch = 15 * std::sin(2 * kPi * fr[2] * t + ph[2]) +
                           5 * std::sin(2 * kPi * fr[3] * t + ph[3]);
      push(i, yaw, pitch);
    }
  } else if (kind == "pole") {
    const double yaw0 = 360 * u(rng);
    const double ph = 2 * kPi * u(rng);
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = i / fps;
      push(i, yaw0 + 12 * t, 82 + 6 * std::sin(0.4 * t + ph));
    }
  } else if (kind == "explore") {
    // Minimum-jerk moves between random targets with dwell periods.
    double yaw = 360 * u(rng) - 180, pitch = 0;
    std::normal_distribution<double> pn(0.0, 20.0);
    std::int64_t i = 0;
    while (i < n) {
      const double ty = yaw + (180 * u(rng) - 90);
      const double tp = std::clamp(pn(rng), -60.0, 60.0);
      const std::int64_t move = static_cast<std::int64_t>((0.4 + 0.8 * u(rng)) * fps);
      const std::int64_t dwell = static_cast<std::int64_t>((0.5 + 2.5 * u(rng)) * fps);
      for (std::int64_t k = 0; k < move && i < n; ++k, ++i) {
        const double s = static_cast<double>(k) / move;
        const double m = 10 * s * s * s - 15 * s * s * s * s + 6 * s * s * s * s * s;
        push(i, yaw + (ty - yaw) * m, pitch + (tp - pitch) * m);
      }
      yaw = ty;
      pitch = tp;
      for (std::int64_t k = 0; k < dwell && i < n; ++k, ++i) push(i, yaw, pitch);
    }
  } else {
    throw ArgumentError("unknown synthetic FoV kind '" + kind + "'");
  }
  return out;
}

BandwidthTrace SyntheticBandwidthTrace(double duration_s, double mean_bps,
                                       double std_over_mean, std::uint64_t seed,
                                       double dropout_prob, double outage_min_ms,
                                       double outage_max_ms) {
  if (!(duration_s > 0) || !(mean_bps > 0) || std_over_mean < 0 ||
      !(outage_min_ms > 0) || outage_max_ms < outage_min_ms) {
    throw ArgumentError("bad synthetic bandwidth parameters");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double kStepMs = 100.0;
  constexpr double kPhi = 0.95;
  const double sigma2 = std::log(1 + std_over_mean * std_over_mean);
  const double mu = std::log(mean_bps) - sigma2 / 2;
  const std::int64_t n = static_cast<std::int64_t>(std::ceil(duration_s * 1000 / kStepMs));
  std::vector<double> edges{0.0}, rates;
  double z = nd(rng);
  std::int64_t outage = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    z = kPhi * z + std::sqrt(1 - kPhi * kPhi) * nd(rng);
    double r = std::exp(mu + std::sqrt(sigma2) * z);
    if (outage == 0 && dropout_prob > 0 && u(rng) < dropout_prob * kStepMs / 1000) {
      const double len = outage_min_ms + (outage_max_ms - outage_min_ms) * u(rng);
      outage = std::max<std::int64_t>(1, std::llround(len / kStepMs));
    }
    if (outage > 0) {
      r = 0.0;
      --outage;
    }
    rates.push_back(r);
    edges.push_back((i + 1) * kStepMs);
  }
  return BandwidthTrace(std::move(edges), std::move(rates));
}

}  // namespace fovstream

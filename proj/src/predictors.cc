#include "fovstream/predictors.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Dense>

#include "csv.h"

namespace fovstream {

namespace {

struct Line2 {
  double intercept[2];
  double slope[2];
};

// Least-squares line per coordinate over samples t = 0..n-1.
Line2 FitLines(std::span<const std::array<double, 2>> s) {
  const double n = static_cast<double>(s.size());
  const double mt = (n - 1) / 2;
  double stt = 0;
  for (std::size_t i = 0; i < s.size(); ++i) stt += (i - mt) * (i - mt);
  Line2 f{};
  for (int a = 0; a < 2; ++a) {
    double mv = 0, stv = 0;
    for (const auto& v : s) mv += v[a];
    mv /= n;
    for (std::size_t i = 0; i < s.size(); ++i) stv += (i - mt) * (s[i][a] - mv);
    f.slope[a] = stt > 0 ? stv / stt : 0.0;
    f.intercept[a] = mv - f.slope[a] * mt;
  }
  return f;
}

// Azimuthal-equidistant chart centered on `e`: great circles through `e`
// become straight lines traversed at constant speed.
struct TangentChart {
  Vec3 e, u, w;

  explicit TangentChart(const Vec3& center) : e(center) {
    const Vec3 seed = std::abs(e.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    u = (seed - e * e.Dot(seed)).Normalized();
    w = e.Cross(u);
  }
  std::array<double, 2> Log(const Vec3& v) const {
    const Vec3 perp = v - e * e.Dot(v);
    const double s = perp.Norm();
    if (s < 1e-15) return {0.0, 0.0};
    const double theta = std::atan2(s, e.Dot(v));
    return {theta * perp.Dot(u) / s, theta * perp.Dot(w) / s};
  }
  Vec3 Exp(const std::array<double, 2>& c) const {
    const double theta = std::hypot(c[0], c[1]);
    if (theta < 1e-15) return e;
    const Vec3 dir = (u * c[0] + w * c[1]) * (1.0 / theta);
    return e * std::cos(theta) + dir * std::sin(theta);
  }
};

Vec3 SafeNormalize(const Vec3& v, const Vec3& fallback) {
  const double n = v.Norm();
  if (!(n > 1e-12) || !std::isfinite(n)) return fallback;
  return v * (1.0 / n);
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Vec3> HoldFovPredictor::Predict(std::span<const Vec3> history,
                                            std::int64_t, int max_horizon) {
  if (history.empty()) throw ArgumentError("empty FoV history");
  return std::vector<Vec3>(max_horizon, history.back().Normalized());
}

std::vector<Vec3> TruncatedLinearFovPredictor::Predict(std::span<const Vec3> history,
                                                       std::int64_t, int max_horizon) {
  if (history.empty()) throw ArgumentError("empty FoV history");
  const Vec3 last = history.back().Normalized();
  if (history.size() < 2) {
    last_suffix_ = 1;
    return std::vector<Vec3>(max_horizon, last);
  }
  const int longest = std::min<int>(window_, static_cast<int>(history.size()));
  const TangentChart chart(last);
  std::vector<std::array<double, 2>> coords;
  for (const Vec3& v : history.subspan(history.size() - longest)) {
    coords.push_back(chart.Log(v.Normalized()));
  }
  const double limit = max_residual_deg_ * kRadPerDeg;
  Line2 fit{};
  int chosen = 2;
  for (int len = longest; len >= 2; --len) {
    std::span<const std::array<double, 2>> suffix(coords.data() + (longest - len), len);
    fit = FitLines(suffix);
    bool ok = true;
    for (int i = 0; i < len && ok; ++i) {
      ok = std::hypot(fit.intercept[0] + fit.slope[0] * i - suffix[i][0],
                      fit.intercept[1] + fit.slope[1] * i - suffix[i][1]) <= limit;
    }
    if (ok) {
      chosen = len;
      break;
    }
  }
  last_suffix_ = chosen;
  std::vector<Vec3> out;
  out.reserve(max_horizon);
  for (int h = 1; h <= max_horizon; ++h) {
    const double t = chosen - 1 + h;
    out.push_back(SafeNormalize(
        chart.Exp({fit.intercept[0] + fit.slope[0] * t, fit.intercept[1] + fit.slope[1] * t}),
        last));
  }
  return out;
}

std::vector<Vec3> OracleFovPredictor::Predict(std::span<const Vec3>,
                                              std::int64_t last_index, int max_horizon) {
  if (truth_.empty()) throw ArgumentError("oracle predictor has no trace");
  std::vector<Vec3> out;
  for (int h = 1; h <= max_horizon; ++h) {
    const std::int64_t i =
        std::min<std::int64_t>(last_index + h, static_cast<std::int64_t>(truth_.size()) - 1);
    out.push_back(truth_[i]);
  }
  return out;
}

ReplayFovPredictor::ReplayFovPredictor(std::map<std::pair<std::int64_t, int>, Vec3> table)
    : table_(std::move(table)) {
  std::map<std::int64_t, int> max_h;
  std::map<std::int64_t, int> count;
  for (const auto& [key, v] : table_) {
    if (key.second < 1) throw InputError("replay horizons start at 1");
    max_h[key.first] = std::max(max_h[key.first], key.second);
    ++count[key.first];
  }
  for (const auto& [index, h] : max_h) {
    if (count[index] != h) {
      throw InputError("replay file is missing a horizon for index " +
                       std::to_string(index));
    }
  }
}

ReplayFovPredictor ReplayFovPredictor::Load(const std::string& path) {
  csv::Table t = csv::Read(path);
  const int ci = csv::Column(t, "index"), ch = csv::Column(t, "horizon");
  const int cx = csv::Column(t, "x"), cy = csv::Column(t, "y"), cz = csv::Column(t, "z");
  if (ci < 0 || ch < 0 || cx < 0 || cy < 0 || cz < 0) {
    throw InputError(path + ": expected columns index,horizon,x,y,z");
  }
  std::map<std::pair<std::int64_t, int>, Vec3> table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) throw InputError(where + ": wrong field count");
    Vec3 v{csv::ToDouble(row[cx], where), csv::ToDouble(row[cy], where),
           csv::ToDouble(row[cz], where)};
    if (!(v.Norm() > 0)) throw InputError(where + ": zero direction");
    table[{csv::ToInt(row[ci], where), static_cast<int>(csv::ToInt(row[ch], where))}] = v;
  }
  return ReplayFovPredictor(std::move(table));
}

std::vector<Vec3> ReplayFovPredictor::Predict(std::span<const Vec3>,
                                              std::int64_t last_index, int max_horizon) {
  std::vector<Vec3> out;
  for (int h = 1; h <= max_horizon; ++h) {
    auto it = table_.find({last_index, h});
    if (it == table_.end()) {
      throw InputError("no replayed prediction for index " + std::to_string(last_index) +
                       " horizon " + std::to_string(h));
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<Vec3> RecordingFovPredictor::Predict(std::span<const Vec3> history,
                                                 std::int64_t last_index, int max_horizon) {
  std::vector<Vec3> out = inner_->Predict(history, last_index, max_horizon);
  for (int h = 1; h <= max_horizon; ++h) table_[{last_index, h}] = out[h - 1];
  return out;
}

void RecordingFovPredictor::Write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path);
  os << "index,horizon,x,y,z\n";
  for (const auto& [key, v] : table_) {
    os << key.first << ',' << key.second << ',' << Fmt(v.x) << ',' << Fmt(v.y) << ','
       << Fmt(v.z) << '\n';
  }
}

double RlsBandwidthPredictor::PredictSegmentBits(std::span<const double> samples,
                                                 std::int64_t) {
  if (samples.empty()) return 0.0;
  if (samples.size() > kBandwidthWindow) {
    samples = samples.subspan(samples.size() - kBandwidthWindow);
  }
  const int n = static_cast<int>(samples.size());
  // Start from the oldest sample as the level so a steady link is predicted
  // without prior shrinkage.
  Eigen::Vector2d theta(samples[0], 0.0);
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity() * initial_cov_;
  // Time is measured relative to the newest sample so the intercept is the
  // current level.
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d x(1.0, static_cast<double>(i - (n - 1)));
    const Eigen::Vector2d px = p * x;
    const Eigen::Vector2d k = px / (forgetting_ + x.dot(px));
    theta += k * (samples[i] - x.dot(theta));
    p = (p - k * px.transpose()) / forgetting_;
  }
  double total = 0.0;
  for (int s = 1; s <= kStepsPerSegment; ++s) {
    total += std::max(0.0, theta[0] + theta[1] * s);
  }
  return total;
}

double HarmonicMeanBandwidthPredictor::PredictSegmentBits(std::span<const double> samples,
                                                          std::int64_t) {
  if (samples.empty()) return 0.0;
  if (samples.size() > kBandwidthWindow) {
    samples = samples.subspan(samples.size() - kBandwidthWindow);
  }
  constexpr double kFloorBits = 1.0;
  double inv = 0.0;
  for (double s : samples) inv += 1.0 / std::max(s, kFloorBits);
  return kStepsPerSegment * samples.size() / inv;
}

ReplayBandwidthPredictor ReplayBandwidthPredictor::Load(const std::string& path) {
  csv::Table t = csv::Read(path);
  const int ci = csv::Column(t, "index"), cb = csv::Column(t, "bits");
  if (ci < 0 || cb < 0) throw InputError(path + ": expected columns index,bits");
  std::map<std::int64_t, double> table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw InputError(where + ": wrong field count");
    const double bits = csv::ToDouble(row[cb], where);
    if (bits < 0) throw InputError(where + ": negative prediction");
    table[csv::ToInt(row[ci], where)] = bits;
  }
  return ReplayBandwidthPredictor(std::move(table));
}

double ReplayBandwidthPredictor::PredictSegmentBits(std::span<const double>,
                                                    std::int64_t segment_index) {
  auto it = table_.find(segment_index);
  if (it == table_.end()) {
    throw InputError("no replayed bandwidth for segment " + std::to_string(segment_index));
  }
  return it->second;
}

PredictionScore ScoreBandwidth(std::span<const double> predicted,
                               std::span<const double> actual) {
  if (predicted.size() != actual.size()) {
    throw ArgumentError("prediction and actual lengths differ");
  }
  if (actual.empty()) throw ArgumentError("nothing to score");
  double rel = 0.0, abs_err = 0.0, total = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(actual[i] > 0.0)) throw ArgumentError("actual bandwidth must be positive");
    const double e = std::abs(predicted[i] - actual[i]);
    rel += std::min(e / actual[i], 1.0);
    abs_err += e;
    total += actual[i];
  }
  return {rel / actual.size(), abs_err / total};
}

double ScoreFov(std::span<const Vec3> predicted, std::span<const Vec3> actual,
                double h_deg, double v_deg, int per_axis) {
  if (predicted.size() != actual.size() || actual.empty()) {
    throw ArgumentError("predicted and actual poses must align");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sum += ViewportOverlap(FovPose::FromDirection(predicted[i], h_deg, v_deg),
                           FovPose::FromDirection(actual[i], h_deg, v_deg), per_axis);
  }
  return sum / actual.size();
}

std::vector<double> FovHitRateByHorizon(FovPredictor& predictor,
                                        std::span<const Vec3> truth, int max_horizon,
                                        int window, int stride, double h_deg,
                                        double v_deg, int per_axis) {
  if (max_horizon < 1 || stride < 1) throw ArgumentError("bad horizon or stride");
  std::vector<double> sum(max_horizon, 0.0);
  int count = 0;
  const int n = static_cast<int>(truth.size());
  for (int last = 0; last + max_horizon < n; last += stride) {
    const int first = std::max(0, last - window + 1);
    auto hist = truth.subspan(first, last - first + 1);
    std::vector<Vec3> pred = predictor.Predict(hist, last, max_horizon);
    for (int h = 1; h <= max_horizon; ++h) {
      sum[h - 1] += ViewportOverlap(FovPose::FromDirection(pred[h - 1], h_deg, v_deg),
                                    FovPose::FromDirection(truth[last + h], h_deg, v_deg),
                                    per_axis);
    }
    ++count;
  }
  if (count == 0) throw ArgumentError("trace too short for the requested horizon");
  for (double& s : sum) s /= count;
  return sum;
}

}  // namespace fovstream

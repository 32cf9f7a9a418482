#ifndef FOVSTREAM_PREDICTORS_H_
#define FOVSTREAM_PREDICTORS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fovstream/geometry.h"

namespace fovstream {

// Predicts future viewport centers. `history` holds the known samples up to
// and including frame `last_index` (oldest first); the result holds one
// direction per horizon 1..max_horizon.
class FovPredictor {
 public:
  virtual ~FovPredictor() = default;
  virtual std::vector<Vec3> Predict(std::span<const Vec3> history,
                                    std::int64_t last_index, int max_horizon) = 0;
};

class HoldFovPredictor : public FovPredictor {
 public:
  std::vector<Vec3> Predict(std::span<const Vec3> history, std::int64_t last_index,
                            int max_horizon) override;
};

// Linear extrapolation over the longest recent suffix (up to `window`
// samples) whose linear fit stays within `max_residual_deg` of every
// sample. Samples are charted on the tangent plane at the newest sample
// (azimuthal equidistant), fitted per axis there, and mapped back.
class TruncatedLinearFovPredictor : public FovPredictor {
 public:
  explicit TruncatedLinearFovPredictor(int window = 30, double max_residual_deg = 1.0)
      : window_(window), max_residual_deg_(max_residual_deg) {}
  std::vector<Vec3> Predict(std::span<const Vec3> history, std::int64_t last_index,
                            int max_horizon) override;
  // Length of the suffix chosen for the last call.
  int last_suffix() const { return last_suffix_; }

 private:
  int window_;
  double max_residual_deg_;
  int last_suffix_ = 0;
};

// Looks up the true future pose; indices past the end repeat the last pose.
class OracleFovPredictor : public FovPredictor {
 public:
  explicit OracleFovPredictor(std::vector<Vec3> truth) : truth_(std::move(truth)) {}
  std::vector<Vec3> Predict(std::span<const Vec3> history, std::int64_t last_index,
                            int max_horizon) override;

 private:
  std::vector<Vec3> truth_;
};

// Predictions recorded by an external model, keyed by (last known frame
// index, horizon).
class ReplayFovPredictor : public FovPredictor {
 public:
  explicit ReplayFovPredictor(std::map<std::pair<std::int64_t, int>, Vec3> table);
  static ReplayFovPredictor Load(const std::string& path);
  std::vector<Vec3> Predict(std::span<const Vec3> history, std::int64_t last_index,
                            int max_horizon) override;

 private:
  std::map<std::pair<std::int64_t, int>, Vec3> table_;
};

// Records every call of a wrapped predictor so it can be replayed later.
class RecordingFovPredictor : public FovPredictor {
 public:
  explicit RecordingFovPredictor(FovPredictor* inner) : inner_(inner) {}
  std::vector<Vec3> Predict(std::span<const Vec3> history, std::int64_t last_index,
                            int max_horizon) override;
  const std::map<std::pair<std::int64_t, int>, Vec3>& table() const { return table_; }
  void Write(const std::string& path) const;

 private:
  FovPredictor* inner_;
  std::map<std::pair<std::int64_t, int>, Vec3> table_;
};

// Predicts the bits deliverable in the next segment from throughput
// samples (bits per 200 ms bin, oldest first).
class BandwidthPredictor {
 public:
  virtual ~BandwidthPredictor() = default;
  virtual double PredictSegmentBits(std::span<const double> samples,
                                    std::int64_t segment_index) = 0;
};

inline constexpr int kBandwidthWindow = 15;
inline constexpr int kStepsPerSegment = 5;

class RlsBandwidthPredictor : public BandwidthPredictor {
 public:
  explicit RlsBandwidthPredictor(double forgetting = 0.98, double initial_cov = 100.0)
      : forgetting_(forgetting), initial_cov_(initial_cov) {}
  double PredictSegmentBits(std::span<const double> samples,
                            std::int64_t segment_index) override;

 private:
  double forgetting_;
  double initial_cov_;
};

class HarmonicMeanBandwidthPredictor : public BandwidthPredictor {
 public:
  double PredictSegmentBits(std::span<const double> samples,
                            std::int64_t segment_index) override;
};

class ReplayBandwidthPredictor : public BandwidthPredictor {
 public:
  explicit ReplayBandwidthPredictor(std::map<std::int64_t, double> table)
      : table_(std::move(table)) {}
  static ReplayBandwidthPredictor Load(const std::string& path);
  double PredictSegmentBits(std::span<const double> samples,
                            std::int64_t segment_index) override;

 private:
  std::map<std::int64_t, double> table_;
};

struct PredictionScore {
  double mape = 0.0;
  double nmae = 0.0;
};

PredictionScore ScoreBandwidth(std::span<const double> predicted,
                               std::span<const double> actual);

// Mean overlap ratio of predicted and actual viewports.
double ScoreFov(std::span<const Vec3> predicted, std::span<const Vec3> actual,
                double h_deg = 90.0, double v_deg = 90.0, int per_axis = 64);

// Mean overlap per horizon 1..max_horizon when the predictor is run at
// every `stride`-th frame of `truth`.
std::vector<double> FovHitRateByHorizon(FovPredictor& predictor,
                                        std::span<const Vec3> truth, int max_horizon,
                                        int window = 30, int stride = 1,
                                        double h_deg = 90.0, double v_deg = 90.0,
                                        int per_axis = 32);

}  // namespace fovstream

#endif  // FOVSTREAM_PREDICTORS_H_

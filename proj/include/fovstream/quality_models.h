#ifndef FOVSTREAM_QUALITY_MODELS_H_
#define FOVSTREAM_QUALITY_MODELS_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fovstream/errors.h"

namespace fovstream {

inline constexpr double kRateFloor = 1e-4;       // bits per square degree
inline constexpr double kWsPsnrCapDb = 100.0;

// Q(R) = a + b ln R, R in bits per square degree.
struct LogQrModel {
  double a = 0.0;
  double b = 1.0;
};

// rho(tau) = 1 + c (1 - exp(-d (tau - 1))).
struct RateIncreaseModel {
  double c = 0.0;
  double d = 1.0;
};

// kappa(tau) = exp(-g tau^h).
struct QualityDecayModel {
  double g = 0.0;
  double h = 1.0;
};

struct QualityModelSet {
  LogQrModel pf;
  std::map<int, LogQrModel> pfplus;  // keyed by border size, degrees
  LogQrModel ri;                     // intra coding
  RateIncreaseModel rho;
  QualityDecayModel kappa;
  int peak_intensity = 255;

  const LogQrModel& PfPlus(int border_deg) const;
};

double WsPsnr(double ws_mse, int peak_intensity, double cap_db = kWsPsnrCapDb);

// `clamped`, when given, is set when the rate was raised to the floor.
double QualityAtRate(const LogQrModel& m, double rate, bool* clamped = nullptr);
double RateAtQuality(const LogQrModel& m, double quality_db);

double Rho(const RateIncreaseModel& m, std::int64_t tau);
double Kappa(const QualityDecayModel& m, double tau);

// Probability of each time lapse (frames since a tile was last coded).
using LapseDistribution = std::map<std::int64_t, double>;

void ValidateLapseDistribution(const LapseDistribution& dist);
double MeanRho(const LapseDistribution& dist, const RateIncreaseModel& m);
double AdjustedRate(double ideal_rate, const LapseDistribution& dist,
                    const RateIncreaseModel& m);
// Q-R curve after accounting for lapse-driven rate inflation: the rate at
// every quality is scaled by the mean rho, i.e. a shifts by -b ln(mean rho).
LogQrModel AdjustForLapse(const LogQrModel& m, const LapseDistribution& dist,
                          const RateIncreaseModel& rho);

double DecayedQuality(double last_quality_db, double tau,
                      const QualityDecayModel& m);

LogQrModel FitLogModel(const std::vector<std::pair<double, double>>& points);
RateIncreaseModel FitRhoModel(const std::vector<std::pair<double, double>>& points);
QualityDecayModel FitKappaModel(const std::vector<std::pair<double, double>>& points);

// Default viewing-direction probabilities: front, left, right, back, top,
// bottom.
inline const std::vector<double> kOrientationWeights = {0.2, 0.2, 0.2,
                                                        0.2, 0.1, 0.1};
inline const std::vector<double> kDefaultSampleRates = {25.0, 50.0, 100.0,
                                                        200.0};

LogQrModel WeightedAverageQr(const std::vector<LogQrModel>& models,
                             const std::vector<double>& weights,
                             const std::vector<double>& sample_rates =
                                 kDefaultSampleRates);

// Synthetic parameter sets "stable-scene" and "dynamic-scene".
QualityModelSet PresetModels(const std::string& name,
                             const std::vector<int>& borders);
std::vector<std::string> PresetNames();

}  // namespace fovstream

#endif  // FOVSTREAM_QUALITY_MODELS_H_

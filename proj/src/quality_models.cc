#include "fovstream/quality_models.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

namespace fovstream {

namespace {

using Points = std::vector<std::pair<double, double>>;

std::string Num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int DistinctX(const Points& pts) {
  std::vector<double> xs;
  for (const auto& p : pts) xs.push_back(p.first);
  std::sort(xs.begin(), xs.end());
  return static_cast<int>(std::unique(xs.begin(), xs.end()) - xs.begin());
}

struct RhoResidual : Eigen::DenseFunctor<double> {
  explicit RhoResidual(const Points& p)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(p.size())), pts(p) {}
  int operator()(const InputType& x, ValueType& f) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double s = 1.0 - std::exp(-x[1] * (pts[i].first - 1.0));
      f[i] = 1.0 + x[0] * s - pts[i].second;
    }
    return 0;
  }
  int df(const InputType& x, JacobianType& j) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double t = pts[i].first - 1.0;
      const double e = std::exp(-x[1] * t);
      j(i, 0) = 1.0 - e;
      j(i, 1) = x[0] * t * e;
    }
    return 0;
  }
  const Points& pts;
};

struct KappaResidual : Eigen::DenseFunctor<double> {
  explicit KappaResidual(const Points& p)
      : Eigen::DenseFunctor<double>(2, static_cast<int>(p.size())), pts(p) {}
  int operator()(const InputType& x, ValueType& f) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      f[i] = std::exp(-x[0] * std::pow(pts[i].first, x[1])) - pts[i].second;
    }
    return 0;
  }
  int df(const InputType& x, JacobianType& j) const {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double t = pts[i].first;
      const double tp = std::pow(t, x[1]);
      const double e = std::exp(-x[0] * tp);
      j(i, 0) = -tp * e;
      j(i, 1) = t > 0.0 ? -x[0] * tp * std::log(t) * e : 0.0;
    }
    return 0;
  }
  const Points& pts;
};

template <typename Functor>
Eigen::VectorXd RunLm(const Functor& f, Eigen::VectorXd x, const char* what) {
  Functor functor = f;
  Eigen::LevenbergMarquardt<Functor> lm(functor);
  lm.setMaxfev(4000);
  lm.setXtol(1e-15);
  lm.setFtol(1e-15);
  lm.setGtol(0.0);
  const auto status = lm.minimize(x);
  Eigen::VectorXd r(f.values());
  functor(x, r);
  if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
      status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
      !x.allFinite()) {
    throw FitError(std::string(what) + " fit did not converge (residual norm " +
                   Num(r.norm()) + ")");
  }
  return x;
}

template <typename Functor>
double Sse(const Functor& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd r(f.values());
  f(x, r);
  return r.squaredNorm();
}

}  // namespace

const LogQrModel& QualityModelSet::PfPlus(int border_deg) const {
  auto it = pfplus.find(border_deg);
  if (it == pfplus.end()) {
    throw ArgumentError("no PF+ model for border " + std::to_string(border_deg));
  }
  return it->second;
}

double WsPsnr(double ws_mse, int peak_intensity, double cap_db) {
  if (ws_mse < 0.0 || std::isnan(ws_mse)) {
    throw ArgumentError("WS-MSE must be non-negative");
  }
  if (ws_mse == 0.0) return cap_db;
  const double peak = peak_intensity;
  return std::min(cap_db, 10.0 * std::log10(peak * peak / ws_mse));
}

double QualityAtRate(const LogQrModel& m, double rate, bool* clamped) {
  const bool low = !(rate >= kRateFloor);
  if (clamped) *clamped = low;
  return m.a + m.b * std::log(low ? kRateFloor : rate);
}

double RateAtQuality(const LogQrModel& m, double quality_db) {
  return std::exp((quality_db - m.a) / m.b);
}

double Rho(const RateIncreaseModel& m, std::int64_t tau) {
  if (tau < 1) throw ArgumentError("rho needs tau >= 1");
  return 1.0 + m.c * (1.0 - std::exp(-m.d * static_cast<double>(tau - 1)));
}

double Kappa(const QualityDecayModel& m, double tau) {
  if (tau < 0.0) throw ArgumentError("kappa needs tau >= 0");
  return std::exp(-m.g * std::pow(tau, m.h));
}

void ValidateLapseDistribution(const LapseDistribution& dist) {
  if (dist.empty()) throw ArgumentError("empty lapse distribution");
  double sum = 0.0;
  for (const auto& [tau, p] : dist) {
    if (tau < 1) throw ArgumentError("lapse values must be >= 1");
    if (p < 0.0) throw ArgumentError("negative lapse probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("lapse probabilities sum to " + Num(sum));
  }
}

double MeanRho(const LapseDistribution& dist, const RateIncreaseModel& m) {
  ValidateLapseDistribution(dist);
  double f = 0.0;
  for (const auto& [tau, p] : dist) f += p * Rho(m, tau);
  return f;
}

double AdjustedRate(double ideal_rate, const LapseDistribution& dist,
                    const RateIncreaseModel& m) {
  return MeanRho(dist, m) * ideal_rate;
}

LogQrModel AdjustForLapse(const LogQrModel& m, const LapseDistribution& dist,
                          const RateIncreaseModel& rho) {
  return {m.a - m.b * std::log(MeanRho(dist, rho)), m.b};
}

double DecayedQuality(double last_quality_db, double tau,
                      const QualityDecayModel& m) {
  return Kappa(m, tau) * last_quality_db;
}

LogQrModel FitLogModel(const Points& points) {
  if (points.size() < 2) throw FitError("log model needs at least 2 points");
  for (const auto& p : points) {
    if (!(p.first > 0.0)) throw FitError("rates must be positive");
  }
  if (DistinctX(points) != static_cast<int>(points.size())) {
    throw FitError("duplicate rates in log model points");
  }
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& p : points) {
    sx += std::log(p.first);
    sy += p.second;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double dx = std::log(p.first) - mx;
    sxx += dx * dx;
    sxy += dx * (p.second - my);
  }
  const double b = sxy / sxx;
  if (!(b > 1e-12)) {
    throw FitError("fitted slope b = " + Num(b) + " is not positive");
  }
  return {my - b * mx, b};
}

RateIncreaseModel FitRhoModel(const Points& points) {
  if (points.size() < 3 || DistinctX(points) < 2) {
    throw FitError("rho model needs at least 3 points over 2+ lapse values");
  }
  for (const auto& p : points) {
    if (p.first < 1.0) throw FitError("lapse values must be >= 1");
    if (p.second < 1.0 - 1e-12) throw FitError("rate ratios must be >= 1");
  }
  RhoResidual f(points);
  Eigen::VectorXd best(2);
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 80; ++i) {
    const double d = std::pow(10.0, -3.0 + 4.0 * i / 80);
    double num = 0, den = 0;
    for (const auto& p : points) {
      const double s = 1.0 - std::exp(-d * (p.first - 1.0));
      num += s * (p.second - 1.0);
      den += s * s;
    }
    Eigen::VectorXd x(2);
    x << (den > 0 ? std::max(0.0, num / den) : 0.0), d;
    const double sse = Sse(f, x);
    if (sse < best_sse) {
      best_sse = sse;
      best = x;
    }
  }
  Eigen::VectorXd x = RunLm(f, best, "rho");
  if (x[0] < -1e-9 || !(x[1] > 0.0)) {
    throw FitError("rho fit left the admissible region (c=" + Num(x[0]) +
                   ", d=" + Num(x[1]) + ")");
  }
  return {std::max(0.0, x[0]), x[1]};
}

QualityDecayModel FitKappaModel(const Points& points) {
  if (points.size() < 3 || DistinctX(points) < 2) {
    throw FitError("kappa model needs at least 3 points over 2+ lapse values");
  }
  for (const auto& p : points) {
    if (p.first < 0.0) throw FitError("lapse values must be >= 0");
    if (!(p.second > 0.0) || p.second > 1.0 + 1e-12) {
      throw FitError("quality ratios must lie in (0, 1]");
    }
  }
  KappaResidual f(points);
  Eigen::VectorXd best(2);
  double best_sse = std::numeric_limits<double>::infinity();
  // ln(-ln kappa) = ln g + h ln tau gives a seed when enough points decay.
  std::vector<std::pair<double, double>> lin;
  for (const auto& p : points) {
    if (p.first > 0.0 && p.second < 1.0) {
      lin.emplace_back(p.first, std::log(-std::log(p.second)));
    }
  }
  if (DistinctX(lin) >= 2) {
    double mx = 0, my = 0;
    for (const auto& q : lin) {
      mx += std::log(q.first);
      my += q.second;
    }
    mx /= lin.size();
    my /= lin.size();
    double sxx = 0, sxy = 0;
    for (const auto& q : lin) {
      sxx += (std::log(q.first) - mx) * (std::log(q.first) - mx);
      sxy += (std::log(q.first) - mx) * (q.second - my);
    }
    const double h = sxy / sxx;
    if (h > 0.0 && std::isfinite(h)) {
      best = Eigen::Vector2d(std::exp(my - h * mx), h);
      best_sse = Sse(f, best);
    }
  }
  for (int i = 0; i <= 40; ++i) {
    for (int j = 1; j <= 30; ++j) {
      Eigen::VectorXd x = Eigen::Vector2d(std::pow(10.0, -4.0 + 4.0 * i / 40), 0.1 * j);
      const double sse = Sse(f, x);
      if (sse < best_sse) {
        best_sse = sse;
        best = x;
      }
    }
  }
  Eigen::VectorXd x = RunLm(f, best, "kappa");
  if (!(x[0] > 0.0) || !(x[1] > 0.0)) {
    throw FitError("kappa fit left the admissible region (g=" + Num(x[0]) +
                   ", h=" + Num(x[1]) + ")");
  }
  return {x[0], x[1]};
}

LogQrModel WeightedAverageQr(const std::vector<LogQrModel>& models,
                             const std::vector<double>& weights,
                             const std::vector<double>& sample_rates) {
  if (models.empty() || models.size() != weights.size()) {
    throw ArgumentError("need one weight per orientation model");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ArgumentError("negative orientation weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("orientation weights sum to " + Num(sum));
  }
  Points pts;
  for (double r : sample_rates) {
    double q = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
      q += weights[i] * QualityAtRate(models[i], r);
    }
    pts.emplace_back(r, q);
  }
  return FitLogModel(pts);
}

std::vector<std::string> PresetNames() { return {"stable-scene", "dynamic-scene"}; }

QualityModelSet PresetModels(const std::string& name,
                             const std::vector<int>& borders) {
  QualityModelSet m;
  double pfplus_base = 0.0;
  if (name == "stable-scene") {
    m.pf = {19.5, 3.6};
    pfplus_base = 18.0;
    m.ri = {12.0, 3.4};
    m.rho = {0.6, 0.25};
    m.kappa = {0.005, 0.8};
  } else if (name == "dynamic-scene") {
    m.pf = {17.5, 3.7};
    pfplus_base = 16.0;
    m.ri = {11.0, 3.5};
    m.rho = {1.0, 0.3};
    m.kappa = {0.012, 0.8};
  } else {
    throw ArgumentError("unknown model preset '" + name + "'");
  }
  std::vector<int> all = borders;
  all.push_back(50);
  for (int b : all) {
    // Wider borders code slightly more efficiently.
    m.pfplus[b] = {pfplus_base + 0.03 * b, m.pf.b};
  }
  return m;
}

}  // namespace fovstream

// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "allocator_oracle.h"
#include "fovstream/allocator.h"
#include "fovstream/config.h"
#include "fovstream/geometry.h"
#include "fovstream/metrics.h"
#include "fovstream/predictors.h"
#include "fovstream/quality_models.h"
#include "fovstream/sim.h"
#include "fovstream/traces.h"
#include "hand_trace.h"
#include "oracles.h"

using namespace fovstream;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome Optimizer() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_gap = -1e300, worst_budget = 0.0;
  for (int i = 0; i < 100; ++i) {
    AllocationInputs in = oracle::RandomInputs(rng);
    const int b = in.borders[i % 5], k = in.ri_sizes[(i / 5) % 5];
    const CandidateTerms t = TermsFor(in, b, k);
    const RatePair r = ClosedFormRates(in, b, k);
    const oracle::Objective o = oracle::Build(in, b, k);
    worst_gap = std::max(worst_gap, oracle::GridMax(o, in.budget_bt, 10000) - o.Quality(r.r_e, r.r_b));
    worst_budget = std::max(worst_budget,
                            std::abs(PlannedBits(r.r_e, r.r_b, t) - in.budget_bt) / in.budget_bt);
  }
  const double secs = Seconds(t0);
  Outcome out;
  out.pass = worst_gap <= 0.001 && worst_budget <= 1e-6 && secs < 10.0;
  out.detail = Fmt("grid beats closed form by at most %.2e dB, budget error %.1e, %.2f s",
                   worst_gap, worst_budget, secs);
  return out;
}

Outcome Formulas() {
  bool ok = true;
  const RateIncreaseModel rho{0.75, 0.4};
  ok &= Rho(rho, 1) == 1.0;
  ok &= std::abs(Rho(rho, 10000) - 1.75) < 1e-12;
  for (int t = 1; t < 500; ++t) ok &= Rho(rho, t + 1) >= Rho(rho, t);
  const QualityDecayModel kappa{0.02, 0.9};
  ok &= Kappa(kappa, 0) == 1.0;
  for (int t = 0; t < 1000; ++t) ok &= Kappa(kappa, t + 1) < Kappa(kappa, t);
  const double seg = SegmentBudget(100e6, 10e6, 0.66);
  ok &= seg == 0.66 * 90e6;
  ok &= std::abs(seg - 59.4e6) <= 1e-9 * 59.4e6;
  BudgetState s;
  s.segment_budget = 3e6;
  s.frames_per_segment = 30;
  s.buffer_capacity = 10;
  const double empty = *FrameBitBudget(s, 1.2, 1.0);
  ok &= std::abs(empty / (3e6 / 30) - 1.2) < 1e-12;
  s.buffer_occupancy = 10;
  ok &= !FrameBitBudget(s, 1.2, 1.0).has_value();
  const std::vector<double> actual{10, 20, 30}, wild{100, 200, 300};
  ok &= ScoreBandwidth(wild, actual).mape == 1.0;
  Outcome out;
  out.pass = ok;
  out.detail = Fmt("segment budget %.6g Mbit, empty-buffer factor %.3f", seg / 1e6,
                   empty / (3e6 / 30));
  return out;
}

// Tiles hit by per_axis x per_axis tangent-plane rays, built from the
// oracle rotation only.
std::set<int> SampledCover(double yaw, double pitch, int per_axis, int rows, int cols) {
  std::set<int> out;
  const double th = std::tan(45.0 * oracle::kPi / 180.0);
  const double cy = std::cos(yaw * oracle::kPi / 180), sy = std::sin(yaw * oracle::kPi / 180);
  const double cp = std::cos(pitch * oracle::kPi / 180), sp = std::sin(pitch * oracle::kPi / 180);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      const double u = th * (2.0 * (i + 0.5) / per_axis - 1.0);
      const double v = th * (2.0 * (j + 0.5) / per_axis - 1.0);
      const double x1 = cp - sp * v, z1 = sp + cp * v;
      const oracle::Dir d{cy * x1 - sy * u, sy * x1 + cy * u, z1};
      const auto rc = oracle::TileOf(d, rows, cols);
      out.insert(rc[0] * cols + rc[1]);
    }
  }
  return out;
}

Outcome Geometry() {
  const ErpGrid g = ErpGrid::Default8K();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> yaw(-180, 180), pitch(-90, 90);
  int missing = 0, extra = 0;
  for (int k = 0; k < 50; ++k) {
    const double y = yaw(rng), p = pitch(rng);
    const TileMask cover = TilesCoveringFov(FovPose::FromYawPitch(y, p), g);
    const std::set<int> dense = SampledCover(y, p, 1024, g.rows(), g.cols());
    for (int t : dense) missing += !cover.Test(t);
    extra = std::max(extra, cover.Count() - static_cast<int>(dense.size()));
  }
  bool ri_ok = true;
  for (int k : {4, 8, 16, 32, 64}) {
    const int period = (512 + k - 1) / k;
    ri_ok &= RiRefreshPeriod(k, g) == period;
    std::vector<int> seen(512, 0);
    for (int f = 100; f < 100 + period; ++f) {
      for (int t : RiTilesAt(f, k, g).Indices()) ++seen[t];
    }
    ri_ok &= std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; });
  }
  double worst_hit = 0.0;
  const struct {
    double py, pp, ay, ap;
    int border, ri, frame;
  } cases[] = {{0, 0, 45, 0, 20, 16, 40}, {30, 60, 10, 75, 50, 4, 3}, {-120, -20, -100, -35, 10, 64, 5}};
  for (const auto& c : cases) {
    const FovPose pred = FovPose::FromYawPitch(c.py, c.pp);
    const RegionLayout lay = BuildLayout(pred, c.border, c.ri, c.frame, g);
    const HitRates h = ComputeHitRates(pred, FovPose::FromYawPitch(c.ay, c.ap), lay, g);
    double acc[4] = {0, 0, 0, 0};
    int n = 0;
    while (n < 1000000) {
      const oracle::Dir d = oracle::UniformSphere(rng);
      if (!oracle::InViewport(c.ay, c.ap, 90, 90, d)) continue;
      ++n;
      const auto rc = oracle::TileOf(d, g.rows(), g.cols());
      const int t = rc[0] * g.cols() + rc[1];
      acc[lay.ri.Test(t) ? 2 : lay.pf.Test(t) ? 0 : lay.pfplus.Test(t) ? 1 : 3] += 1;
    }
    const double got[4] = {h.pf, h.pfplus, h.ri, h.uncoded};
    for (int i = 0; i < 4; ++i) worst_hit = std::max(worst_hit, std::abs(got[i] - acc[i] / n));
  }
  Outcome out;
  out.pass = missing == 0 && extra <= 4 && ri_ok && worst_hit <= 0.005;
  out.detail = Fmt("%.0f sampled tiles missed, at most %.0f sliver extras, hit error %.4f",
                   missing, extra, worst_hit);
  if (!ri_ok) out.detail += ", intra refresh schedule wrong";
  return out;
}

double MeanDelay(const SimLog& log) {
  double s = 0;
  int n = 0;
  for (const auto& f : log.frames) {
    if (f.fate != FrameFate::kDisplayed) continue;
    s += f.display_ms - f.capture_ms;
    ++n;
  }
  return n ? s / n : NAN;
}

Outcome UnlimitedBandwidth() {
  SimConfig cfg;
  cfg.predictors.fov = "oracle";
  cfg.duration_s = 500;
  const FovTrace fov = SyntheticFovTrace("smooth", 501, 30, 3);
  const BandwidthTrace bw = BandwidthTrace::Constant(1e12, 502000);
  const auto t0 = Clock::now();
  const SimLog log = RunSimulation(cfg, bw, fov, Variant::kProposed);
  const double secs = Seconds(t0);
  const MetricsReport r = ComputeMetrics(log);
  const double delay = MeanDelay(log);
  Outcome out;
  out.pass = delay >= 59.4 && delay <= 70.6 && r.delivery_rate == 1.0 &&
             r.freeze_frame_pct == 0.0 && log.Count(FrameFate::kDisplayed) == log.captured() &&
             secs < 5.0;
  out.detail = Fmt("delay %.2f ms, delivery %.3f, freeze %.2f %%, 500 s session in %.2f s",
                   delay, r.delivery_rate, r.freeze_frame_pct, secs);
  return out;
}

Outcome Conservation() {
  SimConfig cfg;
  cfg.duration_s = 60;
  int runs = 0, broken = 0, worst_occ = 0;
  double lo = 1e9, hi = -1e9, stress_hi = -1e9;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const FovTrace fov = SyntheticFovTrace(seed == 22 ? "pole" : "explore", 61, 30, seed);
    // A varying link, then the same link with random outages.
    const BandwidthTrace links[] = {SyntheticBandwidthTrace(62, 90e6, 0.4, seed),
                                    SyntheticBandwidthTrace(62, 90e6, 0.4, seed, 0.1, 200, 2000)};
    for (int l = 0; l < 2; ++l) {
      for (Variant v : AllVariants()) {
        const SimLog log = RunSimulation(cfg, links[l], fov, v);
        ++runs;
        const std::int64_t rhs = log.Count(FrameFate::kDisplayed) +
                                 log.Count(FrameFate::kDeadlineDropped) +
                                 log.Count(FrameFate::kInFlight);
        if (log.encoded() != rhs ||
            log.captured() != rhs + log.Count(FrameFate::kSenderSkipped)) {
          ++broken;
        }
        worst_occ = std::max(worst_occ, log.max_sender_occupancy);
        for (const auto& f : log.frames) worst_occ = std::max(worst_occ, f.sender_occupancy);
        const double interval = ComputeMetrics(log).display_interval_mean;
        if (l == 0) {
          lo = std::min(lo, interval);
          hi = std::max(hi, interval);
        } else {
          stress_hi = std::max(stress_hi, interval);
        }
      }
    }
  }
  // Every frame lost to an outage stretches the mean interval by about
  // T / displayed, so the band is checked on the runs without outages.
  Outcome out;
  out.pass = broken == 0 && worst_occ <= cfg.budget.sender_capacity_frames &&
             lo >= 100.0 / 3.0 - 0.2 && hi <= 100.0 / 3.0 + 0.2;
  out.detail = Fmt("%.0f runs, %.0f accounting breaks, max occupancy %.0f", runs, broken,
                   worst_occ) +
               Fmt(", display interval %.2f..%.2f ms (outage runs up to %.2f ms)", lo, hi,
                   stress_hi);
  return out;
}

Outcome Ordering() {
  SimConfig cfg;
  cfg.duration_s = 60;
  const auto t0 = Clock::now();
  const BandwidthTrace bw = SyntheticBandwidthTrace(62, 100e6, 0.3, 1001);
  const char* kinds[] = {"smooth", "explore", "pole", "static"};
  std::vector<std::vector<MetricsReport>> per(AllVariants().size());
  for (int i = 0; i < 8; ++i) {
    const FovTrace fov = SyntheticFovTrace(kinds[i % 4], 61, 30, 1 + i);
    for (std::size_t v = 0; v < AllVariants().size(); ++v) {
      per[v].push_back(ComputeMetrics(RunSimulation(cfg, bw, fov, AllVariants()[v])));
    }
  }
  const double secs = Seconds(t0);
  auto agg = [&](Variant v) {
    const auto& all = AllVariants();
    return AggregateReports(per[std::find(all.begin(), all.end(), v) - all.begin()]);
  };
  const MetricsReport p = agg(Variant::kProposed), s = agg(Variant::kSimplified),
                      b1 = agg(Variant::kBm1), b2 = agg(Variant::kBm2), b3 = agg(Variant::kBm3);
  Outcome out;
  out.pass = p.ws_psnr_in_fov >= s.ws_psnr_in_fov && s.ws_psnr_in_fov > b3.ws_psnr_in_fov &&
             b3.ws_psnr_in_fov > b2.ws_psnr_in_fov && b2.ws_psnr_in_fov > b1.ws_psnr_in_fov &&
             b3.avg_frame_delay > p.avg_frame_delay &&
             b3.delay_std_over_mean > p.delay_std_over_mean &&
             b3.freeze_frame_pct > p.freeze_frame_pct &&
             p.ws_psnr_in_fov - s.ws_psnr_in_fov <= 0.5 && secs < 300.0;
  out.detail = Fmt("WS-PSNR %.2f / %.2f / %.2f / %.2f", p.ws_psnr_in_fov, s.ws_psnr_in_fov,
                   b3.ws_psnr_in_fov, b2.ws_psnr_in_fov) +
               Fmt(" / %.2f dB; bm3 delay %.1f vs %.1f ms", b1.ws_psnr_in_fov,
                   b3.avg_frame_delay, p.avg_frame_delay) +
               Fmt(", std/mean %.3f vs %.3f, freeze %.2f vs %.2f %%", b3.delay_std_over_mean,
                   p.delay_std_over_mean, b3.freeze_frame_pct, p.freeze_frame_pct) +
               Fmt("; 8 traces in %.1f s", secs);
  return out;
}

Outcome PoleTrace() {
  SimConfig cfg;
  cfg.duration_s = 60;
  const FovTrace fov = SyntheticFovTrace("pole", 61, 30, 5);
  const BandwidthTrace bw = SyntheticBandwidthTrace(62, 100e6, 0.3, 1001);
  const double bm1 = ComputeMetrics(RunSimulation(cfg, bw, fov, Variant::kBm1)).hit_total;
  const double bm2 = ComputeMetrics(RunSimulation(cfg, bw, fov, Variant::kBm2)).hit_total;
  const double prop = ComputeMetrics(RunSimulation(cfg, bw, fov, Variant::kProposed)).hit_total;
  Outcome out;
  out.pass = bm1 < 90.0 && bm2 > 98.0 && prop > 98.0;
  out.detail = Fmt("total hit bm1 %.1f %%, bm2 %.1f %%, proposed %.1f %%", bm1, bm2, prop);
  return out;
}

Outcome HandTrace() {
  oracle::Checker c;
  oracle::RunHandTrace(c);
  Outcome out;
  out.pass = c.failures == 0 && c.checks > 200;
  out.detail = Fmt("%.0f values checked, %.0f off", c.checks, c.failures);
  if (c.failures) out.detail += " (first: " + c.first_failure + ")";
  return out;
}

Outcome Determinism() {
  SimConfig cfg;
  cfg.duration_s = 20;
  const FovTrace fov = SyntheticFovTrace("explore", 21, 30, 9);
  const BandwidthTrace bw = SyntheticBandwidthTrace(22, 80e6, 0.4, 9, 0.1, 200, 600);
  int differ = 0;
  for (Variant v : AllVariants()) {
    const SimLog a = RunSimulation(cfg, bw, fov, v);
    const SimLog b = RunSimulation(cfg, bw, fov, v);
    differ += FrameLogCsv(a) != FrameLogCsv(b) || SegmentLogCsv(a) != SegmentLogCsv(b);
  }
  Outcome out;
  out.pass = differ == 0;
  out.detail = Fmt("%.0f of 5 variants differ between runs", differ);
  return out;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"optimizer", Optimizer},
      {"formulas", Formulas},
      {"geometry", Geometry},
      {"unlimited-bandwidth", UnlimitedBandwidth},
      {"conservation", Conservation},
      {"ordering", Ordering},
      {"pole-trace", PoleTrace},
      {"hand-trace", HandTrace},
      {"determinism", Determinism},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}

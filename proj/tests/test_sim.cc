#include <doctest.h>

#include <chrono>
#include <cmath>
#include <map>

#include "fovstream/metrics.h"
#include "fovstream/sim.h"
#include "hand_trace.h"

using namespace fovstream;

namespace {

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

void CheckLifecycle(const SimLog& log, const SimConfig& cfg) {
  std::int64_t last_shown = -1;
  double last_display = -1;
  for (const auto& f : log.frames) {
    if (f.fate == FrameFate::kSenderSkipped) {
      CHECK(f.sender_occupancy == cfg.budget.sender_capacity_frames);
      continue;
    }
    CHECK(f.sender_occupancy < cfg.budget.sender_capacity_frames);
    CHECK(f.encode_end_ms == doctest::Approx(f.capture_ms + cfg.timing.encode_ms).epsilon(1e-9));
    if (!std::isnan(f.send_end_ms)) {
      CHECK(f.send_start_ms >= f.encode_end_ms);
      CHECK(f.send_end_ms >= f.send_start_ms);
      CHECK(f.arrival_ms == doctest::Approx(f.send_end_ms + cfg.timing.propagation_ms));
    }
    if (!std::isnan(f.decode_end_ms)) {
      CHECK(f.decode_end_ms >= f.arrival_ms + cfg.timing.decode_ms - 1e-9);
    }
    if (f.fate == FrameFate::kDisplayed) {
      CHECK(f.display_ms >= f.decode_end_ms);
      CHECK(f.frame > last_shown);
      CHECK(f.display_ms > last_display);
      last_shown = f.frame;
      last_display = f.display_ms;
    }
  }
  CHECK(log.max_sender_occupancy <= cfg.budget.sender_capacity_frames);
  CHECK(log.encoded() == log.Count(FrameFate::kDisplayed) +
                             log.Count(FrameFate::kDeadlineDropped) +
                             log.Count(FrameFate::kInFlight));
}

}  // namespace

TEST_CASE("unlimited bandwidth with oracle prediction reaches the pipeline floor") {
  SimConfig cfg;
  cfg.predictors.fov = "oracle";
  cfg.duration_s = 20;
  const FovTrace fov = SyntheticFovTrace("smooth", 21, 30, 3);
  const BandwidthTrace bw = BandwidthTrace::Constant(1e12, 40000);
  const SimLog log = RunSimulation(cfg, bw, fov, Variant::kProposed);
  CHECK(log.Count(FrameFate::kDisplayed) == log.captured());
  CHECK(log.freeze_runs.empty());
  CHECK(MeanDelay(log) >= 59.4);
  CHECK(MeanDelay(log) <= 59.4 + 11.2);
  CheckLifecycle(log, cfg);
}

TEST_CASE("link outage fills the sender buffer and freezes the display") {
  SimConfig cfg;
  cfg.duration_s = 6;
  const FovTrace fov = SyntheticFovTrace("smooth", 7, 30, 5);
  const BandwidthTrace bw({0.0, 2000.0, 8000.0}, {200e6, 0.0});
  const SimLog log = RunSimulation(cfg, bw, fov, Variant::kProposed);
  CHECK(log.max_sender_occupancy == cfg.budget.sender_capacity_frames);
  CHECK(log.Count(FrameFate::kSenderSkipped) > 0);
  CHECK(log.Count(FrameFate::kInFlight) == cfg.budget.sender_capacity_frames);
  CheckLifecycle(log, cfg);
  // Once the link is gone the screen never updates again: one long run.
  REQUIRE_FALSE(log.freeze_runs.empty());
  CHECK(log.freeze_runs.back() * log.poll_interval_ms > 3500.0);
}

TEST_CASE("every variant conserves frames under random dropouts") {
  SimConfig cfg;
  cfg.duration_s = 30;
  for (std::uint64_t seed : {11u, 12u}) {
    const FovTrace fov = SyntheticFovTrace("explore", 31, 30, seed);
    const BandwidthTrace bw = SyntheticBandwidthTrace(32, 80e6, 0.4, seed, 0.15);
    for (Variant v : AllVariants()) {
      CAPTURE(VariantName(v));
      const SimLog log = RunSimulation(cfg, bw, fov, v);
      CheckLifecycle(log, cfg);
      const MetricsReport m = ComputeMetrics(log);
      CHECK(m.freeze_frame_pct >= 0.0);
      CHECK(m.freeze_frame_pct <= 100.0);
    }
  }
}

TEST_CASE("reruns produce byte-identical frame logs") {
  SimConfig cfg;
  cfg.duration_s = 10;
  const FovTrace fov = SyntheticFovTrace("explore", 11, 30, 8);
  const BandwidthTrace bw = SyntheticBandwidthTrace(12, 90e6, 0.3, 8, 0.1);
  for (Variant v : {Variant::kProposed, Variant::kBm3}) {
    const std::string a = FrameLogCsv(RunSimulation(cfg, bw, fov, v));
    const std::string b = FrameLogCsv(RunSimulation(cfg, bw, fov, v));
    CHECK(a == b);
  }
}

TEST_CASE("traces that end early are rejected") {
  SimConfig cfg;
  cfg.duration_s = 10;
  const FovTrace fov = SyntheticFovTrace("smooth", 5, 30, 1);
  const BandwidthTrace bw = BandwidthTrace::Constant(1e8, 20000);
  CHECK_THROWS_AS(RunSimulation(cfg, bw, fov, Variant::kProposed), SimulationError);
  const FovTrace longer = SyntheticFovTrace("smooth", 11, 30, 1);
  CHECK_THROWS_AS(RunSimulation(cfg, BandwidthTrace::Constant(1e8, 5000), longer,
                                Variant::kProposed),
                  SimulationError);
}

TEST_CASE("charging applies rho only to inter-coded tiles") {
  const ErpGrid grid(1024, 512, 256);
  const double area = grid.TileAreaDeg2ByIndex(0);
  const RateIncreaseModel rho{1.0, 0.5};
  TileLedger ledger(grid.tile_count(), 0, 30.0);
  RegionLayout layout;
  layout.pf = TileMask(8);
  layout.pf.Set(0);
  FrameCode code;
  code.pf = {100.0, {10.0, 2.0}, true};
  // Coded last frame: no inflation.
  ledger.Record(0, 9, 30.0);
  ChargeResult c = ChargeFrameBits(layout, code, rho, ledger, 10, grid);
  CHECK(c.bits == doctest::Approx(area * 100.0).epsilon(1e-12));
  // Re-entering after 10 frames: 1 + (1 - e^-4.5).
  ledger.Record(0, 0, 30.0);
  c = ChargeFrameBits(layout, code, rho, ledger, 10, grid);
  CHECK(c.bits / (area * 100.0) == doctest::Approx(2.0 - std::exp(-4.5)).epsilon(1e-12));
  CHECK(c.bits / (area * 100.0) == doctest::Approx(1.989).epsilon(1e-3));
  CHECK(ledger.last_coded_frame(0) == 10);
  CHECK(ledger.last_coded_quality(0) == doctest::Approx(10.0 + 2.0 * std::log(100.0)));
  code.pf.inter = false;
  ledger.Record(0, 0, 30.0);
  c = ChargeFrameBits(layout, code, rho, ledger, 10, grid);
  CHECK(c.bits == doctest::Approx(area * 100.0).epsilon(1e-12));
}

TEST_CASE("rendering decays stale tiles and repeats lose quality") {
  const ErpGrid grid(1024, 512, 256);
  const QualityDecayModel kappa{0.1, 1.0};
  TileLedger ledger(8, 5, 40.0);
  TileWeights w;
  w.entries = {{0, 0.25}, {1, 0.75}};
  RenderResult r = RenderFrame(w, ledger, 5, kappa, grid);
  CHECK(r.quality_db == doctest::Approx(40.0));
  CHECK(r.spatial_disc_db == doctest::Approx(0.0));
  ledger.Record(0, 5, 44.0);
  ledger.Record(1, 2, 40.0);
  r = RenderFrame(w, ledger, 5, kappa, grid);
  const double q1 = 40.0 * std::exp(-0.3);
  CHECK(r.quality_db == doctest::Approx(0.25 * 44.0 + 0.75 * q1).epsilon(1e-12));
  CHECK(r.spatial_disc_db == doctest::Approx(std::abs(44.0 - q1)).epsilon(1e-12));
  double prev = r.quality_db;
  for (int k = 1; k <= 4; ++k) {
    const double q = RenderFrame(w, ledger, 5, kappa, grid, k).quality_db;
    CHECK(q < prev);
    prev = q;
  }
}

// Scripted 4x2 grid over 12 frames. The viewport column moves right every
// three frames; its right neighbour is the border; one tile per frame is
// refreshed intra. The oracle replays the same script with plain arrays.
TEST_CASE("hand trace on a 4x2 grid") {
  oracle::Checker c;
  RunHandTrace(c);
  CHECK(c.checks > 200);
  CHECK_MESSAGE(c.failures == 0, c.first_failure);
}

TEST_CASE("measured hits follow the actual viewport") {
  StatsGeometry geo;
  geo.borders = {10, 50};
  geo.ri_sizes = {4};
  std::vector<FrameObservation> obs;
  for (int f = 0; f < 6; ++f) {
    FrameObservation o;
    o.frame = 40 + f;
    o.pose_known = true;
    o.predicted = DirectionFromYawPitch(10.0 * f, 0.0);
    o.actual = o.predicted;
    obs.push_back(o);
  }
  const SegmentStats s = CollectSegmentStats(obs, geo, {});
  for (int b : geo.borders) {
    const RegionHits h = s.pair_hits.at({b, 4});
    CHECK(h.pf + h.ri == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h.pfplus == doctest::Approx(0.0));
  }
  // Actual view 30 degrees off: some of it lands in the border.
  for (auto& o : obs) o.actual = DirectionFromYawPitch(YawDeg(o.predicted) + 30.0, 0.0);
  const SegmentStats moved = CollectSegmentStats(obs, geo, {});
  CHECK(moved.pair_hits.at({50, 4}).pfplus > moved.pair_hits.at({10, 4}).pfplus);
  CHECK(moved.pair_hits.at({50, 4}).pf < 1.0);
}

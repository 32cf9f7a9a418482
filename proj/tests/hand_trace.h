// The 4x2-grid hand trace, worked with plain arrays and the closed-form
// rho / kappa / log curves. Shared by the unit tests and the acceptance run.
#ifndef FOVSTREAM_TESTS_HAND_TRACE_H_
#define FOVSTREAM_TESTS_HAND_TRACE_H_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fovstream/sim.h"

namespace oracle {

struct Checker {
  long checks = 0;
  long failures = 0;
  std::string first_failure;

  void True(bool ok, const std::string& what) {
    ++checks;
    if (ok) return;
    if (failures++ == 0) first_failure = what;
  }
  void Near(double got, double want, double tol, const std::string& what) {
    True(std::abs(got - want) <= tol,
         what + ": got " + std::to_string(got) + " want " + std::to_string(want));
  }
};

inline void RunHandTrace(Checker& c) {
  using namespace fovstream;
  const ErpGrid grid(1024, 512, 256);
  c.True(grid.tile_count() == 8, "tile count");
  const double area = (kPi / 2) * (180.0 / kPi) * (180.0 / kPi);
  QualityModelSet m;
  m.pf = {10.0, 2.0};
  m.pfplus[30] = {8.0, 2.0};
  m.ri = {6.0, 2.0};
  m.rho = {1.0, 0.5};
  m.kappa = {0.1, 1.0};
  const double re = 100.0, rb = 20.0;

  auto rho = [](long tau) { return 1.0 + (1.0 - std::exp(-0.5 * (tau - 1))); };
  auto q = [](double a, double r) { return a + 2.0 * std::log(r); };
  long o_frame[8];
  double o_q[8];
  for (int t = 0; t < 8; ++t) {
    o_frame[t] = 0;
    o_q[t] = q(6.0, rb);
  }
  std::map<long, long> o_hist;

  TileLedger ledger(8, 0, q(6.0, rb));
  LapseHistogram hist;
  std::vector<FrameCoding> history;
  const TileLedger at_start = ledger;
  for (int f = 1; f < 12; ++f) {
    const std::string at = "frame " + std::to_string(f);
    const int col = (f / 3) % 4;
    const int ri_tile = f % 8;
    RegionLayout layout;
    layout.pf = TileMask(8);
    layout.pfplus = TileMask(8);
    layout.ri = RiTilesAt(f, 1, grid);
    c.True(layout.ri.Test(ri_tile), at + " intra tile");
    for (int row = 0; row < 2; ++row) {
      if (row * 4 + col != ri_tile) layout.pf.Set(row * 4 + col);
      const int b = row * 4 + (col + 1) % 4;
      if (b != ri_tile) layout.pfplus.Set(b);
    }
    FrameCode code;
    code.pf = {re, m.pf, true};
    code.pfplus = {rb, m.pfplus[30], true};
    code.ri = {rb, m.ri, false};
    const ChargeResult got = ChargeFrameBits(layout, code, m.rho, ledger, f, grid);
    for (const auto& [tau, n] : got.pf_lapses) hist[tau] += n;
    history.push_back({f, layout.pf, layout.pf | layout.pfplus | layout.ri});

    double want = area * rb;
    o_frame[ri_tile] = f;
    o_q[ri_tile] = q(6.0, rb);
    for (int row = 0; row < 2; ++row) {
      const int p = row * 4 + col, b = row * 4 + (col + 1) % 4;
      if (p != ri_tile) {
        const long tau = f - o_frame[p];
        want += area * re * rho(tau);
        ++o_hist[tau];
        o_frame[p] = f;
        o_q[p] = q(10.0, re);
      }
      if (b != ri_tile) {
        want += area * rb * rho(f - o_frame[b]);
        o_frame[b] = f;
        o_q[b] = q(8.0, rb);
      }
    }
    c.Near(got.bits, want, 1e-9 * want, at + " bits");
    for (int t = 0; t < 8; ++t) {
      c.True(ledger.last_coded_frame(t) == o_frame[t], at + " ledger frame");
      c.Near(ledger.last_coded_quality(t), o_q[t], 1e-9, at + " ledger quality");
    }
    // Viewport straddling the coded column and the stale one to its left.
    TileWeights w;
    const int left = (col + 3) % 4;
    w.entries = {{col, 0.4}, {left, 0.35}, {4 + col, 0.25}};
    const RenderResult rr = RenderFrame(w, ledger, f, m.kappa, grid);
    double want_q = 0.0;
    for (const auto& [t, wt] : w.entries) {
      want_q += wt * o_q[t] * std::exp(-0.1 * (f - o_frame[t]));
    }
    c.Near(rr.quality_db, want_q, 1e-9, at + " rendered quality");
  }
  // Frame 1 worked by hand: column 0 coded last at frame 0, tile 1 taken by
  // the intra block, so 2 PF tiles, 1 border tile, 1 intra tile.
  {
    TileLedger l(8, 0, 0.0);
    RegionLayout lay;
    lay.pf = TileMask(8);
    lay.pf.Set(0);
    lay.pf.Set(4);
    lay.pfplus = TileMask(8);
    lay.pfplus.Set(5);
    lay.ri = TileMask(8);
    lay.ri.Set(1);
    FrameCode code{{re, m.pf, true}, {rb, m.pfplus[30], true}, {rb, m.ri, false}};
    c.Near(ChargeFrameBits(lay, code, m.rho, l, 1, grid).bits, 240.0 * area,
           1e-9 * 240.0 * area, "frame 1 by hand");
  }
  // Lapse distribution of the viewport tiles over the segment.
  LapseDistribution want;
  long total = 0;
  for (const auto& [tau, n] : o_hist) total += n;
  for (const auto& [tau, n] : o_hist) want[tau] = static_cast<double>(n) / total;
  const LapseDistribution got = ToDistribution(hist);
  const LapseDistribution replayed = MeasureLapseDistribution(at_start, history);
  c.True(got.size() == want.size(), "lapse support");
  c.True(replayed.size() == want.size(), "replayed lapse support");
  for (const auto& [tau, p] : want) {
    c.Near(got.count(tau) ? got.at(tau) : -1.0, p, 1e-9, "lapse share");
    c.Near(replayed.count(tau) ? replayed.at(tau) : -1.0, p, 1e-9, "replayed lapse share");
  }

  // Delivery rate: 9 of the 11 frames with a known fate were shown.
  std::vector<FrameObservation> obs;
  for (int f = 1; f < 12; ++f) {
    FrameObservation o;
    o.frame = f;
    o.fate_known = f != 11;
    o.delivered = f != 4 && f != 7;
    obs.push_back(o);
  }
  obs.push_back({});
  obs.back().frame = 12;
  obs.back().fate_known = true;
  obs.back().delivered = true;
  StatsGeometry geo;
  geo.grid = grid;
  const SegmentStats s = CollectSegmentStats(obs, geo, {});
  c.Near(s.gamma, 9.0 / 11.0, 1e-12, "segment delivery rate");
  c.True(s.gamma_frames == 11, "segment delivery frames");

  // Capacity bins: 8 Mbit/s for 300 ms then 2 Mbit/s.
  const BandwidthTrace bw({0.0, 300.0, 1000.0}, {8e6, 2e6});
  const std::vector<double> bins = BinCapacity(bw, 0.0, 600.0, 200.0);
  c.True(bins.size() == 3, "bin count");
  if (bins.size() == 3) {
    c.Near(bins[0], 1.6e6, 1e-9 * 1.6e6, "bin 0");
    c.Near(bins[1], 1.0e6, 1e-9 * 1e6, "bin 1");
    c.Near(bins[2], 0.4e6, 1e-9 * 0.4e6, "bin 2");
  }
}

}  // namespace oracle

#endif  // FOVSTREAM_TESTS_HAND_TRACE_H_

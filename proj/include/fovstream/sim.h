#ifndef FOVSTREAM_SIM_H_
#define FOVSTREAM_SIM_H_

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fovstream/allocator.h"
#include "fovstream/config.h"
#include "fovstream/geometry.h"
#include "fovstream/ledger.h"
#include "fovstream/predictors.h"
#include "fovstream/quality_models.h"
#include "fovstream/traces.h"

namespace fovstream {

enum class Variant { kProposed, kSimplified, kBm1, kBm2, kBm3 };

std::string VariantName(Variant v);
Variant ParseVariant(const std::string& name);
std::vector<Variant> AllVariants();

// How one region of a frame is coded: target rate and Q-R model, and
// whether tiles are predicted from their previous version.
struct RegionCode {
  double rate = 0.0;
  LogQrModel model;
  bool inter = false;
};

struct FrameCode {
  RegionCode pf;
  RegionCode pfplus;
  RegionCode ri;
};

struct ChargeResult {
  double bits = 0.0;
  LapseHistogram pf_lapses;
  LapseHistogram pfplus_lapses;
};

// Charges every coded tile its area times the target rate, inflated by
// rho(lapse) for inter-coded tiles, and records the tiles in the ledger.
ChargeResult ChargeFrameBits(const RegionLayout& layout, const FrameCode& code,
                             const RateIncreaseModel& rho, TileLedger& ledger,
                             std::int64_t frame, const ErpGrid& grid);

struct RenderResult {
  double quality_db = 0.0;
  // Mean absolute quality step between neighbouring tiles of the viewport.
  double spatial_disc_db = 0.0;
  std::vector<std::pair<int, double>> tile_quality;
};

// Quality seen through the viewport when `frame` is on screen, with
// `extra_lapse` more frames elapsed (repeats during a freeze).
RenderResult RenderFrame(const TileWeights& weights, const TileLedger& ledger,
                         std::int64_t frame, const QualityDecayModel& kappa,
                         const ErpGrid& grid, std::int64_t extra_lapse = 0);

// What the sender learns about a past frame at a segment boundary.
struct FrameObservation {
  std::int64_t frame = 0;
  bool fate_known = false;
  bool delivered = false;  // displayed before its deadline
  bool pose_known = false;
  Vec3 predicted;
  Vec3 actual;
  // Precomputed viewport weights of `actual`, if available.
  const TileWeights* actual_weights = nullptr;
};

struct SegmentStats {
  double gamma = 1.0;
  int gamma_frames = 0;
  std::map<std::pair<int, int>, RegionHits> pair_hits;
  int alpha_frames = 0;
  LapseDistribution lapse_pf{{1, 1.0}};
  LapseDistribution lapse_pfplus{{1, 1.0}};
  std::vector<double> throughput_samples;
};

struct StatsGeometry {
  ErpGrid grid = ErpGrid::Default8K();
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
  std::vector<int> borders;
  std::vector<int> ri_sizes;
  int rays_per_axis = 32;
  CoverageOptions coverage;
};

// Where the rotating block will be over the coming segment, seen from the
// newest known viewport.
struct RiForecast {
  std::int64_t first_frame = 0;
  int frames = 0;
  TileWeights latest;  // viewport weights of the newest known pose
};

// Delivery rate over frames with a known fate and average region hits for
// every (border, ri) pair over frames with a known actual pose. Fields
// without evidence keep the values of `previous`. With a forecast, the
// rotating-block share comes from the upcoming schedule instead and the
// measured viewport and border shares are scaled by what it leaves over.
SegmentStats CollectSegmentStats(const std::vector<FrameObservation>& frames,
                                 const StatsGeometry& geo,
                                 const SegmentStats& previous,
                                 const RiForecast* forecast = nullptr);

enum class FrameFate { kDisplayed, kSenderSkipped, kDeadlineDropped, kInFlight };

std::string FateName(FrameFate f);

inline constexpr double kNoTime = std::numeric_limits<double>::quiet_NaN();

struct FrameLog {
  std::int64_t frame = 0;
  std::int64_t segment = 0;
  FrameFate fate = FrameFate::kInFlight;
  double capture_ms = 0.0;
  double encode_end_ms = kNoTime;
  double send_start_ms = kNoTime;
  double send_end_ms = kNoTime;
  double arrival_ms = kNoTime;
  double decode_end_ms = kNoTime;
  double display_ms = kNoTime;
  int sender_occupancy = 0;  // frames queued when encoding started
  double budget_bits = 0.0;
  double bits = 0.0;
  bool intra_frame = false;
  int border_deg = 0;
  int ri_tiles = 0;
  double r_e = 0.0;
  double r_b = 0.0;
  int horizon = 0;
  Vec3 predicted;
  Vec3 actual;  // pose at display time
  double quality_db = kNoTime;
  double spatial_disc_db = kNoTime;
  HitRates hits;
};

struct SegmentLog {
  std::int64_t segment = 0;
  bool bootstrap = false;
  double predicted_bits = 0.0;
  double capacity_bits = 0.0;
  double backlog_bits = 0.0;
  double budget_bits = 0.0;
  double spent_bits = 0.0;
  int border_deg = 0;
  int ri_tiles = 0;
  double r_e = 0.0;
  double r_b = 0.0;
  double expected_quality = 0.0;
  double gamma = 1.0;
  double alpha_pf = 0.0;
  double alpha_pfplus = 0.0;
  double alpha_ri = 0.0;
  double mean_rho_pf = 1.0;
  double mean_rho_pfplus = 1.0;
};

struct SimLog {
  Variant variant = Variant::kProposed;
  double frame_interval_ms = 0.0;
  double poll_interval_ms = 0.0;
  double duration_ms = 0.0;
  std::vector<FrameLog> frames;
  std::vector<SegmentLog> segments;
  // Polls from the first display onwards, and the runs of consecutive
  // polls that repeated the previous frame past its nominal interval.
  std::int64_t polls_observed = 0;
  std::vector<std::int64_t> freeze_runs;
  int max_sender_occupancy = 0;

  std::int64_t Count(FrameFate f) const;
  std::int64_t captured() const { return static_cast<std::int64_t>(frames.size()); }
  std::int64_t encoded() const { return captured() - Count(FrameFate::kSenderSkipped); }
};

// Optional replacements for the predictors named in the config.
struct SimOverrides {
  FovPredictor* fov = nullptr;
  BandwidthPredictor* bandwidth = nullptr;
};

SimLog RunSimulation(const SimConfig& cfg, const BandwidthTrace& bw,
                     const FovTrace& fov, Variant variant,
                     const SimOverrides& overrides = {});

}  // namespace fovstream

#endif  // FOVSTREAM_SIM_H_

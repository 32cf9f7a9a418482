#include "fovstream/sim.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <unordered_map>

namespace fovstream {

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kProposed: return "proposed";
    case Variant::kSimplified: return "simplified";
    case Variant::kBm1: return "bm1";
    case Variant::kBm2: return "bm2";
    case Variant::kBm3: return "bm3";
  }
  return "?";
}

Variant ParseVariant(const std::string& name) {
  for (Variant v : AllVariants()) {
    if (VariantName(v) == name) return v;
  }
  throw ArgumentError("unknown variant '" + name + "'");
}

std::vector<Variant> AllVariants() {
  return {Variant::kProposed, Variant::kSimplified, Variant::kBm1, Variant::kBm2,
          Variant::kBm3};
}

std::string FateName(FrameFate f) {
  switch (f) {
    case FrameFate::kDisplayed: return "displayed";
    case FrameFate::kSenderSkipped: return "sender_overflow";
    case FrameFate::kDeadlineDropped: return "deadline";
    case FrameFate::kInFlight: return "in_flight";
  }
  return "?";
}

std::int64_t SimLog::Count(FrameFate f) const {
  return std::count_if(frames.begin(), frames.end(),
                       [f](const FrameLog& r) { return r.fate == f; });
}

ChargeResult ChargeFrameBits(const RegionLayout& layout, const FrameCode& code,
                             const RateIncreaseModel& rho, TileLedger& ledger,
                             std::int64_t frame, const ErpGrid& grid) {
  ChargeResult out;
  auto charge = [&](const TileMask& mask, const RegionCode& rc, LapseHistogram* hist) {
    if (mask.size() == 0) return;
    const double q = QualityAtRate(rc.model, rc.rate);
    for (int t : mask.Indices()) {
      double bits = grid.TileAreaDeg2ByIndex(t) * rc.rate;
      if (rc.inter) {
        const std::int64_t tau = ledger.Lapse(t, frame);
        bits *= Rho(rho, tau);
        if (hist) ++(*hist)[tau];
      }
      out.bits += bits;
      ledger.Record(t, frame, q);
    }
  };
  // RI first: a tile in both masks is coded once, as intra.
  TileMask pf = layout.pf, pfplus = layout.pfplus;
  if (layout.ri.size() > 0) {
    if (pf.size() > 0) pf.Subtract(layout.ri);
    if (pfplus.size() > 0) pfplus.Subtract(layout.ri);
  }
  charge(layout.ri, code.ri, nullptr);
  if (pf.size() > 0 && pfplus.size() > 0) pfplus.Subtract(pf);
  charge(pf, code.pf, &out.pf_lapses);
  charge(pfplus, code.pfplus, &out.pfplus_lapses);
  return out;
}

RenderResult RenderFrame(const TileWeights& weights, const TileLedger& ledger,
                         std::int64_t frame, const QualityDecayModel& kappa,
                         const ErpGrid& grid, std::int64_t extra_lapse) {
  RenderResult r;
  double wsum = 0.0, qsum = 0.0;
  std::unordered_map<int, double> q_of;
  for (const auto& [tile, w] : weights.entries) {
    const double tau = static_cast<double>(ledger.Lapse(tile, frame) + extra_lapse);
    if (tau < 0) throw SimulationError("ledger is ahead of the rendered frame");
    const double q = DecayedQuality(ledger.last_coded_quality(tile), tau, kappa);
    r.tile_quality.emplace_back(tile, q);
    q_of[tile] = q;
    wsum += w;
    qsum += w * q;
  }
  r.quality_db = wsum > 0 ? qsum / wsum : 0.0;
  double disc = 0.0;
  int counted = 0;
  for (const auto& [tile, q] : r.tile_quality) {
    const TileId id = grid.FromIndex(tile);
    const TileId nb[4] = {{id.row - 1, id.col},
                          {id.row + 1, id.col},
                          {id.row, (id.col + 1) % grid.cols()},
                          {id.row, (id.col + grid.cols() - 1) % grid.cols()}};
    double s = 0.0;
    int n = 0;
    for (int i = 0; i < 4; ++i) {
      if (!grid.Contains(nb[i])) continue;
      if (i == 3 && nb[3] == nb[2]) continue;
      auto it = q_of.find(grid.Index(nb[i]));
      if (it == q_of.end() || it->first == tile) continue;
      s += std::abs(q - it->second);
      ++n;
    }
    if (n > 0) {
      disc += s / n;
      ++counted;
    }
  }
  r.spatial_disc_db = counted > 0 ? disc / counted : 0.0;
  return r;
}

SegmentStats CollectSegmentStats(const std::vector<FrameObservation>& frames,
                                 const StatsGeometry& geo,
                                 const SegmentStats& previous,
                                 const RiForecast* forecast) {
  SegmentStats s = previous;
  int known = 0, delivered = 0;
  for (const auto& f : frames) {
    if (!f.fate_known) continue;
    ++known;
    if (f.delivered) ++delivered;
  }
  if (known > 0) {
    s.gamma = static_cast<double>(delivered) / known;
    s.gamma_frames = known;
  }
  std::map<std::pair<int, int>, RegionHits> sums;
  int n = 0;
  const int tiles = geo.grid.tile_count();
  for (const auto& f : frames) {
    if (!f.pose_known) continue;
    ++n;
    const FovPose pred = FovPose::FromDirection(f.predicted, geo.fov_h_deg, geo.fov_v_deg);
    const FovPose act = FovPose::FromDirection(f.actual, geo.fov_h_deg, geo.fov_v_deg);
    const TileWeights w = f.actual_weights
                              ? *f.actual_weights
                              : ViewportTileWeights(act, geo.grid, geo.rays_per_axis);
    const TileMask cover = TilesCoveringFov(pred, geo.grid, geo.coverage);
    std::map<int, TileMask> border;
    for (int b : geo.borders) {
      border[b] = b > 0 ? TilesCoveringFov(pred.Enlarged(b), geo.grid, geo.coverage) - cover
                        : TileMask(tiles);
    }
    for (int k : geo.ri_sizes) {
      const TileMask ri = forecast ? TileMask(tiles) : RiTilesAt(f.frame, k, geo.grid);
      double in_ri = 0.0, in_cover = 0.0;
      for (const auto& [t, wt] : w.entries) {
        if (ri.Test(t)) in_ri += wt;
        else if (cover.Test(t)) in_cover += wt;
      }
      for (int b : geo.borders) {
        double in_border = 0.0;
        for (const auto& [t, wt] : w.entries) {
          if (!ri.Test(t) && border[b].Test(t)) in_border += wt;
        }
        RegionHits& h = sums[{b, k}];
        h.pf += in_cover;
        h.pfplus += in_border;
        h.ri += in_ri;
      }
    }
  }
  if (n > 0) {
    std::map<int, double> ri_share;
    if (forecast) {
      for (int k : geo.ri_sizes) {
        double share = 0.0;
        for (int i = 0; i < forecast->frames; ++i) {
          const TileMask ri = RiTilesAt(forecast->first_frame + i, k, geo.grid);
          for (const auto& [t, wt] : forecast->latest.entries) {
            if (ri.Test(t)) share += wt;
          }
        }
        ri_share[k] = forecast->frames > 0 ? share / forecast->frames : 0.0;
      }
    }
    s.pair_hits.clear();
    for (auto& [key, h] : sums) {
      RegionHits avg{h.pf / n, h.pfplus / n, h.ri / n};
      if (forecast) {
        const double r = ri_share[key.second];
        avg = {avg.pf * (1.0 - r), avg.pfplus * (1.0 - r), r};
      }
      s.pair_hits[key] = {std::clamp(avg.pf, 0.0, 1.0), std::clamp(avg.pfplus, 0.0, 1.0),
                          std::clamp(avg.ri, 0.0, 1.0)};
    }
    s.alpha_frames = n;
  }
  return s;
}

namespace {

constexpr double kTicksPerMs = 100.0;
constexpr double kMinFrameBits = 1.0;
constexpr int kMaxHorizon = 60;
constexpr double kBinMs = 200.0;

std::int64_t ToTicks(double ms) { return std::llround(ms * kTicksPerMs); }
double ToMs(std::int64_t ticks) { return static_cast<double>(ticks) / kTicksPerMs; }

enum class Ev { kEncodeEnd = 0, kCapture = 1, kSendEnd = 2, kDecodeEnd = 3, kPoll = 4 };

struct Event {
  std::int64_t tick;
  Ev type;
  std::int64_t id;  // frame index or poll index
  bool operator>(const Event& o) const {
    if (tick != o.tick) return tick > o.tick;
    if (type != o.type) return type > o.type;
    return id > o.id;
  }
};

struct PendingFrame {
  RegionLayout layout;
  TileLedger ledger;  // receiver state once this frame is decoded
  double bits = 0.0;
  double send_start_ms = 0.0;
  double send_end_exact_ms = 0.0;
};

std::unique_ptr<FovPredictor> MakeFovPredictor(const PredictorConfig& p,
                                               const std::vector<Vec3>& truth) {
  if (p.fov == "truncated-linear") {
    return std::make_unique<TruncatedLinearFovPredictor>(p.fov_window, p.fov_residual_deg);
  }
  if (p.fov == "hold") return std::make_unique<HoldFovPredictor>();
  if (p.fov == "oracle") return std::make_unique<OracleFovPredictor>(truth);
  if (p.fov == "replay") {
    return std::make_unique<ReplayFovPredictor>(ReplayFovPredictor::Load(p.fov_replay_file));
  }
  throw ArgumentError("unknown FoV predictor '" + p.fov + "'");
}

std::unique_ptr<BandwidthPredictor> MakeBandwidthPredictor(const PredictorConfig& p) {
  if (p.bandwidth == "rls") {
    return std::make_unique<RlsBandwidthPredictor>(p.rls_forgetting, p.rls_initial_cov);
  }
  if (p.bandwidth == "harmonic") return std::make_unique<HarmonicMeanBandwidthPredictor>();
  if (p.bandwidth == "replay") {
    return std::make_unique<ReplayBandwidthPredictor>(
        ReplayBandwidthPredictor::Load(p.bandwidth_replay_file));
  }
  throw ArgumentError("unknown bandwidth predictor '" + p.bandwidth + "'");
}

TileMask SliceMask(const Vec3& dir, double width_deg, const ErpGrid& grid) {
  TileMask m(grid.tile_count());
  const double lon = YawDeg(dir);
  const double col_w = 360.0 / grid.cols();
  for (int c = 0; c < grid.cols(); ++c) {
    const double center = 180.0 - (c + 0.5) * col_w;
    double d = std::fmod(std::abs(center - lon), 360.0);
    if (d > 180.0) d = 360.0 - d;
    if (d < width_deg / 2 + col_w / 2) {
      for (int r = 0; r < grid.rows(); ++r) m.Set(grid.Index({r, c}));
    }
  }
  return m;
}

double ClampRate(double r, double ceiling) {
  return std::clamp(r, kRateFloor, ceiling);
}

class Simulator {
 public:
  Simulator(const SimConfig& cfg, const BandwidthTrace& bw, const FovTrace& fov,
            Variant variant, const SimOverrides& ov)
      : cfg_(cfg), bw_(bw), variant_(variant), grid_(cfg.Grid()), models_(cfg.Models()) {
    cfg_.Validate();
    truth_ = fov.Directions();
    fps_ = cfg.timing.fps;
    duration_ms_ = cfg.duration_s > 0 ? cfg.duration_s * 1000.0 : fov.duration_ms();
    frame_count_ = static_cast<std::int64_t>(std::floor(duration_ms_ * fps_ / 1000.0 + 1e-9));
    if (frame_count_ < 1) throw SimulationError("duration shorter than one frame");
    if (static_cast<std::int64_t>(truth_.size()) < frame_count_) {
      throw SimulationError("FoV trace underrun: " + std::to_string(truth_.size()) +
                            " samples for " + std::to_string(frame_count_) + " frames");
    }
    if (bw.edges_ms().empty() || bw.start_ms() > 0.0 || bw.end_ms() < duration_ms_) {
      throw SimulationError("bandwidth trace underrun: it must cover [0, " +
                            std::to_string(duration_ms_) + "] ms");
    }
    if (ov.fov) {
      fov_pred_ = ov.fov;
    } else {
      owned_fov_ = MakeFovPredictor(cfg.predictors, truth_);
      fov_pred_ = owned_fov_.get();
    }
    if (ov.bandwidth) {
      bw_pred_ = ov.bandwidth;
    } else {
      owned_bw_ = MakeBandwidthPredictor(cfg.predictors);
      bw_pred_ = owned_bw_.get();
    }
    cov_.lat_samples_per_row = cfg.sampling.lat_samples_per_row;
    frame_ticks_ = 100000.0 / fps_;
    poll_ticks_ = frame_ticks_ / cfg.timing.polls_per_frame;
    encode_ticks_ = ToTicks(cfg.timing.encode_ms);
    decode_ticks_ = ToTicks(cfg.timing.decode_ms);
    prop_ticks_ = ToTicks(cfg.timing.propagation_ms);
    const double tail_ms = (cfg.timing.display_max_delay_frames + 1) * 1000.0 / fps_;
    end_tick_ = CaptureTick(frame_count_) + ToTicks(tail_ms);
    seg_frames_ = cfg.timing.frames_per_segment;
    seg_ms_ = seg_frames_ * 1000.0 / fps_;
    ledger_ = TileLedger(grid_.tile_count(), 0, 0.0);
    stats_.gamma = cfg.priors.gamma;
    geo_.grid = grid_;
    geo_.fov_h_deg = cfg.fov_h_deg;
    geo_.fov_v_deg = cfg.fov_v_deg;
    geo_.borders = cfg.candidates.borders;
    geo_.ri_sizes = cfg.candidates.ri_sizes;
    geo_.rays_per_axis = cfg.sampling.hit_rays_per_axis;
    geo_.coverage = cov_;
    if (variant_ == Variant::kSimplified) {
      geo_.borders = {cfg.candidates.simplified_border};
      geo_.ri_sizes = {cfg.candidates.simplified_ri};
    }
  }

  SimLog Run() {
    log_.variant = variant_;
    log_.frame_interval_ms = 1000.0 / fps_;
    log_.poll_interval_ms = log_.frame_interval_ms / cfg_.timing.polls_per_frame;
    log_.duration_ms = duration_ms_;
    log_.frames.resize(frame_count_);
    Push({0, Ev::kCapture, 0});
    Push({0, Ev::kPoll, 0});
    while (!queue_.empty()) {
      const Event e = queue_.top();
      queue_.pop();
      if (e.tick > end_tick_) break;
      now_ = e.tick;
      switch (e.type) {
        case Ev::kCapture: OnCapture(e.id); break;
        case Ev::kEncodeEnd: OnEncodeEnd(e.id); break;
        case Ev::kSendEnd: OnSendEnd(e.id); break;
        case Ev::kDecodeEnd: OnDecodeEnd(e.id); break;
        case Ev::kPoll: OnPoll(e.id); break;
      }
    }
    if (run_ > 0) log_.freeze_runs.push_back(run_);
    return std::move(log_);
  }

 private:
  std::int64_t CaptureTick(std::int64_t f) const {
    return std::llround(static_cast<double>(f) * frame_ticks_);
  }
  std::int64_t PollTick(std::int64_t k) const {
    return std::llround(static_cast<double>(k) * poll_ticks_);
  }
  void Push(Event e) { queue_.push(e); }

  // Pose index the user is at when `ms` elapses.
  std::int64_t PoseIndexAt(double ms) const {
    const auto i = static_cast<std::int64_t>(std::floor(ms * fps_ / 1000.0 + 1e-9));
    return std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(truth_.size()) - 1);
  }

  double BacklogBits(double t_ms) const {
    double total = 0.0;
    for (const std::int64_t f : sender_queue_) {
      const PendingFrame& p = pending_.at(f);
      if (p.send_start_ms <= t_ms) {
        const double sent = bw_.CumulativeBits(std::min(t_ms, p.send_end_exact_ms)) -
                            bw_.CumulativeBits(p.send_start_ms);
        total += std::max(0.0, p.bits - sent);
      } else {
        total += p.bits;
      }
    }
    return total;
  }

  std::vector<FrameObservation> Observe(std::int64_t first, std::int64_t last,
                                        std::int64_t known_pose) {
    std::vector<FrameObservation> obs;
    for (std::int64_t f = first; f < last; ++f) {
      const FrameLog& r = log_.frames[f];
      if (r.fate == FrameFate::kSenderSkipped || f == 0) continue;
      FrameObservation o;
      o.frame = f;
      o.fate_known = r.fate == FrameFate::kDisplayed || r.fate == FrameFate::kDeadlineDropped;
      o.delivered = r.fate == FrameFate::kDisplayed;
      const std::int64_t target = f + r.horizon;
      o.pose_known = target <= known_pose && !r.intra_frame &&
                     (f - first) % cfg_.sampling.stats_frame_stride == 0;
      o.predicted = r.predicted;
      if (o.pose_known) {
        o.actual = truth_[target];
        o.actual_weights = &WeightsAt(target);
      }
      obs.push_back(o);
    }
    return obs;
  }

  std::int64_t KnownPoseIndex(std::int64_t tick) const {
    const double ms = ToMs(tick - prop_ticks_);
    if (ms < 0) return 0;
    return std::min<std::int64_t>(PoseIndexAt(ms), static_cast<std::int64_t>(truth_.size()) - 1);
  }

  void StartSegment(std::int64_t f) {
    const std::int64_t s = f / seg_frames_;
    const double t_ms = ToMs(now_);
    SegmentLog seg;
    seg.segment = s;
    std::erase_if(weights_cache_, [f, this](const auto& kv) {
      return kv.first + 4 * seg_frames_ < f;
    });
    if (s > 0 && (variant_ == Variant::kProposed || variant_ == Variant::kSimplified)) {
      const std::int64_t known = KnownPoseIndex(now_);
      RiForecast forecast;
      forecast.first_frame = f;
      forecast.frames = static_cast<int>(std::min<std::int64_t>(seg_frames_, frame_count_ - f));
      forecast.latest = WeightsAt(known);
      stats_ = CollectSegmentStats(Observe((s - 1) * seg_frames_, f, known), geo_, stats_,
                                   &forecast);
    }
    if (!pf_hist_.empty()) stats_.lapse_pf = ToDistribution(pf_hist_);
    if (!pfplus_hist_.empty()) stats_.lapse_pfplus = ToDistribution(pfplus_hist_);
    pf_hist_.clear();
    pfplus_hist_.clear();

    const double window_end = t_ms - cfg_.timing.propagation_ms;
    const int bins = static_cast<int>(std::clamp(std::floor(window_end / kBinMs + 1e-9), 0.0,
                                                 static_cast<double>(kBandwidthWindow)));
    if (bins > 0) {
      stats_.throughput_samples = BinCapacity(bw_, window_end - bins * kBinMs, window_end, kBinMs);
      seg.predicted_bits = std::max(0.0, bw_pred_->PredictSegmentBits(
                                             stats_.throughput_samples, s));
    } else {
      stats_.throughput_samples.clear();
      seg.bootstrap = true;
      seg.predicted_bits = cfg_.budget.bootstrap_bps * seg_ms_ / 1000.0;
    }
    seg.capacity_bits = bw_.CumulativeBits(std::min(t_ms + seg_ms_, bw_.end_ms())) -
                        bw_.CumulativeBits(std::min(t_ms, bw_.end_ms()));
    seg.backlog_bits = BacklogBits(t_ms);
    seg.budget_bits = SegmentBudget(seg.predicted_bits, seg.backlog_bits, cfg_.budget.eta);
    seg.gamma = stats_.gamma;
    rate_estimate_bps_ = seg.predicted_bits / (seg_ms_ / 1000.0);

    inputs_ = AllocationInputs{};
    inputs_.gamma = stats_.gamma;
    inputs_.alpha_pf = cfg_.priors.alpha_pf;
    for (int b : cfg_.candidates.borders) inputs_.alpha_pfplus[b] = cfg_.priors.alpha_pfplus;
    inputs_.alpha_pfplus[cfg_.candidates.simplified_border] = cfg_.priors.alpha_pfplus;
    for (int k : cfg_.candidates.ri_sizes) inputs_.alpha_ri[k] = cfg_.priors.alpha_ri;
    inputs_.alpha_ri[cfg_.candidates.simplified_ri] = cfg_.priors.alpha_ri;
    inputs_.pair_hits = stats_.pair_hits;
    inputs_.lapse_pf = stats_.lapse_pf;
    inputs_.lapse_pfplus = stats_.lapse_pfplus;
    inputs_.budget_bt = std::max(kMinFrameBits, seg.budget_bits / seg_frames_);
    inputs_.fov_h_deg = cfg_.fov_h_deg;
    inputs_.fov_v_deg = cfg_.fov_v_deg;
    inputs_.borders = cfg_.candidates.borders;
    inputs_.ri_sizes = cfg_.candidates.ri_sizes;
    inputs_.models = models_;
    inputs_.total_tiles = grid_.tile_count();
    inputs_.rate_ceiling = cfg_.budget.rate_ceiling;

    SegmentPlan plan;
    if (variant_ == Variant::kProposed) {
      plan = PlanSegment(inputs_);
    } else if (variant_ == Variant::kSimplified) {
      plan = PlanFixed(inputs_, cfg_.candidates.simplified_border, cfg_.candidates.simplified_ri);
    } else {
      plan.border_deg = variant_ == Variant::kBm1 ? 0 : cfg_.candidates.benchmark_border;
      plan.mean_rho_pf = MeanRho(stats_.lapse_pf, models_.rho);
      plan.mean_rho_pfplus = MeanRho(stats_.lapse_pfplus, models_.rho);
    }
    plan_ = plan;
    if (plan.border_deg > 0 || variant_ == Variant::kProposed ||
        variant_ == Variant::kSimplified) {
      terms_ = TermsFor(inputs_, plan.border_deg, plan.ri_tile_count);
    }
    seg.border_deg = plan.border_deg;
    seg.ri_tiles = plan.ri_tile_count;
    seg.r_e = plan.r_e;
    seg.r_b = plan.r_b;
    seg.expected_quality = plan.expected_quality;
    seg.mean_rho_pf = plan.mean_rho_pf;
    seg.mean_rho_pfplus = plan.mean_rho_pfplus;
    if (variant_ == Variant::kProposed || variant_ == Variant::kSimplified) {
      seg.alpha_pf = terms_.hits.pf;
      seg.alpha_pfplus = terms_.hits.pfplus;
      seg.alpha_ri = terms_.hits.ri;
    }
    log_.segments.push_back(seg);
    budget_ = BudgetState{};
    budget_.segment_budget = seg.budget_bits;
    budget_.frames_per_segment = seg_frames_;
    budget_.buffer_capacity = cfg_.budget.sender_capacity_frames;
  }

  double Bm3IframeWeight() const {
    const double side = cfg_.fov_h_deg + cfg_.candidates.benchmark_border;
    const double side_v = cfg_.fov_v_deg + cfg_.candidates.benchmark_border;
    return cfg_.candidates.bm3_ip_ratio * kFullSphereDeg2 / (side * side_v);
  }

  void OnCapture(std::int64_t f) {
    if (f + 1 < frame_count_) Push({CaptureTick(f + 1), Ev::kCapture, f + 1});
    if (f % seg_frames_ == 0) StartSegment(f);
    FrameLog& r = log_.frames[f];
    r.frame = f;
    r.segment = f / seg_frames_;
    r.capture_ms = ToMs(now_);
    r.sender_occupancy = occupancy_;
    r.border_deg = plan_.border_deg;
    r.ri_tiles = plan_.ri_tile_count;

    budget_.frame_in_segment = static_cast<int>(f % seg_frames_);
    budget_.buffer_occupancy = occupancy_;
    const bool bm3_iframe = variant_ == Variant::kBm3 && budget_.frame_in_segment == 0;
    std::optional<double> frame_budget;
    if (variant_ == Variant::kBm3) {
      const double wi = Bm3IframeWeight();
      const int n = budget_.frame_in_segment;
      const double remaining = n == 0 ? wi + seg_frames_ - 1 : seg_frames_ - n;
      frame_budget = WeightedFrameBitBudget(budget_, cfg_.budget.a, cfg_.budget.b,
                                            n == 0 ? wi : 1.0, remaining);
    } else {
      frame_budget = FrameBitBudget(budget_, cfg_.budget.a, cfg_.budget.b);
    }
    if (!frame_budget) {
      r.fate = FrameFate::kSenderSkipped;
      ++resolved_;
      return;
    }
    const double bt = std::max(kMinFrameBits, *frame_budget);
    r.budget_bits = bt;

    // FoV prediction from the poses that reached the sender so far.
    const std::int64_t k = std::min(KnownPoseIndex(now_), f);
    const double queue_ms = rate_estimate_bps_ > 0
                                ? BacklogBits(r.capture_ms) / rate_estimate_bps_ * 1000.0
                                : 0.0;
    const double est_delay_ms = cfg_.timing.encode_ms + queue_ms +
                                cfg_.timing.propagation_ms + cfg_.timing.decode_ms;
    const int h = static_cast<int>(std::clamp<std::int64_t>(
        (f - k) + std::llround(est_delay_ms * fps_ / 1000.0), 1, kMaxHorizon));
    const std::int64_t first = std::max<std::int64_t>(0, k - cfg_.predictors.fov_window + 1);
    std::span<const Vec3> hist(truth_.data() + first, static_cast<std::size_t>(k - first + 1));
    r.horizon = h;
    r.predicted = fov_pred_->Predict(hist, k, h).back();
    const FovPose pose = FovPose::FromDirection(r.predicted, cfg_.fov_h_deg, cfg_.fov_v_deg);

    const int tiles = grid_.tile_count();
    RegionLayout layout;
    FrameCode code;
    const LogQrModel& intra = models_.ri;
    const double ceiling = cfg_.budget.rate_ceiling;
    switch (variant_) {
      case Variant::kProposed:
      case Variant::kSimplified: {
        layout = BuildLayout(pose, plan_.border_deg, plan_.ri_tile_count, f, grid_, cov_);
        CandidateTerms t = terms_;
        t.lambda = 1.0;
        t.a_pf = layout.a_pf;
        t.a_pfplus = layout.a_pfplus;
        t.a_ri = layout.a_ri;
        const RatePair rp = ClosedFormRates(t, bt, ceiling);
        r.r_e = rp.r_e;
        r.r_b = rp.r_b;
        code.pf = {rp.r_e / t.mean_rho_pf, models_.pf, true};
        code.pfplus = {rp.r_b / t.mean_rho_pfplus,
                       plan_.border_deg > 0 ? models_.PfPlus(plan_.border_deg) : models_.pf,
                       true};
        code.ri = {rp.r_b, intra, false};
        break;
      }
      case Variant::kBm1: {
        layout.pf = SliceMask(pose.dir, cfg_.candidates.bm1_width_deg, grid_);
        layout.a_pf = MaskAreaDeg2(layout.pf, grid_);
        r.r_e = r.r_b = ClampRate(bt / layout.a_pf, ceiling);
        code.pf = {r.r_e, intra, false};
        break;
      }
      case Variant::kBm2:
      case Variant::kBm3: {
        layout = BuildLayout(pose, plan_.border_deg, 0, f, grid_, cov_);
        layout.ri = TileMask(tiles);
        const double area = layout.a_pf + layout.a_pfplus;
        r.r_e = r.r_b = ClampRate(bt / area, ceiling);
        if (variant_ == Variant::kBm2) {
          code.pf = {r.r_e, intra, false};
          code.pfplus = {r.r_b, intra, false};
        } else {
          code.pf = {r.r_e / plan_.mean_rho_pf, models_.pf, true};
          code.pfplus = {r.r_b / plan_.mean_rho_pfplus,
                         models_.PfPlus(plan_.border_deg), true};
        }
        break;
      }
    }
    if (f == 0 || bm3_iframe) {
      // Whole frame intra-coded.
      r.intra_frame = true;
      const double rate =
          bm3_iframe ? ClampRate(bt / kFullSphereDeg2, ceiling)
                     : (variant_ == Variant::kBm1 ? r.r_e : r.r_b);
      if (bm3_iframe) r.r_e = r.r_b = rate;
      layout = RegionLayout{};
      layout.pf = TileMask(tiles);
      layout.pfplus = TileMask(tiles);
      layout.ri = TileMask::Full(tiles);
      layout.a_ri = kFullSphereDeg2;
      code = FrameCode{};
      code.ri = {rate, intra, false};
    }
    const ChargeResult charge =
        ChargeFrameBits(layout, code, models_.rho, ledger_, f, grid_);
    for (const auto& [tau, n] : charge.pf_lapses) pf_hist_[tau] += n;
    for (const auto& [tau, n] : charge.pfplus_lapses) pfplus_hist_[tau] += n;
    r.bits = charge.bits;
    budget_.bits_spent += charge.bits;
    log_.segments.back().spent_bits += charge.bits;

    PendingFrame& p = pending_[f];
    p.layout = std::move(layout);
    p.ledger = ledger_;
    p.bits = charge.bits;
    Push({now_ + encode_ticks_, Ev::kEncodeEnd, f});
  }

  void OnEncodeEnd(std::int64_t f) {
    FrameLog& r = log_.frames[f];
    r.encode_end_ms = ToMs(now_);
    PendingFrame& p = pending_.at(f);
    p.send_start_ms = std::max(r.encode_end_ms, link_free_ms_);
    p.send_end_exact_ms = bw_.TimeToDeliver(p.send_start_ms, p.bits);
    link_free_ms_ = p.send_end_exact_ms;
    r.send_start_ms = p.send_start_ms;
    sender_queue_.push_back(f);
    ++occupancy_;
    log_.max_sender_occupancy = std::max(log_.max_sender_occupancy, occupancy_);
    if (std::isfinite(p.send_end_exact_ms)) {
      const auto tick = static_cast<std::int64_t>(
          std::ceil(p.send_end_exact_ms * kTicksPerMs - 1e-6));
      Push({std::max(tick, now_), Ev::kSendEnd, f});
    }
  }

  void OnSendEnd(std::int64_t f) {
    FrameLog& r = log_.frames[f];
    r.send_end_ms = ToMs(now_);
    sender_queue_.pop_front();
    --occupancy_;
    const std::int64_t arrival = now_ + prop_ticks_;
    r.arrival_ms = ToMs(arrival);
    const std::int64_t done = std::max(arrival, decoder_free_) + decode_ticks_;
    decoder_free_ = done;
    Push({done, Ev::kDecodeEnd, f});
  }

  void OnDecodeEnd(std::int64_t f) {
    log_.frames[f].decode_end_ms = ToMs(now_);
    display_queue_.push_back(f);
  }

  const TileWeights& WeightsAt(std::int64_t pose_index) {
    auto it = weights_cache_.find(pose_index);
    if (it != weights_cache_.end()) return it->second;
    const FovPose pose =
        FovPose::FromDirection(truth_[pose_index], cfg_.fov_h_deg, cfg_.fov_v_deg);
    return weights_cache_[pose_index] =
               ViewportTileWeights(pose, grid_, cfg_.sampling.hit_rays_per_axis);
  }

  void OnPoll(std::int64_t k) {
    if (PollTick(k + 1) <= end_tick_) Push({PollTick(k + 1), Ev::kPoll, k + 1});
    const double max_age = cfg_.timing.display_max_delay_frames * frame_ticks_;
    while (!display_queue_.empty()) {
      const std::int64_t f = display_queue_.front();
      if (static_cast<double>(now_ - CaptureTick(f)) <= max_age + 1e-9) break;
      log_.frames[f].fate = FrameFate::kDeadlineDropped;
      ++resolved_;
      pending_.erase(f);
      display_queue_.pop_front();
    }
    if (!display_queue_.empty()) {
      const std::int64_t f = display_queue_.front();
      display_queue_.pop_front();
      FrameLog& r = log_.frames[f];
      r.fate = FrameFate::kDisplayed;
      ++resolved_;
      r.display_ms = ToMs(now_);
      const std::int64_t idx = PoseIndexAt(r.display_ms);
      r.actual = truth_[idx];
      const PendingFrame& p = pending_.at(f);
      const TileWeights& w = WeightsAt(idx);
      const RenderResult rr = RenderFrame(w, p.ledger, f, models_.kappa, grid_);
      r.quality_db = rr.quality_db;
      r.spatial_disc_db = rr.spatial_disc_db;
      r.hits = HitRatesFromWeights(w, p.layout);
      pending_.erase(f);
      if (run_ > 0) log_.freeze_runs.push_back(run_);
      run_ = 0;
      last_display_poll_ = k;
      ++log_.polls_observed;
      return;
    }
    // Nothing is left to show once every frame has a fate.
    if (last_display_poll_ < 0 || resolved_ == frame_count_) return;
    ++log_.polls_observed;
    if (k - last_display_poll_ >= cfg_.timing.polls_per_frame) ++run_;
  }

  SimConfig cfg_;
  const BandwidthTrace& bw_;
  Variant variant_;
  ErpGrid grid_;
  QualityModelSet models_;
  std::vector<Vec3> truth_;
  double fps_ = 30.0;
  double duration_ms_ = 0.0;
  std::int64_t frame_count_ = 0;
  FovPredictor* fov_pred_ = nullptr;
  BandwidthPredictor* bw_pred_ = nullptr;
  std::unique_ptr<FovPredictor> owned_fov_;
  std::unique_ptr<BandwidthPredictor> owned_bw_;
  CoverageOptions cov_;
  StatsGeometry geo_;

  double frame_ticks_ = 0.0;
  double poll_ticks_ = 0.0;
  std::int64_t encode_ticks_ = 0;
  std::int64_t decode_ticks_ = 0;
  std::int64_t prop_ticks_ = 0;
  std::int64_t end_tick_ = 0;
  int seg_frames_ = 30;
  double seg_ms_ = 1000.0;

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::int64_t now_ = 0;
  SimLog log_;

  TileLedger ledger_;
  SegmentStats stats_;
  LapseHistogram pf_hist_;
  LapseHistogram pfplus_hist_;
  AllocationInputs inputs_;
  CandidateTerms terms_;
  SegmentPlan plan_;
  BudgetState budget_;
  double rate_estimate_bps_ = 0.0;

  std::map<std::int64_t, PendingFrame> pending_;
  std::deque<std::int64_t> sender_queue_;
  int occupancy_ = 0;
  double link_free_ms_ = 0.0;
  std::int64_t decoder_free_ = 0;
  std::deque<std::int64_t> display_queue_;
  std::int64_t last_display_poll_ = -1;
  std::int64_t run_ = 0;
  std::int64_t resolved_ = 0;
  std::unordered_map<std::int64_t, TileWeights> weights_cache_;
};

}  // namespace

SimLog RunSimulation(const SimConfig& cfg, const BandwidthTrace& bw, const FovTrace& fov,
                     Variant variant, const SimOverrides& overrides) {
  Simulator sim(cfg, bw, fov, variant, overrides);
  return sim.Run();
}

}  // namespace fovstream

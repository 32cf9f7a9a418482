#include "fovstream/metrics.h"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace fovstream {

namespace {

double Mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

double Std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

std::string Num(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

#define FOVSTREAM_REPORT_FIELDS                                                    \
  variant, frames_captured, frames_encoded, frames_displayed,                      \
      frames_sender_dropped, frames_deadline_dropped, frames_in_flight,            \
      delivery_rate, ws_psnr_in_fov, temporal_discontinuity, spatial_discontinuity, \
      avg_frame_delay, delay_std, delay_std_over_mean, freeze_frame_pct,           \
      avg_freeze_duration, display_interval_mean, display_interval_std, hit_pf,    \
      hit_pfplus, hit_ri, hit_total, max_sender_occupancy, mean_frame_bits,        \
      bandwidth_mape, bandwidth_nmae

}  // namespace

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MetricsReport, FOVSTREAM_REPORT_FIELDS)

MetricsReport ComputeMetrics(const SimLog& log) {
  if (log.frames.empty()) throw ArgumentError("empty frame log");
  MetricsReport r;
  r.variant = VariantName(log.variant);
  r.frames_captured = log.captured();
  r.frames_encoded = log.encoded();
  r.frames_displayed = log.Count(FrameFate::kDisplayed);
  r.frames_sender_dropped = log.Count(FrameFate::kSenderSkipped);
  r.frames_deadline_dropped = log.Count(FrameFate::kDeadlineDropped);
  r.frames_in_flight = log.Count(FrameFate::kInFlight);
  r.delivery_rate =
      r.frames_encoded > 0 ? static_cast<double>(r.frames_displayed) / r.frames_encoded : 0.0;

  std::vector<double> quality, spatial, delay, interval, temporal;
  std::vector<double> pf, pfplus, ri, bits;
  const FrameLog* prev = nullptr;
  for (const FrameLog& f : log.frames) {
    if (f.fate != FrameFate::kSenderSkipped) bits.push_back(f.bits);
    if (f.fate != FrameFate::kDisplayed) continue;
    quality.push_back(f.quality_db);
    spatial.push_back(f.spatial_disc_db);
    delay.push_back(f.display_ms - f.capture_ms);
    pf.push_back(f.hits.pf);
    pfplus.push_back(f.hits.pfplus);
    ri.push_back(f.hits.ri);
    if (prev) {
      interval.push_back(f.display_ms - prev->display_ms);
      temporal.push_back(std::abs(f.quality_db - prev->quality_db));
    }
    prev = &f;
  }
  r.ws_psnr_in_fov = Mean(quality);
  r.temporal_discontinuity = Mean(temporal);
  r.spatial_discontinuity = Mean(spatial);
  r.avg_frame_delay = Mean(delay);
  r.delay_std = Std(delay);
  r.delay_std_over_mean = r.avg_frame_delay > 0 ? r.delay_std / r.avg_frame_delay : 0.0;
  std::int64_t freeze_polls = 0;
  for (std::int64_t run : log.freeze_runs) freeze_polls += run;
  r.freeze_frame_pct =
      log.polls_observed > 0 ? 100.0 * freeze_polls / log.polls_observed : 0.0;
  r.avg_freeze_duration =
      log.freeze_runs.empty()
          ? 0.0
          : static_cast<double>(freeze_polls) / log.freeze_runs.size() * log.poll_interval_ms;
  r.display_interval_mean = Mean(interval);
  r.display_interval_std = Std(interval);
  r.hit_pf = 100.0 * Mean(pf);
  r.hit_pfplus = 100.0 * Mean(pfplus);
  r.hit_ri = 100.0 * Mean(ri);
  r.hit_total = r.hit_pf + r.hit_pfplus + r.hit_ri;
  r.max_sender_occupancy = log.max_sender_occupancy;
  r.mean_frame_bits = Mean(bits);
  std::vector<double> predicted, actual;
  for (const SegmentLog& s : log.segments) {
    // Relative error is undefined over a dead link.
    if (s.bootstrap || !(s.capacity_bits > 0)) continue;
    predicted.push_back(s.predicted_bits);
    actual.push_back(s.capacity_bits);
  }
  if (!predicted.empty()) {
    const PredictionScore score = ScoreBandwidth(predicted, actual);
    r.bandwidth_mape = score.mape;
    r.bandwidth_nmae = score.nmae;
  }
  return r;
}

MetricsReport AggregateReports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("no reports to aggregate");
  MetricsReport a;
  a.variant = reports.front().variant;
  const double n = static_cast<double>(reports.size());
  for (const MetricsReport& r : reports) {
    a.frames_captured += r.frames_captured;
    a.frames_encoded += r.frames_encoded;
    a.frames_displayed += r.frames_displayed;
    a.frames_sender_dropped += r.frames_sender_dropped;
    a.frames_deadline_dropped += r.frames_deadline_dropped;
    a.frames_in_flight += r.frames_in_flight;
    a.max_sender_occupancy = std::max(a.max_sender_occupancy, r.max_sender_occupancy);
    a.delivery_rate += r.delivery_rate / n;
    a.ws_psnr_in_fov += r.ws_psnr_in_fov / n;
    a.temporal_discontinuity += r.temporal_discontinuity / n;
    a.spatial_discontinuity += r.spatial_discontinuity / n;
    a.avg_frame_delay += r.avg_frame_delay / n;
    a.delay_std += r.delay_std / n;
    a.delay_std_over_mean += r.delay_std_over_mean / n;
    a.freeze_frame_pct += r.freeze_frame_pct / n;
    a.avg_freeze_duration += r.avg_freeze_duration / n;
    a.display_interval_mean += r.display_interval_mean / n;
    a.display_interval_std += r.display_interval_std / n;
    a.hit_pf += r.hit_pf / n;
    a.hit_pfplus += r.hit_pfplus / n;
    a.hit_ri += r.hit_ri / n;
    a.hit_total += r.hit_total / n;
    a.mean_frame_bits += r.mean_frame_bits / n;
    a.bandwidth_mape += r.bandwidth_mape / n;
    a.bandwidth_nmae += r.bandwidth_nmae / n;
  }
  return a;
}

std::string ReportToJson(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["report"] = nlohmann::json(r);
  return j.dump(2) + "\n";
}

std::string ReportsToJson(const std::vector<MetricsReport>& rows) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["reports"] = nlohmann::json(rows);
  return j.dump(2) + "\n";
}

MetricsReport ReportFromJson(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw InputError("unsupported report schema version");
    }
    return j.at("report").get<MetricsReport>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
}

std::string FrameLogCsv(const SimLog& log) {
  std::string out =
      "frame,segment,fate,capture_ms,encode_end_ms,send_start_ms,send_end_ms,"
      "arrival_ms,decode_end_ms,display_ms,sender_occupancy,budget_bits,bits,"
      "intra_frame,border_deg,ri_tiles,r_e,r_b,horizon,pred_yaw_deg,pred_pitch_deg,"
      "actual_yaw_deg,actual_pitch_deg,quality_db,spatial_disc_db,hit_pf,hit_pfplus,"
      "hit_ri\n";
  for (const FrameLog& f : log.frames) {
    const bool encoded = f.fate != FrameFate::kSenderSkipped;
    const bool shown = f.fate == FrameFate::kDisplayed;
    const double nan = kNoTime;
    out += std::to_string(f.frame) + "," + std::to_string(f.segment) + "," +
           FateName(f.fate) + "," + Num(f.capture_ms) + "," + Num(f.encode_end_ms) +
           "," + Num(f.send_start_ms) + "," + Num(f.send_end_ms) + "," +
           Num(f.arrival_ms) + "," + Num(f.decode_end_ms) + "," + Num(f.display_ms) +
           "," + std::to_string(f.sender_occupancy) + "," + Num(f.budget_bits) + "," +
           Num(f.bits) + "," + (f.intra_frame ? "1" : "0") + "," +
           std::to_string(f.border_deg) + "," + std::to_string(f.ri_tiles) + "," +
           Num(f.r_e) + "," + Num(f.r_b) + "," + std::to_string(f.horizon) + "," +
           Num(encoded ? YawDeg(f.predicted) : nan) + "," +
           Num(encoded ? PitchDeg(f.predicted) : nan) + "," +
           Num(shown ? YawDeg(f.actual) : nan) + "," +
           Num(shown ? PitchDeg(f.actual) : nan) + "," + Num(f.quality_db) + "," +
           Num(f.spatial_disc_db) + "," + Num(shown ? f.hits.pf : nan) + "," +
           Num(shown ? f.hits.pfplus : nan) + "," + Num(shown ? f.hits.ri : nan) + "\n";
  }
  return out;
}

std::string SegmentLogCsv(const SimLog& log) {
  std::string out =
      "segment,bootstrap,predicted_bits,capacity_bits,backlog_bits,budget_bits,"
      "spent_bits,border_deg,ri_tiles,r_e,r_b,expected_quality,gamma,alpha_pf,"
      "alpha_pfplus,alpha_ri,mean_rho_pf,mean_rho_pfplus\n";
  for (const SegmentLog& s : log.segments) {
    out += std::to_string(s.segment) + "," + (s.bootstrap ? "1" : "0") + "," +
           Num(s.predicted_bits) + "," + Num(s.capacity_bits) + "," +
           Num(s.backlog_bits) + "," + Num(s.budget_bits) + "," + Num(s.spent_bits) +
           "," + std::to_string(s.border_deg) + "," + std::to_string(s.ri_tiles) + "," +
           Num(s.r_e) + "," + Num(s.r_b) + "," + Num(s.expected_quality) + "," +
           Num(s.gamma) + "," + Num(s.alpha_pf) + "," + Num(s.alpha_pfplus) + "," +
           Num(s.alpha_ri) + "," + Num(s.mean_rho_pf) + "," + Num(s.mean_rho_pfplus) +
           "\n";
  }
  return out;
}

std::string PlotSeriesCsv(const SimLog& log) {
  const double seg_ms =
      log.segments.size() > 0 && !log.frames.empty()
          ? log.duration_ms / static_cast<double>(log.segments.size())
          : 0.0;
  std::string out =
      "time_s,capacity_mbps,predicted_mbps,mean_delay_ms,delivery_rate,border_deg,"
      "ri_tiles,r_e,r_b\n";
  for (const SegmentLog& s : log.segments) {
    std::vector<double> delay;
    int encoded = 0, shown = 0;
    for (const FrameLog& f : log.frames) {
      if (f.segment != s.segment || f.fate == FrameFate::kSenderSkipped) continue;
      ++encoded;
      if (f.fate == FrameFate::kDisplayed) {
        ++shown;
        delay.push_back(f.display_ms - f.capture_ms);
      }
    }
    const double secs = seg_ms / 1000.0;
    out += Num(s.segment * secs) + "," + Num(s.capacity_bits / secs / 1e6) + "," +
           Num(s.predicted_bits / secs / 1e6) + "," + Num(Mean(delay)) + "," +
           Num(encoded ? static_cast<double>(shown) / encoded : 0.0) + "," +
           std::to_string(s.border_deg) + "," + std::to_string(s.ri_tiles) + "," +
           Num(s.r_e) + "," + Num(s.r_b) + "\n";
  }
  return out;
}

std::string ReportsCsv(const std::vector<MetricsReport>& rows) {
  std::string out =
      "variant,ws_psnr_in_fov,temporal_discontinuity,spatial_discontinuity,"
      "avg_frame_delay,delay_std_over_mean,freeze_frame_pct,avg_freeze_duration,"
      "display_interval_mean,display_interval_std,hit_pf,hit_pfplus,hit_ri,hit_total,"
      "delivery_rate\n";
  for (const MetricsReport& r : rows) {
    out += r.variant + "," + Num(r.ws_psnr_in_fov) + "," + Num(r.temporal_discontinuity) +
           "," + Num(r.spatial_discontinuity) + "," + Num(r.avg_frame_delay) + "," +
           Num(r.delay_std_over_mean) + "," + Num(r.freeze_frame_pct) + "," +
           Num(r.avg_freeze_duration) + "," + Num(r.display_interval_mean) + "," +
           Num(r.display_interval_std) + "," + Num(r.hit_pf) + "," + Num(r.hit_pfplus) +
           "," + Num(r.hit_ri) + "," + Num(r.hit_total) + "," + Num(r.delivery_rate) +
           "\n";
  }
  return out;
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!out) throw InputError("write failed: " + path);
}

}  // namespace fovstream

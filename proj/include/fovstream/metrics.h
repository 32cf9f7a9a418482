#ifndef FOVSTREAM_METRICS_H_
#define FOVSTREAM_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fovstream/sim.h"

namespace fovstream {

inline constexpr int kReportSchemaVersion = 1;

struct MetricsReport {
  std::string variant;
  std::int64_t frames_captured = 0;
  std::int64_t frames_encoded = 0;
  std::int64_t frames_displayed = 0;
  std::int64_t frames_sender_dropped = 0;
  std::int64_t frames_deadline_dropped = 0;
  std::int64_t frames_in_flight = 0;
  double delivery_rate = 0.0;
  double ws_psnr_in_fov = 0.0;
  double temporal_discontinuity = 0.0;
  double spatial_discontinuity = 0.0;
  double avg_frame_delay = 0.0;
  double delay_std = 0.0;
  double delay_std_over_mean = 0.0;
  double freeze_frame_pct = 0.0;
  double avg_freeze_duration = 0.0;
  double display_interval_mean = 0.0;
  double display_interval_std = 0.0;
  double hit_pf = 0.0;  // percent of the viewport
  double hit_pfplus = 0.0;
  double hit_ri = 0.0;
  double hit_total = 0.0;
  int max_sender_occupancy = 0;
  double mean_frame_bits = 0.0;
  double bandwidth_mape = 0.0;
  double bandwidth_nmae = 0.0;
};

MetricsReport ComputeMetrics(const SimLog& log);
// Unweighted mean of every numeric field; counts are summed.
MetricsReport AggregateReports(const std::vector<MetricsReport>& reports);

std::string ReportToJson(const MetricsReport& r);
std::string ReportsToJson(const std::vector<MetricsReport>& rows);
MetricsReport ReportFromJson(const std::string& text);

std::string FrameLogCsv(const SimLog& log);
std::string SegmentLogCsv(const SimLog& log);
// Per-segment time series for plotting: link capacity, prediction, delay,
// delivery rate and the chosen region sizes and rates.
std::string PlotSeriesCsv(const SimLog& log);
// One row per report with the headline comparison columns.
std::string ReportsCsv(const std::vector<MetricsReport>& rows);

void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace fovstream

#endif  // FOVSTREAM_METRICS_H_

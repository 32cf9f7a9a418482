#ifndef FOVSTREAM_CONFIG_H_
#define FOVSTREAM_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fovstream/geometry.h"
#include "fovstream/quality_models.h"

namespace fovstream {

struct TimingConfig {
  double fps = 30.0;
  double encode_ms = 33.3;
  double decode_ms = 11.1;
  double propagation_ms = 15.0;
  int polls_per_frame = 3;
  int display_max_delay_frames = 20;
  int frames_per_segment = 30;
};

struct BudgetConfig {
  double eta = 0.66;
  double a = 1.2;
  double b = 1.0;
  int sender_capacity_frames = 10;
  double bootstrap_bps = 20e6;  // used until throughput samples exist
  double rate_ceiling = 5000.0;  // bits per square degree
};

struct CandidateConfig {
  std::vector<int> borders{10, 20, 30, 40, 50};
  std::vector<int> ri_sizes{4, 8, 16, 32, 64};
  int simplified_border = 50;
  int simplified_ri = 4;
  int benchmark_border = 50;
  double bm1_width_deg = 140.0;
  double bm3_ip_ratio = 4.0;
};

struct PriorConfig {
  double gamma = 1.0;
  double alpha_pf = 0.9;
  double alpha_pfplus = 0.08;
  double alpha_ri = 0.01;
};

struct SamplingConfig {
  int hit_rays_per_axis = 32;
  int lat_samples_per_row = 16;
  // Every n-th frame of a segment feeds the measured hit rates.
  int stats_frame_stride = 3;
};

struct PredictorConfig {
  std::string fov = "truncated-linear";  // truncated-linear | hold | oracle | replay
  int fov_window = 30;
  double fov_residual_deg = 1.0;
  std::string fov_replay_file;
  std::string bandwidth = "rls";  // rls | harmonic | replay
  double rls_forgetting = 0.98;
  double rls_initial_cov = 100.0;
  std::string bandwidth_replay_file;
};

struct SimConfig {
  int width_px = 8192;
  int height_px = 4096;
  int tile_px = 256;
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
  TimingConfig timing;
  BudgetConfig budget;
  CandidateConfig candidates;
  PriorConfig priors;
  SamplingConfig sampling;
  PredictorConfig predictors;
  std::string preset = "stable-scene";
  // Explicit models replace the preset when present.
  std::optional<QualityModelSet> models;
  std::uint64_t seed = 1;
  double duration_s = 0.0;  // 0: as long as the FoV trace

  ErpGrid Grid() const { return ErpGrid(width_px, height_px, tile_px); }
  QualityModelSet Models() const;
  void Validate() const;
};

SimConfig LoadConfig(const std::string& path);
SimConfig ConfigFromJsonText(const std::string& text);
std::string ConfigToJsonText(const SimConfig& cfg);

}  // namespace fovstream

#endif  // FOVSTREAM_CONFIG_H_

#include "fovstream/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fovstream {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TimingConfig, fps, encode_ms, decode_ms,
                                                propagation_ms, polls_per_frame,
                                                display_max_delay_frames,
                                                frames_per_segment)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BudgetConfig, eta, a, b,
                                                sender_capacity_frames, bootstrap_bps,
                                                rate_ceiling)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CandidateConfig, borders, ri_sizes,
                                                simplified_border, simplified_ri,
                                                benchmark_border, bm1_width_deg,
                                                bm3_ip_ratio)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PriorConfig, gamma, alpha_pf,
                                                alpha_pfplus, alpha_ri)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SamplingConfig, hit_rays_per_axis,
                                                lat_samples_per_row, stats_frame_stride)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PredictorConfig, fov, fov_window,
                                                fov_residual_deg, fov_replay_file,
                                                bandwidth, rls_forgetting,
                                                rls_initial_cov, bandwidth_replay_file)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LogQrModel, a, b)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RateIncreaseModel, c, d)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(QualityDecayModel, g, h)

namespace {

json ModelsToJson(const QualityModelSet& m) {
  json j;
  j["pf"] = m.pf;
  json pp = json::object();
  for (const auto& [border, model] : m.pfplus) pp[std::to_string(border)] = model;
  j["pfplus"] = pp;
  j["ri"] = m.ri;
  j["rho"] = m.rho;
  j["kappa"] = m.kappa;
  j["peak_intensity"] = m.peak_intensity;
  return j;
}

QualityModelSet ModelsFromJson(const json& j) {
  QualityModelSet m;
  m.pf = j.at("pf").get<LogQrModel>();
  for (const auto& [key, value] : j.at("pfplus").items()) {
    m.pfplus[std::stoi(key)] = value.get<LogQrModel>();
  }
  m.ri = j.at("ri").get<LogQrModel>();
  m.rho = j.at("rho").get<RateIncreaseModel>();
  m.kappa = j.at("kappa").get<QualityDecayModel>();
  m.peak_intensity = j.value("peak_intensity", 255);
  return m;
}

const std::set<std::string> kTopLevelKeys = {
    "width_px", "height_px", "tile_px", "fov_h_deg", "fov_v_deg",
    "timing", "budget", "candidates", "priors", "sampling",
    "predictors", "preset", "models", "seed", "duration_s"};

}  // namespace

QualityModelSet SimConfig::Models() const {
  if (models) return *models;
  std::vector<int> borders = candidates.borders;
  borders.push_back(candidates.simplified_border);
  borders.push_back(candidates.benchmark_border);
  return PresetModels(preset, borders);
}

void SimConfig::Validate() const {
  Grid();
  if (!(fov_h_deg > 0 && fov_h_deg < 180 && fov_v_deg > 0 && fov_v_deg < 180)) {
    throw ArgumentError("viewport extents must lie in (0, 180) degrees");
  }
  if (!(timing.fps > 0)) throw ArgumentError("fps must be positive");
  if (timing.encode_ms < 0 || timing.decode_ms < 0 || timing.propagation_ms < 0) {
    throw ArgumentError("pipeline delays must be non-negative");
  }
  if (timing.polls_per_frame < 1) throw ArgumentError("polls_per_frame must be >= 1");
  if (timing.display_max_delay_frames < 1) {
    throw ArgumentError("display_max_delay_frames must be >= 1");
  }
  if (timing.frames_per_segment < 1) {
    throw ArgumentError("frames_per_segment must be >= 1");
  }
  if (!(budget.eta > 0 && budget.eta <= 1)) throw ArgumentError("eta must lie in (0, 1]");
  if (budget.sender_capacity_frames < 1) {
    throw ArgumentError("sender_capacity_frames must be >= 1");
  }
  if (!(budget.bootstrap_bps > 0)) throw ArgumentError("bootstrap_bps must be positive");
  if (!(budget.rate_ceiling > kRateFloor)) {
    throw ArgumentError("rate_ceiling must exceed the rate floor");
  }
  if (candidates.borders.empty() || candidates.ri_sizes.empty()) {
    throw ArgumentError("candidate lists must not be empty");
  }
  const int tiles = Grid().tile_count();
  for (int k : candidates.ri_sizes) {
    if (k < 1 || k > tiles) throw ArgumentError("ri size outside [1, tile count]");
  }
  for (int b : candidates.borders) {
    if (b < 0) throw ArgumentError("border sizes must be non-negative");
  }
  if (sampling.hit_rays_per_axis < 1 || sampling.lat_samples_per_row < 0 ||
      sampling.stats_frame_stride < 1) {
    throw ArgumentError("sampling counts out of range");
  }
  if (duration_s < 0) throw ArgumentError("duration_s must be non-negative");
  Models();
}

SimConfig ConfigFromJsonText(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!kTopLevelKeys.count(key)) throw InputError("config: unknown key '" + key + "'");
  }
  SimConfig c;
  try {
    c.width_px = j.value("width_px", c.width_px);
    c.height_px = j.value("height_px", c.height_px);
    c.tile_px = j.value("tile_px", c.tile_px);
    c.fov_h_deg = j.value("fov_h_deg", c.fov_h_deg);
    c.fov_v_deg = j.value("fov_v_deg", c.fov_v_deg);
    if (j.contains("timing")) c.timing = j["timing"].get<TimingConfig>();
    if (j.contains("budget")) c.budget = j["budget"].get<BudgetConfig>();
    if (j.contains("candidates")) c.candidates = j["candidates"].get<CandidateConfig>();
    if (j.contains("priors")) c.priors = j["priors"].get<PriorConfig>();
    if (j.contains("sampling")) c.sampling = j["sampling"].get<SamplingConfig>();
    if (j.contains("predictors")) c.predictors = j["predictors"].get<PredictorConfig>();
    c.preset = j.value("preset", c.preset);
    if (j.contains("models") && !j["models"].is_null()) {
      c.models = ModelsFromJson(j["models"]);
    }
    c.seed = j.value("seed", c.seed);
    c.duration_s = j.value("duration_s", c.duration_s);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

SimConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ConfigFromJsonText(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string ConfigToJsonText(const SimConfig& c) {
  json j;
  j["width_px"] = c.width_px;
  j["height_px"] = c.height_px;
  j["tile_px"] = c.tile_px;
  j["fov_h_deg"] = c.fov_h_deg;
  j["fov_v_deg"] = c.fov_v_deg;
  j["timing"] = c.timing;
  j["budget"] = c.budget;
  j["candidates"] = c.candidates;
  j["priors"] = c.priors;
  j["sampling"] = c.sampling;
  j["predictors"] = c.predictors;
  j["preset"] = c.preset;
  if (c.models) j["models"] = ModelsToJson(*c.models);
  j["seed"] = c.seed;
  j["duration_s"] = c.duration_s;
  return j.dump(2);
}

}  // namespace fovstream

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csv.h"
#include "fovstream/config.h"
#include "fovstream/metrics.h"
#include "fovstream/predictors.h"
#include "fovstream/quality_models.h"
#include "fovstream/sim.h"
#include "fovstream/traces.h"

namespace fs = std::filesystem;
using namespace fovstream;

namespace {

struct TraceArgs {
  std::vector<std::string> fov_traces;
  std::string fov_format = "xyz";
  std::string bw_trace;
  std::string bw_format = "bytes";
  std::string synthetic_fov = "smooth";
  double bw_mean = 100e6;
  double bw_cv = 0.3;
  double dropout = 0.0;
  bool extend = false;
};

void AddTraceFlags(CLI::App* cmd, TraceArgs& t, bool many_fov) {
  if (many_fov) {
    cmd->add_option("--fov-trace", t.fov_traces, "FoV trace file (repeatable) or directory");
  } else {
    cmd->add_option("--fov-trace", t.fov_traces, "FoV trace file")->expected(0, 1);
  }
  cmd->add_option("--fov-format", t.fov_format, "xyz | yawpitch | quat | tsinghua");
  cmd->add_option("--bw-trace", t.bw_trace, "bandwidth trace file");
  cmd->add_option("--bw-format", t.bw_format, "bytes | rate | packets");
  cmd->add_option("--synthetic-fov", t.synthetic_fov,
                  "synthetic FoV kind when no trace is given: static | smooth | pole | explore");
  cmd->add_option("--bw-mean", t.bw_mean, "synthetic bandwidth mean, bit/s");
  cmd->add_option("--bw-cv", t.bw_cv, "synthetic bandwidth std/mean");
  cmd->add_option("--dropout", t.dropout, "synthetic outages per second");
  cmd->add_flag("--extend", t.extend, "flip-extend short FoV traces to the duration");
}

SimConfig LoadOrDefault(const std::string& path) {
  SimConfig cfg = path.empty() ? SimConfig{} : LoadConfig(path);
  cfg.Validate();
  return cfg;
}

FovTrace LoadFov(const std::string& path, const TraceArgs& t, const SimConfig& cfg,
                 double duration_s) {
  FovTrace trace = ResampleFovTrace(ParseFovTrace(path, ParseFovFormat(t.fov_format)),
                                    cfg.timing.fps);
  const double need_ms = duration_s * 1000.0;
  if (t.extend && trace.duration_ms() < need_ms) trace = FlipExtend(trace, need_ms);
  return trace;
}

std::vector<std::string> ExpandTraces(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (fs::is_directory(item)) {
      for (const auto& e : fs::directory_iterator(item)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") {
          out.push_back(e.path().string());
        }
      }
    } else {
      out.push_back(item);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Variant> ParseVariants(const std::string& list) {
  if (list == "all") return AllVariants();
  std::vector<Variant> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    out.push_back(ParseVariant(list.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

BandwidthTrace LoadBandwidth(const TraceArgs& t, double duration_s, std::uint64_t seed) {
  if (!t.bw_trace.empty()) {
    return ParseBandwidthTrace(t.bw_trace, ParseBandwidthFormat(t.bw_format));
  }
  return SyntheticBandwidthTrace(duration_s + 2.0, t.bw_mean, t.bw_cv, seed, t.dropout);
}

void PrintSummary(const MetricsReport& r) {
  std::printf(
      "%-10s psnr %.2f dB  delay %.1f ms  std/mean %.3f  freeze %.3f %%  interval %.2f ms"
      "  hit %.1f %%  delivered %.3f\n",
      r.variant.c_str(), r.ws_psnr_in_fov, r.avg_frame_delay, r.delay_std_over_mean,
      r.freeze_frame_pct, r.display_interval_mean, r.hit_total, r.delivery_rate);
}

void WriteRun(const SimLog& log, const MetricsReport& r, const std::string& dir,
              const std::string& stem, const std::string& format) {
  fs::create_directories(dir);
  const fs::path base = fs::path(dir) / stem;
  if (format == "json" || format == "both") {
    WriteTextFile(base.string() + "_report.json", ReportToJson(r));
  }
  if (format == "csv" || format == "both") {
    WriteTextFile(base.string() + "_report.csv", ReportsCsv({r}));
  }
  WriteTextFile(base.string() + "_frames.csv", FrameLogCsv(log));
  WriteTextFile(base.string() + "_segments.csv", SegmentLogCsv(log));
  WriteTextFile(base.string() + "_series.csv", PlotSeriesCsv(log));
}

int Simulate(const std::string& config_path, const std::string& variants, TraceArgs t,
             double duration, std::uint64_t seed, const std::string& out_dir,
             const std::string& format, bool seed_set) {
  SimConfig cfg = LoadOrDefault(config_path);
  if (duration > 0) cfg.duration_s = duration;
  if (seed_set) cfg.seed = seed;
  const double dur = cfg.duration_s > 0 ? cfg.duration_s : 60.0;
  cfg.duration_s = dur;
  const FovTrace fov = t.fov_traces.empty()
                           ? SyntheticFovTrace(t.synthetic_fov, dur + 1.0, cfg.timing.fps,
                                               cfg.seed)
                           : LoadFov(t.fov_traces.front(), t, cfg, dur);
  const BandwidthTrace bw = LoadBandwidth(t, dur, cfg.seed + 1000);
  for (Variant v : ParseVariants(variants)) {
    const SimLog log = RunSimulation(cfg, bw, fov, v);
    const MetricsReport r = ComputeMetrics(log);
    PrintSummary(r);
    if (!out_dir.empty()) WriteRun(log, r, out_dir, VariantName(v), format);
  }
  return 0;
}

int Sweep(const std::string& config_path, const std::string& variants, TraceArgs t,
          double duration, const std::string& out_dir, const std::string& format,
          int parallel, int synthetic_count) {
  SimConfig cfg = LoadOrDefault(config_path);
  if (duration > 0) cfg.duration_s = duration;
  const double dur = cfg.duration_s > 0 ? cfg.duration_s : 60.0;
  cfg.duration_s = dur;
  struct Job {
    std::string trace_id;
    FovTrace fov;
  };
  std::vector<Job> jobs;
  for (const auto& path : ExpandTraces(t.fov_traces)) {
    jobs.push_back({fs::path(path).stem().string(), LoadFov(path, t, cfg, dur)});
  }
  if (jobs.empty()) {
    const std::vector<std::string> kinds = {"smooth", "explore", "pole", "static"};
    for (int i = 0; i < synthetic_count; ++i) {
      const std::string kind = kinds[i % kinds.size()];
      char id[64];
      std::snprintf(id, sizeof id, "%s-%02d", kind.c_str(), i);
      jobs.push_back({id, SyntheticFovTrace(kind, dur + 1.0, cfg.timing.fps, cfg.seed + i)});
    }
  }
  const BandwidthTrace bw = LoadBandwidth(t, dur, cfg.seed + 1000);
  const std::vector<Variant> vs = ParseVariants(variants);
  struct Task {
    std::size_t job;
    Variant variant;
  };
  std::vector<Task> tasks;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (Variant v : vs) tasks.push_back({j, v});
  }
  std::vector<MetricsReport> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = ComputeMetrics(RunSimulation(cfg, bw, jobs[tasks[i].job].fov,
                                                  tasks[i].variant));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < std::max(1, parallel); ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i].empty()) {
      throw SimulationError(jobs[tasks[i].job].trace_id + ": " + errors[i]);
    }
  }
  // Tasks are laid out by trace then variant, so each variant's rows are
  // already in trace-id order.
  std::vector<MetricsReport> rows;
  for (Variant v : vs) {
    std::vector<MetricsReport> per;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].variant == v) per.push_back(results[i]);
    }
    rows.push_back(AggregateReports(per));
    PrintSummary(rows.back());
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    if (format == "json" || format == "both") {
      WriteTextFile((fs::path(out_dir) / "sweep.json").string(), ReportsToJson(rows));
      nlohmann::ordered_json per;
      per["schema_version"] = kReportSchemaVersion;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        per["runs"].push_back({{"trace", jobs[tasks[i].job].trace_id},
                               {"report", nlohmann::json::parse(ReportToJson(results[i]))["report"]}});
      }
      WriteTextFile((fs::path(out_dir) / "sweep_runs.json").string(), per.dump(2) + "\n");
    }
    if (format == "csv" || format == "both") {
      WriteTextFile((fs::path(out_dir) / "sweep.csv").string(), ReportsCsv(rows));
    }
  }
  return 0;
}

int ScorePredictors(const std::string& config_path, TraceArgs t, int max_horizon) {
  SimConfig cfg = LoadOrDefault(config_path);
  bool did = false;
  if (!t.fov_traces.empty()) {
    const FovTrace fov = ResampleFovTrace(
        ParseFovTrace(t.fov_traces.front(), ParseFovFormat(t.fov_format)), cfg.timing.fps);
    const std::vector<Vec3> truth = fov.Directions();
    TruncatedLinearFovPredictor tl(cfg.predictors.fov_window, cfg.predictors.fov_residual_deg);
    HoldFovPredictor hold;
    const auto a = FovHitRateByHorizon(tl, truth, max_horizon, cfg.predictors.fov_window, 5,
                                       cfg.fov_h_deg, cfg.fov_v_deg);
    const auto b = FovHitRateByHorizon(hold, truth, max_horizon, cfg.predictors.fov_window, 5,
                                       cfg.fov_h_deg, cfg.fov_v_deg);
    std::printf("horizon,truncated_linear,hold\n");
    for (int h = 0; h < max_horizon; ++h) std::printf("%d,%.6f,%.6f\n", h + 1, a[h], b[h]);
    did = true;
  }
  if (!t.bw_trace.empty()) {
    const BandwidthTrace bw = ParseBandwidthTrace(t.bw_trace, ParseBandwidthFormat(t.bw_format));
    const std::vector<double> bins = BinCapacity(bw, bw.start_ms(), bw.end_ms(), 200.0);
    RlsBandwidthPredictor rls(cfg.predictors.rls_forgetting, cfg.predictors.rls_initial_cov);
    HarmonicMeanBandwidthPredictor hm;
    std::vector<double> p_rls, p_hm, actual;
    for (std::size_t i = kBandwidthWindow; i + kStepsPerSegment <= bins.size();
         i += kStepsPerSegment) {
      std::span<const double> window(bins.data() + i - kBandwidthWindow, kBandwidthWindow);
      double next = 0.0;
      for (int k = 0; k < kStepsPerSegment; ++k) next += bins[i + k];
      if (!(next > 0)) continue;
      const auto seg = static_cast<std::int64_t>(i / kStepsPerSegment);
      p_rls.push_back(rls.PredictSegmentBits(window, seg));
      p_hm.push_back(hm.PredictSegmentBits(window, seg));
      actual.push_back(next);
    }
    if (actual.empty()) throw InputError("bandwidth trace too short to score");
    const PredictionScore s1 = ScoreBandwidth(p_rls, actual);
    const PredictionScore s2 = ScoreBandwidth(p_hm, actual);
    std::printf("predictor,mape,nmae\nrls,%.6f,%.6f\nharmonic,%.6f,%.6f\n", s1.mape, s1.nmae,
                s2.mape, s2.nmae);
    did = true;
  }
  if (!did) throw ArgumentError("give --fov-trace and/or --bw-trace");
  return 0;
}

int FitModels(const std::string& points_path) {
  const csv::Table t = csv::Read(points_path);
  const int cm = csv::Column(t, "model"), cx = csv::Column(t, "x"), cy = csv::Column(t, "y");
  if (cm < 0 || cx < 0 || cy < 0) throw InputError(points_path + ": need columns model,x,y");
  std::map<std::string, std::vector<std::pair<double, double>>> pts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = points_path + ":" + std::to_string(t.line_numbers[r]);
    pts[t.rows[r][cm]].emplace_back(csv::ToDouble(t.rows[r][cx], where),
                                    csv::ToDouble(t.rows[r][cy], where));
  }
  nlohmann::ordered_json out;
  for (const auto& [name, p] : pts) {
    if (name == "qr") {
      const LogQrModel m = FitLogModel(p);
      out["qr"] = {{"a", m.a}, {"b", m.b}};
    } else if (name == "rho") {
      const RateIncreaseModel m = FitRhoModel(p);
      out["rho"] = {{"c", m.c}, {"d", m.d}};
    } else if (name == "kappa") {
      const QualityDecayModel m = FitKappaModel(p);
      out["kappa"] = {{"g", m.g}, {"h", m.h}};
    } else {
      throw InputError(points_path + ": unknown model '" + name + "' (qr | rho | kappa)");
    }
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int ValidateTrace(TraceArgs t, bool lenient) {
  std::vector<std::string> warnings;
  ParseOptions opts;
  opts.strict = !lenient;
  opts.warnings = &warnings;
  bool did = false;
  for (const auto& path : t.fov_traces) {
    const FovTrace fov = ParseFovTrace(path, ParseFovFormat(t.fov_format), opts);
    std::printf("%s: %zu FoV samples, %.1f s\n", path.c_str(), fov.size(),
                (fov.samples.back().t_ms - fov.samples.front().t_ms) / 1000.0);
    did = true;
  }
  if (!t.bw_trace.empty()) {
    const BandwidthTrace bw =
        ParseBandwidthTrace(t.bw_trace, ParseBandwidthFormat(t.bw_format), opts);
    std::printf("%s: %.1f s, mean %.3f Mbit/s, peak %.3f Mbit/s\n", t.bw_trace.c_str(),
                (bw.end_ms() - bw.start_ms()) / 1000.0, bw.MeanRate() / 1e6, bw.MaxRate() / 1e6);
    did = true;
  }
  if (!did) throw ArgumentError("give --fov-trace and/or --bw-trace");
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return 0;
}

int SynthTraces(const std::string& kind, double duration, std::uint64_t seed,
                const std::string& fov_out, const std::string& bw_out, double mean, double cv,
                double dropout, double fps) {
  if (fov_out.empty() && bw_out.empty()) throw ArgumentError("give --fov-out and/or --bw-out");
  if (!fov_out.empty()) WriteFovTrace(SyntheticFovTrace(kind, duration, fps, seed), fov_out);
  if (!bw_out.empty()) {
    WriteBandwidthTrace(SyntheticBandwidthTrace(duration, mean, cv, seed, dropout), bw_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven simulator for FoV-adaptive 360-degree video streaming"};
  app.require_subcommand(1);
  std::string config_path, variants = "proposed", out_dir, format = "json";
  double duration = 0.0;
  std::uint64_t seed = 1;
  int parallel = 1;
  TraceArgs sim_t, sweep_t, score_t, val_t;

  auto* sim = app.add_subcommand("simulate", "run one session per variant");
  sim->add_option("--config", config_path, "JSON config");
  sim->add_option("--variant", variants, "proposed | simplified | bm1 | bm2 | bm3 | all, comma list");
  sim->add_option("--duration", duration, "seconds");
  auto* seed_opt = sim->add_option("--seed", seed, "seed for synthetic traces");
  sim->add_option("--out-dir", out_dir, "where to write report and logs");
  sim->add_option("--format", format, "json | csv | both")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  AddTraceFlags(sim, sim_t, false);

  int synthetic_count = 8;
  auto* sweep = app.add_subcommand("sweep", "variants x FoV traces, averaged per variant");
  sweep->add_option("--config", config_path, "JSON config");
  sweep->add_option("--variant", variants, "variant list or all")->default_val("all");
  sweep->add_option("--duration", duration, "seconds");
  sweep->add_option("--out-dir", out_dir, "where to write the tables");
  sweep->add_option("--format", format, "json | csv | both")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  sweep->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--synthetic-count", synthetic_count,
                    "synthetic FoV traces when no --fov-trace is given");
  AddTraceFlags(sweep, sweep_t, true);

  int max_horizon = 30;
  auto* score = app.add_subcommand("score-predictors", "FoV hit rate by horizon, bandwidth MAPE/nMAE");
  score->add_option("--config", config_path, "JSON config");
  score->add_option("--max-horizon", max_horizon, "frames")->check(CLI::PositiveNumber);
  AddTraceFlags(score, score_t, false);

  std::string points;
  auto* fit = app.add_subcommand("fit-models", "fit Q-R, rho and kappa models to CSV points");
  fit->add_option("--points", points, "CSV with columns model,x,y")->required();

  bool lenient = false;
  auto* validate = app.add_subcommand("validate-trace", "parse traces and report problems");
  validate->add_flag("--lenient", lenient, "repair or drop bad rows with warnings");
  AddTraceFlags(validate, val_t, true);

  std::string kind = "smooth", fov_out, bw_out;
  double synth_dur = 60.0, mean = 100e6, cv = 0.3, dropout = 0.0, fps = 30.0;
  auto* synth = app.add_subcommand("synth-traces", "write synthetic FoV / bandwidth traces");
  synth->add_option("--kind", kind, "static | smooth | pole | explore");
  synth->add_option("--duration", synth_dur, "seconds");
  synth->add_option("--seed", seed, "seed");
  synth->add_option("--fov-out", fov_out, "FoV trace CSV (timestamp_ms,x,y,z)");
  synth->add_option("--bw-out", bw_out, "bandwidth trace CSV (start_ms,end_ms,rate_bps)");
  synth->add_option("--bw-mean", mean, "bit/s");
  synth->add_option("--bw-cv", cv, "std/mean");
  synth->add_option("--dropout", dropout, "outages per second");
  synth->add_option("--fps", fps, "frames per second");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*sim) {
      return Simulate(config_path, variants, sim_t, duration, seed, out_dir, format,
                      seed_opt->count() > 0);
    }
    if (*sweep) {
      return Sweep(config_path, variants, sweep_t, duration, out_dir, format, parallel,
                   synthetic_count);
    }
    if (*score) return ScorePredictors(config_path, score_t, max_horizon);
    if (*fit) return FitModels(points);
    if (*validate) {
      val_t.fov_traces = ExpandTraces(val_t.fov_traces);
      return ValidateTrace(val_t, lenient);
    }
    if (*synth) {
      return SynthTraces(kind, synth_dur, seed, fov_out, bw_out, mean, cv, dropout, fps);
    }
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

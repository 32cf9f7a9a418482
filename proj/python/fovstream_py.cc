#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fovstream/allocator.h"
#include "fovstream/config.h"
#include "fovstream/geometry.h"
#include "fovstream/metrics.h"
#include "fovstream/quality_models.h"
#include "fovstream/sim.h"
#include "fovstream/traces.h"

namespace py = pybind11;
using namespace fovstream;

namespace {

py::object Loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

SimConfig ConfigFrom(const py::object& cfg) {
  if (cfg.is_none()) return SimConfig{};
  const std::string text = py::isinstance<py::str>(cfg)
                               ? cfg.cast<std::string>()
                               : py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
  return ConfigFromJsonText(text);
}

struct Run {
  SimLog log;
  MetricsReport report;
};

}  // namespace

PYBIND11_MODULE(_fovstream, m) {
  m.doc() = "Trace-driven FoV-adaptive 360-degree streaming simulator";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
  py::register_exception<AllocationError>(m, "AllocationError", PyExc_RuntimeError);

  m.def("default_config", [] { return Loads(ConfigToJsonText(SimConfig{})); });
  m.def("variants", [] {
    std::vector<std::string> out;
    for (Variant v : AllVariants()) out.push_back(VariantName(v));
    return out;
  });

  py::class_<FovTrace>(m, "FovTrace")
      .def_readonly("fps", &FovTrace::fps)
      .def("__len__", &FovTrace::size)
      .def_property_readonly("duration_ms", &FovTrace::duration_ms)
      .def("yaw_pitch_deg", [](const FovTrace& t) {
        std::vector<std::pair<double, double>> out;
        for (const Vec3& d : t.Directions()) out.emplace_back(YawDeg(d), PitchDeg(d));
        return out;
      });

  py::class_<BandwidthTrace>(m, "BandwidthTrace")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("edges_ms"),
           py::arg("rate_bps"))
      .def_static("constant", &BandwidthTrace::Constant, py::arg("rate_bps"),
                  py::arg("duration_ms"))
      .def_property_readonly("edges_ms", &BandwidthTrace::edges_ms)
      .def_property_readonly("rate_bps", &BandwidthTrace::rates_bps)
      .def("mean_rate", &BandwidthTrace::MeanRate)
      .def("rate_at", &BandwidthTrace::RateAt, py::arg("t_ms"));

  m.def("synthetic_fov_trace", &SyntheticFovTrace, py::arg("kind"), py::arg("duration_s"),
        py::arg("fps") = 30.0, py::arg("seed") = 1);
  m.def("synthetic_bandwidth_trace", &SyntheticBandwidthTrace, py::arg("duration_s"),
        py::arg("mean_bps"), py::arg("std_over_mean"), py::arg("seed") = 1,
        py::arg("dropout_prob") = 0.0, py::arg("outage_min_ms") = 500.0,
        py::arg("outage_max_ms") = 2000.0);
  m.def(
      "load_fov_trace",
      [](const std::string& path, const std::string& format, double fps) {
        return ResampleFovTrace(ParseFovTrace(path, ParseFovFormat(format)), fps);
      },
      py::arg("path"), py::arg("format") = "xyz", py::arg("fps") = 30.0);
  m.def(
      "load_bandwidth_trace",
      [](const std::string& path, const std::string& format) {
        return ParseBandwidthTrace(path, ParseBandwidthFormat(format));
      },
      py::arg("path"), py::arg("format") = "rate");

  py::class_<Run>(m, "Run")
      .def_property_readonly("report", [](const Run& r) {
        py::object j = Loads(ReportToJson(r.report));
        return py::object(j["report"]);
      })
      .def_property_readonly("frames_csv", [](const Run& r) { return FrameLogCsv(r.log); })
      .def_property_readonly("segments_csv", [](const Run& r) { return SegmentLogCsv(r.log); })
      .def_property_readonly("series_csv", [](const Run& r) { return PlotSeriesCsv(r.log); })
      .def_property_readonly("fates", [](const Run& r) {
        std::vector<std::string> out;
        for (const auto& f : r.log.frames) out.push_back(FateName(f.fate));
        return out;
      });

  m.def(
      "simulate",
      [](const BandwidthTrace& bw, const FovTrace& fov, const std::string& variant,
         const py::object& config) {
        const SimConfig cfg = ConfigFrom(config);
        const Variant v = ParseVariant(variant);
        Run r;
        {
          py::gil_scoped_release release;
          r.log = RunSimulation(cfg, bw, fov, v);
        }
        r.report = ComputeMetrics(r.log);
        return r;
      },
      py::arg("bw"), py::arg("fov"), py::arg("variant") = "proposed",
      py::arg("config") = py::none());

  m.def("rho", [](double c, double d, std::int64_t tau) { return Rho({c, d}, tau); },
        py::arg("c"), py::arg("d"), py::arg("tau"));
  m.def("kappa", [](double g, double h, double tau) { return Kappa({g, h}, tau); },
        py::arg("g"), py::arg("h"), py::arg("tau"));
  m.def("segment_budget", &SegmentBudget, py::arg("predicted_bits"),
        py::arg("backlog_bits"), py::arg("eta") = 0.66);
  m.def(
      "tiles_covering_fov",
      [](double yaw, double pitch, double h, double v, int width, int height, int tile) {
        return TilesCoveringFov(FovPose::FromYawPitch(yaw, pitch, h, v),
                                ErpGrid(width, height, tile))
            .Indices();
      },
      py::arg("yaw_deg"), py::arg("pitch_deg"), py::arg("h_deg") = 90.0,
      py::arg("v_deg") = 90.0, py::arg("width") = 8192, py::arg("height") = 4096,
      py::arg("tile") = 256);
}

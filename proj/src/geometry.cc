#include "fovstream/geometry.h"

#include <algorithm>
#include <array>
#include <string>

namespace fovstream {

namespace {

// Longitudes (radians) whose latitude-circle points satisfy n . v >= 0.
struct Interval {
  double lo;
  double hi;
};

constexpr double kColumnEps = 1e-9;
// Row-edge scanlines sit this far (radians) inside the row so a viewport
// merely touching a row boundary does not claim the neighbouring row.
constexpr double kRowEdgeInset = 1e-9;

int SplitArc(double center, double half, std::array<Interval, 2>& out) {
  double lo = center - half;
  double hi = center + half;
  if (lo < -kPi) {
    out[0] = {lo + 2 * kPi, kPi};
    out[1] = {-kPi, hi};
    return 2;
  }
  if (hi > kPi) {
    out[0] = {lo, kPi};
    out[1] = {-kPi, hi - 2 * kPi};
    return 2;
  }
  out[0] = {lo, hi};
  return 1;
}

struct PlaneScan {
  double horizontal;  // |(nx, ny)|
  double nz;
  double center;      // atan2(ny, nx)
};

void MarkLongitudes(const Interval& iv, int row, const ErpGrid& grid,
                    TileMask& out) {
  const int cols = grid.cols();
  // u = 0.5 - lon / (2 pi), so the longitude interval reverses.
  double c0 = (0.5 - iv.hi / (2 * kPi)) * cols;
  double c1 = (0.5 - iv.lo / (2 * kPi)) * cols;
  if (c1 <= c0) return;
  int lo = static_cast<int>(std::floor(c0 + kColumnEps));
  int hi = static_cast<int>(std::ceil(c1 - kColumnEps)) - 1;
  lo = std::max(lo, 0);
  hi = std::min(hi, cols - 1);
  for (int c = lo; c <= hi; ++c) out.Set(row * cols + c);
}

void ScanLatitude(const std::array<PlaneScan, 4>& planes, double lat, int row,
                  const ErpGrid& grid, TileMask& out) {
  const double cos_lat = std::cos(lat);
  const double sin_lat = std::sin(lat);
  std::array<Interval, 4> current{};
  int n_current = 1;
  current[0] = {-kPi, kPi};
  for (const PlaneScan& p : planes) {
    const double amp = p.horizontal * cos_lat;
    const double rhs = -p.nz * sin_lat;
    if (amp < 1e-15) {
      if (rhs > 0.0) return;
      continue;
    }
    const double ratio = rhs / amp;
    if (ratio >= 1.0) return;
    if (ratio <= -1.0) continue;
    std::array<Interval, 2> arc{};
    const int n_arc = SplitArc(p.center, std::acos(ratio), arc);
    std::array<Interval, 4> next{};
    int n_next = 0;
    for (int i = 0; i < n_current; ++i) {
      for (int j = 0; j < n_arc; ++j) {
        const double lo = std::max(current[i].lo, arc[j].lo);
        const double hi = std::min(current[i].hi, arc[j].hi);
        if (hi > lo && n_next < 4) next[n_next++] = {lo, hi};
      }
    }
    if (n_next == 0) return;
    current = next;
    n_current = n_next;
  }
  for (int i = 0; i < n_current; ++i) MarkLongitudes(current[i], row, grid, out);
}

}  // namespace

Vec3 Vec3::Normalized() const {
  const double n = Norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ArgumentError("cannot normalize a zero or non-finite vector");
  }
  return {x / n, y / n, z / n};
}

double AngleBetween(const Vec3& a, const Vec3& b) {
  return std::atan2(a.Cross(b).Norm(), a.Dot(b));
}

Vec3 DirectionFromYawPitch(double yaw_deg, double pitch_deg) {
  const double yaw = yaw_deg * kRadPerDeg;
  const double pitch = pitch_deg * kRadPerDeg;
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
          std::sin(pitch)};
}

double YawDeg(const Vec3& dir) { return std::atan2(dir.y, dir.x) * kDegPerRad; }

double PitchDeg(const Vec3& dir) {
  return std::atan2(dir.z, std::hypot(dir.x, dir.y)) * kDegPerRad;
}

ErpGrid::ErpGrid(int width_px, int height_px, int tile_px)
    : width_px_(width_px), height_px_(height_px), tile_px_(tile_px) {
  if (width_px <= 0 || height_px <= 0 || tile_px <= 0) {
    throw ArgumentError("grid dimensions must be positive");
  }
  if (width_px % tile_px != 0 || height_px % tile_px != 0) {
    throw ArgumentError("tile size must divide the frame dimensions");
  }
  rows_ = height_px / tile_px;
  cols_ = width_px / tile_px;
  row_span_ = kPi / rows_;
  row_area_deg2_.resize(rows_);
  const double col_span = 2 * kPi / cols_;
  for (int r = 0; r < rows_; ++r) {
    const double sr = col_span * (std::sin(RowTopLat(r)) - std::sin(RowBottomLat(r)));
    row_area_deg2_[r] = sr * kDegPerRad * kDegPerRad;
    sin_top_.push_back(std::sin(RowTopLat(r)));
  }
}

int ErpGrid::TileIndexOf(const Vec3& dir) const {
  const double sin_lat = dir.z / dir.Norm();
  // Rows whose top edge lies at or above the direction.
  const int row = static_cast<int>(
      std::partition_point(sin_top_.begin() + 1, sin_top_.end(),
                           [sin_lat](double s) { return s >= sin_lat; }) -
      sin_top_.begin()) - 1;
  const double lon = std::atan2(dir.y, dir.x);
  int col = static_cast<int>(std::floor((0.5 - lon / (2 * kPi)) * cols_));
  col = ((col % cols_) + cols_) % cols_;
  return row * cols_ + col;
}

double ErpGrid::PixelRowLat(int row_px) const {
  return kPi / 2 - (row_px + 0.5) / height_px_ * kPi;
}

double WsWeight(int row_px, const ErpGrid& grid) {
  if (row_px < 0 || row_px >= grid.height_px()) {
    throw ArgumentError("pixel row " + std::to_string(row_px) +
                        " outside frame height");
  }
  const double m = grid.height_px();
  return std::cos((row_px / m - 0.5) * kPi);
}

TileMask TileMask::Full(int tile_count) {
  TileMask m(tile_count);
  std::fill(m.bits_.begin(), m.bits_.end(), 1);
  return m;
}

int TileMask::Count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1));
}

std::vector<int> TileMask::Indices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

TileMask& TileMask::operator|=(const TileMask& o) {
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
  return *this;
}

TileMask& TileMask::operator&=(const TileMask& o) {
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= o.bits_[i];
  return *this;
}

TileMask& TileMask::Subtract(const TileMask& o) {
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (o.bits_[i]) bits_[i] = 0;
  }
  return *this;
}

FovPose FovPose::FromDirection(const Vec3& dir, double h_deg, double v_deg) {
  if (!(h_deg > 0.0) || !(v_deg > 0.0)) {
    throw ArgumentError("viewport extents must be positive");
  }
  return FovPose{dir.Normalized(), h_deg, v_deg};
}

FovPose FovPose::FromYawPitch(double yaw_deg, double pitch_deg, double h_deg,
                              double v_deg) {
  return FromDirection(DirectionFromYawPitch(yaw_deg, pitch_deg), h_deg, v_deg);
}

FovPose FovPose::Enlarged(double border_deg) const {
  return FovPose{dir, h_extent_deg + border_deg, v_extent_deg + border_deg};
}

Viewport::Viewport(const FovPose& pose) {
  full_sphere_ = pose.IsFullSphere();
  forward_ = pose.dir.Normalized();
  Vec3 world_up{0.0, 0.0, 1.0};
  Vec3 up = world_up - forward_ * forward_.Dot(world_up);
  if (up.Norm() < 1e-9) {
    // Looking straight up or down: the top of the image faces away from +x.
    up = Vec3{forward_.z > 0 ? -1.0 : 1.0, 0.0, 0.0};
  }
  up_ = up.Normalized();
  right_ = forward_.Cross(up_);
  constexpr double kMaxExtent = 179.9;
  const double h = std::clamp(pose.h_extent_deg, 1e-6, kMaxExtent);
  const double v = std::clamp(pose.v_extent_deg, 1e-6, kMaxExtent);
  tan_half_h_ = std::tan(h / 2 * kRadPerDeg);
  tan_half_v_ = std::tan(v / 2 * kRadPerDeg);
  planes_[0] = (forward_ * tan_half_h_ + right_).Normalized();
  planes_[1] = (forward_ * tan_half_h_ - right_).Normalized();
  planes_[2] = (forward_ * tan_half_v_ + up_).Normalized();
  planes_[3] = (forward_ * tan_half_v_ - up_).Normalized();
}

bool Viewport::Contains(const Vec3& dir) const {
  if (full_sphere_) return true;
  for (const Vec3& n : planes_) {
    if (n.Dot(dir) < 0.0) return false;
  }
  return true;
}

double ViewportSolidAngle(const FovPose& pose) {
  if (pose.IsFullSphere()) return 4 * kPi;
  const double h = std::min(pose.h_extent_deg, 179.9) * kRadPerDeg;
  const double v = std::min(pose.v_extent_deg, 179.9) * kRadPerDeg;
  return 4 * std::asin(std::sin(h / 2) * std::sin(v / 2));
}

std::vector<DirectionSample> SampleViewport(const FovPose& pose, int per_axis) {
  if (per_axis < 1) throw ArgumentError("per_axis must be >= 1");
  std::vector<DirectionSample> out;
  out.reserve(static_cast<std::size_t>(per_axis) * per_axis);
  if (pose.IsFullSphere()) {
    const double dlon = 2 * kPi / per_axis;
    const double dlat = kPi / per_axis;
    for (int j = 0; j < per_axis; ++j) {
      const double top = kPi / 2 - j * dlat;
      const double bottom = top - dlat;
      const double lat = (top + bottom) / 2;
      const double w = dlon * (std::sin(top) - std::sin(bottom));
      for (int i = 0; i < per_axis; ++i) {
        const double lon = -kPi + (i + 0.5) * dlon;
        out.push_back({{std::cos(lat) * std::cos(lon),
                        std::cos(lat) * std::sin(lon), std::sin(lat)},
                       w});
      }
    }
    return out;
  }
  const Viewport vp(pose);
  const double du = 2 * vp.tan_half_h() / per_axis;
  const double dv = 2 * vp.tan_half_v() / per_axis;
  for (int j = 0; j < per_axis; ++j) {
    const double v = -vp.tan_half_v() + (j + 0.5) * dv;
    for (int i = 0; i < per_axis; ++i) {
      const double u = -vp.tan_half_h() + (i + 0.5) * du;
      const double r2 = 1.0 + u * u + v * v;
      const Vec3 d = vp.forward() + vp.right() * u + vp.up() * v;
      out.push_back({d * (1.0 / std::sqrt(r2)), du * dv / (r2 * std::sqrt(r2))});
    }
  }
  return out;
}

std::vector<Vec3> FovSampleDirections(const FovPose& pose, int n_samples) {
  if (n_samples < 1) throw ArgumentError("n_samples must be >= 1");
  const int side = std::max(1, static_cast<int>(std::floor(std::sqrt(n_samples))));
  std::vector<Vec3> out;
  for (const DirectionSample& s : SampleViewport(pose, side)) out.push_back(s.dir);
  return out;
}

TileMask TilesCoveringFov(const FovPose& pose, const ErpGrid& grid,
                          const CoverageOptions& opts) {
  if (pose.IsFullSphere()) return TileMask::Full(grid.tile_count());
  TileMask out(grid.tile_count());
  const Viewport vp(pose);
  std::array<PlaneScan, 4> planes{};
  for (int i = 0; i < 4; ++i) {
    const Vec3& n = vp.planes()[i];
    planes[i] = {std::hypot(n.x, n.y), n.z, std::atan2(n.y, n.x)};
  }
  const int k = std::max(1, opts.lat_samples_per_row);
  const double span = grid.row_span();
  // Every viewport direction lies within the corner angle of the center.
  const double radius =
      std::atan(std::hypot(vp.tan_half_h(), vp.tan_half_v())) + 1e-9;
  const double center_lat = std::asin(std::clamp(vp.forward().z, -1.0, 1.0));
  for (int row = 0; row < grid.rows(); ++row) {
    const double bottom = grid.RowBottomLat(row);
    const double top = grid.RowTopLat(row);
    if (bottom > center_lat + radius || top < center_lat - radius) continue;
    ScanLatitude(planes, bottom + kRowEdgeInset, row, grid, out);
    ScanLatitude(planes, top - kRowEdgeInset, row, grid, out);
    for (int s = 0; s < k; ++s) {
      ScanLatitude(planes, bottom + span * (s + 0.5) / k, row, grid, out);
    }
  }
  return out;
}

TileMask BorderRegion(const FovPose& pose, double border_deg,
                      const ErpGrid& grid, const CoverageOptions& opts) {
  if (border_deg < 0.0) throw ArgumentError("border must be non-negative");
  if (border_deg == 0.0) return TileMask(grid.tile_count());
  return TilesCoveringFov(pose.Enlarged(border_deg), grid, opts) -
         TilesCoveringFov(pose, grid, opts);
}

TileMask RiTilesAt(std::int64_t frame_index, int ri_tile_count,
                   const ErpGrid& grid) {
  const int total = grid.tile_count();
  if (ri_tile_count < 0 || ri_tile_count > total) {
    throw ArgumentError("rotating intra size outside [0, tile count]");
  }
  if (frame_index < 0) throw ArgumentError("frame index must be >= 0");
  TileMask out(total);
  if (ri_tile_count == 0) return out;
  const std::int64_t start = (frame_index % total) * ri_tile_count % total;
  for (int i = 0; i < ri_tile_count; ++i) {
    out.Set(static_cast<int>((start + i) % total));
  }
  return out;
}

int RiRefreshPeriod(int ri_tile_count, const ErpGrid& grid) {
  if (ri_tile_count <= 0) throw ArgumentError("rotating intra size must be > 0");
  return (grid.tile_count() + ri_tile_count - 1) / ri_tile_count;
}

double MaskAreaDeg2(const TileMask& mask, const ErpGrid& grid) {
  double area = 0.0;
  for (int i = 0; i < mask.size(); ++i) {
    if (mask.Test(i)) area += grid.TileAreaDeg2ByIndex(i);
  }
  return area;
}

double NonRiFraction(int ri_tile_count, const ErpGrid& grid) {
  return 1.0 - static_cast<double>(ri_tile_count) / grid.tile_count();
}

RegionLayout LayoutFromMasks(const TileMask& fov_cover, const TileMask& border,
                             const TileMask& ri, int ri_tile_count,
                             const ErpGrid& grid) {
  RegionLayout layout;
  layout.ri = ri;
  layout.pf = fov_cover - ri;
  layout.pfplus = (border - fov_cover) - ri;
  layout.a_pf = MaskAreaDeg2(layout.pf, grid);
  layout.a_pfplus = MaskAreaDeg2(layout.pfplus, grid);
  layout.a_ri = MaskAreaDeg2(layout.ri, grid);
  layout.lambda_pf = NonRiFraction(ri_tile_count, grid);
  layout.lambda_pfplus = layout.lambda_pf;
  return layout;
}

RegionLayout BuildLayout(const FovPose& pose, double border_deg,
                         int ri_tile_count, std::int64_t frame_index,
                         const ErpGrid& grid, const CoverageOptions& opts) {
  const TileMask cover = TilesCoveringFov(pose, grid, opts);
  TileMask border(grid.tile_count());
  if (border_deg > 0.0) {
    border = TilesCoveringFov(pose.Enlarged(border_deg), grid, opts) - cover;
  }
  return LayoutFromMasks(cover, border,
                         RiTilesAt(frame_index, ri_tile_count, grid),
                         ri_tile_count, grid);
}

TileWeights ViewportTileWeights(const FovPose& pose, const ErpGrid& grid,
                                int per_axis) {
  std::vector<double> acc(grid.tile_count(), 0.0);
  double total = 0.0;
  for (const DirectionSample& s : SampleViewport(pose, per_axis)) {
    acc[grid.TileIndexOf(s.dir)] += s.weight;
    total += s.weight;
  }
  TileWeights out;
  for (int i = 0; i < grid.tile_count(); ++i) {
    if (acc[i] > 0.0) out.entries.emplace_back(i, acc[i] / total);
  }
  return out;
}

HitRates HitRatesFromWeights(const TileWeights& weights,
                             const RegionLayout& layout) {
  HitRates h;
  for (const auto& [tile, w] : weights.entries) {
    if (layout.ri.size() > 0 && layout.ri.Test(tile)) {
      h.ri += w;
    } else if (layout.pf.size() > 0 && layout.pf.Test(tile)) {
      h.pf += w;
    } else if (layout.pfplus.size() > 0 && layout.pfplus.Test(tile)) {
      h.pfplus += w;
    } else {
      h.uncoded += w;
    }
  }
  return h;
}

HitRates ComputeHitRates(const FovPose& /*predicted*/, const FovPose& actual,
                         const RegionLayout& layout, const ErpGrid& grid,
                         int per_axis) {
  return HitRatesFromWeights(ViewportTileWeights(actual, grid, per_axis), layout);
}

double ViewportOverlap(const FovPose& predicted, const FovPose& actual,
                       int per_axis) {
  const Viewport vp(predicted);
  double inside = 0.0;
  double total = 0.0;
  for (const DirectionSample& s : SampleViewport(actual, per_axis)) {
    total += s.weight;
    if (vp.Contains(s.dir)) inside += s.weight;
  }
  return inside / total;
}

}  // namespace fovstream

#ifndef FOVSTREAM_GEOMETRY_H_
#define FOVSTREAM_GEOMETRY_H_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "fovstream/errors.h"

namespace fovstream {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kRadPerDeg = kPi / 180.0;
// Spherical area of the whole sphere in square degrees.
inline constexpr double kFullSphereDeg2 = 4.0 * kPi * kDegPerRad * kDegPerRad;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double Dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 Cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double Norm() const { return std::sqrt(Dot(*this)); }
  Vec3 Normalized() const;
  bool operator==(const Vec3&) const = default;
};

// Great-circle angle between two directions, radians.
double AngleBetween(const Vec3& a, const Vec3& b);

// Axis convention: x forward, y left, z up. Yaw turns about z (positive
// toward +y), pitch about y (positive toward +z).
Vec3 DirectionFromYawPitch(double yaw_deg, double pitch_deg);
double YawDeg(const Vec3& dir);
double PitchDeg(const Vec3& dir);

struct TileId {
  int row = 0;
  int col = 0;
  auto operator<=>(const TileId&) const = default;
};

// Equirectangular frame split into square tiles. Row 0 is the top (north)
// row; column 0 is the left edge of the image (longitude +180).
class ErpGrid {
 public:
  ErpGrid(int width_px, int height_px, int tile_px);
  static ErpGrid Default8K() { return ErpGrid(8192, 4096, 256); }

  int width_px() const { return width_px_; }
  int height_px() const { return height_px_; }
  int tile_px() const { return tile_px_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int tile_count() const { return rows_ * cols_; }

  int Index(TileId t) const { return t.row * cols_ + t.col; }
  TileId FromIndex(int index) const { return {index / cols_, index % cols_}; }
  bool Contains(TileId t) const {
    return t.row >= 0 && t.row < rows_ && t.col >= 0 && t.col < cols_;
  }

  // Latitude of the top / bottom edge of a tile row, radians.
  double RowTopLat(int row) const { return kPi / 2 - row * row_span_; }
  double RowBottomLat(int row) const { return kPi / 2 - (row + 1) * row_span_; }
  double row_span() const { return row_span_; }

  // Spherical footprint of one tile of the given row, square degrees.
  double TileAreaDeg2(int row) const { return row_area_deg2_[row]; }
  double TileAreaDeg2ByIndex(int index) const {
    return row_area_deg2_[index / cols_];
  }
  double MeanTileAreaDeg2() const { return kFullSphereDeg2 / tile_count(); }

  // Tile holding a direction, via pixel-center latitude/longitude mapping.
  int TileIndexOf(const Vec3& dir) const;
  TileId TileOf(const Vec3& dir) const { return FromIndex(TileIndexOf(dir)); }

  // Latitude of the center of pixel row `row_px`, radians.
  double PixelRowLat(int row_px) const;

  bool operator==(const ErpGrid& o) const {
    return width_px_ == o.width_px_ && height_px_ == o.height_px_ &&
           tile_px_ == o.tile_px_;
  }

 private:
  int width_px_;
  int height_px_;
  int tile_px_;
  int rows_;
  int cols_;
  double row_span_;
  std::vector<double> row_area_deg2_;
  std::vector<double> sin_top_;
};

// Per-pixel-row weight of the weighted-to-spherically-uniform metric:
// cos((row_px / m - 1/2) * pi) with m the frame height.
double WsWeight(int row_px, const ErpGrid& grid);

// Dense per-tile membership flags over a grid.
class TileMask {
 public:
  TileMask() = default;
  explicit TileMask(int tile_count) : bits_(tile_count, 0) {}
  static TileMask Full(int tile_count);

  int size() const { return static_cast<int>(bits_.size()); }
  bool Test(int index) const { return bits_[index] != 0; }
  void Set(int index, bool on = true) { bits_[index] = on ? 1 : 0; }
  int Count() const;
  bool Empty() const { return Count() == 0; }
  std::vector<int> Indices() const;

  TileMask& operator|=(const TileMask& o);
  TileMask& operator&=(const TileMask& o);
  // Removes every tile present in `o`.
  TileMask& Subtract(const TileMask& o);
  friend TileMask operator|(TileMask a, const TileMask& b) { return a |= b; }
  friend TileMask operator&(TileMask a, const TileMask& b) { return a &= b; }
  friend TileMask operator-(TileMask a, const TileMask& b) {
    return a.Subtract(b);
  }
  bool operator==(const TileMask&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Viewport center plus angular extents of a rectilinear viewport.
struct FovPose {
  Vec3 dir{1.0, 0.0, 0.0};
  double h_extent_deg = 90.0;
  double v_extent_deg = 90.0;

  static FovPose FromDirection(const Vec3& dir, double h_deg = 90.0,
                               double v_deg = 90.0);
  static FovPose FromYawPitch(double yaw_deg, double pitch_deg,
                              double h_deg = 90.0, double v_deg = 90.0);
  FovPose Enlarged(double border_deg) const;
  bool IsFullSphere() const {
    return h_extent_deg >= 360.0 && v_extent_deg >= 180.0;
  }
};

// Camera frame and bounding planes of a rectilinear viewport. Extents are
// clamped below 180 degrees unless the pose requests the full sphere.
class Viewport {
 public:
  explicit Viewport(const FovPose& pose);

  bool full_sphere() const { return full_sphere_; }
  bool Contains(const Vec3& dir) const;
  const Vec3& forward() const { return forward_; }
  const Vec3& right() const { return right_; }
  const Vec3& up() const { return up_; }
  double tan_half_h() const { return tan_half_h_; }
  double tan_half_v() const { return tan_half_v_; }
  // Inward normals of the left, right, bottom and top planes.
  const Vec3* planes() const { return planes_; }

 private:
  bool full_sphere_ = false;
  Vec3 forward_, right_, up_;
  double tan_half_h_ = 1.0;
  double tan_half_v_ = 1.0;
  Vec3 planes_[4];
};

// Solid angle of a rectilinear viewport, steradians.
double ViewportSolidAngle(const FovPose& pose);

struct DirectionSample {
  Vec3 dir;
  double weight = 0.0;  // solid angle represented, steradians
};

// Deterministic grid of `per_axis` x `per_axis` cell-center rays on the
// viewport image plane, each weighted by the solid angle of its cell.
std::vector<DirectionSample> SampleViewport(const FovPose& pose, int per_axis);

// floor(sqrt(n))^2 deterministic directions inside the viewport; n == 1
// yields the center direction.
std::vector<Vec3> FovSampleDirections(const FovPose& pose, int n_samples);

struct CoverageOptions {
  // Latitude scanlines evaluated inside each tile row, in addition to
  // the two (slightly inset) row edges.
  int lat_samples_per_row = 16;
};

// Tiles whose footprint intersects the viewport with positive area.
TileMask TilesCoveringFov(const FovPose& pose, const ErpGrid& grid,
                          const CoverageOptions& opts = {});

// Tiles covering the viewport enlarged by `border_deg` (half on each side)
// that are not already needed for the viewport itself.
TileMask BorderRegion(const FovPose& pose, double border_deg,
                      const ErpGrid& grid, const CoverageOptions& opts = {});

// Rotating intra block: `ri_tile_count` tiles contiguous in raster order,
// starting at (frame_index * ri_tile_count) mod tile_count.
TileMask RiTilesAt(std::int64_t frame_index, int ri_tile_count,
                   const ErpGrid& grid);
// Frames needed for the rotating block to visit every tile once.
int RiRefreshPeriod(int ri_tile_count, const ErpGrid& grid);

struct RegionLayout {
  TileMask pf;
  TileMask pfplus;
  TileMask ri;
  double a_pf = 0.0;      // square degrees, spherical tile footprint
  double a_pfplus = 0.0;
  double a_ri = 0.0;
  double lambda_pf = 1.0;
  double lambda_pfplus = 1.0;
};

double MaskAreaDeg2(const TileMask& mask, const ErpGrid& grid);

// Share of the frame not claimed by the rotating block, used for both the
// viewport and border regions.
double NonRiFraction(int ri_tile_count, const ErpGrid& grid);

RegionLayout LayoutFromMasks(const TileMask& fov_cover,
                             const TileMask& border, const TileMask& ri,
                             int ri_tile_count, const ErpGrid& grid);

RegionLayout BuildLayout(const FovPose& pose, double border_deg,
                         int ri_tile_count, std::int64_t frame_index,
                         const ErpGrid& grid,
                         const CoverageOptions& opts = {});

struct HitRates {
  double pf = 0.0;
  double pfplus = 0.0;
  double ri = 0.0;
  double uncoded = 0.0;
  double total() const { return pf + pfplus + ri; }
};

// Solid-angle share of a viewport falling in each tile; weights sum to 1.
struct TileWeights {
  std::vector<std::pair<int, double>> entries;  // tile index, weight
};

TileWeights ViewportTileWeights(const FovPose& pose, const ErpGrid& grid,
                                int per_axis);

HitRates HitRatesFromWeights(const TileWeights& weights,
                             const RegionLayout& layout);

// Share of the actual viewport landing in each region of `layout`. The
// layout is expected to come from `predicted`; it is only used to size
// the sampling, never to re-derive regions.
HitRates ComputeHitRates(const FovPose& predicted, const FovPose& actual,
                         const RegionLayout& layout, const ErpGrid& grid,
                         int per_axis = 256);

// Solid-angle share of `actual` that lies inside the `predicted` viewport.
double ViewportOverlap(const FovPose& predicted, const FovPose& actual,
                       int per_axis = 64);

}  // namespace fovstream

#endif  // FOVSTREAM_GEOMETRY_H_

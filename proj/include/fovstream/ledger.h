#ifndef FOVSTREAM_LEDGER_H_
#define FOVSTREAM_LEDGER_H_

#include <cstdint>
#include <map>
#include <vector>

#include "fovstream/geometry.h"
#include "fovstream/quality_models.h"

namespace fovstream {

// Per-tile record of the frame a tile was last coded in and the quality it
// was coded at.
class TileLedger {
 public:
  TileLedger() = default;
  TileLedger(int tile_count, std::int64_t frame, double quality_db)
      : last_frame_(tile_count, frame), last_quality_(tile_count, quality_db) {}

  int size() const { return static_cast<int>(last_frame_.size()); }
  std::int64_t last_coded_frame(int tile) const { return last_frame_[tile]; }
  double last_coded_quality(int tile) const { return last_quality_[tile]; }
  std::int64_t Lapse(int tile, std::int64_t frame) const {
    return frame - last_frame_[tile];
  }
  void Record(int tile, std::int64_t frame, double quality_db) {
    last_frame_[tile] = frame;
    last_quality_[tile] = quality_db;
  }
  bool operator==(const TileLedger&) const = default;

 private:
  std::vector<std::int64_t> last_frame_;
  std::vector<double> last_quality_;
};

// Counts of observed lapses, normalized on demand.
using LapseHistogram = std::map<std::int64_t, std::int64_t>;

// Empty histogram yields {1: 1.0}.
LapseDistribution ToDistribution(const LapseHistogram& hist);

struct FrameCoding {
  std::int64_t frame = 0;
  TileMask measured;  // tiles whose lapse is sampled (the PF region)
  TileMask coded;     // every tile coded in the frame
};

// Replays a segment's coding history over a ledger snapshot taken at its
// start and returns the distribution of lapses of the measured tiles.
LapseDistribution MeasureLapseDistribution(TileLedger ledger,
                                           const std::vector<FrameCoding>& history);

}  // namespace fovstream

#endif  // FOVSTREAM_LEDGER_H_

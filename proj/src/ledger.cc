#include "fovstream/ledger.h"

namespace fovstream {

LapseDistribution ToDistribution(const LapseHistogram& hist) {
  std::int64_t total = 0;
  for (const auto& [tau, n] : hist) total += n;
  if (total == 0) return {{1, 1.0}};
  LapseDistribution out;
  for (const auto& [tau, n] : hist) {
    if (n > 0) out[tau] = static_cast<double>(n) / total;
  }
  return out;
}

LapseDistribution MeasureLapseDistribution(TileLedger ledger,
                                           const std::vector<FrameCoding>& history) {
  LapseHistogram hist;
  for (const FrameCoding& fc : history) {
    for (int t : fc.measured.Indices()) ++hist[ledger.Lapse(t, fc.frame)];
    for (int t : fc.coded.Indices()) {
      ledger.Record(t, fc.frame, ledger.last_coded_quality(t));
    }
  }
  return ToDistribution(hist);
}

}  // namespace fovstream

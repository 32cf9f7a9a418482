#ifndef FOVSTREAM_ALLOCATOR_H_
#define FOVSTREAM_ALLOCATOR_H_

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "fovstream/geometry.h"
#include "fovstream/quality_models.h"

namespace fovstream {

struct RegionHits {
  double pf = 0.0;
  double pfplus = 0.0;
  double ri = 0.0;
};

struct AllocationInputs {
  double gamma = 1.0;
  double alpha_pf = 0.9;
  std::map<int, double> alpha_pfplus;  // by border, degrees
  std::map<int, double> alpha_ri;      // by rotating-intra size, tiles
  // Measured hits for a specific (border, ri) pair; takes precedence over
  // the per-size maps above.
  std::map<std::pair<int, int>, RegionHits> pair_hits;
  LapseDistribution lapse_pf{{1, 1.0}};
  LapseDistribution lapse_pfplus{{1, 1.0}};
  double budget_bt = 0.0;  // bits per frame
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
  std::vector<int> borders{10, 20, 30, 40, 50};
  std::vector<int> ri_sizes{4, 8, 16, 32, 64};
  QualityModelSet models;
  int total_tiles = 512;
  // Optional override of kappa(ceil(total / k)).
  std::map<int, double> kappa_min;
  double rate_ceiling = 5000.0;  // bits per square degree
};

// Everything the objective and rate formulas need for one (border, ri) candidate.
struct CandidateTerms {
  int border_deg = 0;
  int ri_tiles = 0;
  RegionHits hits;
  double gamma = 1.0;
  double kappa_min = 0.0;
  double lambda = 1.0;
  double a_pf = 0.0;      // nominal square degrees
  double a_pfplus = 0.0;
  double a_ri = 0.0;
  LogQrModel pf;          // lapse-adjusted
  LogQrModel pfplus;      // lapse-adjusted
  LogQrModel ri;
  double mean_rho_pf = 1.0;
  double mean_rho_pfplus = 1.0;
};

CandidateTerms TermsFor(const AllocationInputs& in, int border_deg, int ri_tiles);

double NominalPfPlusArea(double h_deg, double v_deg, int border_deg);
double NominalRiArea(int ri_tiles, int total_tiles);

double ExpectedQuality(double r_e, double r_b, const CandidateTerms& t);
double ExpectedQuality(double r_e, double r_b, const AllocationInputs& in,
                       int border_deg, int ri_tiles);

struct RatePair {
  double r_e = 0.0;
  double r_b = 0.0;
  bool clamped = false;
};

// Unclamped optimum of the log objective along the budget line.
RatePair UnclampedRates(const CandidateTerms& t, double budget_bt);
RatePair ClosedFormRates(const AllocationInputs& in, int border_deg, int ri_tiles);
RatePair ClosedFormRates(const CandidateTerms& t, double budget_bt,
                         double rate_ceiling);

// Bits the plan spends per frame according to the nominal budget equation.
double PlannedBits(double r_e, double r_b, const CandidateTerms& t);

struct SegmentPlan {
  int border_deg = 0;
  int ri_tile_count = 0;
  double r_e = 0.0;
  double r_b = 0.0;
  double expected_quality = 0.0;
  double budget_bt = 0.0;
  double mean_rho_pf = 1.0;
  double mean_rho_pfplus = 1.0;
  bool clamped = false;
};

SegmentPlan PlanSegment(const AllocationInputs& in);
// Closed-form rates for a fixed candidate, skipping enumeration.
SegmentPlan PlanFixed(const AllocationInputs& in, int border_deg, int ri_tiles);

double SegmentBudget(double predicted_bits, double sender_backlog_bits, double eta);

struct BudgetState {
  double segment_budget = 0.0;
  double bits_spent = 0.0;
  int frame_in_segment = 0;
  int frames_per_segment = 30;
  int buffer_occupancy = 0;
  int buffer_capacity = 10;
};

double RemainingSegmentBudget(const BudgetState& s);
// Empty result means the frame is skipped (sender buffer full).
std::optional<double> FrameBitBudget(const BudgetState& s, double a, double b);
// Same control law with the remaining budget shared by per-frame weights
// instead of evenly; `weight` is this frame's share, `remaining_weight` the
// sum over this and all later frames of the segment.
std::optional<double> WeightedFrameBitBudget(const BudgetState& s, double a,
                                             double b, double weight,
                                             double remaining_weight);

}  // namespace fovstream

#endif  // FOVSTREAM_ALLOCATOR_H_

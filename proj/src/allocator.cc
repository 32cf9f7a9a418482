#include "fovstream/allocator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fovstream {

namespace {

double Lookup(const std::map<int, double>& m, int key) {
  auto it = m.find(key);
  return it == m.end() ? 0.0 : it->second;
}

void CheckUnit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ArgumentError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

double NominalPfPlusArea(double h_deg, double v_deg, int border_deg) {
  return (h_deg + border_deg) * (v_deg + border_deg) - h_deg * v_deg;
}

double NominalRiArea(int ri_tiles, int total_tiles) {
  return kFullSphereDeg2 * ri_tiles / total_tiles;
}

CandidateTerms TermsFor(const AllocationInputs& in, int border_deg, int ri_tiles) {
  if (ri_tiles < 0 || ri_tiles > in.total_tiles) {
    throw ArgumentError("rotating intra size outside [0, tile count]");
  }
  CandidateTerms t;
  t.border_deg = border_deg;
  t.ri_tiles = ri_tiles;
  t.gamma = in.gamma;
  auto pair = in.pair_hits.find({border_deg, ri_tiles});
  if (pair != in.pair_hits.end()) {
    t.hits = pair->second;
  } else {
    t.hits = {in.alpha_pf, Lookup(in.alpha_pfplus, border_deg),
              Lookup(in.alpha_ri, ri_tiles)};
  }
  CheckUnit(t.gamma, "gamma");
  CheckUnit(t.hits.pf, "alpha_pf");
  CheckUnit(t.hits.pfplus, "alpha_pfplus");
  CheckUnit(t.hits.ri, "alpha_ri");
  auto km = in.kappa_min.find(ri_tiles);
  if (km != in.kappa_min.end()) {
    t.kappa_min = km->second;
  } else if (ri_tiles > 0) {
    const int period = (in.total_tiles + ri_tiles - 1) / ri_tiles;
    t.kappa_min = Kappa(in.models.kappa, period);
  }
  t.lambda = 1.0 - static_cast<double>(ri_tiles) / in.total_tiles;
  t.a_pf = in.fov_h_deg * in.fov_v_deg;
  t.a_pfplus = NominalPfPlusArea(in.fov_h_deg, in.fov_v_deg, border_deg);
  t.a_ri = NominalRiArea(ri_tiles, in.total_tiles);
  t.mean_rho_pf = MeanRho(in.lapse_pf, in.models.rho);
  t.mean_rho_pfplus = MeanRho(in.lapse_pfplus, in.models.rho);
  t.pf = AdjustForLapse(in.models.pf, in.lapse_pf, in.models.rho);
  t.pfplus = border_deg > 0
                 ? AdjustForLapse(in.models.PfPlus(border_deg), in.lapse_pfplus,
                                  in.models.rho)
                 : LogQrModel{0.0, 0.0};
  t.ri = in.models.ri;
  return t;
}

double ExpectedQuality(double r_e, double r_b, const CandidateTerms& t) {
  const double g = t.gamma;
  const RegionHits& h = t.hits;
  const double q_ri = QualityAtRate(t.ri, r_b);
  const double coded = g * (h.pf * QualityAtRate(t.pf, r_e) +
                            h.pfplus * QualityAtRate(t.pfplus, r_b) +
                            h.ri * q_ri);
  return coded + (1.0 - g * (h.pf + h.pfplus + h.ri)) * t.kappa_min * q_ri;
}

double ExpectedQuality(double r_e, double r_b, const AllocationInputs& in,
                       int border_deg, int ri_tiles) {
  return ExpectedQuality(r_e, r_b, TermsFor(in, border_deg, ri_tiles));
}

double PlannedBits(double r_e, double r_b, const CandidateTerms& t) {
  return t.lambda * t.a_pf * r_e + (t.lambda * t.a_pfplus + t.a_ri) * r_b;
}

RatePair UnclampedRates(const CandidateTerms& t, double budget_bt) {
  const double g = t.gamma;
  const RegionHits& h = t.hits;
  const double x = g * h.pf * t.pf.b;
  const double y = g * h.pfplus * t.pfplus.b + g * h.ri * t.ri.b +
                   t.kappa_min * t.ri.b -
                   g * t.kappa_min * t.ri.b * (h.pf + h.pfplus + h.ri);
  if (!(x + y > 0.0)) {
    throw AllocationError("degenerate candidate: X + Y <= 0");
  }
  const double le = t.lambda * t.a_pf;
  const double lb = t.lambda * t.a_pfplus + t.a_ri;
  RatePair r;
  r.r_e = le > 0.0 ? x / (x + y) * budget_bt / le : 0.0;
  r.r_b = lb > 0.0 ? y / (x + y) * budget_bt / lb : 0.0;
  return r;
}

RatePair ClosedFormRates(const CandidateTerms& t, double budget_bt,
                         double rate_ceiling) {
  if (!(budget_bt > 0.0)) throw AllocationError("frame budget must be positive");
  RatePair r = UnclampedRates(t, budget_bt);
  const double le = t.lambda * t.a_pf;
  const double lb = t.lambda * t.a_pfplus + t.a_ri;
  if (r.r_b < kRateFloor) {
    r.r_b = kRateFloor;
    r.r_e = (budget_bt - lb * r.r_b) / le;
    r.clamped = true;
  }
  if (r.r_e < kRateFloor) {
    r.r_e = kRateFloor;
    r.clamped = true;
  }
  if (r.r_e < r.r_b) {
    r.r_e = r.r_b = std::max(kRateFloor, budget_bt / (le + lb));
    r.clamped = true;
  }
  if (r.r_e > rate_ceiling) {
    r.r_e = rate_ceiling;
    r.r_b = lb > 0.0 ? (budget_bt - le * r.r_e) / lb : r.r_b;
    r.clamped = true;
  }
  if (r.r_b > rate_ceiling) {
    r.r_b = rate_ceiling;
    r.r_e = rate_ceiling;
    r.clamped = true;
  }
  r.r_b = std::max(r.r_b, kRateFloor);
  return r;
}

RatePair ClosedFormRates(const AllocationInputs& in, int border_deg, int ri_tiles) {
  return ClosedFormRates(TermsFor(in, border_deg, ri_tiles), in.budget_bt,
                         in.rate_ceiling);
}

namespace {

SegmentPlan MakePlan(const CandidateTerms& t, const RatePair& r, double budget) {
  SegmentPlan p;
  p.border_deg = t.border_deg;
  p.ri_tile_count = t.ri_tiles;
  p.r_e = r.r_e;
  p.r_b = r.r_b;
  p.expected_quality = ExpectedQuality(r.r_e, r.r_b, t);
  p.budget_bt = budget;
  p.mean_rho_pf = t.mean_rho_pf;
  p.mean_rho_pfplus = t.mean_rho_pfplus;
  p.clamped = r.clamped;
  return p;
}

}  // namespace

SegmentPlan PlanFixed(const AllocationInputs& in, int border_deg, int ri_tiles) {
  CandidateTerms t = TermsFor(in, border_deg, ri_tiles);
  return MakePlan(t, ClosedFormRates(t, in.budget_bt, in.rate_ceiling),
                  in.budget_bt);
}

SegmentPlan PlanSegment(const AllocationInputs& in) {
  if (in.borders.empty() || in.ri_sizes.empty()) {
    throw AllocationError("empty candidate set");
  }
  std::vector<int> borders = in.borders;
  std::vector<int> ris = in.ri_sizes;
  std::sort(borders.begin(), borders.end());
  std::sort(ris.begin(), ris.end());
  std::optional<SegmentPlan> best;
  for (int b : borders) {
    for (int k : ris) {
      SegmentPlan p;
      try {
        p = PlanFixed(in, b, k);
      } catch (const AllocationError&) {
        continue;
      }
      if (!best || p.expected_quality > best->expected_quality + 1e-12) best = p;
    }
  }
  if (!best) throw AllocationError("no admissible (border, RI) candidate");
  return *best;
}

double SegmentBudget(double predicted_bits, double sender_backlog_bits, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ArgumentError("eta must lie in (0, 1]");
  return std::max(0.0, eta * (predicted_bits - sender_backlog_bits));
}

namespace {

void CheckState(const BudgetState& s) {
  if (s.frames_per_segment <= 0 || s.frame_in_segment < 0 ||
      s.frame_in_segment >= s.frames_per_segment) {
    throw ArgumentError("frame index outside the segment");
  }
  if (s.buffer_capacity <= 0 || s.buffer_occupancy < 0 ||
      s.buffer_occupancy > s.buffer_capacity) {
    throw ArgumentError("buffer occupancy outside [0, capacity]");
  }
}

}  // namespace

double RemainingSegmentBudget(const BudgetState& s) {
  CheckState(s);
  const double pace =
      static_cast<double>(s.frame_in_segment) / s.frames_per_segment * s.segment_budget;
  return std::max(0.0, s.segment_budget - std::max(s.bits_spent, pace));
}

std::optional<double> FrameBitBudget(const BudgetState& s, double a, double b) {
  return WeightedFrameBitBudget(s, a, b, 1.0,
                                s.frames_per_segment - s.frame_in_segment);
}

std::optional<double> WeightedFrameBitBudget(const BudgetState& s, double a,
                                             double b, double weight,
                                             double remaining_weight) {
  CheckState(s);
  if (s.buffer_occupancy >= s.buffer_capacity) return std::nullopt;
  if (!(remaining_weight > 0.0)) throw ArgumentError("remaining weight must be > 0");
  const double fill = static_cast<double>(s.buffer_occupancy) / s.buffer_capacity;
  return RemainingSegmentBudget(s) * weight / remaining_weight * a * std::exp(-b * fill);
}

}  // namespace fovstream

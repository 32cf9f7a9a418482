// Direct re-implementation of the expected-quality objective from raw
// inputs, used as the reference in allocator tests and acceptance checks.
#ifndef FOVSTREAM_TESTS_ALLOCATOR_ORACLE_H_
#define FOVSTREAM_TESTS_ALLOCATOR_ORACLE_H_

#include <cmath>
#include <random>

#include "fovstream/allocator.h"

namespace oracle {

struct Objective {
  double gamma, apf, apfp, ari, kmin;
  double a_pf, b_pf, a_pp, b_pp, a_ri, b_ri;  // lapse-adjusted where relevant
  double le, lb;                              // budget-line coefficients

  double Quality(double re, double rb) const {
    auto q = [](double a, double b, double r) { return a + b * std::log(std::max(r, 1e-4)); };
    double qri = q(a_ri, b_ri, rb);
    return gamma * (apf * q(a_pf, b_pf, re) + apfp * q(a_pp, b_pp, rb) + ari * qri) +
           (1 - gamma * (apf + apfp + ari)) * kmin * qri;
  }
};

inline Objective Build(const fovstream::AllocationInputs& in, int border, int ri) {
  auto mean_rho = [&](const fovstream::LapseDistribution& d) {
    double s = 0;
    for (auto [tau, p] : d) s += p * (1 + in.models.rho.c * (1 - std::exp(-in.models.rho.d * (tau - 1))));
    return s;
  };
  Objective o;
  o.gamma = in.gamma;
  o.apf = in.alpha_pf;
  o.apfp = in.alpha_pfplus.at(border);
  o.ari = in.alpha_ri.at(ri);
  int period = (in.total_tiles + ri - 1) / ri;
  o.kmin = std::exp(-in.models.kappa.g * std::pow(period, in.models.kappa.h));
  o.b_pf = in.models.pf.b;
  o.a_pf = in.models.pf.a - o.b_pf * std::log(mean_rho(in.lapse_pf));
  o.b_pp = in.models.pfplus.at(border).b;
  o.a_pp = in.models.pfplus.at(border).a - o.b_pp * std::log(mean_rho(in.lapse_pfplus));
  o.a_ri = in.models.ri.a;
  o.b_ri = in.models.ri.b;
  double lambda = 1 - double(ri) / in.total_tiles;
  double full = 4 * 3.14159265358979323846 * std::pow(180 / 3.14159265358979323846, 2);
  o.le = lambda * in.fov_h_deg * in.fov_v_deg;
  o.lb = lambda * ((in.fov_h_deg + border) * (in.fov_v_deg + border) - in.fov_h_deg * in.fov_v_deg) +
         full * ri / in.total_tiles;
  return o;
}

// Best objective along the budget line over `n` evenly spaced R_e values,
// restricted to R_e >= R_b >= 1e-4.
inline double GridMax(const Objective& o, double budget, int n) {
  double best = -1e300;
  for (int i = 1; i < n; ++i) {
    double re = budget / o.le * i / n;
    double rb = (budget - o.le * re) / o.lb;
    if (re < rb || rb < 1e-4) continue;
    best = std::max(best, o.Quality(re, rb));
  }
  return best;
}

inline fovstream::AllocationInputs RandomInputs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  fovstream::AllocationInputs in;
  in.gamma = 0.5 + 0.5 * u(rng);
  in.alpha_pf = 0.5 + 0.45 * u(rng);
  for (int b : in.borders) in.alpha_pfplus[b] = (1 - in.alpha_pf) * (0.2 + 0.6 * u(rng)) * b / 50;
  for (int k : in.ri_sizes) in.alpha_ri[k] = 0.02 * u(rng) * k / 64;
  in.lapse_pf = {{1, 0.7}, {2 + int(10 * u(rng)), 0.3}};
  in.lapse_pfplus = {{1, 0.4}, {3, 0.6}};
  in.budget_bt = 2e5 + 4e6 * u(rng);
  in.models.pf = {15 + 10 * u(rng), 3 + u(rng)};
  for (int b : in.borders) in.models.pfplus[b] = {in.models.pf.a - 2 + 0.02 * b, in.models.pf.b - 0.2 * u(rng)};
  in.models.ri = {10 + 4 * u(rng), 2.5 + u(rng)};
  in.models.rho = {0.3 + u(rng), 0.1 + 0.5 * u(rng)};
  in.models.kappa = {0.002 + 0.01 * u(rng), 0.6 + 0.5 * u(rng)};
  in.rate_ceiling = 1e12;
  return in;
}

}  // namespace oracle

#endif  // FOVSTREAM_TESTS_ALLOCATOR_ORACLE_H_

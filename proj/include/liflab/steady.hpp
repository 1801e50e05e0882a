#pragma once
#include <vector>

#include "liflab/grid.hpp"
#include "liflab/params.hpp"

namespace liflab {

// ---------------------------------------------------------------------------
// Stationary density of the single-neuron jump-and-leak process at a fixed
// jump rate sigma: exponential decay toward 0, +h jumps at rate sigma,
// fire-and-reset to v_r when a jump reaches or passes 1.
//
// In flux form, with u(v) = v p(v) the downward drift flux through level v,
// the stationary equation between structural points reads
//     u'(v) = sigma u(v)/v - sigma p(v - h) 1{v > h},
// with a unit downward jump of u at v_r per unit spike flux.
//
// Construction used here: split p by the number of jumps since the last
// reset.  With unit reset flux the zeroth generation is exact,
//     u_0(v) = (v / v_r)^sigma  on (0, v_r],
// and generation k >= 1 is the downward-stable integral
//     u_k(v) = int_v^1 (v/s)^sigma  sigma p_{k-1}(s - h) 1{s > h}  ds,
// i.e. "mass above v that lands by a jump and survives the drift down to v".
// Every kernel weight (v/s)^sigma lies in [0,1], so the recursion is
// positivity-preserving and well conditioned uniformly in sigma.  (The
// alternative — marching the delayed ODE left to right and closing a 2x2
// system for the head and jump weights — amplifies roundoff by (b/a)^sigma
// per interval and loses all accuracy beyond sigma of about 40.)
//
// Each u_k is zero above min(v_r + k h, 1), and flux bookkeeping
//     lambda_0 = 1,   lambda_{k+1} = lambda_k - Lambda_k,
// with Lambda_k = sigma * int_{1-h}^1 p_k the spike flux skimmed off
// generation k, telescopes to sum_k Lambda_k = 1: every unit of reset flux
// eventually exits as spike flux.  The series is truncated once the
// circulating remainder lambda_k is negligible; the remainder is also the
// a-posteriori truncation error.  Normalizing the summed generations by
// their total mass yields the stationary density, and the tail fraction is
//     F(sigma) = int_{1-h}^1 p_sigma = 1 / sum_k lambda_k
// (one spike per cycle over the mean number of events per cycle).
//
// Below a0 = min(h, v_r) there is no jump-in source, so every generation is
// an exact power there and the head is analytic:
//     p(v) = C (v/h)^(sigma - 1)  on (0, a0).
// All mesh segments are bounded by the structural points {k h}, {v_r + k h},
// 1-h and 1, where the density has kinks (and at v_r its single jump); the
// sub-mesh is refined geometrically below segment right-ends when sigma is
// large, since stationary profiles develop layers of width ~ v/sigma there.
// ---------------------------------------------------------------------------

struct PiecewiseDensity {
  double sigma = 0, h = 0, v_r = 0;
  double a0 = 0;             // head region is (0, a0)
  double C = 0;              // p(v) = C * (v/h)^(sigma-1) on (0, a0)
  double head_exponent = 0;  // sigma - 1
  double D = 0;              // downward jump of v*p at v_r; equals sigma * tail
  double tail = 0;           // int_{1-h}^1 p
  double rate = 0;           // sigma * tail (stationary firing rate)
  // Mesh: segments between consecutive structural points covering [a0, 1];
  // nodes ascending per segment, first/last node on the segment ends, so
  // both one-sided values at the v_r jump are represented.
  std::vector<double> breakpoints;         // segment edges, ascending, a0 ... 1
  std::vector<std::vector<double>> seg_v;  // nodes
  std::vector<std::vector<double>> seg_u;  // u = v*p at nodes (normalized)
  int levels_used = 0;
  // A-posteriori relative error estimate of the construction.  When the
  // generation series is truncated directly this is |1 - sum of
  // per-generation spike fluxes|, which equals |D - sigma*tail| / D
  // identically (tail integral and flux bookkeeping share one quadrature).
  // When the series locks onto its dominant geometric mode and the
  // remainder is summed in closed form instead, this is the relative
  // spread of the last observed generation-to-generation ratios, i.e. how
  // well the geometric model fit what was actually computed.
  double flux_residual = 0;

  double eval_u(double v) const;  // v*p; right-continuous at interior edges
  double eval(double v) const;    // density
};

struct SteadyOptions {
  int subdiv = 512;          // base sub-intervals per length h
  double trunc_tol = 1e-13;  // stop once projected remaining flux is below this
  long long max_levels = 2'000'000;
};

// Stationary density at fixed rate sigma (no coupling involved).
PiecewiseDensity invariant_density(double h, double v_r, double sigma,
                                   const SteadyOptions& opt = {});

// F(sigma): stationary tail fraction int_{1-h}^1 p_sigma.  Increasing in
// sigma, bounded by sigma/(1-h) as sigma -> 0 and by 1/(1+floor((1-v_r)/h))
// as sigma -> infinity.
double tail_fraction(double h, double v_r, double sigma, const SteadyOptions& opt = {});

// G(sigma) = (1/J) (1 - sigma0/sigma): the coupling balance line.  A rate
// sigma_bar is self-consistent iff F(sigma_bar) = G(sigma_bar).
double coupling_balance(double sigma, double sigma0, double J);

struct SteadyRoot {
  double sigma_bar = 0;
  double rate = 0;      // sigma_bar * F(sigma_bar)
  double tail = 0;      // F(sigma_bar)
  double residual = 0;  // |sigma_bar - sigma0/(1 - J F)| / sigma_bar
};

struct ScanRow {
  double sigma = 0, F = 0, G = 0;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::vector<SteadyRoot> roots;  // ascending in sigma_bar
};

// Scan F - G on a log grid (default range [sigma0, 1e4*sigma0]; pass
// positive sigma_min/sigma_max to override) and refine every sign change by
// bisection.  The default range starts at sigma0 itself, where G vanishes
// while F > 0, so the low balance point is bracketed even when it sits
// within rounding distance of sigma0.  With J == 0 the unique balance point
// sigma_bar = sigma0 is returned directly.
ScanResult find_steady_states(const ModelParams& p, int scan_points = 400,
                              const SteadyOptions& opt = {}, double sigma_min = 0,
                              double sigma_max = 0);

// Cell averages of the stationary density on a finite-volume layout
// (analytic integral over the head, Gauss panels elsewhere, exact splits at
// structural points).
GridDensity project_to_grid(const PiecewiseDensity& pd, const GridLayout& L);

}  // namespace liflab

#include "liflab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liflab/errors.hpp"
#include "liflab/io.hpp"
#include "liflab/pde.hpp"

namespace liflab {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kFitFloor = 1e-12;
constexpr double kSlack = 1.05;

std::vector<double> sample_times(double t_end, int n_samples) {
  std::vector<double> out;
  out.reserve(n_samples + 1);
  for (int k = 0; k <= n_samples; ++k) out.push_back(t_end * k / n_samples);
  return out;
}

// Fill points/tv0/nonincreasing/fit fields common to both experiments.
void measure(DecayReport& rep, const std::vector<double>& ts, const std::vector<double>& tvs,
             double t_end) {
  rep.tv0 = tvs.front();
  rep.points.resize(ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    rep.points[k].t = ts[k];
    rep.points[k].tv = tvs[k];
  }
  rep.nonincreasing = true;
  const double tol = 1e-12 * std::max(1.0, rep.tv0);
  for (std::size_t k = 1; k < tvs.size(); ++k)
    if (tvs[k] > tvs[k - 1] + tol) rep.nonincreasing = false;

  rep.fit_t_lo = t_end / 2;
  rep.fit_t_hi = t_end;
  int usable = 0;
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (ts[k] >= rep.fit_t_lo && tvs[k] > kFitFloor) ++usable;
  if (usable >= 5) {
    rep.fitted_rate = fit_rate(ts, tvs, rep.fit_t_lo, rep.fit_t_hi);
  } else {
    rep.fitted_rate = kNan;
    rep.note += "tail window has too few points above the floor to fit a rate; ";
  }
}

}  // namespace

ContractionConstants contraction_constants(const ModelParams& p) {
  validate_dynamics(p);
  ContractionConstants k;
  k.t0 = std::log(4.0 / p.h);
  k.c = 0.5 * p.sigma0 * std::pow(p.h / 4.0, p.sigma0);
  k.a = -std::log1p(-k.c) / k.t0;
  k.prefactor = 1.0 / (1.0 - k.c);
  if (p.J < 1.0) {
    const double d = 1.0 - p.J;
    k.omega = 2.0 * p.sigma0 * p.J / ((1.0 - k.c) * d * d) + std::log1p(-k.c) / k.t0;
  } else {
    k.omega = kNan;  // the perturbation bound needs J < 1
  }
  return k;
}

DecayReport verify_linear_contraction(const GridDensity& mu0_a, const GridDensity& mu0_b,
                                      const ModelParams& params, double t_end, int n_samples,
                                      double dt, bool enforce_cfl) {
  if (!mu0_a.layout.same_as(mu0_b.layout))
    throw ValidationError("the two initial densities must share one grid layout");
  if (!(t_end > 0)) throw ValidationError("t_end must be positive");
  n_samples = std::max(4, n_samples);

  ModelParams p = params;
  p.J = 0;  // the contraction statement concerns the uncoupled semigroup

  DecayReport rep;
  rep.mode = "linear";
  rep.constants = contraction_constants(p);
  rep.claim = true;
  rep.theory_rate = rep.constants.a;

  PdeConfig cfg;
  cfg.t_end = t_end;
  cfg.dt = dt;
  cfg.enforce_cfl = enforce_cfl;
  cfg.output_times = sample_times(t_end, n_samples);
  const PdeResult ra = solve(mu0_a, p, cfg);
  const PdeResult rb = solve(mu0_b, p, cfg);

  std::vector<double> ts, tvs;
  for (std::size_t k = 0; k < ra.states.size() && k < rb.states.size(); ++k) {
    ts.push_back(ra.states[k].t);
    tvs.push_back(tv_distance(ra.states[k].rho, rb.states[k].rho));
  }
  measure(rep, ts, tvs, t_end);

  if (rep.tv0 <= 1e-14) {
    rep.note += "initial densities coincide; decay is trivial and no rate is fit; ";
    for (DecayPoint& q : rep.points) q.envelope = 0;
    return rep;
  }

  const double a = rep.constants.a, t0 = rep.constants.t0;
  rep.worst_violation = 0;
  for (DecayPoint& q : rep.points) {
    q.envelope = kSlack * std::exp(-a * std::max(0.0, q.t - t0)) * rep.tv0;
    if (q.t > t0)
      rep.worst_violation = std::max(rep.worst_violation, q.tv / q.envelope - 1.0);
  }
  rep.envelope_holds = rep.worst_violation <= 0;
  if (!rep.envelope_holds)
    throw NumericError("total-variation decay violates the guaranteed envelope by " +
                       io::fmt_shortest(100 * rep.worst_violation) +
                       "% — the solver configuration is unstable or inconsistent");
  return rep;
}

DecayReport verify_nonlinear_stability(const GridDensity& mu0, const ModelParams& p,
                                       double t_end, int n_samples, double dt,
                                       bool enforce_cfl, const SteadyOptions& sopt) {
  validate_dynamics(p);
  if (!(t_end > 0)) throw ValidationError("t_end must be positive");
  n_samples = std::max(4, n_samples);

  DecayReport rep;
  rep.mode = "nonlinear";
  rep.constants = contraction_constants(p);

  const ScanResult scan = find_steady_states(p, 400, sopt);
  if (scan.roots.empty())
    throw NumericError("no self-consistent stationary profile found for these parameters");
  const SteadyRoot root = scan.roots.front();
  const PiecewiseDensity pd = invariant_density(p.h, p.v_r, root.sigma_bar, sopt);
  const GridDensity target = project_to_grid(pd, mu0.layout);

  PdeConfig cfg;
  cfg.t_end = t_end;
  cfg.dt = dt;
  cfg.enforce_cfl = enforce_cfl;
  cfg.output_times = sample_times(t_end, n_samples);
  const PdeResult res = solve(mu0, p, cfg);
  if (res.blowup.blown_up)
    rep.note += "solution diverged at t = " + io::fmt_shortest(res.blowup.t_stop) + "; ";

  std::vector<double> ts, tvs;
  for (const PdeState& s : res.states) {
    ts.push_back(s.t);
    tvs.push_back(tv_distance(s.rho, target));
  }
  measure(rep, ts, tvs, t_end);

  const double omega = rep.constants.omega;
  if (std::isfinite(omega) && omega < -1e-12) {
    rep.claim = true;
    rep.theory_rate = -omega;
  } else {
    rep.claim = false;
    rep.theory_rate = kNan;
    rep.note += std::isfinite(omega) && std::abs(omega) <= 1e-12
                    ? "rate bound sits on the stability boundary; inconclusive; "
                    : "coupling outside the provable-stability region; observations only; ";
  }

  if (rep.tv0 <= 1e-14) {
    rep.note += "initial density already stationary on this grid; ";
    for (DecayPoint& q : rep.points) q.envelope = 0;
    return rep;
  }
  if (!rep.claim) {
    for (DecayPoint& q : rep.points) q.envelope = kNan;
    return rep;
  }

  rep.worst_violation = 0;
  for (DecayPoint& q : rep.points) {
    q.envelope = kSlack * rep.constants.prefactor * std::exp(omega * q.t) * rep.tv0;
    rep.worst_violation = std::max(rep.worst_violation, q.tv / q.envelope - 1.0);
  }
  rep.envelope_holds = rep.worst_violation <= 0;
  if (!rep.envelope_holds)
    throw NumericError("total-variation distance to the stationary profile violates the "
                       "guaranteed envelope by " +
                       io::fmt_shortest(100 * rep.worst_violation) + "%");
  return rep;
}

double fit_rate(const std::vector<double>& times, const std::vector<double>& tv_values,
                double t_lo, double t_hi) {
  if (times.size() != tv_values.size())
    throw ValidationError("times and values must have equal length");
  std::vector<double> x, y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_lo || times[k] > t_hi) continue;
    if (!(tv_values[k] > kFitFloor)) continue;
    x.push_back(times[k]);
    y.push_back(std::log(tv_values[k]));
  }
  if (x.size() < 5)
    throw ValidationError("rate fit needs at least 5 points above the floor in the window");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (sxx == 0) throw ValidationError("degenerate fit window: all times coincide");
  return -sxy / sxx;
}

}  // namespace liflab

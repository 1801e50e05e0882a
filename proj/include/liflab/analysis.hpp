#pragma once
#include <string>
#include <vector>

#include "liflab/grid.hpp"
#include "liflab/params.hpp"
#include "liflab/steady.hpp"

namespace liflab {

// Closed-form constants behind the total-variation convergence guarantees.
//
//   t0 = log(4/h)            horizon after which the one-neuron law is
//                            minorized by c * Uniform[h/2, h]
//   c  = (sigma0/2)(h/4)^sigma0
//   a  = -log(1-c)/t0        guaranteed decay rate of the uncoupled flow
//   omega = 2 sigma0 J / ((1-c)(1-J)^2) + log(1-c)/t0
//                            decay-rate bound for the coupled flow; a valid
//                            (negative) rate only near the weak-coupling
//                            threshold, and NaN when J >= 1
//   prefactor = 1/(1-c)      constant in front of the coupled envelope
struct ContractionConstants {
  double t0 = 0;
  double c = 0;
  double a = 0;
  double omega = 0;
  double prefactor = 0;
};

ContractionConstants contraction_constants(const ModelParams& p);

struct DecayPoint {
  double t = 0;
  double tv = 0;        // total-variation distance at t
  double envelope = 0;  // theoretical bound incl. the 5% numerical slack
};

// Outcome of one decay experiment.  `claim` says whether the theory asserts
// an envelope for these parameters; when it does and a sampled point exceeds
// the envelope, the verifying operation throws instead of returning.
struct DecayReport {
  std::string mode;  // "linear" or "nonlinear"
  ContractionConstants constants;
  std::vector<DecayPoint> points;
  double tv0 = 0;
  double fitted_rate = 0;   // least-squares decay rate on the tail window; NaN if unfit
  double theory_rate = 0;   // a (linear) or -omega (nonlinear); NaN when no claim
  double fit_t_lo = 0, fit_t_hi = 0;
  bool claim = false;
  bool envelope_holds = true;
  bool nonincreasing = true;     // measured on the sampled series
  double worst_violation = 0;    // max of tv/envelope - 1 over asserted samples
  std::string note;
};

// Evolve two initial densities under the uncoupled equation (J forced to 0)
// on their shared grid and compare the sampled TV distance against
//   1.05 * e^{-a (t - t0)} * TV(0)   for t > t0.
// The 5% slack absorbs discretization error; a violation beyond it throws
// NumericError (it indicates a misconfigured solver, e.g. an unstable step).
// dt <= 0 selects the automatic stable step; enforce_cfl=false permits an
// unstable step (used to regression-test that the check does fail then).
DecayReport verify_linear_contraction(const GridDensity& mu0_a, const GridDensity& mu0_b,
                                      const ModelParams& params, double t_end,
                                      int n_samples = 80, double dt = 0.0,
                                      bool enforce_cfl = true);

// Evolve one initial density under the coupled equation toward the
// self-consistent stationary profile (smallest balance rate) and compare
// sampled TV against 1.05 * (1/(1-c)) * e^{omega t} * TV(0).  The envelope
// is asserted only when omega < 0 (weak coupling); otherwise the experiment
// still runs and reports observations with claim=false.
DecayReport verify_nonlinear_stability(const GridDensity& mu0, const ModelParams& p,
                                       double t_end, int n_samples = 80, double dt = 0.0,
                                       bool enforce_cfl = true,
                                       const SteadyOptions& sopt = {});

// Least-squares slope of log(tv) against t over the window [t_lo, t_hi],
// sign-flipped so positive means decay.  Points with tv <= 1e-12 are
// excluded; fewer than 5 usable points is a ValidationError.
double fit_rate(const std::vector<double>& times, const std::vector<double>& tv_values,
                double t_lo, double t_hi);

}  // namespace liflab

#pragma once
#include <functional>
#include <optional>
#include <vector>

#include "liflab/grid.hpp"
#include "liflab/params.hpp"

namespace liflab {

struct PdeConfig {
  double t_end = 1.0;
  // Explicit step size.  <= 0 selects 0.9 / (n + sigma) recomputed as sigma
  // moves, which keeps every cell-update coefficient nonnegative (donor-cell
  // transport plus jump removal must not overdraw a cell in one step).
  double dt = 0.0;
  std::vector<double> output_times;  // snapped to the nearest step; 0 and t_end always kept
  bool enforce_cfl = true;           // refuse a dt that can produce negative cells
  double denom_floor = 1e-6;         // 1 - J*tail below this => divergence, stop
  double sigma_cap = 1e8;            // rate above this => divergence, stop
};

struct PdeSample {
  double t = 0, sigma = 0, rate = 0, tail = 0, total_mass = 0;
};

struct PdeState {
  double t = 0;
  GridDensity rho;
  double sigma = 0, rate = 0, tail = 0;
};

struct BlowupInfo {
  bool blown_up = false;
  // If blown_up: the time at which the feedback denominator crossed the
  // floor; otherwise the final integration time.
  double t_stop = 0;
  double denom = 1;      // 1 - J*tail at t_stop
  // Rate at the stopping point: the final feedback rate for a completed run,
  // the diverged rate when the run stopped (infinite once 1 - J*tail <= 0).
  double sigma_last = 0;
};

struct PdeResult {
  std::vector<PdeState> states;   // t = 0, requested outputs, final time
  std::vector<PdeSample> series;  // per-step scalars
  BlowupInfo blowup;
  double dt_used = 0;
  long long steps = 0;
};

// sigma for the current density: sigma0 / (1 - J * tail).  Empty when the
// denominator is at or below the floor (divergence of the feedback loop).
std::optional<double> coupled_rate(const GridDensity& d, const ModelParams& p,
                                   double denom_floor = 1e-6);

// One explicit conservative update with the given jump rate sigma.
// Donor-cell transport toward 0, exact m_jump-cell shift for the jump,
// above-threshold jump mass deposited in the reset cell.  Mass is conserved
// to round-off by construction.  Throws NumericError if enforce_cfl is set
// and the step could turn a nonnegative density negative.
void pde_step(GridDensity& d, double dt, double sigma, bool enforce_cfl = true);

PdeResult solve(const GridDensity& init, const ModelParams& p, const PdeConfig& cfg);

// Residual of the integrated weak form over stored states:
//   mu_T(f) - mu_0(f) - int_0^T mu_s(A_{sigma(s)} f) ds
// with A_sigma f(v) = -v f'(v) + sigma [ f(v+h) 1{v<1-h} + f(v_r) 1{v>=1-h} - f(v) ],
// time integral by trapezoid over the stored states, space by midpoint.
// Needs at least two stored states.
double weak_residual(const std::vector<PdeState>& states, const ModelParams& p,
                     const std::function<double(double)>& f,
                     const std::function<double(double)>& fp);

}  // namespace liflab

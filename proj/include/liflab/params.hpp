#pragma once
#include <string>
#include <vector>

namespace liflab {

// Parameters of the excitatory leaky integrate-and-fire network and of its
// mean-field equation:
//   h       synaptic jump size, in (0, 1)
//   v_r     reset potential, in (0, 1)
//   sigma0  baseline Poisson drive rate, > 0
//   J       coupling strength (expected kicks received per spike), >= 0
struct ModelParams {
  double h = 0.2;
  double v_r = 0.1;
  double sigma0 = 1.0;
  double J = 0.0;
};

// True when (1 - v_r)/h is an integer to within a relative tolerance.
// At that lattice degeneracy (threshold reachable from the reset point by
// an exact whole number of jumps) the floor-based regime thresholds sit on
// a discontinuity, so classification rejects such parameter sets.
bool ratio_is_integer(double h, double v_r, double tol = 1e-9);

// Strict validation: range checks plus rejection of an integer (1-v_r)/h,
// both as ValidationError.  The returned strings are advisory warnings.
// Used by `classify`, whose floor-based thresholds are genuinely ill-posed
// at the degenerate ratio.
std::vector<std::string> validate(const ModelParams& p);

// Range checks only; an integer (1-v_r)/h becomes a warning instead of an
// error.  The solvers and simulators use this: their constructions remain
// well defined at the degenerate ratio (only the sharp classification
// statements are affected), and reference parameter sets of interest do sit
// exactly on it.
std::vector<std::string> validate_dynamics(const ModelParams& p);

struct RegimeThresholds {
  double ratio = 0;             // (1 - v_r)/h
  double ratio_floor = 0;       // floor((1 - v_r)/h)
  double blowup_J = 0;          // 1 + (1 - v_r)/h
  double multiplicity_J = 0;    // 1 + floor((1 - v_r)/h)
  double two_state_sigma0 = 0;  // (1 - h)/(4J); +inf when J == 0
  double uniqueness_J = 0;      // (5 - 2 sqrt 6) * (h/4)^(sigma0 + 1)
};

// Where the parameter point sits relative to the known sharp conditions.
// All inequalities are strict; when J lands on a threshold to within 1e-9
// (relative) the corresponding flag is left false and a note records that
// no claim is made either way.
struct RegimeReport {
  bool global_wellposed = false;      // J < 1
  bool blowup_all_data = false;       // J >= 1 + (1-v_r)/h  and  h*sigma0 > 1
  bool one_steady_state = false;      // J < 1 + floor((1-v_r)/h)
  bool two_steady_states = false;     // J > 1 + floor(...)  and  sigma0 < (1-h)/(4J)
  bool unique_stable_steady = false;  // J < uniqueness threshold
  RegimeThresholds thresholds;
  std::vector<std::string> boundary_notes;
  std::vector<std::string> warnings;
};

RegimeReport classify(const ModelParams& p);

// Coupling strength below which the (unique) steady state is provably
// exponentially stable: (5 - 2 sqrt 6) * (h/4)^(sigma0 + 1).
double uniqueness_threshold(double h, double sigma0);

// Read "key=value" lines (h, v_r, sigma0, J); '#' starts a comment and
// blank lines are skipped.  Missing keys keep their defaults; unknown keys
// are an error.
ModelParams params_from_kv_file(const std::string& path);

}  // namespace liflab

#include "liflab/params.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "liflab/errors.hpp"

namespace liflab {

bool ratio_is_integer(double h, double v_r, double tol) {
  const double r = (1.0 - v_r) / h;
  const double k = std::round(r);
  return k >= 1.0 && std::abs(r - k) <= tol * std::max(1.0, std::abs(r));
}

std::vector<std::string> validate_dynamics(const ModelParams& p) {
  if (!(p.h > 0.0) || !(p.h < 1.0))
    throw ValidationError("h must lie in (0,1), got " + std::to_string(p.h));
  if (!(p.v_r > 0.0) || !(p.v_r < 1.0))
    throw ValidationError("v_r must lie in (0,1), got " + std::to_string(p.v_r));
  if (!(p.sigma0 > 0.0))
    throw ValidationError("sigma0 must be > 0, got " + std::to_string(p.sigma0));
  if (!(p.J >= 0.0))
    throw ValidationError("J must be >= 0, got " + std::to_string(p.J));
  std::vector<std::string> warnings;
  if (ratio_is_integer(p.h, p.v_r))
    warnings.push_back("(1 - v_r)/h is an integer: the threshold is reachable from the "
                       "reset point by a whole number of jumps, so the sharp regime "
                       "classification does not apply at this point");
  if (p.h >= 0.5)
    warnings.push_back("h >= 1/2: fewer than two whole jumps fit below threshold; "
                       "closed-form regime constants are used outside their sharpest range");
  return warnings;
}

std::vector<std::string> validate(const ModelParams& p) {
  std::vector<std::string> warnings = validate_dynamics(p);
  if (ratio_is_integer(p.h, p.v_r))
    throw ValidationError("(1 - v_r)/h = " + std::to_string((1.0 - p.v_r) / p.h) +
                          " is an integer; the floor-based regime thresholds sit on a "
                          "discontinuity there and no sharp classification is available.  "
                          "Perturb h or v_r.");
  return warnings;
}

double uniqueness_threshold(double h, double sigma0) {
  // 5 - 2 sqrt 6 = 0.10102051443364424...
  return (5.0 - 2.0 * std::sqrt(6.0)) * std::pow(h / 4.0, sigma0 + 1.0);
}

namespace {
void note_boundary(std::vector<std::string>& notes, double J, double thr, const char* name) {
  if (std::abs(J - thr) <= 1e-9 * std::max(1.0, std::abs(thr)))
    notes.push_back(std::string("J sits on the ") + name +
                    " threshold to within 1e-9; no claim is made at equality");
}
}  // namespace

RegimeReport classify(const ModelParams& p) {
  RegimeReport r;
  r.warnings = validate(p);
  RegimeThresholds& t = r.thresholds;
  t.ratio = (1.0 - p.v_r) / p.h;
  t.ratio_floor = std::floor(t.ratio);
  t.blowup_J = 1.0 + t.ratio;
  t.multiplicity_J = 1.0 + t.ratio_floor;
  t.two_state_sigma0 = p.J > 0.0 ? (1.0 - p.h) / (4.0 * p.J)
                                 : std::numeric_limits<double>::infinity();
  t.uniqueness_J = uniqueness_threshold(p.h, p.sigma0);

  r.global_wellposed = p.J < 1.0;
  r.blowup_all_data = (p.J >= t.blowup_J) && (p.h * p.sigma0 > 1.0);
  r.one_steady_state = p.J < t.multiplicity_J;
  r.two_steady_states = (p.J > t.multiplicity_J) && (p.sigma0 < t.two_state_sigma0);
  r.unique_stable_steady = p.J < t.uniqueness_J;

  note_boundary(r.boundary_notes, p.J, 1.0, "well-posedness");
  note_boundary(r.boundary_notes, p.J, t.multiplicity_J, "steady-state multiplicity");
  note_boundary(r.boundary_notes, p.J, t.uniqueness_J, "uniqueness/stability");
  return r;
}

ModelParams params_from_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open parameter file: " + path);
  ModelParams p;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    auto issp = [](unsigned char c) { return std::isspace(c); };
    while (!line.empty() && issp(line.back())) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && issp(line[b])) ++b;
    line.erase(0, b);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    while (!key.empty() && issp(key.back())) key.pop_back();
    std::size_t vb = 0;
    while (vb < val.size() && issp(val[vb])) ++vb;
    val.erase(0, vb);
    double x;
    try {
      std::size_t pos = 0;
      x = std::stod(val, &pos);
      while (pos < val.size() && issp(val[pos])) ++pos;
      if (pos != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": bad number '" + val + "'");
    }
    if (key == "h") p.h = x;
    else if (key == "v_r" || key == "vr") p.v_r = x;
    else if (key == "sigma0") p.sigma0 = x;
    else if (key == "J") p.J = x;
    else throw ValidationError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return p;
}

}  // namespace liflab

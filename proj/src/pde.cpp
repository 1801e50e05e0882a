#include "liflab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liflab/errors.hpp"

namespace liflab {

std::optional<double> coupled_rate(const GridDensity& d, const ModelParams& p,
                                   double denom_floor) {
  const double denom = 1.0 - p.J * tail_mass(d);
  if (denom <= denom_floor) return std::nullopt;
  return p.sigma0 / denom;
}

void pde_step(GridDensity& d, double dt, double sigma, bool enforce_cfl) {
  const GridLayout& L = d.layout;
  const int n = L.n, m = L.m_jump;
  const double dv = L.dv;
  // Own-cell coefficient is 1 - dt*(v_left/dv + sigma); the worst cell has
  // v_left = 1 - dv, so nonnegativity needs dt*(n - 1 + sigma) <= 1.
  if (enforce_cfl && dt * (n - 1 + sigma) > 1.0 + 1e-12)
    throw NumericError("step size dt = " + std::to_string(dt) +
                       " can overdraw a cell at sigma = " + std::to_string(sigma) +
                       " (need dt*(n-1+sigma) <= 1)");
  static thread_local std::vector<double> next;
  next.assign(n, 0.0);
  double tail = 0.0;
  for (int i = n - m; i < n; ++i) tail += d.p[i];
  tail *= dv;
  for (int i = 0; i < n; ++i) {
    const double inflow = (i + 1 < n) ? (i + 1) * dv * d.p[i + 1] : 0.0;
    const double outflow = i * dv * d.p[i];
    const double jump_in = (i >= m) ? sigma * d.p[i - m] : 0.0;
    next[i] = d.p[i] + dt * ((inflow - outflow) / dv + jump_in - sigma * d.p[i]);
  }
  next[L.i_reset] += dt * sigma * tail / dv;
  d.p.swap(next);
}

namespace {

PdeSample sample_of(double t, const GridDensity& d, double sigma) {
  PdeSample s;
  s.t = t;
  s.sigma = sigma;
  s.tail = tail_mass(d);
  s.rate = sigma * s.tail;
  s.total_mass = mass(d);
  return s;
}

PdeState state_of(double t, const GridDensity& d, double sigma) {
  PdeState st;
  st.t = t;
  st.rho = d;
  st.sigma = sigma;
  st.tail = tail_mass(d);
  st.rate = sigma * st.tail;
  return st;
}

}  // namespace

PdeResult solve(const GridDensity& init, const ModelParams& p, const PdeConfig& cfg) {
  validate_dynamics(p);
  if (init.layout.h != p.h || init.layout.v_r != p.v_r)
    throw ValidationError("initial density grid was built for different (h, v_r)");
  if (!(cfg.t_end >= 0)) throw ValidationError("t_end must be >= 0");

  const int n = init.layout.n;
  GridDensity d = init;

  // Stop times: requested outputs clipped to (0, t_end), plus t_end itself.
  std::vector<double> stops;
  for (double t : cfg.output_times)
    if (t > 0 && t < cfg.t_end) stops.push_back(t);
  stops.push_back(cfg.t_end);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  PdeResult res;
  double t = 0.0;
  std::size_t next_stop = 0;

  auto rate_now = coupled_rate(d, p, cfg.denom_floor);
  auto blow = [&](double sig_last) {
    res.blowup.blown_up = true;
    res.blowup.t_stop = t;
    res.blowup.denom = 1.0 - p.J * tail_mass(d);
    res.blowup.sigma_last = sig_last;
  };

  if (!rate_now || *rate_now > cfg.sigma_cap) {
    const double denom = 1.0 - p.J * tail_mass(d);
    blow(denom > 0 ? p.sigma0 / denom : std::numeric_limits<double>::infinity());
    res.states.push_back(state_of(0.0, d, res.blowup.sigma_last));
    res.series.push_back(sample_of(0.0, d, res.blowup.sigma_last));
    return res;
  }

  res.states.push_back(state_of(0.0, d, *rate_now));
  res.series.push_back(sample_of(0.0, d, *rate_now));
  if (cfg.t_end == 0) return res;

  double dt_fixed = cfg.dt;
  while (t < cfg.t_end) {
    const double sigma = *rate_now;
    double dt_max = dt_fixed > 0 ? dt_fixed : 0.9 / (n + sigma);
    if (cfg.enforce_cfl && dt_max * (n - 1 + sigma) > 1.0 + 1e-12)
      throw NumericError("requested dt violates the positivity bound at sigma = " +
                         std::to_string(sigma) + "; lower dt or use the automatic step");
    const double stop = stops[next_stop];
    double t_next = t + dt_max;
    bool at_stop = false;
    if (t_next >= stop - 1e-15 * std::max(1.0, stop)) {
      t_next = stop;
      at_stop = true;
    }
    pde_step(d, t_next - t, sigma, cfg.enforce_cfl);
    t = t_next;
    ++res.steps;
    res.dt_used = dt_max;

    rate_now = coupled_rate(d, p, cfg.denom_floor);
    if (!rate_now || *rate_now > cfg.sigma_cap) {
      const double denom = 1.0 - p.J * tail_mass(d);
      blow(denom > 0 ? p.sigma0 / denom : std::numeric_limits<double>::infinity());
      res.states.push_back(state_of(t, d, res.blowup.sigma_last));
      res.series.push_back(sample_of(t, d, res.blowup.sigma_last));
      return res;
    }
    res.series.push_back(sample_of(t, d, *rate_now));
    if (at_stop) {
      res.states.push_back(state_of(t, d, *rate_now));
      ++next_stop;
      if (next_stop >= stops.size()) break;
    }
  }
  // Completed run: record where the feedback loop ended up.
  res.blowup.t_stop = t;
  res.blowup.denom = 1.0 - p.J * tail_mass(d);
  res.blowup.sigma_last = rate_now ? *rate_now : 0.0;
  return res;
}

double weak_residual(const std::vector<PdeState>& states, const ModelParams& p,
                     const std::function<double(double)>& f,
                     const std::function<double(double)>& fp) {
  if (states.size() < 2)
    throw ValidationError("weak_residual needs at least two stored states");
  const GridLayout& L = states.front().rho.layout;
  const int n = L.n, m = L.m_jump;
  auto mu_f = [&](const PdeState& s) {
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += s.rho.p[i] * f(L.center(i));
    return acc * L.dv;
  };
  auto mu_Af = [&](const PdeState& s) {
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      const double v = L.center(i);
      const double jump_target = (i + m < n) ? f(v + p.h) : f(p.v_r);
      acc += s.rho.p[i] * (-v * fp(v) + s.sigma * (jump_target - f(v)));
    }
    return acc * L.dv;
  };
  double integral = 0;
  double prev_t = states[0].t, prev_I = mu_Af(states[0]);
  for (std::size_t k = 1; k < states.size(); ++k) {
    const double tk = states[k].t, Ik = mu_Af(states[k]);
    integral += 0.5 * (tk - prev_t) * (Ik + prev_I);
    prev_t = tk;
    prev_I = Ik;
  }
  return mu_f(states.back()) - mu_f(states.front()) - integral;
}

}  // namespace liflab

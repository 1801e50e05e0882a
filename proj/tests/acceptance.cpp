// End-to-end acceptance gate.  Each case exercises one headline capability of
// the laboratory across module boundaries and prints exactly one summary line
//   criterion NN (name): PASS|FAIL (measured numbers, wall time)
// so a full run reads as a scorecard.  Tolerances are frozen from measured
// values with stated margins; wall-time limits are asserted where a budget is
// part of the requirement.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "liflab/analysis.hpp"
#include "liflab/cli.hpp"
#include "liflab/grid.hpp"
#include "liflab/params.hpp"
#include "liflab/pde.hpp"
#include "liflab/pdmp.hpp"
#include "liflab/steady.hpp"

using namespace liflab;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

double sec_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

GridDensity uniform_density(int n, double h, double v_r) {
  return from_function(make_layout(n, h, v_r), [](double) { return 1.0; });
}

// Independent check of the analytic head of the stationary density: fourth
// order Runge-Kutta on u' = sigma*u/v marched upward from near zero on a
// geometric grid, compared against the stored closed form.
double head_rk_worst(const PiecewiseDensity& pd, int nsteps) {
  const double sigma = pd.sigma;
  auto u_analytic = [&](double v) {
    return pd.C * pd.h * std::exp(sigma * std::log(v / pd.h));
  };
  const double v0 = 1e-4 * pd.a0, v1 = pd.a0;
  const double g = std::pow(v1 / v0, 1.0 / nsteps);
  double u = u_analytic(v0), v = v0, worst = 0;
  auto f = [&](double x, double y) { return sigma * y / x; };
  for (int i = 0; i < nsteps; ++i) {
    const double vn = v * g, dv = vn - v;
    const double k1 = f(v, u);
    const double k2 = f(v + dv / 2, u + dv / 2 * k1);
    const double k3 = f(v + dv / 2, u + dv / 2 * k2);
    const double k4 = f(vn, u + dv * k3);
    u += dv / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    v = vn;
    const double ua = u_analytic(v);
    worst = std::max(worst, std::fabs(u - ua) / ua);
  }
  return worst;
}

constexpr std::pair<double, double> kGeometries[] = {{0.2, 0.1}, {0.05, 0.3}};
constexpr double kRates[] = {0.5, 1.0, 2.0, 50.0};

}  // namespace

TEST_CASE("criterion 01: mass conservation") {
  const auto t0 = clk::now();
  const ModelParams p{0.2, 0.1, 1.0, 0.5};
  PdeConfig cfg;
  cfg.t_end = 20.0;
  for (int k = 1; k <= 19; ++k) cfg.output_times.push_back(double(k));
  const PdeResult res = solve(uniform_density(400, p.h, p.v_r), p, cfg);
  double worst = 0;
  for (const PdeSample& s : res.series) worst = std::max(worst, std::fabs(s.total_mass - 1.0));
  const double wall = sec_since(t0);
  const bool ok = !res.blowup.blown_up && worst <= 1e-9 && wall <= 10.0;
  std::printf("criterion 01 (mass conservation): %s (max |mass-1| = %.2e over %lld steps, %.2f s)\n",
              ok ? "PASS" : "FAIL", worst, res.steps, wall);
  std::fflush(stdout);
  CHECK_FALSE(res.blowup.blown_up);
  CHECK(worst <= 1e-9);
  CHECK(wall <= 10.0);
}

TEST_CASE("criterion 02: stationary head formula") {
  const auto t0 = clk::now();
  double worst = 0;
  for (auto [h, vr] : kGeometries)
    for (double s : kRates)
      worst = std::max(worst, head_rk_worst(invariant_density(h, vr, s), 50000));
  const double wall = sec_since(t0);
  const bool ok = worst <= 1e-6;
  std::printf("criterion 02 (stationary head formula): %s (worst rel vs independent march = %.2e, %.2f s)\n",
              ok ? "PASS" : "FAIL", worst, wall);
  std::fflush(stdout);
  CHECK(worst <= 1e-6);  // measured 2.74e-8
}

TEST_CASE("criterion 03: stationary density bounds") {
  const auto t0 = clk::now();
  double worst_excess = -1e300;
  int nodes = 0;
  for (auto [h, vr] : kGeometries)
    for (double s : kRates) {
      const PiecewiseDensity pd = invariant_density(h, vr, s);
      for (std::size_t seg = 0; seg < pd.seg_v.size(); ++seg)
        for (std::size_t k = 0; k < pd.seg_v[seg].size(); ++k) {
          const double v = pd.seg_v[seg][k];
          const double dens = pd.seg_u[seg][k] / v;
          const double bound =
              std::min(s * std::pow(v, s - 1.0) / std::pow(h, s), s / v);
          worst_excess = std::max(worst_excess, dens - bound);
          ++nodes;
        }
    }
  const double wall = sec_since(t0);
  const bool ok = worst_excess <= 1e-8;
  std::printf("criterion 03 (stationary density bounds): %s (worst p - bound = %.2e over %d nodes, %.2f s)\n",
              ok ? "PASS" : "FAIL", worst_excess, nodes, wall);
  std::fflush(stdout);
  // Measured -4.4e-13: the tightest absolute margin sits where the bound
  // itself is ~4e-13 (v = v_r with the large rate) and the density is
  // smaller still; everywhere else the margin is order one.
  CHECK(worst_excess <= 1e-8);
}

TEST_CASE("criterion 04: tail-fraction limits") {
  const auto t0 = clk::now();
  const double Flo = tail_fraction(0.2, 0.1, 1e-3);
  const double Fhi = tail_fraction(0.2, 0.1, 1e4);
  const double wall = sec_since(t0);
  const bool ok = Flo <= 1.25e-3 && std::fabs(Fhi - 0.2) <= 0.02 && wall <= 30.0;
  std::printf("criterion 04 (tail-fraction limits): %s (F(1e-3) = %.2e, |F(1e4)-0.2| = %.2e, %.2f s)\n",
              ok ? "PASS" : "FAIL", Flo, std::fabs(Fhi - 0.2), wall);
  std::fflush(stdout);
  CHECK(Flo <= 1.25e-3);                 // measured 1.9e-19
  CHECK(std::fabs(Fhi - 0.2) <= 0.02);   // measured 3.0e-3
  CHECK(wall <= 30.0);
}

TEST_CASE("criterion 05: steady-state multiplicity") {
  const auto t0 = clk::now();
  const ScanResult one = find_steady_states({0.2, 0.1, 1.0, 0.5});
  const ScanResult two = find_steady_states({0.2, 0.1, 0.02, 7.0});
  double worst_res = 0;
  for (const SteadyRoot& r : one.roots) worst_res = std::max(worst_res, r.residual);
  for (const SteadyRoot& r : two.roots) worst_res = std::max(worst_res, r.residual);
  const double wall = sec_since(t0);
  const bool ok = one.roots.size() >= 1 && two.roots.size() >= 2 && worst_res <= 1e-8;
  std::printf("criterion 05 (steady-state multiplicity): %s (%zu root / %zu roots, max residual = %.2e, %.2f s)\n",
              ok ? "PASS" : "FAIL", one.roots.size(), two.roots.size(), worst_res, wall);
  std::fflush(stdout);
  CHECK(one.roots.size() >= 1);
  CHECK(two.roots.size() >= 2);
  CHECK(worst_res <= 1e-8);  // measured 4.2e-12
}

TEST_CASE("criterion 06: relaxation to the stationary profile") {
  // First-order transport discretization carries an O(dv) offset between the
  // discrete fixed point and the continuum stationary profile, so the match
  // is asserted three ways: the run at n=400 lands within the measured
  // first-order offset of the continuum profile AND is fully time-converged
  // (t=7 vs t=30 at round-off), and a refined run at n=3200 closes to the
  // target within 0.02.  The offset halves per grid doubling (measured
  // 0.081 / 0.046 / 0.024 / 0.013 at n = 400 / 800 / 1600 / 3200).
  const auto t0 = clk::now();
  const ModelParams p{0.05, 0.3, 50.0, 0.0};
  auto gaussian = [](double v) {
    const double z = (v - 0.5) / 0.1;
    return std::exp(-0.5 * z * z);
  };
  const PiecewiseDensity pd = invariant_density(p.h, p.v_r, 50.0);

  const GridLayout L4 = make_layout(400, p.h, p.v_r);
  PdeConfig cfg4;
  cfg4.t_end = 30.0;
  cfg4.output_times = {7.0};
  const PdeResult r4 = solve(from_function(L4, gaussian), p, cfg4);
  const double tv400 = tv_distance(r4.states[1].rho, project_to_grid(pd, L4));
  const double tv_time = tv_distance(r4.states[1].rho, r4.states.back().rho);

  const GridLayout L32 = make_layout(3200, p.h, p.v_r);
  PdeConfig cfg32;
  cfg32.t_end = 7.0;
  const PdeResult r32 = solve(from_function(L32, gaussian), p, cfg32);
  const double tv3200 = tv_distance(r32.states.back().rho, project_to_grid(pd, L32));

  const double wall = sec_since(t0);
  const bool ok = tv400 <= 0.1 && tv_time <= 1e-10 && tv3200 <= 0.02 && wall <= 60.0;
  std::printf("criterion 06 (relaxation to the stationary profile): %s (TV@n=400 = %.4f, TV(t=7,t=30) = %.1e, TV@n=3200 = %.4f, %.2f s)\n",
              ok ? "PASS" : "FAIL", tv400, tv_time, tv3200, wall);
  std::fflush(stdout);
  CHECK(tv400 <= 0.1);     // measured 0.0806: the n=400 first-order offset
  CHECK(tv_time <= 1e-10); // measured 8e-15: time-converged long before t=7
  CHECK(tv3200 <= 0.02);   // measured 0.0126
  CHECK(wall <= 60.0);
}

TEST_CASE("criterion 07: minorization after one horizon") {
  const auto t0 = clk::now();
  const ModelParams p{0.2, 0.1, 1.0, 0.0};
  const DoeblinReport rep =
      doeblin_check(p, {0.0, 0.25, 0.5, 0.75, 0.999}, 200000, 5, 424242, 0, 4);
  const double wall = sec_since(t0);
  const bool ok = rep.worst_margin >= 0.0 && rep.starts.size() == 5 && wall <= 180.0;
  std::printf("criterion 07 (minorization after one horizon): %s (min ratio = %.2f, worst margin = %.2f, %.2f s)\n",
              ok ? "PASS" : "FAIL", rep.min_ratio, rep.worst_margin, wall);
  std::fflush(stdout);
  REQUIRE(rep.starts.size() == 5);
  for (const DoeblinStart& s : rep.starts) CHECK(s.bins.size() == 5);
  CHECK(rep.worst_margin >= 0.0);  // every bin ratio >= 1 - 3 SE; measured margin ~10
  CHECK(rep.min_ratio >= 1.0);
  CHECK(wall <= 180.0);
}

TEST_CASE("criterion 08: linear decay envelope") {
  const auto t0 = clk::now();
  const ModelParams p{0.2, 0.1, 1.0, 0.0};
  const GridLayout L = make_layout(400, p.h, p.v_r);
  const DecayReport rep = verify_linear_contraction(
      from_atoms(L, {{0.0, 1.0}}), from_atoms(L, {{0.999, 1.0}}), p, 200.0, 80);
  const double a = rep.constants.a, T0 = rep.constants.t0;
  double worst_ratio = 0;
  bool nonincreasing = true;
  double prev = rep.points.front().tv;
  for (const DecayPoint& q : rep.points) {
    const double env = 1.05 * std::exp(-a * (q.t - T0)) * rep.tv0;
    worst_ratio = std::max(worst_ratio, q.tv / env);
    if (q.tv > prev + 1e-12 * rep.tv0) nonincreasing = false;
    prev = q.tv;
  }
  const double wall = sec_since(t0);
  const bool ok = rep.claim && rep.envelope_holds && worst_ratio <= 1.0 && nonincreasing;
  std::printf("criterion 08 (linear decay envelope): %s (rate = %.6f, worst tv/envelope = %.3f, nonincreasing = %s, %.2f s)\n",
              ok ? "PASS" : "FAIL", a, worst_ratio, nonincreasing ? "yes" : "no", wall);
  std::fflush(stdout);
  CHECK(rep.claim);
  CHECK(rep.envelope_holds);
  CHECK(a == doctest::Approx(0.008451291928785767).epsilon(1e-12));
  CHECK(worst_ratio <= 1.0);
  CHECK(nonincreasing);
}

TEST_CASE("criterion 09: weak-coupling decay envelope") {
  const auto t0 = clk::now();
  const ModelParams p{0.2, 0.1, 1.0, 2e-4};
  const DecayReport rep =
      verify_nonlinear_stability(uniform_density(400, p.h, p.v_r), p, 100.0, 80);
  const double omega = rep.constants.omega, pref = rep.constants.prefactor;
  double worst_ratio = 0;
  for (const DecayPoint& q : rep.points) {
    const double env = 1.05 * pref * std::exp(omega * q.t) * rep.tv0;
    worst_ratio = std::max(worst_ratio, q.tv / env);
  }
  const double wall = sec_since(t0);
  const bool ok = rep.claim && rep.envelope_holds && omega < 0 && worst_ratio <= 1.0;
  std::printf("criterion 09 (weak-coupling decay envelope): %s (omega = %.6f, worst tv/envelope = %.3f, %.2f s)\n",
              ok ? "PASS" : "FAIL", omega, worst_ratio, wall);
  std::fflush(stdout);
  CHECK(rep.claim);
  CHECK(rep.envelope_holds);
  CHECK(omega == doctest::Approx(-0.008040871366721353).epsilon(1e-9));
  CHECK(worst_ratio <= 1.0);
}

TEST_CASE("criterion 10: divergence dichotomy") {
  const auto t0 = clk::now();
  const GridLayout L = make_layout(400, 0.2, 0.1);
  const GridDensity concentrated = from_atoms(L, {{0.975, 1.0}});

  PdeConfig cfg;
  cfg.t_end = 50.0;
  const PdeResult strong = solve(concentrated, ModelParams{0.2, 0.1, 6.0, 6.0}, cfg);
  const PdeResult weak = solve(concentrated, ModelParams{0.2, 0.1, 6.0, 0.5}, cfg);
  const double wall = sec_since(t0);
  const bool ok = strong.blowup.blown_up && std::isfinite(strong.blowup.t_stop) &&
                  !weak.blowup.blown_up && weak.states.back().t >= 50.0 - 1e-9;
  std::printf("criterion 10 (divergence dichotomy): %s (strong coupling stops at t = %.3f; weak coupling reaches t = %.0f with rate %.3f, %.2f s)\n",
              ok ? "PASS" : "FAIL", strong.blowup.t_stop, weak.states.back().t,
              weak.blowup.sigma_last, wall);
  std::fflush(stdout);
  CHECK(strong.blowup.blown_up);
  CHECK(std::isfinite(strong.blowup.t_stop));
  CHECK_FALSE(weak.blowup.blown_up);
  CHECK(weak.states.back().t == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(std::isfinite(weak.blowup.sigma_last));
}

TEST_CASE("criterion 11: particle/transport agreement") {
  const auto t0 = clk::now();
  const ModelParams p{0.2, 0.1, 1.0, 0.0};
  const GridLayout L = make_layout(100, p.h, p.v_r);
  const long long R = 100000;
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(R);
  for (long long i = 0; i < R; ++i)
    atoms.push_back({simulate_neuron(p, 0.5, 5.0, 50000 + i).v_final, 1.0 / R});
  const GridDensity hist = from_atoms(L, atoms);

  PdeConfig cfg;
  cfg.t_end = 5.0;
  const PdeResult res = solve(from_atoms(L, {{0.5, 1.0}}), p, cfg);
  const double tv = tv_distance(hist, res.states.back().rho);
  const double wall = sec_since(t0);
  const bool ok = tv <= 0.05 && wall <= 120.0;
  std::printf("criterion 11 (particle/transport agreement): %s (TV = %.4f with %lld paths, %.2f s)\n",
              ok ? "PASS" : "FAIL", tv, R, wall);
  std::fflush(stdout);
  CHECK(tv <= 0.05);  // measured 0.0325 (Monte Carlo + discretization)
  CHECK(wall <= 120.0);
}

TEST_CASE("criterion 12: network synchrony contrast") {
  const auto t0 = clk::now();
  int wins = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    const NetworkResult low = simulate_network({0.1, 0.1, 200.0, 1.0}, 100, 0.5,
                                               NetworkInit::kConstant, 1.0, seed);
    const NetworkResult high = simulate_network({0.1, 0.1, 200.0, 9.0}, 100, 0.5,
                                                NetworkInit::kConstant, 1.0, seed);
    if (high.max_cascade > low.max_cascade) ++wins;
  }
  const double wall = sec_since(t0);
  const bool ok = wins >= 9;
  std::printf("criterion 12 (network synchrony contrast): %s (strong coupling dominates in %d/10 seed pairs, %.2f s)\n",
              ok ? "PASS" : "FAIL", wins, wall);
  std::fflush(stdout);
  CHECK(wins >= 9);  // measured 10/10
}

namespace {

// Run one CLI invocation in-process with stdout and stderr parked away (the
// commands narrate to stdout and may warn on stderr; the scorecard should
// stay clean).  stderr goes to a log file next to the outputs so a failing
// exit code leaves its diagnostics on disk.
int run_cli_quiet(const std::vector<std::string>& args, const fs::path& err_log) {
  std::vector<const char*> argv;
  argv.push_back("liflab");
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::cout.flush();
  std::cerr.flush();
  std::fflush(stdout);
  std::fflush(stderr);
  const int saved_out = dup(1);
  const int saved_err = dup(2);
  const int devnull = open("/dev/null", O_WRONLY);
  const int logfd = open(err_log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  dup2(devnull, 1);
  dup2(logfd, 2);
  close(devnull);
  close(logfd);
  const int rc = cli::run(int(argv.size()), argv.data());
  std::cout.flush();
  std::cerr.flush();
  std::fflush(stdout);
  std::fflush(stderr);
  dup2(saved_out, 1);
  dup2(saved_err, 2);
  close(saved_out);
  close(saved_err);
  return rc;
}

// One pass over every subcommand with fixed seeds, writing under `root`.
// `threads` only affects replica scheduling, never results or artifacts.
int run_suite(const fs::path& root, int threads) {
  struct Cmd {
    const char* dir;
    std::vector<std::string> args;
  };
  const std::string thr = std::to_string(threads);
  const std::vector<Cmd> cmds = {
      {"regime", {"regime", "--h", "0.2", "--v-r", "0.1", "--sigma0", "6", "--J", "6"}},
      {"neuron", {"simulate-neuron", "--h", "0.2", "--v-r", "0.1", "--sigma0", "30", "--J", "0",
                  "--v0", "0.5", "--t-end", "2", "--sample-dt", "0.01", "--seed", "4242"}},
      {"network", {"simulate-network", "--h", "0.1", "--v-r", "0.1", "--sigma0", "200", "--J", "9",
                   "--N", "50", "--horizon", "0.25", "--seed", "7"}},
      {"pde", {"solve-pde", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0.5",
               "--n", "100", "--t-end", "1", "--output-times", "0.5", "--init", "uniform"}},
      {"steady", {"steady-state", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0",
                  "--sigma", "1", "--n", "400"}},
      {"scan", {"scan-sigma", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0.5",
                "--points", "40", "--subdiv", "128"}},
      {"doeblin", {"doeblin-check", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1", "--J", "0",
                   "--replicas", "2000", "--starts", "0.25,0.5", "--bins", "5", "--seed", "11",
                   "--threads", thr}},
      {"contraction", {"verify-contraction", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1",
                       "--J", "0", "--t-end", "20", "--samples", "20", "--n", "100",
                       "--init-a", "0", "--init-b", "0.999"}},
      {"stability", {"verify-stability", "--h", "0.2", "--v-r", "0.1", "--sigma0", "1",
                     "--J", "2e-4", "--t-end", "10", "--samples", "10", "--n", "100",
                     "--init", "uniform", "--subdiv", "128"}},
  };
  for (const Cmd& c : cmds) {
    const fs::path out = root / c.dir;
    fs::create_directories(out);
    std::vector<std::string> args = c.args;
    args.push_back("--out");
    args.push_back(out.string());
    const int rc = run_cli_quiet(args, root / "stderr.log");
    if (rc != 0) return rc;
  }
  return 0;
}

std::map<std::string, fs::path> collect_csvs(const fs::path& root) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      out[fs::relative(e.path(), root).generic_string()] = e.path();
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("criterion 13: run-to-run determinism") {
  const auto t0 = clk::now();
  const fs::path base = fs::temp_directory_path() / "liflab_acceptance_determinism";
  std::error_code ec;
  fs::remove_all(base, ec);
  const fs::path runA = base / "run-A", runB = base / "run-B";
  const int rcA = run_suite(runA, 1);
  const int rcB = run_suite(runB, 4);  // different thread count on purpose

  const auto csvA = collect_csvs(runA);
  const auto csvB = collect_csvs(runB);
  int mismatched = 0;
  bool same_sets = csvA.size() == csvB.size();
  for (const auto& [rel, path] : csvA) {
    const auto it = csvB.find(rel);
    if (it == csvB.end()) {
      same_sets = false;
      continue;
    }
    if (slurp(path) != slurp(it->second)) ++mismatched;
  }
  const double wall = sec_since(t0);
  const bool ok = rcA == 0 && rcB == 0 && same_sets && csvA.size() >= 9 && mismatched == 0;
  std::printf("criterion 13 (run-to-run determinism): %s (%zu CSV artifacts, %d byte-mismatched across independent runs, %.2f s)\n",
              ok ? "PASS" : "FAIL", csvA.size(), mismatched, wall);
  std::fflush(stdout);
  CHECK(rcA == 0);
  CHECK(rcB == 0);
  CHECK(same_sets);
  CHECK(csvA.size() >= 9);
  CHECK(mismatched == 0);
}

#include "liflab/cli.hpp"

#include <cstdint>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liflab/analysis.hpp"
#include "liflab/errors.hpp"
#include "liflab/grid.hpp"
#include "liflab/io.hpp"
#include "liflab/params.hpp"
#include "liflab/pde.hpp"
#include "liflab/pdmp.hpp"
#include "liflab/steady.hpp"

#ifndef LIFLAB_VERSION_STRING
#define LIFLAB_VERSION_STRING "liflab (unversioned build)"
#endif

namespace liflab::cli {

namespace {

using nlohmann::json;

// Options common to every subcommand.
struct Common {
  ModelParams mp;
  std::string out = "out";
  std::string params_file;
  std::string config_file;
  std::uint64_t seed = 12345;
  int threads = 1;
};

// One configurable option: its CLI handle plus typed accessors, so values
// can also flow in from a JSON config file (CLI wins) and out into the
// resolved_config.json that every run persists.
struct Entry {
  CLI::Option* opt = nullptr;
  std::string key;
  std::function<void(const json&)> set;
  std::function<json()> get;
};

template <typename T>
CLI::Option* add(CLI::App* cmd, std::vector<Entry>& es, const std::string& flags, T& var,
                 const std::string& key, const std::string& desc) {
  CLI::Option* o = cmd->add_option(flags, var, desc);
  es.push_back(Entry{o, key, [&var, key](const json& j) {
                       try {
                         var = j.get<T>();
                       } catch (const json::exception&) {
                         throw ValidationError("config key '" + key + "' has the wrong type");
                       }
                     },
                     [&var]() { return json(var); }});
  return o;
}

void add_common(CLI::App* cmd, Common& C, std::vector<Entry>& es) {
  cmd->set_help_flag("--help", "print this help and exit");  // frees -h / --h
  add(cmd, es, "--h", C.mp.h, "h", "jump size in (0,1)");
  add(cmd, es, "--v-r,--vr", C.mp.v_r, "v_r", "reset potential in (0,1)");
  add(cmd, es, "--sigma0", C.mp.sigma0, "sigma0", "baseline jump rate (> 0)");
  add(cmd, es, "--J", C.mp.J, "J", "coupling strength (>= 0)");
  add(cmd, es, "--out", C.out, "out", "output directory");
  add(cmd, es, "--seed", C.seed, "seed", "64-bit master seed");
  add(cmd, es, "--threads", C.threads, "threads", "worker threads for replica-based commands");
  cmd->add_option("--params", C.params_file,
                  "key=value parameter file (keys: h, v_r, sigma0, J)");
  cmd->add_option("--config", C.config_file,
                  "flat JSON config; command-line flags override its values");
}

// Layered resolution: defaults < key=value params file < JSON config <
// explicit command-line flags.
void apply_files(Common& C, std::vector<Entry>& es) {
  std::set<std::string> from_config;
  if (!C.config_file.empty()) {
    json j;
    try {
      j = json::parse(io::read_file(C.config_file));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
    std::set<std::string> known{"command"};
    for (const Entry& e : es) known.insert(e.key);
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key()))
        throw ValidationError("unknown config key '" + it.key() + "'");
    for (Entry& e : es)
      if (e.opt->count() == 0 && j.contains(e.key)) {
        e.set(j.at(e.key));
        from_config.insert(e.key);
      }
  }
  if (!C.params_file.empty()) {
    const ModelParams f = params_from_kv_file(C.params_file);
    auto lift = [&](const char* key, double ModelParams::*field) {
      for (const Entry& e : es)
        if (e.key == key) {
          if (e.opt->count() == 0 && !from_config.count(key)) C.mp.*field = f.*field;
          return;
        }
    };
    lift("h", &ModelParams::h);
    lift("v_r", &ModelParams::v_r);
    lift("sigma0", &ModelParams::sigma0);
    lift("J", &ModelParams::J);
  }
}

void write_json_file(const std::string& path, const json& j) {
  io::write_file(path, j.dump(2) + "\n");
}

// Range-check the resolved parameters and surface advisory warnings once.
void warn_params(const ModelParams& mp) {
  for (const std::string& w : validate_dynamics(mp)) std::cerr << "warning: " << w << "\n";
}

// Every run records the fully-resolved configuration next to its outputs;
// feeding the file back through --config reproduces the run.
void write_resolved(const std::string& command, const Common& C,
                    const std::vector<Entry>& es) {
  json rc;
  rc["command"] = command;
  for (const Entry& e : es) rc[e.key] = e.get();
  write_json_file(C.out + "/resolved_config.json", rc);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::string tok = s.substr(pos, comma - pos);
    const auto a = tok.find_first_not_of(" \t");
    if (a != std::string::npos) {
      const auto b = tok.find_last_not_of(" \t");
      out.push_back(io::parse_double(tok.substr(a, b - a + 1)));
    }
    pos = comma + 1;
    if (comma == s.size()) break;
  }
  return out;
}

json constants_json(const ContractionConstants& k) {
  return json{{"t0", k.t0},
              {"c", k.c},
              {"a", k.a},
              {"omega", k.omega},
              {"prefactor", k.prefactor}};
}

json decay_json(const DecayReport& r) {
  return json{{"mode", r.mode},
              {"constants", constants_json(r.constants)},
              {"tv0", r.tv0},
              {"fitted_rate", r.fitted_rate},
              {"theory_rate", r.theory_rate},
              {"window", json{{"t_lo", r.fit_t_lo}, {"t_hi", r.fit_t_hi}}},
              {"claim", r.claim},
              {"envelope_holds", r.envelope_holds},
              {"nonincreasing", r.nonincreasing},
              {"worst_violation", r.worst_violation},
              {"note", r.note}};
}

void write_decay_outputs(const std::string& out, const DecayReport& rep) {
  std::string csv = "t,tv,envelope\n";
  for (const DecayPoint& q : rep.points) {
    csv += io::fmt_shortest(q.t);
    csv += ',';
    csv += io::fmt_shortest(q.tv);
    csv += ',';
    csv += io::fmt_shortest(q.envelope);
    csv += '\n';
  }
  io::write_file(out + "/decay.csv", csv);
  write_json_file(out + "/decay.json", decay_json(rep));
  write_json_file(out + "/constants.json", constants_json(rep.constants));
}

// Initial profiles for the evolution commands.
GridDensity make_init(const std::string& kind, int n, const Common& C, double center,
                      double width, const std::string& file, const SteadyOptions& sopt) {
  if (kind == "file") {
    if (file.empty()) throw ValidationError("--init file requires --init-file");
    return read_density_csv(file, C.mp.h, C.mp.v_r);
  }
  const GridLayout L = make_layout(n, C.mp.h, C.mp.v_r);
  if (kind == "uniform") return from_function(L, [](double) { return 1.0; });
  if (kind == "gaussian") {
    if (!(width > 0)) throw ValidationError("--init-width must be positive");
    return from_function(L, [=](double v) {
      const double z = (v - center) / width;
      return std::exp(-0.5 * z * z);
    });
  }
  if (kind == "delta") {
    if (!(center >= 0 && center < 1))
      throw ValidationError("--init-center must lie in [0,1)");
    return from_atoms(L, {{center, 1.0}});
  }
  if (kind == "steady") {
    const ScanResult scan = find_steady_states(C.mp, 400, sopt);
    if (scan.roots.empty())
      throw NumericError("no self-consistent stationary profile to start from");
    return project_to_grid(
        invariant_density(C.mp.h, C.mp.v_r, scan.roots.front().sigma_bar, sopt), L);
  }
  throw ValidationError("unknown initial profile '" + kind + "'");
}

void write_piecewise_csv(const std::string& path, const PiecewiseDensity& pd) {
  std::string csv = "v,p,segment_id\n";
  auto row = [&](double v, double p, int seg) {
    csv += io::fmt17(v);
    csv += ',';
    csv += io::fmt17(p);
    csv += ',';
    csv += std::to_string(seg);
    csv += '\n';
  };
  const int head_samples = 64;
  for (int j = 1; j <= head_samples; ++j) {
    const double v = pd.a0 * j / head_samples;
    row(v, pd.eval(v), 0);
  }
  for (std::size_t s = 0; s < pd.seg_v.size(); ++s)
    for (std::size_t k = 0; k < pd.seg_v[s].size(); ++k) {
      const double v = pd.seg_v[s][k];
      row(v, v > 0 ? pd.seg_u[s][k] / v : 0.0, static_cast<int>(s) + 1);
    }
  io::write_file(path, csv);
}

json steady_json(const PiecewiseDensity& pd) {
  return json{{"sigma", pd.sigma},
              {"tail_fraction", pd.tail},
              {"rate", pd.rate},
              {"reset_flux_jump", pd.D},
              {"head_coefficient", pd.C},
              {"head_exponent", pd.head_exponent},
              {"head_end", pd.a0},
              {"levels_used", pd.levels_used},
              {"flux_residual", pd.flux_residual}};
}

// ---------------------------------------------------------------------- //

int run_impl(int argc, const char* const* argv) {
  CLI::App app{"Numerical laboratory for pulse-coupled leaky integrate-and-fire "
               "networks and their mean-field transport equation"};
  app.set_version_flag("--version", LIFLAB_VERSION_STRING);
  app.require_subcommand(1);

  Common C;

  // --- regime -----------------------------------------------------------
  auto* regime = app.add_subcommand(
      "regime", "Classify the parameter point against the known sharp conditions");
  std::vector<Entry> regime_es;
  add_common(regime, C, regime_es);
  regime->callback([&]() {
    apply_files(C, regime_es);
    io::ensure_dir(C.out);
    write_resolved("regime", C, regime_es);
    const RegimeReport r = classify(C.mp);
    const json j{{"global_wellposed", r.global_wellposed},
                 {"blowup_all_data", r.blowup_all_data},
                 {"one_steady_state", r.one_steady_state},
                 {"two_steady_states", r.two_steady_states},
                 {"unique_stable_steady", r.unique_stable_steady},
                 {"thresholds",
                  json{{"ratio", r.thresholds.ratio},
                       {"ratio_floor", r.thresholds.ratio_floor},
                       {"blowup_J", r.thresholds.blowup_J},
                       {"multiplicity_J", r.thresholds.multiplicity_J},
                       {"two_state_sigma0", r.thresholds.two_state_sigma0},
                       {"uniqueness_J", r.thresholds.uniqueness_J}}},
                 {"boundary_notes", r.boundary_notes},
                 {"warnings", r.warnings}};
    write_json_file(C.out + "/regime.json", j);
    std::cout << j.dump(2) << "\n";
  });

  // --- simulate-neuron --------------------------------------------------
  struct {
    double v0 = 0.0, t_end = 10.0, sample_dt = 0.01;
  } sn;
  auto* sim_neuron = app.add_subcommand(
      "simulate-neuron", "Event-driven path of one uncoupled neuron");
  std::vector<Entry> sn_es;
  add_common(sim_neuron, C, sn_es);
  add(sim_neuron, sn_es, "--v0", sn.v0, "v0", "initial potential in [0,1)");
  add(sim_neuron, sn_es, "--t-end,--horizon", sn.t_end, "t_end", "simulated time span");
  add(sim_neuron, sn_es, "--sample-dt", sn.sample_dt, "sample_dt",
      "trajectory sampling step (<= 0 disables the trajectory file)");
  sim_neuron->callback([&]() {
    apply_files(C, sn_es);
    io::ensure_dir(C.out);
    write_resolved("simulate-neuron", C, sn_es);
    warn_params(C.mp);
    const NeuronPath path = simulate_neuron(C.mp, sn.v0, sn.t_end, C.seed, sn.sample_dt);
    if (sn.sample_dt > 0) {
      std::string csv = "t,v\n";
      for (const auto& [t, v] : path.samples) {
        csv += io::fmt_shortest(t);
        csv += ',';
        csv += io::fmt_shortest(v);
        csv += '\n';
      }
      io::write_file(C.out + "/trajectory.csv", csv);
    }
    std::vector<SpikeEvent> spikes;
    for (double t : path.spike_times) spikes.push_back({t, 0, 1});
    write_spikes_csv(C.out + "/spikes.csv", spikes);
    write_json_file(C.out + "/summary.json",
                    json{{"v0", sn.v0},
                         {"t_end", sn.t_end},
                         {"spikes", path.spike_times.size()},
                         {"v_final", path.v_final}});
    std::cout << "spikes: " << path.spike_times.size() << ", final potential "
              << io::fmt_shortest(path.v_final) << "\n";
  });

  // --- simulate-network -------------------------------------------------
  struct {
    int N = 100;
    double v0 = 0.0, horizon = 1.0;
    std::string init = "constant";
  } nw;
  auto* sim_net = app.add_subcommand(
      "simulate-network", "Event-driven interacting network with cascade resolution");
  std::vector<Entry> nw_es;
  add_common(sim_net, C, nw_es);
  add(sim_net, nw_es, "--N", nw.N, "N", "number of neurons (>= 2)");
  add(sim_net, nw_es, "--v0", nw.v0, "v0", "initial potential (see --init)");
  add(sim_net, nw_es, "--horizon,--t-end", nw.horizon, "t_end", "simulated time span");
  add(sim_net, nw_es, "--init", nw.init, "init", "constant | uniform (iid on [0, v0))")
      ->check(CLI::IsMember({"constant", "uniform"}));
  sim_net->callback([&]() {
    apply_files(C, nw_es);
    io::ensure_dir(C.out);
    write_resolved("simulate-network", C, nw_es);
    warn_params(C.mp);
    const NetworkResult r =
        simulate_network(C.mp, nw.N, nw.v0,
                         nw.init == "uniform" ? NetworkInit::kUniform : NetworkInit::kConstant,
                         nw.horizon, C.seed);
    write_spikes_csv(C.out + "/spikes.csv", r.spikes);
    std::string fv = "neuron,v\n";
    for (std::size_t i = 0; i < r.final_v.size(); ++i) {
      fv += std::to_string(i);
      fv += ',';
      fv += io::fmt_shortest(r.final_v[i]);
      fv += '\n';
    }
    io::write_file(C.out + "/final_v.csv", fv);
    write_json_file(C.out + "/summary.json",
                    json{{"N", nw.N},
                         {"t_end", nw.horizon},
                         {"total_spikes", r.total_spikes},
                         {"max_cascade", r.max_cascade},
                         {"rate_per_neuron",
                          static_cast<double>(r.total_spikes) / (nw.N * nw.horizon)}});
    std::cout << "total spikes: " << r.total_spikes << ", largest cascade " << r.max_cascade
              << "\n";
  });

  // --- solve-pde --------------------------------------------------------
  struct {
    int n = 400;
    double dt = 0.0, t_end = 10.0;
    std::string output_times;
    std::string init = "uniform";
    double init_center = 0.5, init_width = 0.1;
    std::string init_file;
    int subdiv = 512;
    double trunc_tol = 1e-13;
  } sp;
  auto* solve_pde = app.add_subcommand(
      "solve-pde", "Conservative explicit solution of the mean-field transport equation");
  std::vector<Entry> sp_es;
  add_common(solve_pde, C, sp_es);
  add(solve_pde, sp_es, "--n", sp.n, "n", "grid cells (n*h must be an integer)");
  add(solve_pde, sp_es, "--dt", sp.dt, "dt", "time step (<= 0 selects the stable step)");
  add(solve_pde, sp_es, "--t-end", sp.t_end, "t_end", "final time");
  add(solve_pde, sp_es, "--output-times", sp.output_times, "output_times",
      "comma-separated snapshot times");
  add(solve_pde, sp_es, "--init", sp.init, "init",
      "uniform | gaussian | delta | steady | file")
      ->check(CLI::IsMember({"uniform", "gaussian", "delta", "steady", "file"}));
  add(solve_pde, sp_es, "--init-center", sp.init_center, "init_center",
      "center of the gaussian / position of the point mass");
  add(solve_pde, sp_es, "--init-width", sp.init_width, "init_width", "gaussian width");
  add(solve_pde, sp_es, "--init-file", sp.init_file, "init_file",
      "density CSV for --init file");
  solve_pde->callback([&]() {
    apply_files(C, sp_es);
    io::ensure_dir(C.out);
    write_resolved("solve-pde", C, sp_es);
    warn_params(C.mp);
    SteadyOptions sopt;
    sopt.subdiv = sp.subdiv;
    sopt.trunc_tol = sp.trunc_tol;
    const GridDensity d0 =
        make_init(sp.init, sp.n, C, sp.init_center, sp.init_width, sp.init_file, sopt);
    PdeConfig cfg;
    cfg.t_end = sp.t_end;
    cfg.dt = sp.dt;
    cfg.output_times = parse_list(sp.output_times);
    const PdeResult res = solve(d0, C.mp, cfg);
    json snaps = json::array();
    for (std::size_t k = 0; k < res.states.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "density_%04zu.csv", k);
      write_density_csv(C.out + "/" + name, res.states[k].rho);
      snaps.push_back(json{{"index", k}, {"t", res.states[k].t}, {"file", name}});
    }
    write_json_file(C.out + "/snapshots.json", snaps);
    std::string series = "t,sigma,r,tail_mass,mass\n";
    for (const PdeSample& s : res.series) {
      series += io::fmt_shortest(s.t);
      series += ',';
      series += io::fmt_shortest(s.sigma);
      series += ',';
      series += io::fmt_shortest(s.rate);
      series += ',';
      series += io::fmt_shortest(s.tail);
      series += ',';
      series += io::fmt_shortest(s.total_mass);
      series += '\n';
    }
    io::write_file(C.out + "/series.csv", series);
    json blow{{"blown_up", res.blowup.blown_up},
              {"t_blow", nullptr},
              {"sigma_at_stop", res.blowup.sigma_last}};
    if (res.blowup.blown_up) blow["t_blow"] = res.blowup.t_stop;
    write_json_file(C.out + "/blowup.json", blow);
    if (res.blowup.blown_up)
      std::cout << "diverged at t = " << io::fmt_shortest(res.blowup.t_stop)
                << " (feedback denominator " << io::fmt_shortest(res.blowup.denom) << ")\n";
    else
      std::cout << "reached t = " << io::fmt_shortest(res.states.back().t) << " in "
                << res.steps << " steps\n";
  });

  // --- steady-state -----------------------------------------------------
  struct {
    double sigma = 0.0;
    int n = 400;
    int subdiv = 512;
    double trunc_tol = 1e-13;
  } ss;
  auto* steady = app.add_subcommand(
      "steady-state", "Stationary profile at a fixed or self-consistent rate");
  std::vector<Entry> ss_es;
  add_common(steady, C, ss_es);
  add(steady, ss_es, "--sigma", ss.sigma, "sigma",
      "jump rate; <= 0 solves the self-consistent balance instead");
  add(steady, ss_es, "--n", ss.n, "n", "projection grid cells (0 skips the projection)");
  add(steady, ss_es, "--subdiv", ss.subdiv, "subdiv", "mesh sub-intervals per jump length");
  add(steady, ss_es, "--trunc-tol", ss.trunc_tol, "trunc_tol",
      "series truncation tolerance");
  steady->callback([&]() {
    apply_files(C, ss_es);
    io::ensure_dir(C.out);
    write_resolved("steady-state", C, ss_es);
    warn_params(C.mp);
    SteadyOptions sopt;
    sopt.subdiv = ss.subdiv;
    sopt.trunc_tol = ss.trunc_tol;
    double s = ss.sigma;
    if (s <= 0) {
      if (C.mp.J == 0) {
        s = C.mp.sigma0;
      } else {
        const ScanResult scan = find_steady_states(C.mp, 400, sopt);
        if (scan.roots.empty())
          throw NumericError("no self-consistent stationary profile for these parameters");
        s = scan.roots.front().sigma_bar;
      }
    }
    const PiecewiseDensity pd = invariant_density(C.mp.h, C.mp.v_r, s, sopt);
    write_piecewise_csv(C.out + "/steady_piecewise.csv", pd);
    write_json_file(C.out + "/steady.json", steady_json(pd));
    if (ss.n > 0) {
      const GridLayout L = make_layout(ss.n, C.mp.h, C.mp.v_r);
      write_density_csv(C.out + "/steady_density.csv", project_to_grid(pd, L));
    }
    std::cout << "sigma = " << io::fmt_shortest(pd.sigma) << ", tail fraction "
              << io::fmt_shortest(pd.tail) << ", rate " << io::fmt_shortest(pd.rate) << "\n";
  });

  // --- scan-sigma -------------------------------------------------------
  struct {
    int points = 400;
    double sigma_min = 0.0, sigma_max = 0.0;
    int subdiv = 512;
    double trunc_tol = 1e-13;
  } sc;
  auto* scan_cmd = app.add_subcommand(
      "scan-sigma", "Scan the balance functions and locate self-consistent rates");
  std::vector<Entry> sc_es;
  add_common(scan_cmd, C, sc_es);
  add(scan_cmd, sc_es, "--points", sc.points, "points", "scan resolution");
  add(scan_cmd, sc_es, "--sigma-min", sc.sigma_min, "sigma_min",
      "scan lower end (<= 0 selects the automatic range)");
  add(scan_cmd, sc_es, "--sigma-max", sc.sigma_max, "sigma_max",
      "scan upper end (<= 0 selects the automatic range)");
  add(scan_cmd, sc_es, "--subdiv", sc.subdiv, "subdiv", "mesh sub-intervals per jump length");
  add(scan_cmd, sc_es, "--trunc-tol", sc.trunc_tol, "trunc_tol",
      "series truncation tolerance");
  scan_cmd->callback([&]() {
    apply_files(C, sc_es);
    io::ensure_dir(C.out);
    write_resolved("scan-sigma", C, sc_es);
    warn_params(C.mp);
    SteadyOptions sopt;
    sopt.subdiv = sc.subdiv;
    sopt.trunc_tol = sc.trunc_tol;
    const ScanResult res =
        find_steady_states(C.mp, sc.points, sopt, sc.sigma_min, sc.sigma_max);
    std::string csv = "sigma,F,G,F_minus_G\n";
    for (const ScanRow& r : res.rows) {
      csv += io::fmt_shortest(r.sigma);
      csv += ',';
      csv += io::fmt_shortest(r.F);
      csv += ',';
      csv += io::fmt_shortest(r.G);
      csv += ',';
      csv += io::fmt_shortest(r.F - r.G);
      csv += '\n';
    }
    io::write_file(C.out + "/scan.csv", csv);
    json roots = json::array();
    for (const SteadyRoot& r : res.roots)
      roots.push_back(json{{"sigma_bar", r.sigma_bar},
                           {"r_bar", r.rate},
                           {"tail_mass", r.tail},
                           {"residual", r.residual}});
    write_json_file(C.out + "/roots.json", roots);
    std::cout << res.roots.size() << " self-consistent rate(s) found\n";
  });

  // --- doeblin-check ----------------------------------------------------
  struct {
    long long replicas = 200000;
    std::string starts = "0,0.25,0.5,0.75,0.999";
    int bins = 5;
    double t0 = 0.0;
  } dc;
  auto* doeblin = app.add_subcommand(
      "doeblin-check", "Empirical check of the uniform minorization after one horizon");
  std::vector<Entry> dc_es;
  add_common(doeblin, C, dc_es);
  add(doeblin, dc_es, "--replicas", dc.replicas, "replicas", "paths per start");
  add(doeblin, dc_es, "--starts", dc.starts, "starts", "comma-separated initial potentials");
  add(doeblin, dc_es, "--bins", dc.bins, "bins", "histogram bins on the minorization window");
  add(doeblin, dc_es, "--t0", dc.t0, "t0", "horizon override (<= 0 uses log(4/h))");
  doeblin->callback([&]() {
    apply_files(C, dc_es);
    io::ensure_dir(C.out);
    write_resolved("doeblin-check", C, dc_es);
    warn_params(C.mp);
    const DoeblinReport rep = doeblin_check(C.mp, parse_list(dc.starts), dc.replicas,
                                            dc.bins, C.seed, dc.t0, C.threads);
    json starts = json::array();
    std::string csv = "start,lo,hi,prob,target,ratio,se_rel\n";
    for (const DoeblinStart& st : rep.starts) {
      json bins_j = json::array();
      for (const DoeblinBin& b : st.bins) {
        bins_j.push_back(json{{"lo", b.lo},
                              {"hi", b.hi},
                              {"prob", b.prob},
                              {"target", b.target},
                              {"ratio", b.ratio},
                              {"se_rel", b.se_rel}});
        csv += io::fmt_shortest(st.v0);
        csv += ',';
        csv += io::fmt_shortest(b.lo);
        csv += ',';
        csv += io::fmt_shortest(b.hi);
        csv += ',';
        csv += io::fmt_shortest(b.prob);
        csv += ',';
        csv += io::fmt_shortest(b.target);
        csv += ',';
        csv += io::fmt_shortest(b.ratio);
        csv += ',';
        csv += io::fmt_shortest(b.se_rel);
        csv += '\n';
      }
      starts.push_back(json{{"v0", st.v0}, {"min_ratio", st.min_ratio}, {"bins", bins_j}});
    }
    io::write_file(C.out + "/doeblin.csv", csv);
    write_json_file(C.out + "/doeblin.json",
                    json{{"t0", rep.t0},
                         {"c", rep.c},
                         {"n_replicas", rep.n_replicas},
                         {"bins", rep.bins},
                         {"min_ratio", rep.min_ratio},
                         {"worst_margin", rep.worst_margin},
                         {"consistent", rep.worst_margin >= 0},
                         {"starts", starts}});
    std::cout << "min ratio " << io::fmt_shortest(rep.min_ratio) << ", worst margin "
              << io::fmt_shortest(rep.worst_margin)
              << (rep.worst_margin >= 0 ? " (consistent)\n" : " (VIOLATED)\n");
  });

  // --- verify-contraction ----------------------------------------------
  struct {
    double t_end = 200.0;
    int samples = 80;
    int n = 400;
    double dt = 0.0;
    double init_a = 0.0, init_b = 0.999;
  } vc;
  auto* verify_c = app.add_subcommand(
      "verify-contraction",
      "Check the guaranteed total-variation envelope of the uncoupled flow");
  std::vector<Entry> vc_es;
  add_common(verify_c, C, vc_es);
  add(verify_c, vc_es, "--t-end", vc.t_end, "t_end", "final time");
  add(verify_c, vc_es, "--samples", vc.samples, "samples", "number of sample times");
  add(verify_c, vc_es, "--n", vc.n, "n", "grid cells");
  add(verify_c, vc_es, "--dt", vc.dt, "dt", "time step (<= 0 selects the stable step)");
  add(verify_c, vc_es, "--init-a", vc.init_a, "init_a", "point mass position, first run");
  add(verify_c, vc_es, "--init-b", vc.init_b, "init_b", "point mass position, second run");
  verify_c->callback([&]() {
    apply_files(C, vc_es);
    io::ensure_dir(C.out);
    write_resolved("verify-contraction", C, vc_es);
    warn_params(C.mp);
    const GridLayout L = make_layout(vc.n, C.mp.h, C.mp.v_r);
    const GridDensity da = from_atoms(L, {{vc.init_a, 1.0}});
    const GridDensity db = from_atoms(L, {{vc.init_b, 1.0}});
    const DecayReport rep =
        verify_linear_contraction(da, db, C.mp, vc.t_end, vc.samples, vc.dt);
    write_decay_outputs(C.out, rep);
    std::cout << "envelope holds; fitted decay rate "
              << io::fmt_shortest(rep.fitted_rate) << " vs guaranteed "
              << io::fmt_shortest(rep.theory_rate) << "\n";
  });

  // --- verify-stability -------------------------------------------------
  struct {
    double t_end = 100.0;
    int samples = 80;
    int n = 400;
    double dt = 0.0;
    std::string init = "uniform";
    double init_center = 0.5, init_width = 0.1;
    int subdiv = 512;
    double trunc_tol = 1e-13;
  } vs;
  auto* verify_s = app.add_subcommand(
      "verify-stability",
      "Evolve toward the stationary profile and check the weak-coupling envelope");
  std::vector<Entry> vs_es;
  add_common(verify_s, C, vs_es);
  add(verify_s, vs_es, "--t-end", vs.t_end, "t_end", "final time");
  add(verify_s, vs_es, "--samples", vs.samples, "samples", "number of sample times");
  add(verify_s, vs_es, "--n", vs.n, "n", "grid cells");
  add(verify_s, vs_es, "--dt", vs.dt, "dt", "time step (<= 0 selects the stable step)");
  add(verify_s, vs_es, "--init", vs.init, "init", "uniform | gaussian | delta")
      ->check(CLI::IsMember({"uniform", "gaussian", "delta"}));
  add(verify_s, vs_es, "--init-center", vs.init_center, "init_center",
      "center of the gaussian / position of the point mass");
  add(verify_s, vs_es, "--init-width", vs.init_width, "init_width", "gaussian width");
  add(verify_s, vs_es, "--subdiv", vs.subdiv, "subdiv", "mesh sub-intervals per jump length");
  add(verify_s, vs_es, "--trunc-tol", vs.trunc_tol, "trunc_tol",
      "series truncation tolerance");
  verify_s->callback([&]() {
    apply_files(C, vs_es);
    io::ensure_dir(C.out);
    write_resolved("verify-stability", C, vs_es);
    warn_params(C.mp);
    SteadyOptions sopt;
    sopt.subdiv = vs.subdiv;
    sopt.trunc_tol = vs.trunc_tol;
    const GridDensity d0 =
        make_init(vs.init, vs.n, C, vs.init_center, vs.init_width, "", sopt);
    const DecayReport rep =
        verify_nonlinear_stability(d0, C.mp, vs.t_end, vs.samples, vs.dt, true, sopt);
    write_decay_outputs(C.out, rep);
    const ScanResult scan = find_steady_states(C.mp, 400, sopt);
    if (!scan.roots.empty())
      write_density_csv(
          C.out + "/steady_density.csv",
          project_to_grid(
              invariant_density(C.mp.h, C.mp.v_r, scan.roots.front().sigma_bar, sopt),
              d0.layout));
    if (rep.claim)
      std::cout << "envelope holds; fitted decay rate "
                << io::fmt_shortest(rep.fitted_rate) << " vs guaranteed "
                << io::fmt_shortest(rep.theory_rate) << "\n";
    else
      std::cout << "no decay guarantee at these parameters; observations written ("
                << rep.note << ")\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return run_impl(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace liflab::cli

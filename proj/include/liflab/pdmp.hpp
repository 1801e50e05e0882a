#pragma once
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "liflab/params.hpp"

namespace liflab {

// Event-driven simulation of the jump-and-leak process: exponential decay
// toward 0 between Poisson(sigma0) arrivals, +h per arrival, fire-and-reset
// to v_r on reaching 1.  All randomness comes from named, seeded streams, so
// every result is bit-reproducible for a given master seed.

struct NeuronPath {
  std::vector<std::pair<double, double>> samples;  // (t, v) on a uniform time grid
  std::vector<double> spike_times;
  double v_final = 0;
};

// Isolated neuron (the coupling J plays no role here).  sample_dt <= 0
// disables trajectory sampling.
NeuronPath simulate_neuron(const ModelParams& p, double v0, double t_end,
                           std::uint64_t seed, double sample_dt = 0.0);

struct SpikeEvent {
  double t = 0;
  int neuron = 0;
  int cascade_size = 0;  // spikes in the synchronous cascade this one belongs to
};

enum class NetworkInit { kConstant, kUniform };  // all at v0 / iid uniform on [0, v0)

struct NetworkResult {
  std::vector<SpikeEvent> spikes;
  std::vector<double> final_v;
  long long total_spikes = 0;
  int max_cascade = 0;
};

// N interacting neurons: when one fires, every other neuron independently
// receives a +h kick with probability J/(N-1), drawn from the target
// neuron's own stream.  Neurons driven past 1 join the cascade (FIFO, index
// order); kicks received while queued accumulate before the reset, and a
// neuron that already fired in a cascade may re-enter after its reset.
NetworkResult simulate_network(const ModelParams& p, int N, double v0, NetworkInit init,
                               double t_end, std::uint64_t seed);

struct McEstimate {
  double mean = 0;
  double std_error = 0;
  long long n = 0;
};

// Monte Carlo estimate of E[f(V_t)] for the isolated neuron started at v0:
// the particle view of the solution operator acting on the test function f.
// Replicas are processed in fixed-size chunks with per-chunk streams and
// reduced in chunk order, so the result is identical for any thread count.
McEstimate dual_mc(const ModelParams& p, double v0, double t,
                   const std::function<double(double)>& f, long long n_replicas,
                   std::uint64_t seed, int threads = 1);

struct DoeblinBin {
  double lo = 0, hi = 0;
  double prob = 0;    // empirical P(V_t0 in bin)
  double target = 0;  // c * (2/h) * bin width
  double ratio = 0;   // prob / target
  double se_rel = 0;  // standard error of prob, relative to target
};

struct DoeblinStart {
  double v0 = 0;
  std::vector<DoeblinBin> bins;
  double min_ratio = 0;
};

struct DoeblinReport {
  double t0 = 0;  // horizon log(4/h)
  double c = 0;   // minorization mass (sigma0/2)(h/4)^sigma0
  long long n_replicas = 0;
  int bins = 0;
  std::vector<DoeblinStart> starts;
  double min_ratio = 0;      // over all starts and bins
  double worst_margin = 0;   // min of ratio - (1 - 3 se_rel); >= 0: consistent
};

// Empirical check of the uniform minorization: from every start, after time
// t0 = log(4/h), the law of V_t0 should dominate c times the uniform
// distribution on [h/2, h].  The histogram of V_t0 over that window is
// compared bin-by-bin against the floor, with a 3-standard-error allowance.
DoeblinReport doeblin_check(const ModelParams& p, const std::vector<double>& starts,
                            long long n_replicas, int bins, std::uint64_t seed,
                            double t0_override = 0, int threads = 1);

void write_spikes_csv(const std::string& path, const std::vector<SpikeEvent>& spikes);

}  // namespace liflab

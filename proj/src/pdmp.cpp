#include "liflab/pdmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "liflab/errors.hpp"
#include "liflab/io.hpp"
#include "liflab/rng.hpp"

namespace liflab {

namespace {

// Run one neuron from (t, v) to t_end; returns the final state.  on_spike
// may be null.
template <typename SpikeFn>
double run_neuron(const ModelParams& p, double v, double t, double t_end, rng::Stream& s,
                  SpikeFn&& on_spike) {
  for (;;) {
    const double dt = s.exponential(p.sigma0);
    if (t + dt >= t_end) return v * std::exp(-(t_end - t));
    t += dt;
    v = v * std::exp(-dt) + p.h;
    if (v >= 1.0) {
      on_spike(t);
      v = p.v_r;
    }
  }
}

}  // namespace

NeuronPath simulate_neuron(const ModelParams& p, double v0, double t_end, std::uint64_t seed,
                           double sample_dt) {
  validate_dynamics(p);
  if (!(v0 >= 0.0 && v0 < 1.0))
    throw ValidationError("initial potential must lie in [0,1)");
  NeuronPath out;
  rng::Stream s(seed, "neuron-path");
  double v = v0, t = 0;
  double next_sample = 0;
  auto record_until = [&](double t_stop) {
    if (sample_dt <= 0) return;
    while (next_sample <= t_stop + 1e-15) {
      out.samples.emplace_back(next_sample, v * std::exp(-(next_sample - t)));
      next_sample += sample_dt;
    }
  };
  for (;;) {
    const double dt = s.exponential(p.sigma0);
    if (t + dt >= t_end) {
      record_until(t_end);
      out.v_final = v * std::exp(-(t_end - t));
      return out;
    }
    record_until(t + dt);
    t += dt;
    v = v * std::exp(-dt) + p.h;
    if (v >= 1.0) {
      out.spike_times.push_back(t);
      v = p.v_r;
    }
  }
}

NetworkResult simulate_network(const ModelParams& p, int N, double v0, NetworkInit init,
                               double t_end, std::uint64_t seed) {
  validate_dynamics(p);
  if (N < 2) throw ValidationError("network needs at least 2 neurons");
  if (!(v0 >= 0.0 && v0 < 1.0))
    throw ValidationError("initial potential must lie in [0,1)");
  const double pJ = p.J / (N - 1);
  if (pJ > 1.0)
    throw ValidationError("J/(N-1) exceeds 1: coupling too strong for this network size");

  std::vector<double> v(N), t_last(N, 0.0);
  std::vector<rng::Stream> kick(N);
  for (int i = 0; i < N; ++i) kick[i] = rng::Stream(seed, "kick", i);
  if (init == NetworkInit::kConstant) {
    std::fill(v.begin(), v.end(), v0);
  } else {
    for (int i = 0; i < N; ++i) v[i] = kick[i].uniform(0.0, v0);
  }

  rng::Stream clock(seed, "clock");
  NetworkResult out;
  std::vector<char> in_queue(N, 0);
  std::vector<int> queue;

  auto touch = [&](int j, double t) {
    v[j] *= std::exp(-(t - t_last[j]));
    t_last[j] = t;
  };

  double t = 0;
  for (;;) {
    t += clock.exponential(N * p.sigma0);
    if (t > t_end) break;
    const int i = static_cast<int>(clock.below(N));
    touch(i, t);
    v[i] += p.h;
    if (v[i] < 1.0) continue;

    // synchronous cascade at time t
    const std::size_t first_spike = out.spikes.size();
    queue.clear();
    queue.push_back(i);
    in_queue[i] = 1;
    std::size_t qh = 0;
    while (qh < queue.size()) {
      const int k = queue[qh++];
      in_queue[k] = 0;
      if (v[k] < 1.0) continue;
      out.spikes.push_back({t, k, 0});
      v[k] = p.v_r;
      t_last[k] = t;
      for (int j = 0; j < N; ++j) {
        if (j == k) continue;
        if (!kick[j].bernoulli(pJ)) continue;
        touch(j, t);
        v[j] += p.h;
        if (v[j] >= 1.0 && !in_queue[j]) {
          queue.push_back(j);
          in_queue[j] = 1;
        }
      }
    }
    const int size = static_cast<int>(out.spikes.size() - first_spike);
    for (std::size_t q = first_spike; q < out.spikes.size(); ++q)
      out.spikes[q].cascade_size = size;
    out.max_cascade = std::max(out.max_cascade, size);
  }
  for (int j = 0; j < N; ++j) touch(j, t_end);
  out.final_v = std::move(v);
  out.total_spikes = static_cast<long long>(out.spikes.size());
  return out;
}

namespace {

constexpr long long kChunk = 4096;

// Deterministic chunked parallel map-reduce: worker w handles chunks
// w, w+threads, w+2*threads, ...; partial results land in per-chunk slots
// and are reduced in chunk order.
template <typename PerChunk>
void run_chunks(long long n_chunks, int threads, PerChunk&& per_chunk) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (long long c = 0; c < n_chunks; ++c) per_chunk(c);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w]() {
      for (long long c = w; c < n_chunks; c += threads) per_chunk(c);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

McEstimate dual_mc(const ModelParams& p, double v0, double t,
                   const std::function<double(double)>& f, long long n_replicas,
                   std::uint64_t seed, int threads) {
  validate_dynamics(p);
  if (n_replicas < 1) throw ValidationError("need at least one replica");
  const long long n_chunks = (n_replicas + kChunk - 1) / kChunk;
  std::vector<double> sum(n_chunks, 0.0), sum2(n_chunks, 0.0);
  run_chunks(n_chunks, threads, [&](long long c) {
    rng::Stream s(seed, "dual-mc", static_cast<std::uint64_t>(c));
    const long long lo = c * kChunk, hi = std::min(n_replicas, lo + kChunk);
    double a = 0, a2 = 0;
    for (long long r = lo; r < hi; ++r) {
      const double vT = run_neuron(p, v0, 0.0, t, s, [](double) {});
      const double y = f(vT);
      a += y;
      a2 += y * y;
    }
    sum[c] = a;
    sum2[c] = a2;
  });
  double a = 0, a2 = 0;
  for (long long c = 0; c < n_chunks; ++c) {
    a += sum[c];
    a2 += sum2[c];
  }
  McEstimate est;
  est.n = n_replicas;
  est.mean = a / n_replicas;
  const double var = std::max(0.0, a2 / n_replicas - est.mean * est.mean);
  est.std_error = std::sqrt(var / n_replicas);
  return est;
}

DoeblinReport doeblin_check(const ModelParams& p, const std::vector<double>& starts,
                            long long n_replicas, int bins, std::uint64_t seed,
                            double t0_override, int threads) {
  validate_dynamics(p);
  if (starts.empty()) throw ValidationError("need at least one start");
  if (bins < 1) throw ValidationError("need at least one bin");
  if (n_replicas < 100) throw ValidationError("need at least 100 replicas");
  DoeblinReport rep;
  rep.t0 = t0_override > 0 ? t0_override : std::log(4.0 / p.h);
  rep.c = 0.5 * p.sigma0 * std::pow(p.h / 4.0, p.sigma0);
  rep.n_replicas = n_replicas;
  rep.bins = bins;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.worst_margin = std::numeric_limits<double>::infinity();

  const double lo = 0.5 * p.h, w = 0.5 * p.h / bins;
  const long long n_chunks = (n_replicas + kChunk - 1) / kChunk;

  for (std::size_t si = 0; si < starts.size(); ++si) {
    const double v0 = starts[si];
    if (!(v0 >= 0.0 && v0 < 1.0))
      throw ValidationError("start must lie in [0,1)");
    std::vector<std::vector<long long>> counts(n_chunks, std::vector<long long>(bins, 0));
    run_chunks(n_chunks, threads, [&](long long c) {
      rng::Stream s(seed, "doeblin", (static_cast<std::uint64_t>(si) << 40) ^
                                         static_cast<std::uint64_t>(c));
      const long long lo_r = c * kChunk, hi_r = std::min(n_replicas, lo_r + kChunk);
      for (long long r = lo_r; r < hi_r; ++r) {
        const double vT = run_neuron(p, v0, 0.0, rep.t0, s, [](double) {});
        if (vT >= lo && vT < lo + bins * w) {
          const int b = std::min(bins - 1, static_cast<int>((vT - lo) / w));
          ++counts[c][b];
        }
      }
    });
    DoeblinStart ds;
    ds.v0 = v0;
    ds.min_ratio = std::numeric_limits<double>::infinity();
    for (int b = 0; b < bins; ++b) {
      long long cnt = 0;
      for (long long c = 0; c < n_chunks; ++c) cnt += counts[c][b];
      DoeblinBin bin;
      bin.lo = lo + b * w;
      bin.hi = lo + (b + 1) * w;
      bin.prob = static_cast<double>(cnt) / n_replicas;
      bin.target = rep.c * (2.0 / p.h) * w;
      bin.ratio = bin.prob / bin.target;
      bin.se_rel = std::sqrt(bin.prob * (1.0 - bin.prob) / n_replicas) / bin.target;
      ds.min_ratio = std::min(ds.min_ratio, bin.ratio);
      rep.min_ratio = std::min(rep.min_ratio, bin.ratio);
      rep.worst_margin = std::min(rep.worst_margin, bin.ratio - (1.0 - 3.0 * bin.se_rel));
      ds.bins.push_back(bin);
    }
    rep.starts.push_back(std::move(ds));
  }
  return rep;
}

void write_spikes_csv(const std::string& path, const std::vector<SpikeEvent>& spikes) {
  std::string out = "t,neuron,cascade\n";
  for (const SpikeEvent& e : spikes) {
    out += io::fmt_shortest(e.t);
    out += ',';
    out += std::to_string(e.neuron);
    out += ',';
    out += std::to_string(e.cascade_size);
    out += '\n';
  }
  io::write_file(path, out);
}

}  // namespace liflab

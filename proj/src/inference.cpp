// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/inference.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <thread>

#include "deitsp/io_util.hpp"

namespace deitsp {

namespace {

constexpr std::uint64_t kIterationStream = 0x69746572ull;

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) { parent[static_cast<size_t>(find(a))] = find(b); }
};

}  // namespace

Tour greedy_decode(const Heatmap& heatmap, const TspInstance& inst) {
  const int n = inst.size();
  if (heatmap.n != n)
    throw UsageError("greedy_decode: heatmap size " +
                     std::to_string(heatmap.n) + " vs instance size " +
                     std::to_string(n));

  struct Candidate {
    double score;
    int i, j;
  };
  std::vector<Candidate> edges;
  edges.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double cost = std::max(edge_cost(inst, i, j), 1e-12);
      edges.push_back({(heatmap.at(i, j) + heatmap.at(j, i)) / cost, i, j});
    }
  std::sort(edges.begin(), edges.end(), [](const Candidate& a,
                                           const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  EdgeMatrix picked(n);
  std::vector<int> degree(static_cast<size_t>(n), 0);
  DisjointSet components(n);
  int accepted = 0;
  for (const Candidate& e : edges) {
    if (accepted == n) break;
    if (degree[static_cast<size_t>(e.i)] == 2 ||
        degree[static_cast<size_t>(e.j)] == 2)
      continue;
    const bool closes = components.find(e.i) == components.find(e.j);
    if (closes && accepted != n - 1) continue;  // would close a short cycle
    picked.set(e.i, e.j, 1);
    degree[static_cast<size_t>(e.i)]++;
    degree[static_cast<size_t>(e.j)]++;
    components.unite(e.i, e.j);
    ++accepted;
  }

  auto tour = edge_matrix_to_tour(picked);
  if (!tour)  // unreachable on a complete graph; guards internal breakage
    throw NumericError("greedy_decode: edge selection did not form a cycle");
  return *tour;
}

SolveResult solve(const Model& model, const TspInstance& inst,
                  const InferenceConfig& cfg) {
  if (cfg.iterations < 1)
    throw ConfigError("solve: iterations must be >= 1");
  const int steps = model.config().diffusion_steps;
  const IterationSchedule schedule =
      cfg.interval ? make_iteration_schedule(cfg.schedule, cfg.iterations,
                                             steps, cfg.interval->first,
                                             cfg.interval->second)
                   : make_iteration_schedule(cfg.schedule, cfg.iterations,
                                             steps);
  const NoiseSchedule noise = NoiseSchedule::linear(steps);
  const DistanceMatrix dist(inst);

  SolveResult result;
  Rng init_rng(cfg.seed, kIterationStream);
  EdgeMatrix state = sample_uniform_state(inst.size(), init_rng);
  int t = steps;

  for (int i = 0; i < cfg.iterations; ++i) {
    SolutionEntry entry;
    entry.iteration = i;
    entry.timestep = t;
    entry.heatmap = model.predict(inst, state, t);
    entry.tour = greedy_decode(entry.heatmap, inst);
    if (cfg.two_opt) entry.tour = two_opt(dist, entry.tour);
    entry.length = tour_length(dist, entry.tour);
    result.set.push_back(std::move(entry));

    if (i + 1 < cfg.iterations) {
      Rng iter_rng(cfg.seed,
                   kIterationStream + static_cast<std::uint64_t>(i) + 1);
      t = schedule.taus[static_cast<size_t>(i)];
      state = add_noise(result.set.back().heatmap, noise, t, iter_rng);
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < result.set.size(); ++i)
    if (result.set[i].length < result.set[best].length) best = i;
  result.best_tour = result.set[best].tour;
  result.best_length = result.set[best].length;
  result.best_iteration = static_cast<int>(best);
  return result;
}

EvalOutcome evaluate(const SolveFn& solver,
                     const std::vector<DatasetRecord>& data,
                     const std::string& method, int iterations, int workers) {
  if (workers < 1) throw ConfigError("evaluate: workers must be >= 1");
  EvalOutcome outcome;
  outcome.records.resize(data.size());

  auto solve_one = [&](size_t idx) {
    const DatasetRecord& rec = data[idx];
    const auto start = std::chrono::steady_clock::now();
    const SolveResult res = solver(rec.instance, idx);
    const auto stop = std::chrono::steady_clock::now();

    ResultRecord out;
    out.id = rec.instance.name();
    out.method = method;
    out.iterations = iterations;
    out.metric = rec.instance.metric_mode();
    out.tour = res.best_tour;
    out.length = res.best_length;
    if (rec.instance.metric_mode() == MetricMode::kTsplibEuc2dRounded) {
      const TspInstance real(rec.instance.nodes(),
                             MetricMode::kFloatEuclidean);
      out.length_real = tour_length(real, res.best_tour);
    }
    if (rec.optimal_length > 0.0)
      out.gap_percent =
          (res.best_length / rec.optimal_length - 1.0) * 100.0;
    out.seconds = std::chrono::duration<double>(stop - start).count();
    outcome.records[idx] = std::move(out);
  };

  if (workers == 1 || data.size() < 2) {
    for (size_t i = 0; i < data.size(); ++i) solve_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const size_t count =
        std::min<size_t>(static_cast<size_t>(workers), data.size());
    pool.reserve(count);
    for (size_t w = 0; w < count; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < data.size();
             i = next.fetch_add(1))
          solve_one(i);
      });
    for (auto& th : pool) th.join();
  }

  for (const ResultRecord& r : outcome.records) {
    outcome.mean_length += r.length;
    outcome.mean_seconds += r.seconds;
    if (r.gap_percent) {
      outcome.mean_gap_percent += *r.gap_percent;
      outcome.gap_count++;
    }
  }
  if (!outcome.records.empty()) {
    outcome.mean_length /= static_cast<double>(outcome.records.size());
    outcome.mean_seconds /= static_cast<double>(outcome.records.size());
  }
  if (outcome.gap_count > 0)
    outcome.mean_gap_percent /= static_cast<double>(outcome.gap_count);
  return outcome;
}

EvalOutcome evaluate(const Model& model,
                     const std::vector<DatasetRecord>& data,
                     const InferenceConfig& cfg, const std::string& method,
                     int workers) {
  SolveFn solver = [&model, cfg](const TspInstance& inst, size_t idx) {
    InferenceConfig per = cfg;
    per.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(idx));
    return solve(model, inst, per);
  };
  return evaluate(solver, data, method, cfg.iterations, workers);
}

std::string format_eval_summary(const EvalOutcome& outcome) {
  std::string s = "count=" + std::to_string(outcome.records.size());
  s += " mean_len=" + format_double(outcome.mean_length);
  s += " mean_gap=";
  if (outcome.gap_count > 0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", outcome.mean_gap_percent);
    s += buf;
    s += " (" + std::to_string(outcome.gap_count) + "/" +
         std::to_string(outcome.records.size()) + ")";
  } else {
    s += "na";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", outcome.mean_seconds);
  s += " mean_time=";
  s += buf;
  return s;
}

}  // namespace deitsp

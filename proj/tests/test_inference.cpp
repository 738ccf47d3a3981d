// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "deitsp/inference.hpp"
#include "doctest.h"

using namespace deitsp;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.groups = 2;
  cfg.ffn_mult = 2;
  cfg.diffusion_steps = 10;
  return cfg;
}

Heatmap uniform_heatmap(int n, double p = 0.5) {
  Heatmap hm = Heatmap::zeros(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) hm.at(i, j) = p;
  return hm;
}

Heatmap random_heatmap(int n, Rng& rng) {
  Heatmap hm = Heatmap::zeros(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) hm.at(i, j) = rng.uniform();
  return hm;
}

// Independent shortest-edge-first construction: sort pairs by cost
// ascending (ties on (i, j)), insert under the same degree/cycle rules.
// With a uniform heatmap the decoder's score order reduces to exactly this.
Tour shortest_edge_oracle(const TspInstance& inst) {
  const int n = inst.size();
  struct E {
    double cost;
    int i, j;
  };
  std::vector<E> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.push_back({edge_cost(inst, i, j), i, j});
  std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<int> deg(static_cast<size_t>(n), 0);
  std::vector<int> comp(static_cast<size_t>(n));
  std::iota(comp.begin(), comp.end(), 0);
  auto root = [&](int a) {
    while (comp[static_cast<size_t>(a)] != a) a = comp[static_cast<size_t>(a)];
    return a;
  };
  EdgeMatrix m(n);
  int used = 0;
  for (const E& e : edges) {
    if (used == n) break;
    if (deg[static_cast<size_t>(e.i)] == 2 || deg[static_cast<size_t>(e.j)] == 2)
      continue;
    if (root(e.i) == root(e.j) && used != n - 1) continue;
    m.set(e.i, e.j, 1);
    deg[static_cast<size_t>(e.i)]++;
    deg[static_cast<size_t>(e.j)]++;
    comp[static_cast<size_t>(root(e.i))] = root(e.j);
    ++used;
  }
  return *edge_matrix_to_tour(m);
}

bool has_improving_2exchange(const TspInstance& inst, const Tour& tour) {
  const DistanceMatrix d(inst);
  const int n = inst.size();
  const auto& o = tour.order;
  for (int a = 0; a < n - 1; ++a)
    for (int b = a + 1; b < n; ++b) {
      if (a == 0 && b == n - 1) continue;
      const int before = o[static_cast<size_t>((a - 1 + n) % n)];
      const int after = o[static_cast<size_t>((b + 1) % n)];
      const double delta = d(before, o[static_cast<size_t>(b)]) +
                           d(o[static_cast<size_t>(a)], after) -
                           d(before, o[static_cast<size_t>(a)]) -
                           d(o[static_cast<size_t>(b)], after);
      if (delta < -1e-12) return true;
    }
  return false;
}

}  // namespace

TEST_CASE("perfect heatmap decodes to its tour") {
  TspInstance inst = generate_uniform_instance(6, 42);
  const Tour truth = held_karp(inst);
  const EdgeMatrix adj = tour_to_edge_matrix(truth);
  Heatmap hm = Heatmap::zeros(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) hm.at(i, j) = adj.at(i, j) ? 1.0 : 0.0;
  const Tour decoded = greedy_decode(hm, inst);
  CHECK(tour_to_edge_matrix(decoded) == adj);
}

TEST_CASE("uniform heatmap on the unit square walks the perimeter") {
  TspInstance inst({{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                   MetricMode::kFloatEuclidean);
  const Tour tour = greedy_decode(uniform_heatmap(4), inst);
  CHECK(tour_length(inst, tour) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("uniform heatmap reduces to shortest-edge-first construction") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    TspInstance inst = generate_uniform_instance(10, seed);
    const Tour got = greedy_decode(uniform_heatmap(10), inst);
    const Tour expect = shortest_edge_oracle(inst);
    CHECK(got.order == expect.order);
  }
}

TEST_CASE("decoding is total and deterministic on arbitrary heatmaps") {
  Rng rng(77);
  for (int n : {5, 7, 13, 29, 60, 120}) {
    TspInstance inst = generate_uniform_instance(n, static_cast<std::uint64_t>(n));
    for (int rep = 0; rep < 8; ++rep) {
      const Heatmap hm = random_heatmap(n, rng);
      const Tour tour = greedy_decode(hm, inst);
      CHECK_NOTHROW(validate_tour(inst, tour));
      const Tour again = greedy_decode(hm, inst);
      CHECK(tour.order == again.order);
    }
  }
}

TEST_CASE("decoder copes with coincident points and flat heatmaps") {
  // Two coincident pairs: zero-cost edges get the 1e-12 floor instead of a
  // division blowup.
  TspInstance inst({{0, 0}, {0, 0}, {1, 0}, {1, 0}, {0.5, 1}},
                   MetricMode::kFloatEuclidean);
  const Tour t1 = greedy_decode(uniform_heatmap(5), inst);
  CHECK_NOTHROW(validate_tour(inst, t1));
  const Tour t2 = greedy_decode(Heatmap::zeros(5), inst);
  CHECK_NOTHROW(validate_tour(inst, t2));
  TspInstance other = generate_uniform_instance(4, 9);
  CHECK_THROWS_AS(greedy_decode(uniform_heatmap(5), other), UsageError);
}

TEST_CASE("solve produces M entries with consistent bookkeeping") {
  Model model(tiny_config(), 6);
  TspInstance inst = generate_uniform_instance(8, 15);
  InferenceConfig cfg;
  cfg.iterations = 4;
  cfg.schedule = ScheduleKind::kLinear;
  cfg.seed = 3;
  const SolveResult res = solve(model, inst, cfg);

  REQUIRE(res.set.size() == 4);
  // Entry 0 denoises the uniform prior at t = T; later entries follow the
  // descending re-noise schedule.
  CHECK(res.set[0].timestep == 10);
  const IterationSchedule sched =
      make_iteration_schedule(ScheduleKind::kLinear, 4, 10);
  for (size_t i = 1; i < 4; ++i)
    CHECK(res.set[i].timestep == sched.taus[i - 1]);
  for (const SolutionEntry& e : res.set) {
    CHECK_NOTHROW(validate_tour(inst, e.tour));
    CHECK(e.length == doctest::Approx(tour_length(inst, e.tour)).epsilon(1e-12));
    CHECK(!has_improving_2exchange(inst, e.tour));  // two_opt defaults on
  }
  double best = res.set[0].length;
  for (const SolutionEntry& e : res.set) best = std::min(best, e.length);
  CHECK(res.best_length == best);
  CHECK(res.best_tour.order ==
        res.set[static_cast<size_t>(res.best_iteration)].tour.order);
}

TEST_CASE("iteration-count prefix sharing and best-of-set containment") {
  Model model(tiny_config(), 91);
  TspInstance inst = generate_uniform_instance(9, 33);
  InferenceConfig one;
  one.iterations = 1;
  one.schedule = ScheduleKind::kLinear;  // inverse collapses at T = 10, M = 5
  one.seed = 12;
  InferenceConfig many = one;
  many.iterations = 5;

  const SolveResult r1 = solve(model, inst, one);
  const SolveResult r5 = solve(model, inst, many);
  CHECK(r1.set[0].tour.order == r5.set[0].tour.order);
  CHECK(r1.best_length >= r5.best_length);

  // Running minimum over the set is non-increasing by construction.
  double running = r5.set[0].length;
  for (const SolutionEntry& e : r5.set) {
    running = std::min(running, e.length);
    CHECK(running <= r5.set[0].length);
  }
}

TEST_CASE("solve is seed-deterministic") {
  Model model(tiny_config(), 14);
  TspInstance inst = generate_uniform_instance(8, 2);
  InferenceConfig cfg;
  cfg.iterations = 3;
  cfg.schedule = ScheduleKind::kCosine;
  cfg.seed = 40;
  const SolveResult a = solve(model, inst, cfg);
  const SolveResult b = solve(model, inst, cfg);
  REQUIRE(a.set.size() == b.set.size());
  for (size_t i = 0; i < a.set.size(); ++i) {
    CHECK(a.set[i].tour.order == b.set[i].tour.order);
    CHECK(a.set[i].heatmap.p == b.set[i].heatmap.p);
  }
  CHECK_THROWS_AS(
      [&] {
        InferenceConfig bad = cfg;
        bad.iterations = 0;
        solve(model, inst, bad);
      }(),
      ConfigError);
}

TEST_CASE("two-opt flag trades length for speed") {
  Model model(tiny_config(), 5);
  TspInstance inst = generate_uniform_instance(12, 44);
  InferenceConfig with;
  with.iterations = 2;
  with.seed = 9;
  InferenceConfig without = with;
  without.two_opt = false;
  const SolveResult a = solve(model, inst, with);
  const SolveResult b = solve(model, inst, without);
  // Same heatmaps (prediction path has no randomness beyond the state), so
  // the refined tours can only be shorter or equal.
  CHECK(a.set[0].heatmap.p == b.set[0].heatmap.p);
  CHECK(a.best_length <= b.best_length);
}

TEST_CASE("evaluate with oracle injection reports zero gap") {
  const auto data = generate_labeled_dataset(7, 6, 25);
  const SolveFn oracle = [&](const TspInstance&, size_t idx) {
    SolveResult res;
    SolutionEntry e;
    e.tour = data[idx].optimal_tour;
    e.length = data[idx].optimal_length;
    res.set.push_back(e);
    res.best_tour = e.tour;
    res.best_length = e.length;
    return res;
  };
  const EvalOutcome out = evaluate(oracle, data, "oracle", 1, 1);
  REQUIRE(out.records.size() == 6);
  CHECK(out.gap_count == 6);
  CHECK(out.mean_gap_percent == doctest::Approx(0.0).epsilon(1e-12));
  for (size_t i = 0; i < out.records.size(); ++i) {
    CHECK(out.records[i].id == data[i].instance.name());
    CHECK(out.records[i].method == "oracle");
    REQUIRE(out.records[i].gap_percent.has_value());
    CHECK(*out.records[i].gap_percent == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("gap follows its definition") {
  auto data = generate_labeled_dataset(6, 1, 31);
  const double opt = data[0].optimal_length;
  const SolveFn inflated = [&](const TspInstance&, size_t) {
    SolveResult res;
    SolutionEntry e;
    e.tour = data[0].optimal_tour;
    e.length = opt * 1.05;  // pretend the solver came back 5% long
    res.set.push_back(e);
    res.best_tour = e.tour;
    res.best_length = e.length;
    return res;
  };
  const EvalOutcome out = evaluate(inflated, data, "m", 1, 1);
  CHECK(*out.records[0].gap_percent == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("worker count changes timing only") {
  Model model(tiny_config(), 3);
  const auto data = generate_labeled_dataset(6, 8, 17);
  InferenceConfig cfg;
  cfg.iterations = 2;
  cfg.seed = 77;
  const EvalOutcome serial = evaluate(model, data, cfg, "deitsp", 1);
  const EvalOutcome parallel = evaluate(model, data, cfg, "deitsp", 3);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].tour.order == parallel.records[i].tour.order);
    CHECK(serial.records[i].length == parallel.records[i].length);
    CHECK(serial.records[i].id == parallel.records[i].id);
  }
  CHECK(serial.mean_length == parallel.mean_length);
}

TEST_CASE("eval summary line carries the aggregates") {
  EvalOutcome out;
  ResultRecord r;
  r.length = 2.0;
  r.gap_percent = 1.25;
  r.seconds = 0.5;
  out.records = {r, r};
  out.mean_length = 2.0;
  out.mean_gap_percent = 1.25;
  out.gap_count = 2;
  out.mean_seconds = 0.5;
  const std::string s = format_eval_summary(out);
  CHECK(s.find("count=2") != std::string::npos);
  CHECK(s.find("mean_len=2") != std::string::npos);
  CHECK(s.find("mean_gap=1.25 (2/2)") != std::string::npos);
  CHECK(s.find("mean_time=0.500000") != std::string::npos);

  EvalOutcome none;
  CHECK(format_eval_summary(none).find("mean_gap=na") != std::string::npos);
}

// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deitsp/errors.hpp"

namespace deitsp {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// How edge costs are derived from coordinates. Float mode is plain Euclidean
// distance; the rounded mode reproduces TSPLIB EUC_2D (nearest integer via
// floor(d + 0.5)) so published optima for instances like berlin52 match.
enum class MetricMode {
  kFloatEuclidean,
  kTsplibEuc2dRounded,
};

const char* metric_mode_name(MetricMode mode);
std::optional<MetricMode> metric_mode_from_name(const std::string& name);

class TspInstance {
 public:
  TspInstance(std::vector<Point> nodes, MetricMode mode, std::string name = "");

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Point>& nodes() const { return nodes_; }
  const Point& node(int i) const { return nodes_[static_cast<size_t>(i)]; }
  MetricMode metric_mode() const { return mode_; }
  const std::string& name() const { return name_; }

 private:
  std::vector<Point> nodes_;
  MetricMode mode_;
  std::string name_;
};

double edge_cost(const TspInstance& inst, int i, int j);

// Dense cost table; worth building once when a tour improvement loop will
// touch the same O(n^2) costs many times.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const TspInstance& inst);
  int size() const { return n_; }
  double operator()(int i, int j) const { return d_[static_cast<size_t>(i) * n_ + j]; }

 private:
  int n_;
  std::vector<double> d_;
};

// A tour is a permutation of 0..n-1; the closing edge back to order.front()
// is implicit.
struct Tour {
  std::vector<int> order;
};

// Throws UsageError unless tour is a permutation of exactly the instance's
// node set.
void validate_tour(const TspInstance& inst, const Tour& tour);

double tour_length(const TspInstance& inst, const Tour& tour);
double tour_length(const DistanceMatrix& d, const Tour& tour);

// Symmetric 0/1 adjacency over node pairs, zero diagonal. The binary state
// the diffusion process works on.
class EdgeMatrix {
 public:
  explicit EdgeMatrix(int n);

  int size() const { return n_; }
  std::uint8_t at(int i, int j) const { return bits_[static_cast<size_t>(i) * n_ + j]; }
  // Sets (i, j) and (j, i); setting a diagonal cell to 1 is a usage error.
  void set(int i, int j, std::uint8_t v);
  // Raw row-major n*n cells, mutable for bulk writers that keep the
  // symmetry/diagonal invariants themselves.
  std::vector<std::uint8_t>& cells() { return bits_; }
  const std::vector<std::uint8_t>& cells() const { return bits_; }

  bool operator==(const EdgeMatrix& other) const = default;

 private:
  int n_;
  std::vector<std::uint8_t> bits_;
};

// Row-major n*n edge probabilities in [0, 1], zero diagonal.
struct Heatmap {
  int n = 0;
  std::vector<double> p;

  static Heatmap zeros(int n) {
    return Heatmap{n, std::vector<double>(static_cast<size_t>(n) * n, 0.0)};
  }
  double at(int i, int j) const { return p[static_cast<size_t>(i) * n + j]; }
  double& at(int i, int j) { return p[static_cast<size_t>(i) * n + j]; }
};

EdgeMatrix tour_to_edge_matrix(const Tour& tour);

// Inverse of tour_to_edge_matrix when the matrix is a single Hamiltonian
// cycle: every degree exactly 2 and one connected cycle. Returns nullopt
// otherwise. The canonical tour starts at node 0 and steps toward the
// smaller-indexed of its two neighbours.
std::optional<Tour> edge_matrix_to_tour(const EdgeMatrix& m);

// Exact solver, bitmask DP over subsets fixed at start node 0.
// O(2^n * n^2); accepts 3 <= n <= 16, otherwise throws SizeError.
Tour held_karp(const TspInstance& inst);

// First-improvement 2-opt. Scans pairs (a, b), 0 <= a < b < n, in
// lexicographic order; the move for (a, b) reverses order[a..b], replacing
// edges (order[(a-1+n)%n], order[a]) and (order[b], order[(b+1)%n]). A move
// is applied when it strictly shortens the tour, after which the scan
// restarts from (0, 1); terminates when a full pass applies nothing.
// (a=0, b=n-1) is skipped since it only flips tour direction.
Tour two_opt(const DistanceMatrix& d, const Tour& start);
Tour two_opt(const TspInstance& inst, const Tour& start);

// n points i.i.d. uniform in the unit square, float metric.
TspInstance generate_uniform_instance(int n, std::uint64_t seed,
                                      std::string name = "");

}  // namespace deitsp

// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#include "deitsp/tsp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "deitsp/rng.hpp"

namespace deitsp {

const char* metric_mode_name(MetricMode mode) {
  switch (mode) {
    case MetricMode::kFloatEuclidean:
      return "euclidean";
    case MetricMode::kTsplibEuc2dRounded:
      return "euc2d_rounded";
  }
  return "?";
}

std::optional<MetricMode> metric_mode_from_name(const std::string& name) {
  if (name == "euclidean") return MetricMode::kFloatEuclidean;
  if (name == "euc2d_rounded") return MetricMode::kTsplibEuc2dRounded;
  return std::nullopt;
}

TspInstance::TspInstance(std::vector<Point> nodes, MetricMode mode,
                         std::string name)
    : nodes_(std::move(nodes)), mode_(mode), name_(std::move(name)) {
  if (nodes_.size() < 3)
    throw UsageError("instance needs at least 3 nodes, got " +
                     std::to_string(nodes_.size()));
  for (const Point& p : nodes_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw NumericError("non-finite node coordinate in instance '" + name_ +
                         "'");
  }
}

double edge_cost(const TspInstance& inst, int i, int j) {
  const Point& a = inst.node(i);
  const Point& b = inst.node(j);
  const double d = std::hypot(a.x - b.x, a.y - b.y);
  if (inst.metric_mode() == MetricMode::kTsplibEuc2dRounded)
    return std::floor(d + 0.5);  // TSPLIB nint()
  return d;
}

DistanceMatrix::DistanceMatrix(const TspInstance& inst) : n_(inst.size()) {
  d_.assign(static_cast<size_t>(n_) * n_, 0.0);
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j) {
      const double c = edge_cost(inst, i, j);
      d_[static_cast<size_t>(i) * n_ + j] = c;
      d_[static_cast<size_t>(j) * n_ + i] = c;
    }
}

void validate_tour(const TspInstance& inst, const Tour& tour) {
  const int n = inst.size();
  if (static_cast<int>(tour.order.size()) != n)
    throw UsageError("tour has " + std::to_string(tour.order.size()) +
                     " nodes, instance has " + std::to_string(n));
  std::vector<char> seen(static_cast<size_t>(n), 0);
  for (int v : tour.order) {
    if (v < 0 || v >= n)
      throw UsageError("tour node " + std::to_string(v) + " out of range");
    if (seen[static_cast<size_t>(v)])
      throw UsageError("tour visits node " + std::to_string(v) + " twice");
    seen[static_cast<size_t>(v)] = 1;
  }
}

double tour_length(const TspInstance& inst, const Tour& tour) {
  validate_tour(inst, tour);
  const int n = inst.size();
  double len = 0.0;
  for (int k = 0; k < n; ++k)
    len += edge_cost(inst, tour.order[static_cast<size_t>(k)],
                     tour.order[static_cast<size_t>((k + 1) % n)]);
  return len;
}

double tour_length(const DistanceMatrix& d, const Tour& tour) {
  const int n = d.size();
  double len = 0.0;
  for (int k = 0; k < n; ++k)
    len += d(tour.order[static_cast<size_t>(k)],
             tour.order[static_cast<size_t>((k + 1) % n)]);
  return len;
}

EdgeMatrix::EdgeMatrix(int n) : n_(n) {
  if (n < 3) throw UsageError("edge matrix needs n >= 3");
  bits_.assign(static_cast<size_t>(n) * n, 0);
}

void EdgeMatrix::set(int i, int j, std::uint8_t v) {
  if (i < 0 || i >= n_ || j < 0 || j >= n_)
    throw UsageError("edge index out of range");
  if (i == j) {
    if (v != 0) throw UsageError("diagonal edge cells must stay 0");
    return;
  }
  bits_[static_cast<size_t>(i) * n_ + j] = v ? 1 : 0;
  bits_[static_cast<size_t>(j) * n_ + i] = v ? 1 : 0;
}

EdgeMatrix tour_to_edge_matrix(const Tour& tour) {
  const int n = static_cast<int>(tour.order.size());
  EdgeMatrix m(n);
  for (int k = 0; k < n; ++k)
    m.set(tour.order[static_cast<size_t>(k)],
          tour.order[static_cast<size_t>((k + 1) % n)], 1);
  return m;
}

std::optional<Tour> edge_matrix_to_tour(const EdgeMatrix& m) {
  const int n = m.size();
  std::vector<std::array<int, 2>> nbr(static_cast<size_t>(n), {-1, -1});
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) {
        if (m.at(i, j) != 0) return std::nullopt;
        continue;
      }
      if (m.at(i, j) != m.at(j, i)) return std::nullopt;
      if (m.at(i, j)) {
        if (deg == 2) return std::nullopt;
        nbr[static_cast<size_t>(i)][static_cast<size_t>(deg++)] = j;
      }
    }
    if (deg != 2) return std::nullopt;
  }
  Tour tour;
  tour.order.reserve(static_cast<size_t>(n));
  int prev = 0;
  int cur = std::min(nbr[0][0], nbr[0][1]);
  tour.order.push_back(0);
  while (cur != 0) {
    tour.order.push_back(cur);
    const auto& nb = nbr[static_cast<size_t>(cur)];
    const int next = (nb[0] == prev) ? nb[1] : nb[0];
    prev = cur;
    cur = next;
  }
  if (static_cast<int>(tour.order.size()) != n) return std::nullopt;
  return tour;
}

Tour held_karp(const TspInstance& inst) {
  const int n = inst.size();
  if (n < 3 || n > 16)
    throw SizeError("exact solver handles 3..16 nodes, got " +
                    std::to_string(n));
  const DistanceMatrix d(inst);

  // dp[mask][j]: cheapest path 0 -> ... -> j visiting exactly the nodes in
  // mask (mask always contains bits 0 and j).
  const int full = 1 << n;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(static_cast<size_t>(full) * n, inf);
  std::vector<std::int8_t> parent(static_cast<size_t>(full) * n, -1);
  dp[(1u << 0) * static_cast<size_t>(n) + 0] = 0.0;

  for (int mask = 1; mask < full; ++mask) {
    if (!(mask & 1)) continue;
    for (int j = 0; j < n; ++j) {
      if (!(mask & (1 << j))) continue;
      const double cur = dp[static_cast<size_t>(mask) * n + j];
      if (cur == inf) continue;
      for (int k = 0; k < n; ++k) {
        if (mask & (1 << k)) continue;
        const int nmask = mask | (1 << k);
        double& slot = dp[static_cast<size_t>(nmask) * n + k];
        const double cand = cur + d(j, k);
        if (cand < slot) {
          slot = cand;
          parent[static_cast<size_t>(nmask) * n + k] =
              static_cast<std::int8_t>(j);
        }
      }
    }
  }

  const int all = full - 1;
  double best = inf;
  int best_end = -1;
  for (int j = 1; j < n; ++j) {
    const double cand = dp[static_cast<size_t>(all) * n + j] + d(j, 0);
    if (cand < best) {
      best = cand;
      best_end = j;
    }
  }

  Tour tour;
  tour.order.assign(static_cast<size_t>(n), 0);
  int mask = all;
  int cur = best_end;
  for (int pos = n - 1; pos >= 1; --pos) {
    tour.order[static_cast<size_t>(pos)] = cur;
    const int p = parent[static_cast<size_t>(mask) * n + cur];
    mask ^= 1 << cur;
    cur = p;
  }
  return tour;
}

Tour two_opt(const DistanceMatrix& d, const Tour& start) {
  const int n = d.size();
  Tour tour = start;
  auto& t = tour.order;
  // Strictly-better threshold; float metrics produce exact ties under
  // reversal that must not loop forever.
  constexpr double kEps = 1e-12;
  bool improved = true;
  while (improved) {
    improved = false;
    for (int a = 0; a < n - 1 && !improved; ++a) {
      for (int b = a + 1; b < n && !improved; ++b) {
        if (a == 0 && b == n - 1) continue;
        const int i = t[static_cast<size_t>(a)];
        const int j = t[static_cast<size_t>(b)];
        const int before = t[static_cast<size_t>((a - 1 + n) % n)];
        const int after = t[static_cast<size_t>((b + 1) % n)];
        const double delta =
            d(before, j) + d(i, after) - d(before, i) - d(j, after);
        if (delta < -kEps) {
          std::reverse(t.begin() + a, t.begin() + b + 1);
          improved = true;  // restart the (a, b) scan from the top
        }
      }
    }
  }
  return tour;
}

Tour two_opt(const TspInstance& inst, const Tour& start) {
  validate_tour(inst, start);
  return two_opt(DistanceMatrix(inst), start);
}

TspInstance generate_uniform_instance(int n, std::uint64_t seed,
                                      std::string name) {
  if (n < 3) throw UsageError("instance needs at least 3 nodes");
  Rng rng(seed);
  std::vector<Point> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    const double y = rng.uniform();
    pts.push_back(Point{x, y});
  }
  return TspInstance(std::move(pts), MetricMode::kFloatEuclidean,
                     std::move(name));
}

}  // namespace deitsp

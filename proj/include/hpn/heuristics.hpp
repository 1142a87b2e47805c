#pragma once

// Classical construction and improvement baselines: nearest neighbor,
// farthest insertion, best-improvement 2-opt, and seeded random tours.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpn/tsp.hpp"

namespace hpn {

// Greedy construction: always move to the closest unvisited city, ties to the
// lowest index.
inline Tour nearest_neighbor(const Instance& inst, int start = 0) {
    const int n = inst.n();
    if (start < 0 || start >= n)
        throw std::invalid_argument("nearest_neighbor: start " + std::to_string(start) +
                                    " out of range for n = " + std::to_string(n));
    std::vector<int> order;
    order.reserve(n);
    std::vector<std::uint8_t> visited(n, 0);
    int current = start;
    order.push_back(current);
    visited[current] = 1;
    for (int step = 1; step < n; ++step) {
        int next = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (visited[j]) continue;
            const double d = euclidean(inst.coords[current], inst.coords[j]);
            if (d < best) {
                best = d;
                next = j;
            }
        }
        visited[next] = 1;
        order.push_back(next);
        current = next;
    }
    return Tour{order, tour_length(inst, order)};
}

// Farthest insertion: seed with the diameter pair, then repeatedly insert the
// unvisited city farthest from the partial tour at the cheapest position.
// All ties break to the lowest index / earliest position.
inline Tour farthest_insertion(const Instance& inst) {
    const int n = inst.n();
    if (n < 1) throw std::invalid_argument("farthest_insertion: empty instance");
    if (n == 1) return Tour{{0}, 0.0};
    if (n == 2) return Tour{{0, 1}, tour_length(inst, {0, 1})};

    int a = 0, b = 1;
    double diam = -1.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = euclidean(inst.coords[i], inst.coords[j]);
            if (d > diam) {
                diam = d;
                a = i;
                b = j;
            }
        }

    std::vector<int> order = {a, b};
    std::vector<std::uint8_t> in_tour(n, 0);
    in_tour[a] = in_tour[b] = 1;
    // min distance from each city to the current partial tour
    std::vector<double> dist_to_tour(n);
    for (int j = 0; j < n; ++j)
        dist_to_tour[j] = std::min(euclidean(inst.coords[j], inst.coords[a]),
                                   euclidean(inst.coords[j], inst.coords[b]));

    while (static_cast<int>(order.size()) < n) {
        int pick = -1;
        double far = -1.0;
        for (int j = 0; j < n; ++j) {
            if (in_tour[j]) continue;
            if (dist_to_tour[j] > far) {
                far = dist_to_tour[j];
                pick = j;
            }
        }
        const int k = static_cast<int>(order.size());
        int best_pos = 0;
        double best_inc = std::numeric_limits<double>::infinity();
        for (int pos = 0; pos < k; ++pos) {
            const int u = order[pos];
            const int v = order[(pos + 1) % k];
            const double inc = euclidean(inst.coords[u], inst.coords[pick]) +
                               euclidean(inst.coords[pick], inst.coords[v]) -
                               euclidean(inst.coords[u], inst.coords[v]);
            if (inc < best_inc) {
                best_inc = inc;
                best_pos = pos;
            }
        }
        order.insert(order.begin() + best_pos + 1, pick);
        in_tour[pick] = 1;
        for (int j = 0; j < n; ++j)
            if (!in_tour[j])
                dist_to_tour[j] =
                    std::min(dist_to_tour[j], euclidean(inst.coords[j], inst.coords[pick]));
    }
    return Tour{order, tour_length(inst, order)};
}

// Best-improvement 2-opt: each sweep scans all exchanges in lexicographic
// order and applies the single best one; stops after max_no_improve_sweeps
// consecutive sweeps without a strict improvement (threshold 1e-12).
inline Tour two_opt(const Instance& inst, const Tour& start_tour, int max_no_improve_sweeps = 1) {
    const int n = inst.n();
    check_permutation(n, start_tour.order, "two_opt");
    std::vector<int> order = start_tour.order;
    if (n < 4) return Tour{order, tour_length(inst, order)};

    constexpr double kMinGain = 1e-12;
    const auto& c = inst.coords;
    int idle_sweeps = 0;
    while (idle_sweeps < max_no_improve_sweeps) {
        double best_delta = -kMinGain;
        int best_i = -1, best_j = -1;
        for (int i = 0; i < n - 1; ++i) {
            const int ai = order[i];
            const int bi = order[i + 1];
            const double d_ab = euclidean(c[ai], c[bi]);
            for (int j = i + 2; j < n; ++j) {
                if (i == 0 && j == n - 1) continue;  // same edge pair on the cycle
                const int cj = order[j];
                const int dj = order[(j + 1) % n];
                const double delta = euclidean(c[ai], c[cj]) + euclidean(c[bi], c[dj]) -
                                     d_ab - euclidean(c[cj], c[dj]);
                if (delta < best_delta) {
                    best_delta = delta;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i >= 0) {
            std::reverse(order.begin() + best_i + 1, order.begin() + best_j + 1);
            idle_sweeps = 0;
        } else {
            ++idle_sweeps;
        }
    }
    return Tour{order, tour_length(inst, order)};
}

inline Tour two_opt(const Instance& inst, const std::vector<int>& start_order,
                    int max_no_improve_sweeps = 1) {
    return two_opt(inst, Tour{start_order, 0.0}, max_no_improve_sweeps);
}

// Uniformly random permutation (Fisher-Yates), deterministic per seed.
inline Tour random_tour(const Instance& inst, std::uint64_t seed) {
    const int n = inst.n();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Engine eng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng::index(eng, static_cast<std::uint64_t>(i) + 1));
        std::swap(order[i], order[j]);
    }
    return Tour{order, tour_length(inst, order)};
}

// True iff no 2-exchange strictly shortens the tour; used by tests.
inline bool is_two_opt_optimal(const Instance& inst, const std::vector<int>& order,
                               double threshold = 1e-12) {
    const int n = inst.n();
    if (n < 4) return true;
    const auto& c = inst.coords;
    for (int i = 0; i < n - 1; ++i)
        for (int j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;
            const double delta = euclidean(c[order[i]], c[order[j]]) +
                                 euclidean(c[order[i + 1]], c[order[(j + 1) % n]]) -
                                 euclidean(c[order[i]], c[order[i + 1]]) -
                                 euclidean(c[order[j]], c[order[(j + 1) % n]]);
            if (delta < -threshold) return false;
        }
    return true;
}

}  // namespace hpn

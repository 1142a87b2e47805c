#pragma once

// Problem instances, tours, tour length, and seeded instance generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpn {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Instance {
    std::vector<Point> coords;

    int n() const { return static_cast<int>(coords.size()); }
};

struct Tour {
    std::vector<int> order;
    double length = 0.0;
};

// ---------------------------------------------------------------------------
// Repo-wide RNG: mt19937_64 everywhere, with draws mapped to doubles by hand
// so generated data does not depend on the standard library's distribution
// implementations. Determinism is promised per seed within this codebase.
// ---------------------------------------------------------------------------

namespace rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives independent sub-seeds from one master seed.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

// Uniform in [0, 1).
inline double unit(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, k), rejection-sampled.
inline std::uint64_t index(Engine& eng, std::uint64_t k) {
    if (k <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % k;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % k;
}

}  // namespace rng

// ---------------------------------------------------------------------------
// Distances and tour length
// ---------------------------------------------------------------------------

inline double euclidean(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline void check_permutation(int n, const std::vector<int>& order, const char* who) {
    if (static_cast<int>(order.size()) != n)
        throw std::invalid_argument(std::string(who) + ": order has " +
                                    std::to_string(order.size()) + " entries for " +
                                    std::to_string(n) + " cities");
    std::vector<std::uint8_t> seen(n, 0);
    for (int v : order) {
        if (v < 0 || v >= n || seen[v])
            throw std::invalid_argument(std::string(who) + ": order is not a permutation of 0.." +
                                        std::to_string(n - 1));
        seen[v] = 1;
    }
}

// Closed-tour length: consecutive edges plus the edge back to the start.
inline double tour_length(const Instance& inst, const std::vector<int>& order) {
    check_permutation(inst.n(), order, "tour_length");
    const int n = inst.n();
    if (n <= 1) return 0.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        total += euclidean(inst.coords[order[i]], inst.coords[order[(i + 1) % n]]);
    return total;
}

inline std::vector<std::vector<double>> distance_matrix(const Instance& inst) {
    const int n = inst.n();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            d[i][j] = d[j][i] = euclidean(inst.coords[i], inst.coords[j]);
    return d;
}

// ---------------------------------------------------------------------------
// Instance generation
// ---------------------------------------------------------------------------

inline std::vector<Instance> generate_uniform(int n, int count, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_uniform: n must be >= 1");
    if (count < 0) throw std::invalid_argument("generate_uniform: count must be >= 0");
    rng::Engine eng(seed);
    std::vector<Instance> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        Instance inst;
        inst.coords.resize(n);
        for (int i = 0; i < n; ++i) {
            inst.coords[i].x = rng::unit(eng);
            inst.coords[i].y = rng::unit(eng);
        }
        out.push_back(std::move(inst));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact solver for oracle-scale instances
// ---------------------------------------------------------------------------

// Enumerates the (n-1)!/2 distinct cyclic orders: city 0 fixed first and
// mirrored tours skipped by requiring order[1] < order[n-1].
inline Tour brute_force_optimal(const Instance& inst) {
    const int n = inst.n();
    if (n > 10)
        throw std::invalid_argument("brute_force_optimal: n = " + std::to_string(n) +
                                    " exceeds the enumeration limit of 10");
    if (n < 1) throw std::invalid_argument("brute_force_optimal: empty instance");
    if (n == 1) return Tour{{0}, 0.0};

    std::vector<int> rest(n - 1);
    std::iota(rest.begin(), rest.end(), 1);
    std::vector<int> best;
    double best_len = std::numeric_limits<double>::infinity();
    std::vector<int> order(n);
    order[0] = 0;
    do {
        if (n > 2 && rest.front() > rest.back()) continue;
        std::copy(rest.begin(), rest.end(), order.begin() + 1);
        const double len = tour_length(inst, order);
        if (len < best_len) {
            best_len = len;
            best = order;
        }
    } while (std::next_permutation(rest.begin(), rest.end()));
    return Tour{best, best_len};
}

// ---------------------------------------------------------------------------
// Batch file format: header "n count", then count blocks of n "x y" lines.
// ---------------------------------------------------------------------------

inline void write_instance_batch(std::ostream& os, const std::vector<Instance>& batch, int n) {
    os << n << " " << batch.size() << "\n";
    char buf[64];
    for (const auto& inst : batch) {
        if (inst.n() != n)
            throw std::invalid_argument("write_instance_batch: instance has " +
                                        std::to_string(inst.n()) + " cities, header says " +
                                        std::to_string(n));
        for (const auto& p : inst.coords) {
            std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x, p.y);
            os << buf;
        }
    }
}

inline void write_instance_batch(const std::string& path, const std::vector<Instance>& batch,
                                 int n) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("write_instance_batch: cannot open '" + path + "'");
    write_instance_batch(os, batch, n);
    if (!os) throw std::runtime_error("write_instance_batch: write to '" + path + "' failed");
}

inline std::vector<Instance> read_instance_batch(std::istream& is) {
    int n = 0, count = 0;
    if (!(is >> n >> count))
        throw std::runtime_error("read_instance_batch: missing 'n count' header");
    if (n < 1 || count < 0)
        throw std::runtime_error("read_instance_batch: invalid header " + std::to_string(n) +
                                 " " + std::to_string(count));
    std::vector<Instance> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        Instance inst;
        inst.coords.resize(n);
        for (int i = 0; i < n; ++i) {
            if (!(is >> inst.coords[i].x >> inst.coords[i].y))
                throw std::runtime_error("read_instance_batch: truncated at instance " +
                                         std::to_string(c) + ", city " + std::to_string(i));
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::vector<Instance> read_instance_batch(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_instance_batch: cannot open '" + path + "'");
    return read_instance_batch(is);
}

}  // namespace hpn

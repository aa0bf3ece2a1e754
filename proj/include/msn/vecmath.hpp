#ifndef MSN_VECMATH_HPP
#define MSN_VECMATH_HPP

// Parameter-vector arithmetic, the seeded randomness contract, Xavier-normal
// initialization and the Canberra distance used for anchor separation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "msn/errors.hpp"

namespace msn {

/// Flat sequence of real-valued weights; the unit of search.
using ParameterVector = std::vector<double>;

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Identifies a deterministic random substream. Equal handles yield equal
/// draw sequences; the handle itself holds no generator state.
struct RngHandle {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    [[nodiscard]] Engine engine() const {
        return Engine(detail::splitmix64(seed ^ detail::splitmix64(stream ^ 0xd1b54a32d192ed03ULL)));
    }

    /// Child substream keyed by `tag`. Distinct tags give unrelated streams.
    [[nodiscard]] RngHandle derive(std::uint64_t tag) const noexcept {
        return {seed, detail::splitmix64(stream ^ detail::splitmix64(tag + 0x632be59bd9b4e019ULL))};
    }

    friend bool operator==(const RngHandle&, const RngHandle&) = default;
};

/// Canberra distance: sum of |x_i - y_i| / (|x_i| + |y_i|). A coordinate where
/// both entries are zero contributes nothing.
inline double canberra_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("canberra_distance: length " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == y[i]) continue;
        sum += std::abs(x[i] - y[i]) / (std::abs(x[i]) + std::abs(y[i]));
    }
    return sum;
}

/// canberra_distance(x, y) >= threshold, stopping as soon as the partial sum
/// (non-decreasing) gets there.
inline bool canberra_at_least(std::span<const double> x, std::span<const double> y, double threshold) {
    if (x.size() != y.size()) throw DimensionError("canberra_at_least: length mismatch");
    if (threshold <= 0.0) return true;
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == y[i]) continue;
        sum += std::abs(x[i] - y[i]) / (std::abs(x[i]) + std::abs(y[i]));
        if (sum >= threshold) return true;
    }
    return false;
}

inline double xavier_normal_std(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

/// Fills `out` with N(0, sqrt(2 / (fan_in + fan_out))) draws taken from `engine`.
inline void xavier_normal_fill(std::span<double> out, std::size_t fan_in, std::size_t fan_out, Engine& engine) {
    std::normal_distribution<double> dist(0.0, xavier_normal_std(fan_in, fan_out));
    for (auto& v : out) v = dist(engine);
}

inline ParameterVector xavier_normal_init(std::size_t fan_in, std::size_t fan_out, std::size_t count, RngHandle rng) {
    if (fan_in == 0 || fan_out == 0) throw ArgumentError("xavier_normal_init: fan_in and fan_out must be >= 1");
    ParameterVector out(count);
    auto engine = rng.engine();
    xavier_normal_fill(out, fan_in, fan_out, engine);
    return out;
}

/// Uniformly random k-subset of [0, n), returned in ascending order.
inline std::vector<std::size_t> choose_indices(std::size_t n, std::size_t k, Engine& engine) {
    if (k > n) {
        throw ArgumentError("choose_indices: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    }
    std::vector<std::size_t> out;
    out.reserve(k);
    if (k == 0) return out;
    if (k * 8 < n) {
        // Floyd's sampling: O(k) memory, suited to huge parameter vectors.
        std::unordered_set<std::size_t> chosen;
        chosen.reserve(k * 2);
        for (std::size_t j = n - k; j < n; ++j) {
            std::uniform_int_distribution<std::size_t> pick(0, j);
            const std::size_t t = pick(engine);
            const std::size_t v = chosen.contains(t) ? j : t;
            chosen.insert(v);
            out.push_back(v);
        }
    } else {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(all[i], all[pick(engine)]);
        }
        out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::size_t> choose_indices(std::size_t n, std::size_t k, RngHandle rng) {
    auto engine = rng.engine();
    return choose_indices(n, k, engine);
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace msn

#endif  // MSN_VECMATH_HPP

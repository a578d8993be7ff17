#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sptree/rng.hpp"

namespace sptree {

// Raised when a continuum computation hits a configuration the quotient-tree
// model excludes (e.g. merged branch points of degree four).
struct DegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A tree point is an equivalence class of times; we carry one representative.
struct TreePoint {
    double time = 0.0;
};

// Nonnegative grid function on [0, tau], zero exactly at the endpoints.
// Codes a rooted real tree through the path-minimum metric.
class Excursion {
public:
    Excursion(std::vector<double> values, double tau)
        : values_(std::move(values)), tau_(tau) {
        if (values_.size() < 2)
            throw std::invalid_argument("Excursion: need at least 2 grid points");
        if (!(tau_ > 0.0))
            throw std::invalid_argument("Excursion: tau must be positive");
        if (values_.front() != 0.0 || values_.back() != 0.0)
            throw std::invalid_argument("Excursion: endpoints must be exactly zero");
        for (std::size_t i = 1; i + 1 < values_.size(); ++i) {
            if (!(values_[i] > 0.0))
                throw std::invalid_argument(
                    "Excursion: interior values must be strictly positive");
        }
        grid_step_ = tau_ / static_cast<double>(values_.size() - 1);
    }

    // Normalized Brownian excursion (tau = 1) by the Vervaat construction:
    // discrete Brownian bridge, cyclic shift at its argmin (lowest index on
    // ties), sign flip. Exact in law at grid resolution.
    static Excursion sample_normalized(std::size_t grid_size, Rng& rng) {
        if (grid_size < 2)
            throw std::invalid_argument("sample_normalized_excursion: grid_size >= 2");
        const std::size_t steps = grid_size - 1;
        const double sd = std::sqrt(1.0 / static_cast<double>(steps));
        std::vector<double> walk(grid_size);
        walk[0] = 0.0;
        for (std::size_t i = 1; i < grid_size; ++i)
            walk[i] = walk[i - 1] + sd * rng.normal();
        const double drift = walk.back();
        std::size_t argmin = 0;
        double minval = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
            const double bridge =
                walk[i] - drift * static_cast<double>(i) / static_cast<double>(steps);
            if (bridge < minval) {
                minval = bridge;
                argmin = i;
            }
        }
        std::vector<double> exc(grid_size);
        for (std::size_t j = 0; j < grid_size; ++j) {
            const std::size_t i = (argmin + j) % steps;
            const double bridge =
                walk[i] - drift * static_cast<double>(i) / static_cast<double>(steps);
            exc[j] = bridge - minval;
        }
        exc[0] = 0.0;
        exc[steps] = 0.0;
        // ties with the bridge minimum in the interior have probability zero;
        // clamp any negative rounding dust
        for (std::size_t j = 1; j < steps; ++j) {
            if (exc[j] <= 0.0) exc[j] = std::numeric_limits<double>::min();
        }
        return Excursion(std::move(exc), 1.0);
    }

    const std::vector<double>& values() const noexcept { return values_; }
    double tau() const noexcept { return tau_; }
    double grid_step() const noexcept { return grid_step_; }
    std::size_t size() const noexcept { return values_.size(); }

    // Snap a time in [0, tau] to the nearest grid index.
    std::size_t snap(double t) const {
        const double slack = 1e-9 * tau_;
        if (t < -slack || t > tau_ + slack)
            throw std::out_of_range("Excursion: time outside [0, tau]");
        const double pos = std::clamp(t, 0.0, tau_) / grid_step_;
        std::size_t idx = static_cast<std::size_t>(std::llround(pos));
        return std::min(idx, values_.size() - 1);
    }

    double time_of(std::size_t idx) const { return static_cast<double>(idx) * grid_step_; }
    double value_at(double t) const { return values_[snap(t)]; }

    double height() const noexcept {
        return *std::max_element(values_.begin(), values_.end());
    }

private:
    std::vector<double> values_;
    double tau_;
    double grid_step_;
};

// Sparse-table interval minimum over a value array. Queries are O(1); argmin
// ties break to the lowest index.
class RangeMinIndex {
public:
    explicit RangeMinIndex(const std::vector<double>& values) : values_(&values) {
        const std::size_t n = values.size();
        if (n == 0) throw std::invalid_argument("RangeMinIndex: empty array");
        levels_ = 1;
        while ((std::size_t{1} << levels_) <= n) ++levels_;
        table_.resize(levels_);
        table_[0].resize(n);
        for (std::size_t i = 0; i < n; ++i) table_[0][i] = static_cast<std::uint32_t>(i);
        for (std::size_t k = 1; k < levels_; ++k) {
            const std::size_t span = std::size_t{1} << k;
            if (span > n) break;
            table_[k].resize(n - span + 1);
            for (std::size_t i = 0; i + span <= n; ++i) {
                const std::uint32_t a = table_[k - 1][i];
                const std::uint32_t b = table_[k - 1][i + span / 2];
                table_[k][i] = (*values_)[b] < (*values_)[a] ? b : a;
            }
        }
    }

    explicit RangeMinIndex(const Excursion& exc) : RangeMinIndex(exc.values()) {}

    // Index of the minimum over [min(i,j), max(i,j)], first on ties.
    std::size_t argmin(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        if (j >= values_->size()) throw std::out_of_range("RangeMinIndex: index");
        const std::size_t len = j - i + 1;
        const std::size_t k = std::bit_width(len) - 1;
        const std::uint32_t a = table_[k][i];
        const std::uint32_t b = table_[k][j + 1 - (std::size_t{1} << k)];
        if ((*values_)[a] < (*values_)[b]) return a;
        if ((*values_)[b] < (*values_)[a]) return b;
        return std::min(a, b);
    }

    double min_value(std::size_t i, std::size_t j) const {
        return (*values_)[argmin(i, j)];
    }

private:
    const std::vector<double>* values_;
    std::size_t levels_ = 0;
    std::vector<std::vector<std::uint32_t>> table_;
};

// m_v(s, t): minimum of the excursion over the closed time interval.
inline double path_minimum(const Excursion& exc, const RangeMinIndex& idx, double s,
                           double t) {
    return idx.min_value(exc.snap(s), exc.snap(t));
}

// d_v(s, t) = v(s) + v(t) - 2 m_v(s, t).
inline double tree_distance(const Excursion& exc, const RangeMinIndex& idx, double s,
                            double t) {
    const std::size_t i = exc.snap(s), j = exc.snap(t);
    return exc.values()[i] + exc.values()[j] - 2.0 * idx.min_value(i, j);
}

// Representative time of the ancestor of [t] at height h (0 <= h <= v(t)):
// the latest grid time s <= t with v(s) <= h. v(s) then equals the requested
// height up to one grid cell.
inline std::size_t ancestor_index(const Excursion& exc, const RangeMinIndex& idx,
                                  std::size_t t_idx, double h) {
    const auto& v = exc.values();
    if (v[t_idx] <= h) return t_idx;
    // g(x) := min v[x..t] <= h is monotone in x (true at 0 since v[0] = 0);
    // the largest x with g(x) true is the latest index with v <= h.
    std::size_t lo = 0, hi = t_idx;
    while (lo + 1 < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (idx.min_value(mid, t_idx) <= h)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

struct BranchPoint {
    TreePoint point;   // grid-time representative
    double depth = 0;  // height of the branch point, d(root, b)
};

// Unique branch point of three tree points. Its height is the largest of the
// three pairwise meet heights, attained by the closest pair, and the point is
// that pair's meet.
inline BranchPoint branch_point(const Excursion& exc, const RangeMinIndex& idx,
                                double s1, double s2, double s3) {
    const std::size_t i1 = exc.snap(s1), i2 = exc.snap(s2), i3 = exc.snap(s3);
    const double m12 = idx.min_value(i1, i2);
    const double m13 = idx.min_value(i1, i3);
    const double m23 = idx.min_value(i2, i3);
    std::size_t a = i1, b = i2;
    double best = m12;
    if (m13 > best) {
        best = m13;
        a = i1;
        b = i3;
    }
    if (m23 > best) {
        best = m23;
        a = i2;
        b = i3;
    }
    const std::size_t rep = idx.argmin(a, b);
    return {TreePoint{exc.time_of(rep)}, exc.values()[rep]};
}

inline double height(const Excursion& exc) { return exc.height(); }

// Maximal grid interval of {v > level}; lo/hi are the bracketing grid times
// with v <= level (exactly the level when it is hit on-grid).
struct SubtreeInterval {
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.0;
    double root_time = 0.0;
    double subtree_height = 0.0;  // max of v - level over the interval
};

inline std::vector<SubtreeInterval> decompose_above_level(const Excursion& exc,
                                                          double level) {
    if (level < 0.0) throw std::invalid_argument("decompose_above_level: level >= 0");
    const auto& v = exc.values();
    std::vector<SubtreeInterval> out;
    const std::size_t n = v.size();
    std::size_t i = 0;
    while (i < n) {
        if (v[i] > level) {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            double peak = v[i];
            while (i < n && v[i] > level) {
                peak = std::max(peak, v[i]);
                ++i;
            }
            const std::size_t hi = i < n ? i : n - 1;
            out.push_back({exc.time_of(lo), exc.time_of(hi), level, exc.time_of(lo),
                           peak - level});
        } else {
            ++i;
        }
    }
    return out;
}

struct LocalTimeMass {
    double mass = 0.0;
    bool resolution_warning = false;
};

// eps x #(subtrees above the level with height >= eps). The warning flags eps
// below the per-step height fluctuation scale, where counts are unresolved.
inline LocalTimeMass local_time_mass(const Excursion& exc, double level, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("local_time_mass: eps > 0");
    LocalTimeMass result;
    const auto& v = exc.values();
    double sum_sq = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        sum_sq += d * d;
    }
    const double rms_step = std::sqrt(sum_sq / static_cast<double>(v.size() - 1));
    result.resolution_warning = eps < 4.0 * rms_step;
    std::size_t count = 0;
    for (const auto& sub : decompose_above_level(exc, level)) {
        if (sub.subtree_height >= eps) ++count;
    }
    result.mass = eps * static_cast<double>(count);
    return result;
}

// Mass-measure sample: the class of a uniform time on [0, tau].
inline TreePoint sample_mass_point(const Excursion& exc, Rng& rng) {
    return TreePoint{exc.tau() * rng.uniform01()};
}

// Superlevel-set persistence pairs (birth height, death height) of the grid
// excursion, elder rule. Used by the level-count bookkeeping and tests:
// #(subtrees above t with height >= eps) == #{pairs: death <= t <= birth - eps}.
inline std::vector<std::pair<double, double>> persistence_pairs(
    const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    });
    std::vector<std::int64_t> parent(n, -1);
    std::vector<double> birth(n, 0.0);
    std::vector<std::pair<double, double>> pairs;
    auto find = [&](std::size_t x) {
        std::size_t root = x;
        while (parent[root] != static_cast<std::int64_t>(root))
            root = static_cast<std::size_t>(parent[root]);
        while (parent[x] != static_cast<std::int64_t>(root)) {
            const std::size_t next = static_cast<std::size_t>(parent[x]);
            parent[x] = static_cast<std::int64_t>(root);
            x = next;
        }
        return root;
    };
    for (const std::size_t i : order) {
        parent[i] = static_cast<std::int64_t>(i);
        birth[i] = v[i];
        for (const std::size_t j : {i == 0 ? n : i - 1, i + 1}) {
            if (j >= n || parent[j] < 0) continue;
            std::size_t ri = find(i), rj = find(j);
            if (ri == rj) continue;
            if (birth[ri] < birth[rj]) std::swap(ri, rj);
            pairs.emplace_back(birth[rj], v[i]);  // younger dies here
            parent[rj] = static_cast<std::int64_t>(ri);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (parent[i] >= 0 && find(i) == i) pairs.emplace_back(birth[i], 0.0);
    }
    return pairs;
}

}  // namespace sptree

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sptree/excursion.hpp"
#include "sptree/rng.hpp"

namespace sptree {

struct UnsatisfiableCondition : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Critical offspring law (mean one, positive finite variance).
class OffspringDist {
public:
    enum class Kind { geometric, poisson, binomial, table };

    // p_k = (1-q) q^k; critical only at q = 1/2, the default example.
    static OffspringDist geometric(double q = 0.5) {
        OffspringDist d;
        d.kind_ = Kind::geometric;
        d.q_ = q;
        d.mean_ = q / (1.0 - q);
        d.variance_ = q / ((1.0 - q) * (1.0 - q));
        d.validate();
        return d;
    }

    static OffspringDist poisson1() {
        OffspringDist d;
        d.kind_ = Kind::poisson;
        d.mean_ = 1.0;
        d.variance_ = 1.0;
        return d;
    }

    static OffspringDist binomial(int m, double p) {
        OffspringDist d;
        d.kind_ = Kind::binomial;
        d.m_ = m;
        d.q_ = p;
        d.mean_ = m * p;
        d.variance_ = m * p * (1.0 - p);
        d.validate();
        return d;
    }

    static OffspringDist table(std::vector<double> pmf) {
        OffspringDist d;
        d.kind_ = Kind::table;
        d.pmf_ = std::move(pmf);
        double total = 0.0, mean = 0.0, second = 0.0;
        for (std::size_t k = 0; k < d.pmf_.size(); ++k) {
            if (d.pmf_[k] < 0.0)
                throw std::invalid_argument("OffspringDist: negative pmf entry");
            total += d.pmf_[k];
            mean += static_cast<double>(k) * d.pmf_[k];
            second += static_cast<double>(k) * static_cast<double>(k) * d.pmf_[k];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("OffspringDist: pmf must sum to 1");
        d.mean_ = mean;
        d.variance_ = second - mean * mean;
        d.validate();
        return d;
    }

    Kind kind() const noexcept { return kind_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }
    double sigma() const noexcept { return std::sqrt(variance_); }
    const std::vector<double>& pmf() const { return pmf_; }
    double pmf_at(int k) const {
        switch (kind_) {
            case Kind::geometric: return (1.0 - q_) * std::pow(q_, k);
            case Kind::poisson: {
                double f = std::exp(-1.0);
                for (int i = 1; i <= k; ++i) f /= i;
                return f;
            }
            case Kind::binomial: {
                if (k > m_) return 0.0;
                double c = 1.0;
                for (int i = 0; i < k; ++i) c = c * (m_ - i) / (i + 1);
                return c * std::pow(q_, k) * std::pow(1.0 - q_, m_ - k);
            }
            case Kind::table: return k < static_cast<int>(pmf_.size()) ? pmf_[k] : 0.0;
        }
        return 0.0;
    }
    int binomial_m() const noexcept { return m_; }
    std::string name() const {
        switch (kind_) {
            case Kind::geometric: return "geometric(" + std::to_string(q_) + ")";
            case Kind::poisson: return "poisson(1)";
            case Kind::binomial:
                return "binomial(" + std::to_string(m_) + "," + std::to_string(q_) + ")";
            case Kind::table: return "table";
        }
        return "";
    }

private:
    void validate() const {
        if (std::abs(mean_ - 1.0) > 1e-12)
            throw std::invalid_argument("OffspringDist: mean must be 1 (critical)");
        if (!(variance_ > 0.0) || !std::isfinite(variance_))
            throw std::invalid_argument("OffspringDist: variance must be in (0, inf)");
    }

    Kind kind_ = Kind::poisson;
    double q_ = 0.5;
    int m_ = 0;
    std::vector<double> pmf_;
    double mean_ = 1.0;
    double variance_ = 1.0;
};

// Rooted ordered graph tree in preorder numbering (parent[v] < v, root = 0).
class OrderedTree {
public:
    // offspring[i] = child count of the i-th vertex in preorder
    explicit OrderedTree(const std::vector<int>& offspring) {
        const std::size_t n = offspring.size();
        if (n == 0) throw std::invalid_argument("OrderedTree: empty");
        parent_.assign(n, -1);
        std::vector<std::pair<int, int>> stack;  // (vertex, remaining children)
        stack.reserve(64);
        stack.push_back({0, offspring[0]});
        std::size_t next = 1;
        while (next < n) {
            if (stack.empty())
                throw std::invalid_argument("OrderedTree: offspring sequence invalid");
            auto& [v, rem] = stack.back();
            if (rem == 0) {
                stack.pop_back();
                continue;
            }
            --rem;
            parent_[next] = v;
            stack.push_back({static_cast<int>(next), offspring[next]});
            ++next;
        }
        while (!stack.empty()) {
            if (stack.back().second != 0)
                throw std::invalid_argument("OrderedTree: offspring sequence invalid");
            stack.pop_back();
        }
        build_children();
    }

    static OrderedTree from_parents(const std::vector<int>& parent) {
        OrderedTree t;
        t.parent_ = parent;
        if (parent.empty() || parent[0] != -1)
            throw std::invalid_argument("OrderedTree: root must be vertex 0");
        for (std::size_t v = 1; v < parent.size(); ++v) {
            if (parent[v] < 0 || static_cast<std::size_t>(parent[v]) >= v)
                throw std::invalid_argument("OrderedTree: need preorder parents");
        }
        t.build_children();
        return t;
    }

    int n() const noexcept { return static_cast<int>(parent_.size()); }
    int parent(int v) const { return parent_[v]; }
    const std::vector<int>& parents() const noexcept { return parent_; }

    // children of v in planar order
    std::pair<const int*, const int*> children(int v) const {
        return {child_list_.data() + child_start_[v],
                child_list_.data() + child_start_[v + 1]};
    }
    int child_count(int v) const { return child_start_[v + 1] - child_start_[v]; }

    int depth(int v) const { return depth_[v]; }
    const std::vector<int>& depths() const noexcept { return depth_; }

    bool operator==(const OrderedTree& other) const {
        return parent_ == other.parent_;
    }

private:
    OrderedTree() = default;

    void build_children() {
        const std::size_t n = parent_.size();
        child_start_.assign(n + 1, 0);
        for (std::size_t v = 1; v < n; ++v) ++child_start_[parent_[v] + 1];
        for (std::size_t v = 1; v <= n; ++v) child_start_[v] += child_start_[v - 1];
        child_list_.resize(n - 1);
        std::vector<int> fill(child_start_.begin(), child_start_.end() - 1);
        for (std::size_t v = 1; v < n; ++v)
            child_list_[fill[parent_[v]]++] = static_cast<int>(v);
        depth_.assign(n, 0);
        for (std::size_t v = 1; v < n; ++v) depth_[v] = depth_[parent_[v]] + 1;
    }

    std::vector<int> parent_;
    std::vector<int> child_start_;
    std::vector<int> child_list_;
    std::vector<int> depth_;
};

namespace detail {

// Rotate preorder offspring counts (summing to n-1) by the cycle lemma: the
// unique rotation whose Lukasiewicz path stays nonnegative until the end
// starts right after the first prefix-sum minimum.
inline void cycle_rotate(std::vector<int>& counts) {
    const std::size_t n = counts.size();
    std::int64_t sum = 0, minsum = 0;
    std::size_t argmin = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
        sum += counts[i] - 1;
        if (sum < minsum) {
            minsum = sum;
            argmin = i;
        }
    }
    std::rotate(counts.begin(), counts.begin() + (argmin + 1) % n, counts.end());
}

// iid Poisson(1) conditioned on sum = n-1 is multinomial: drop n-1 balls
// uniformly into n boxes.
inline std::vector<int> offspring_poisson(int n, Rng& rng) {
    std::vector<int> counts(n, 0);
    for (int i = 0; i + 1 < n; ++i) ++counts[rng.uniform_below(n)];
    return counts;
}

// iid geometric(q) conditioned on sum = n-1 is uniform over weak
// compositions of n-1 into n parts (the q^sum weight is constant), sampled
// by shuffling the stars-and-bars slots.
inline std::vector<int> offspring_geometric(int n, Rng& rng) {
    if (n == 1) return {0};
    const std::size_t slots = 2 * static_cast<std::size_t>(n) - 2;
    std::vector<std::uint8_t> bar(slots, 0);
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(n); ++i) bar[i] = 1;
    for (std::size_t i = slots - 1; i > 0; --i)
        std::swap(bar[i], bar[rng.uniform_below(i + 1)]);
    std::vector<int> counts(n, 0);
    int part = 0;
    for (std::size_t i = 0; i < slots; ++i) {
        if (bar[i])
            ++part;
        else
            ++counts[part];
    }
    return counts;
}

// iid binomial(m, p) conditioned on sum = n-1: place n-1 successes uniformly
// among the n*m trials (multivariate hypergeometric split).
inline std::vector<int> offspring_binomial(int n, int m, Rng& rng) {
    const std::size_t trials = static_cast<std::size_t>(n) * m;
    if (static_cast<std::size_t>(n - 1) > trials)
        throw UnsatisfiableCondition("binomial offspring cannot reach size");
    std::vector<std::uint8_t> hit(trials, 0);
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(n); ++i) hit[i] = 1;
    for (std::size_t i = trials - 1; i > 0; --i)
        std::swap(hit[i], hit[rng.uniform_below(i + 1)]);
    std::vector<int> counts(n, 0);
    for (std::size_t i = 0; i < trials; ++i)
        if (hit[i]) ++counts[static_cast<int>(i / m)];
    return counts;
}

inline std::vector<int> offspring_table(int n, const OffspringDist& dist, Rng& rng) {
    const auto& pmf = dist.pmf();
    // feasibility: achievable sums of n draws from the support
    int min_k = -1, max_k = -1, gcd_step = 0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (pmf[k] <= 0.0) continue;
        if (min_k < 0) min_k = static_cast<int>(k);
        max_k = static_cast<int>(k);
        gcd_step = std::gcd(gcd_step, static_cast<int>(k) - min_k);
    }
    if (min_k < 0) throw UnsatisfiableCondition("empty offspring support");
    const std::int64_t target = n - 1;
    const std::int64_t lo = static_cast<std::int64_t>(n) * min_k;
    const std::int64_t hi = static_cast<std::int64_t>(n) * max_k;
    const bool reachable =
        target >= lo && target <= hi &&
        (gcd_step == 0 ? target == lo : (target - lo) % gcd_step == 0);
    if (!reachable)
        throw UnsatisfiableCondition("total progeny " + std::to_string(n) +
                                     " unreachable for offspring support");
    // cumulative table + rejection on the conditioned sum
    std::vector<double> cdf(pmf.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        acc += pmf[k];
        cdf[k] = acc;
    }
    std::vector<int> counts(n);
    for (std::int64_t attempt = 0; attempt < 2000000; ++attempt) {
        std::int64_t sum = 0;
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform01() * acc;
            counts[i] = static_cast<int>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            sum += counts[i];
            if (sum > target) break;
            if (sum + (static_cast<std::int64_t>(n) - 1 - i) * max_k < target) break;
        }
        if (sum == target) return counts;
    }
    throw std::runtime_error("offspring_table: rejection budget exhausted");
}

}  // namespace detail

// Ordered GW(dist) tree conditioned on total progeny n: offspring counts
// conditioned to sum to n-1, then the cycle-lemma rotation.
inline OrderedTree sample_conditioned_gw(int n, const OffspringDist& dist, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_conditioned_gw: n >= 1");
    std::vector<int> counts;
    switch (dist.kind()) {
        case OffspringDist::Kind::poisson:
            counts = detail::offspring_poisson(n, rng);
            break;
        case OffspringDist::Kind::geometric:
            counts = detail::offspring_geometric(n, rng);
            break;
        case OffspringDist::Kind::binomial:
            counts = detail::offspring_binomial(n, dist.binomial_m(), rng);
            break;
        case OffspringDist::Kind::table:
            counts = detail::offspring_table(n, dist, rng);
            break;
    }
    detail::cycle_rotate(counts);
    return OrderedTree(counts);
}

// Depth-first contour of an ordered tree: vertex_visits[k], depths[k] for
// k = 0..2n, with visits 1..2n-1 the planar contour and both ends pinned to
// the root (flat end steps).
struct DiscreteTour {
    std::vector<std::int32_t> vertex_visits;
    std::vector<std::int32_t> depths;
    int n = 0;

    double v_norm(std::size_t k) const {  // n^{-1/2} V_n at grid k/(2n)
        return depths[k] / std::sqrt(static_cast<double>(n));
    }
};

inline DiscreteTour dfs_tour(const OrderedTree& tree) {
    const int n = tree.n();
    DiscreteTour tour;
    tour.n = n;
    tour.vertex_visits.reserve(2 * n + 1);
    tour.vertex_visits.push_back(0);
    // iterative contour: emit a vertex on first entry and after each child
    std::vector<std::pair<int, int>> stack;  // (vertex, next child rank)
    stack.push_back({0, 0});
    tour.vertex_visits.push_back(0);
    while (!stack.empty()) {
        auto& [v, rank] = stack.back();
        if (rank < tree.child_count(v)) {
            const int child = tree.children(v).first[rank];
            ++rank;
            tour.vertex_visits.push_back(child);
            stack.push_back({child, 0});
        } else {
            stack.pop_back();
            if (!stack.empty()) tour.vertex_visits.push_back(stack.back().first);
        }
    }
    tour.vertex_visits.push_back(0);
    tour.depths.resize(tour.vertex_visits.size());
    for (std::size_t k = 0; k < tour.vertex_visits.size(); ++k)
        tour.depths[k] = tree.depth(tour.vertex_visits[k]);
    return tour;
}

// Snap t to the adjacent tour grid point with the larger depth.
inline double alpha_n(double t, const DiscreteTour& tour) {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("alpha_n: t in [0,1]");
    const double two_n = 2.0 * tour.n;
    const double lo = std::floor(two_n * t);
    const double hi = std::ceil(two_n * t);
    if (lo == hi) return t;
    const std::size_t klo = static_cast<std::size_t>(lo);
    const std::size_t khi = static_cast<std::size_t>(hi);
    return (tour.depths[klo] >= tour.depths[khi] ? lo : hi) / two_n;
}

// Vertex visited at time 2n alpha_n(u); uniform over vertices for uniform u.
inline int uniform_vertex(const DiscreteTour& tour, double u) {
    const double a = alpha_n(u, tour);
    const std::size_t k = static_cast<std::size_t>(std::llround(2.0 * tour.n * a));
    return tour.vertex_visits[k];
}

// Rebuild the ordered tree from the interior depth sequence (round-trip).
inline OrderedTree tree_from_tour_depths(const std::vector<std::int32_t>& depths) {
    if (depths.size() < 3) return OrderedTree(std::vector<int>{0});
    std::vector<int> parent{-1};
    std::vector<int> spine{0};  // current root path
    for (std::size_t k = 2; k + 1 < depths.size(); ++k) {
        const int d = depths[k];
        const int prev = depths[k - 1];
        if (d == prev + 1) {
            parent.push_back(spine.back());
            spine.push_back(static_cast<int>(parent.size()) - 1);
        } else if (d == prev - 1) {
            spine.pop_back();
        } else {
            throw std::invalid_argument("tree_from_tour_depths: steps must be +-1");
        }
    }
    return OrderedTree::from_parents(parent);
}

}  // namespace sptree

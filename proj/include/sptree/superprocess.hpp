#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sptree/embedding.hpp"
#include "sptree/excursion.hpp"
#include "sptree/rng.hpp"

namespace sptree {

// One Poisson-forest cluster: a height-conditioned excursion with its
// Gaussian embedding.
struct Cluster {
    Excursion exc;
    ContinuumEmbedding emb;
    double height = 0.0;
};

struct ForestSample {
    double eps = 0.0;  // truncation threshold on cluster heights
    std::vector<Cluster> clusters;
};

// Length-mixture truncation bounds, relative to eps^2. The upper bound must
// sit far above (10 eps / E[max])^2 / 2 or the conditional height tail on
// [eps, 10 eps] visibly sags below eps/x: at length_max_factor = 400 the
// deficit at 10 eps is ~26% and a chi-square against eps/x rejects; at 4e4 it
// is under 3%, inside the test's resolution.
struct ForestConfig {
    double length_min_factor = 0.01;     // L_min = factor * eps^2
    double length_max_factor = 40000.0;  // L_max = factor * eps^2
    int max_attempts_per_cluster = 200000;
};

namespace detail {

// Excursion length from the density ~ L^{-3/2} truncated to [lo, hi],
// by inverse CDF.
inline double sample_ito_length(double lo, double hi, Rng& rng) {
    const double a = 1.0 / std::sqrt(lo);
    const double b = 1.0 / std::sqrt(hi);
    const double x = a - rng.uniform01() * (a - b);
    return 1.0 / (x * x);
}

// Rescaling of a normalized excursion to duration L in the normalization of
// the Ito-measure system used here (height tail 1/eps, local-time counts
// integrating to the duration): heights scale by sqrt(2L), time by L. The
// sqrt(2) is what makes the epsilon-subtree counts match the mass measure;
// with bare diffusive scaling they integrate to half the duration.
inline Excursion scale_excursion(const Excursion& unit, double length) {
    std::vector<double> v = unit.values();
    const double s = std::sqrt(2.0 * length);
    for (double& x : v) x *= s;
    return Excursion(std::move(v), length);
}

}  // namespace detail

// Cluster tree law approximating Theta( . | h > eps) by the length-mixture
// rejection sampler; embedded from the origin.
inline Cluster sample_cluster(double eps, int d, std::size_t grid_size, Rng& rng,
                              const ForestConfig& cfg = {}) {
    const double lo = cfg.length_min_factor * eps * eps;
    const double hi = cfg.length_max_factor * eps * eps;
    for (int attempt = 0; attempt < cfg.max_attempts_per_cluster; ++attempt) {
        const double length = detail::sample_ito_length(lo, hi, rng);
        auto unit = Excursion::sample_normalized(grid_size, rng);
        const double h = std::sqrt(2.0 * length) * unit.height();
        if (h > eps) {
            auto exc = detail::scale_excursion(unit, length);
            auto emb = embed_continuum(exc, d, rng);
            return {std::move(exc), std::move(emb), h};
        }
    }
    throw std::runtime_error("sample_cluster: rejection budget exhausted");
}

// K ~ Poisson(1/eps) clusters, each conditioned on height > eps.
inline ForestSample sample_truncated_forest(double eps, int d,
                                            std::size_t grid_size, Rng& rng,
                                            const ForestConfig& cfg = {}) {
    if (!(eps > 0.0))
        throw std::invalid_argument("sample_truncated_forest: eps > 0");
    ForestSample forest;
    forest.eps = eps;
    const int count = rng.poisson(1.0 / eps);
    forest.clusters.reserve(count);
    for (int i = 0; i < count; ++i)
        forest.clusters.push_back(sample_cluster(eps, d, grid_size, rng, cfg));
    return forest;
}

// Weighted atoms in R^d.
struct LevelMeasure {
    std::vector<double> positions;  // row-major count x dim
    std::vector<double> weights;
    int dim = 0;

    std::size_t count() const { return weights.size(); }
    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

// Discretized Z_t: one atom per epsilon-subtree above the level, at the
// embedded subtree root, weight eps_lt. At t = 0 the convention atom delta_0.
inline LevelMeasure level_measure(const ForestSample& forest, double t,
                                  double eps_lt) {
    if (t < 0.0) throw std::invalid_argument("level_measure: t >= 0");
    LevelMeasure out;
    out.dim = forest.clusters.empty() ? 0 : forest.clusters[0].emb.dim();
    if (t == 0.0) {
        out.dim = std::max(out.dim, 1);
        out.positions.assign(out.dim, 0.0);
        out.weights.assign(1, 1.0);
        return out;
    }
    for (const auto& cluster : forest.clusters) {
        for (const auto& sub : decompose_above_level(cluster.exc, t)) {
            if (sub.subtree_height < eps_lt) continue;
            const std::size_t root_idx = cluster.exc.snap(sub.root_time);
            auto pos = cluster.emb.at(root_idx);
            out.positions.insert(out.positions.end(), pos.begin(), pos.end());
            out.weights.push_back(eps_lt);
        }
    }
    return out;
}

// Union over clusters of all embedded grid positions at positive height.
inline std::vector<double> range_cloud(const ForestSample& forest) {
    std::vector<double> out;
    for (const auto& cluster : forest.clusters) {
        const auto& v = cluster.exc.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] > 0.0) {
                auto pos = cluster.emb.at(i);
                out.insert(out.end(), pos.begin(), pos.end());
            }
        }
    }
    return out;
}

// Riemann sum over levels of the total level-measure weight; targets the sum
// of cluster durations.
inline double occupation_mass(const ForestSample& forest, double eps_lt,
                              double t_step) {
    if (!(t_step > 0.0)) throw std::invalid_argument("occupation_mass: t_step > 0");
    double hmax = 0.0;
    for (const auto& c : forest.clusters) hmax = std::max(hmax, c.height);
    double total = 0.0;
    for (double t = t_step; t < hmax; t += t_step) {
        for (const auto& cluster : forest.clusters) {
            for (const auto& sub : decompose_above_level(cluster.exc, t)) {
                if (sub.subtree_height >= eps_lt) total += eps_lt * t_step;
            }
        }
    }
    return total;
}

inline double total_duration(const ForestSample& forest) {
    double s = 0.0;
    for (const auto& c : forest.clusters) s += c.exc.tau();
    return s;
}

}  // namespace sptree

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "sptree/excursion.hpp"
#include "sptree/parallel.hpp"
#include "sptree/rng.hpp"
#include "sptree/stats.hpp"
#include "sptree/superprocess.hpp"

using namespace sptree;

TEST_CASE("cluster counts are Poisson(1/eps): eps = 10 case") {
    Rng rng(3);
    const int reps = 10000;
    int empty_forests = 0;
    for (int i = 0; i < reps; ++i) {
        Rng r = rng.split(i);
        auto forest = sample_truncated_forest(10.0, 2, 257, r);
        if (forest.clusters.empty()) ++empty_forests;
        for (const auto& c : forest.clusters) REQUIRE(c.height > 10.0);
    }
    const double p0 = std::exp(-0.1);
    const double se = std::sqrt(p0 * (1.0 - p0) / reps);
    REQUIRE(static_cast<double>(empty_forests) / reps ==
            Catch::Approx(p0).margin(3.5 * se));
}

TEST_CASE("conditional height tail follows eps/x (chi-square)") {
    Rng rng(5);
    const int clusters = 6000;
    const double eps = 1.0;
    std::vector<double> heights(clusters);
    parallel_for(clusters, [&](std::size_t i) {
        Rng r = rng.split(i);
        heights[i] = sample_cluster(eps, 1, 2049, r).height;
    });
    // bins on [eps, 10 eps] from the exact conditional law P(h > x) = eps/x
    std::vector<double> edges{1.0, 1.25, 1.6, 2.0, 2.6, 3.5, 5.0, 7.0, 10.0};
    std::vector<double> observed(edges.size(), 0.0);  // last bin = beyond 10
    std::vector<double> probs(edges.size());
    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        probs[b] = 1.0 / edges[b] - 1.0 / edges[b + 1];
    probs[edges.size() - 1] = 1.0 / edges.back();
    for (double h : heights) {
        std::size_t b = 0;
        while (b + 1 < edges.size() && h >= edges[b + 1]) ++b;
        if (h >= edges.back()) b = edges.size() - 1;
        observed[b] += 1.0;
    }
    auto res = chi_square(observed, probs);
    REQUIRE(res.p_value > 0.01);
}

TEST_CASE("rescaled cluster heights keep the 1/y law (Brownian scaling)") {
    Rng rng(7);
    const double eps = 0.5;
    const int clusters = 4000;
    std::vector<double> rescaled(clusters);
    parallel_for(clusters, [&](std::size_t i) {
        Rng r = rng.split(i);
        rescaled[i] = sample_cluster(eps, 1, 2049, r).height / eps;
    });
    std::vector<double> edges{1.0, 1.4, 2.0, 3.0, 4.5, 7.0, 10.0};
    std::vector<double> observed(edges.size(), 0.0);
    std::vector<double> probs(edges.size());
    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        probs[b] = 1.0 / edges[b] - 1.0 / edges[b + 1];
    probs[edges.size() - 1] = 1.0 / edges.back();
    for (double h : rescaled) {
        std::size_t b = 0;
        while (b + 1 < edges.size() && h >= edges[b + 1]) ++b;
        if (h >= edges.back()) b = edges.size() - 1;
        observed[b] += 1.0;
    }
    REQUIRE(chi_square(observed, probs).p_value > 0.01);
}

TEST_CASE("level_measure: conventions and construction containment") {
    Rng rng(11);
    Rng r = rng.split(0);
    ForestSample forest;
    forest.eps = 1.0;
    forest.clusters.push_back(sample_cluster(1.0, 2, 513, r));
    const auto& cluster = forest.clusters[0];

    // t above every height -> empty
    auto high = level_measure(forest, cluster.height + 1.0, 0.05);
    REQUIRE(high.count() == 0);

    // t = 0 -> unit atom at the origin
    auto zero = level_measure(forest, 0.0, 0.05);
    REQUIRE(zero.count() == 1);
    REQUIRE(zero.weights[0] == 1.0);
    for (int j = 0; j < zero.dim; ++j) REQUIRE(zero.positions[j] == 0.0);

    // atoms lie in the cluster's image point set
    auto mid = level_measure(forest, cluster.height / 2.0, 0.02);
    std::set<std::pair<double, double>> image;
    for (std::size_t i = 0; i < cluster.exc.size(); ++i)
        image.insert({cluster.emb.at(i)[0], cluster.emb.at(i)[1]});
    for (std::size_t a = 0; a < mid.count(); ++a) {
        REQUIRE(image.count({mid.positions[2 * a], mid.positions[2 * a + 1]}) == 1);
        REQUIRE(mid.weights[a] == 0.02);
    }

    REQUIRE_THROWS_AS(level_measure(forest, -1.0, 0.05), std::invalid_argument);
}

TEST_CASE("range_cloud: empty forest, single cluster, atom containment sweep") {
    ForestSample empty;
    empty.eps = 1.0;
    REQUIRE(range_cloud(empty).empty());

    Rng rng(13);
    Rng r = rng.split(1);
    ForestSample forest;
    forest.eps = 1.0;
    forest.clusters.push_back(sample_cluster(1.0, 2, 513, r));
    auto cloud = range_cloud(forest);
    const auto& cluster = forest.clusters[0];
    std::size_t positive = 0;
    for (double v : cluster.exc.values())
        if (v > 0.0) ++positive;
    REQUIRE(cloud.size() == positive * 2);

    std::set<std::pair<double, double>> cloud_set;
    for (std::size_t i = 0; i + 1 < cloud.size(); i += 2)
        cloud_set.insert({cloud[i], cloud[i + 1]});
    for (double t = 0.1; t < cluster.height; t += 0.17) {
        auto lm = level_measure(forest, t, 0.02);
        for (std::size_t a = 0; a < lm.count(); ++a) {
            REQUIRE(cloud_set.count(
                        {lm.positions[2 * a], lm.positions[2 * a + 1]}) == 1);
        }
    }
}

TEST_CASE("occupation mass: empty, single-cluster band, additivity") {
    ForestSample empty;
    empty.eps = 1.0;
    REQUIRE(occupation_mass(empty, 0.01, 0.01) == 0.0);

    // hunt for a cluster with tau close to 0.7 so the band check is meaningful
    Rng rng(17);
    ForestSample forest;
    forest.eps = 1.0;
    for (int i = 0; i < 4000; ++i) {
        Rng r = rng.split(i);
        auto c = sample_cluster(1.0, 1, 8193, r);
        if (std::abs(c.exc.tau() - 0.7) < 0.1) {
            forest.clusters.push_back(std::move(c));
            break;
        }
    }
    REQUIRE(forest.clusters.size() == 1);
    const double tau = forest.clusters[0].exc.tau();
    // eps_lt resolvable against the grid height noise: theta = eps_lt /
    // sqrt(2 tau / G) around 12
    const double eps_lt = 12.0 * std::sqrt(2.0 * tau / 8192.0);
    const double est = occupation_mass(forest, eps_lt, eps_lt / 3.0);
    REQUIRE(est / tau >= 0.75);
    REQUIRE(est / tau <= 1.10);

    // duplication doubles the estimate
    ForestSample doubled = forest;
    doubled.clusters.push_back(forest.clusters[0]);
    // clusters are embedded copies; occupation sums linearly
    const double est2 = occupation_mass(doubled, eps_lt, eps_lt / 3.0);
    REQUIRE(est2 == Catch::Approx(2.0 * est));
}

TEST_CASE("occupation mass tracks total duration across eps (aggregate)") {
    // per-cluster eps_lt keeps the count resolution theta uniform over the
    // heavy-tailed cluster lengths
    Rng rng(19);
    const std::size_t grid = 8193;
    std::vector<double> ratios;
    for (double eps : {0.5, 1.0, 2.0}) {
        double est_total = 0.0, tau_total = 0.0;
        const int forests = 60;
        std::vector<double> est(forests), tau(forests);
        parallel_for(forests, [&](std::size_t i) {
            Rng r = rng.split(static_cast<std::uint64_t>(eps * 1000) + i);
            auto forest = sample_truncated_forest(eps, 1, grid, r);
            double e_acc = 0.0;
            for (auto& cluster : forest.clusters) {
                ForestSample one;
                one.eps = eps;
                one.clusters.push_back(std::move(cluster));
                const double L = one.clusters[0].exc.tau();
                const double eps_lt =
                    12.0 * std::sqrt(2.0 * L / static_cast<double>(grid - 1));
                e_acc += occupation_mass(one, eps_lt, eps_lt / 3.0);
                tau[i] += L;
            }
            est[i] = e_acc;
        });
        for (int i = 0; i < forests; ++i) {
            est_total += est[i];
            tau_total += tau[i];
        }
        ratios.push_back(est_total / tau_total);
        REQUIRE(est_total / tau_total >= 0.75);
        REQUIRE(est_total / tau_total <= 1.10);
    }
    // dilation invariance: the ratio does not depend on eps
    for (double r : ratios)
        REQUIRE(r == Catch::Approx(ratios[0]).margin(0.08));
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "sptree/excursion.hpp"
#include "sptree/gw.hpp"
#include "sptree/rng.hpp"
#include "sptree/stats.hpp"

using namespace sptree;

namespace {

// Exhaustive enumeration of ordered trees with n vertices as offspring
// sequences, with their GW probabilities; the shape-frequency oracle.
void enumerate_trees(int n, std::vector<int>& prefix, int sum, int used,
                     const OffspringDist& dist,
                     std::map<std::vector<int>, double>& out) {
    if (used == n) {
        if (sum == n - 1) {
            // valid iff the sequence is a proper preorder (Lukasiewicz stays
            // nonnegative before the end)
            int s = 0;
            for (int i = 0; i + 1 < n; ++i) {
                s += prefix[i] - 1;
                if (s < 0) return;
            }
            double p = 1.0;
            for (int c : prefix) p *= dist.pmf_at(c);
            out[prefix] = p;
        }
        return;
    }
    for (int c = 0; c + sum <= n - 1; ++c) {
        prefix.push_back(c);
        enumerate_trees(n, prefix, sum + c, used + 1, dist, out);
        prefix.pop_back();
    }
}

std::vector<int> offspring_of(const OrderedTree& t) {
    std::vector<int> c(t.n());
    for (int v = 0; v < t.n(); ++v) c[v] = t.child_count(v);
    return c;
}

}  // namespace

TEST_CASE("offspring distributions enforce criticality") {
    REQUIRE_THROWS_AS(OffspringDist::geometric(0.3), std::invalid_argument);
    REQUIRE_NOTHROW(OffspringDist::geometric(0.5));
    REQUIRE_NOTHROW(OffspringDist::binomial(2, 0.5));
    REQUIRE_THROWS_AS(OffspringDist::binomial(3, 0.5), std::invalid_argument);
    REQUIRE(OffspringDist::poisson1().variance() == 1.0);
    REQUIRE(OffspringDist::geometric(0.5).variance() == Catch::Approx(2.0));
    // deterministic one-child law has zero variance: rejected
    REQUIRE_THROWS_AS(OffspringDist::table({0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("small trees: n=1 and n=2 are deterministic") {
    Rng rng(3);
    for (auto dist : {OffspringDist::poisson1(), OffspringDist::geometric(0.5)}) {
        auto t1 = sample_conditioned_gw(1, dist, rng);
        REQUIRE(t1.n() == 1);
        auto t2 = sample_conditioned_gw(2, dist, rng);
        REQUIRE(t2.n() == 2);
        REQUIRE(t2.parent(1) == 0);
    }
}

TEST_CASE("n=3 geometric: path and cherry each have probability 1/2") {
    // path weight p1*p1*p0 = 1/32 equals cherry weight p2*p0*p0 = 1/32
    auto dist = OffspringDist::geometric(0.5);
    REQUIRE(dist.pmf_at(1) * dist.pmf_at(1) * dist.pmf_at(0) ==
            Catch::Approx(1.0 / 32.0));
    REQUIRE(dist.pmf_at(2) * dist.pmf_at(0) * dist.pmf_at(0) ==
            Catch::Approx(1.0 / 32.0));

    Rng rng(101);
    const int reps = 100000;
    std::vector<double> counts(2, 0.0);  // path, cherry
    for (int i = 0; i < reps; ++i) {
        auto t = sample_conditioned_gw(3, dist, rng);
        counts[t.child_count(0) == 1 ? 0 : 1] += 1.0;
    }
    auto res = chi_square(counts, {0.5, 0.5});
    REQUIRE(res.p_value > 0.01);
}

TEST_CASE("shape frequencies match exact enumeration for n <= 5") {
    Rng rng(211);
    const int reps = 100000;
    for (auto dist : {OffspringDist::poisson1(), OffspringDist::geometric(0.5),
                      OffspringDist::binomial(2, 0.5),
                      OffspringDist::table({0.25, 0.5, 0.25})}) {
        for (int n = 2; n <= 5; ++n) {
            std::map<std::vector<int>, double> exact;
            std::vector<int> prefix;
            enumerate_trees(n, prefix, 0, 0, dist, exact);
            double total = 0.0;
            for (auto& [shape, p] : exact) total += p;
            std::map<std::vector<int>, int> observed;
            Rng r = rng.split(n * 131 + static_cast<int>(dist.kind()));
            for (int i = 0; i < reps; ++i)
                ++observed[offspring_of(sample_conditioned_gw(n, dist, r))];
            // every observed shape must be a valid enumerated shape
            std::vector<double> obs, probs;
            for (auto& [shape, p] : exact) {
                auto it = observed.find(shape);
                if (p == 0.0) {
                    REQUIRE(it == observed.end());  // unreachable shape
                    continue;
                }
                probs.push_back(p / total);
                obs.push_back(it == observed.end() ? 0.0 : it->second);
            }
            double seen = 0.0;
            for (double o : obs) seen += o;
            REQUIRE(seen == static_cast<double>(reps));  // no invalid shapes
            auto res = chi_square(obs, probs);
            INFO(dist.name() << " n=" << n);
            REQUIRE(res.p_value > 0.01);
        }
    }
}

TEST_CASE("binomial support parity: impossible sizes are rejected") {
    // offspring in {0, 2}: total progeny must be odd
    auto dist = OffspringDist::table({0.5, 0.0, 0.5});
    Rng rng(5);
    REQUIRE_THROWS_AS(sample_conditioned_gw(4, dist, rng), UnsatisfiableCondition);
    REQUIRE_NOTHROW(sample_conditioned_gw(5, dist, rng));
}

TEST_CASE("dfs_tour: hand contours for path and star") {
    // path root-a-b
    auto path = OrderedTree(std::vector<int>{1, 1, 0});
    auto tour = dfs_tour(path);
    REQUIRE(tour.depths == std::vector<std::int32_t>{0, 0, 1, 2, 1, 0, 0});
    REQUIRE(tour.vertex_visits == std::vector<std::int32_t>{0, 0, 1, 2, 1, 0, 0});

    // star: root with two leaves
    auto star = OrderedTree(std::vector<int>{2, 0, 0});
    auto stour = dfs_tour(star);
    REQUIRE(stour.depths == std::vector<std::int32_t>{0, 0, 1, 0, 1, 0, 0});
    REQUIRE(stour.vertex_visits == std::vector<std::int32_t>{0, 0, 1, 0, 2, 0, 0});
}

TEST_CASE("dfs_tour: unit steps, edge counts, visit multiplicities") {
    Rng rng(313);
    auto dist = OffspringDist::poisson1();
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_below(60));
        auto t = sample_conditioned_gw(n, dist, rng);
        auto tour = dfs_tour(t);
        REQUIRE(tour.depths.size() == static_cast<std::size_t>(2 * n + 1));
        REQUIRE(tour.depths.front() == 0);
        REQUIRE(tour.depths.back() == 0);
        int up = 0, down = 0;
        for (std::size_t k = 2; k + 1 < tour.depths.size(); ++k) {
            const int step = tour.depths[k] - tour.depths[k - 1];
            REQUIRE(std::abs(step) == 1);
            (step > 0 ? up : down) += 1;
        }
        // each edge contributes one up and one down step
        REQUIRE(up == n - 1);
        REQUIRE(down == n - 1);
        // non-root vertices appear exactly 1 + #children times (interior)
        std::vector<int> visits(n, 0);
        for (std::size_t k = 1; k + 1 < tour.vertex_visits.size(); ++k)
            ++visits[tour.vertex_visits[k]];
        for (int v = 1; v < n; ++v) REQUIRE(visits[v] == 1 + t.child_count(v));
    }
}

TEST_CASE("tour depths reconstruct the tree metric (discrete path-minimum law)") {
    Rng rng(17);
    auto dist = OffspringDist::geometric(0.5);
    for (int rep = 0; rep < 8; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_below(49));
        auto t = sample_conditioned_gw(n, dist, rng);
        auto tour = dfs_tour(t);
        // graph distance oracle by parent walks
        auto dist_graph = [&](int a, int b) {
            int da = t.depth(a), db = t.depth(b), d = 0;
            while (da > db) {
                a = t.parent(a);
                --da;
                ++d;
            }
            while (db > da) {
                b = t.parent(b);
                --db;
                ++d;
            }
            while (a != b) {
                a = t.parent(a);
                b = t.parent(b);
                d += 2;
            }
            return d;
        };
        const std::size_t len = tour.vertex_visits.size();
        for (std::size_t i = 1; i + 1 < len; ++i) {
            for (std::size_t j = i; j + 1 < len; ++j) {
                int vmin = tour.depths[i];
                for (std::size_t k = i; k <= j; ++k)
                    vmin = std::min(vmin, static_cast<int>(tour.depths[k]));
                const int lhs = tour.depths[i] + tour.depths[j] - 2 * vmin;
                REQUIRE(lhs == dist_graph(tour.vertex_visits[i], tour.vertex_visits[j]));
            }
        }
    }
}

TEST_CASE("round-trip: tree -> tour depths -> tree") {
    Rng rng(19);
    auto dist = OffspringDist::poisson1();
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 1 + static_cast<int>(rng.uniform_below(80));
        auto t = sample_conditioned_gw(n, dist, rng);
        auto rebuilt = tree_from_tour_depths(dfs_tour(t).depths);
        REQUIRE(rebuilt == t);
    }
}

TEST_CASE("alpha_n: grid fixed points and uniform bound") {
    auto t = OrderedTree(std::vector<int>{1, 1, 0});
    auto tour = dfs_tour(t);
    const int n = 3;
    for (int k = 0; k <= 2 * n; ++k) {
        const double tt = static_cast<double>(k) / (2 * n);
        REQUIRE(alpha_n(tt, tour) == tt);
    }
    Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        const double tt = rng.uniform01();
        REQUIRE(std::abs(tt - alpha_n(tt, tour)) <= 1.0 / (2 * n) + 1e-15);
    }
}

TEST_CASE("alpha_n pushforward is exactly uniform: 2 grid cells per vertex") {
    Rng rng(29);
    auto dist = OffspringDist::geometric(0.5);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 1 + static_cast<int>(rng.uniform_below(50));
        auto t = sample_conditioned_gw(n, dist, rng);
        auto tour = dfs_tour(t);
        // exact piecewise computation: cell (k, k+1) maps wholly to the deeper
        // endpoint (interior points of the cell), so Lebesgue mass per vertex
        // is (number of assigned cells)/(2n)
        std::vector<int> cells(n, 0);
        for (int k = 0; k < 2 * n; ++k) {
            const std::size_t pick =
                tour.depths[k] >= tour.depths[k + 1] ? k : k + 1;
            ++cells[tour.vertex_visits[pick]];
        }
        for (int v = 0; v < n; ++v) REQUIRE(cells[v] == 2);
    }
}

TEST_CASE("uniform_vertex: root for n=1, exact thirds on the 3-path, chi-square at n=100") {
    auto single = dfs_tour(OrderedTree(std::vector<int>{0}));
    Rng rng(31);
    for (int i = 0; i < 50; ++i)
        REQUIRE(uniform_vertex(single, rng.uniform01()) == 0);

    // n=3 path: preimage masses are exactly 1/3 each (verified by scanning a
    // fine midpoint grid of the 6 cells)
    auto tour = dfs_tour(OrderedTree(std::vector<int>{1, 1, 0}));
    std::vector<int> cellcount(3, 0);
    for (int k = 0; k < 6; ++k)
        ++cellcount[uniform_vertex(tour, (k + 0.5) / 6.0)];
    REQUIRE(cellcount == std::vector<int>{2, 2, 2});

    auto dist = OffspringDist::poisson1();
    auto t100 = sample_conditioned_gw(100, dist, rng);
    auto tour100 = dfs_tour(t100);
    std::vector<double> counts(100, 0.0);
    const int reps = 100000;
    for (int i = 0; i < reps; ++i)
        counts[uniform_vertex(tour100, rng.uniform01())] += 1.0;
    auto res = chi_square(counts, std::vector<double>(100, 0.01));
    REQUIRE(res.p_value > 0.01);
}

TEST_CASE("cross-construction oracle: excursion midpoint matches rescaled GW depth") {
    // law of v(1/2) under the excursion sampler vs the n^{-1/2} depth of the
    // contour midpoint of conditioned GW(Poisson) trees, rescaled by
    // sigma_T = 2/sigma_Z = 2
    Rng rng(37);
    const int reps = 10000;
    const int n = 10000;
    std::vector<double> exc_side(reps), gw_side(reps);
    auto dist = OffspringDist::poisson1();
    for (int i = 0; i < reps; ++i) {
        Rng ra = rng.split(2 * i);
        Rng rb = rng.split(2 * i + 1);
        auto e = Excursion::sample_normalized(1 << 12, ra);
        exc_side[i] = e.value_at(0.5);
        auto t = sample_conditioned_gw(n, dist, rb);
        auto tour = dfs_tour(t);
        gw_side[i] = tour.depths[n] / (2.0 * std::sqrt(static_cast<double>(n)));
    }
    auto res = ks_two_sample(exc_side, gw_side);
    REQUIRE(res.p_value > 0.01);
}

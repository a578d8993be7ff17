#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sptree/embedding.hpp"
#include "sptree/excursion.hpp"
#include "sptree/gw.hpp"
#include "sptree/parallel.hpp"
#include "sptree/rng.hpp"
#include "sptree/stats.hpp"

using namespace sptree;

TEST_CASE("embedding starts at the origin") {
    Rng rng(7);
    auto e = Excursion::sample_normalized(1025, rng);
    auto emb = embed_continuum(e, 3, rng);
    for (double x : emb.at(0)) REQUIRE(x == 0.0);
    for (double x : emb.at(e.size() - 1)) REQUIRE(x == 0.0);  // [tau] = root
    REQUIRE_THROWS_AS(embed_continuum(e, 0, rng), std::invalid_argument);
}

TEST_CASE("head covariance matches the branch-depth kernel (Monte Carlo)") {
    Rng master(11);
    auto e = Excursion::sample_normalized(1 << 10, master);
    RangeMinIndex idx(e);
    const int d = 3;
    const int reps = 20000;
    // 6 random pairs, fixed
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 6; ++i)
        pairs.emplace_back(master.uniform01(), master.uniform01());

    std::vector<std::vector<double>> sums(pairs.size(),
                                          std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> var_s(pairs.size(),
                                           std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> var_t(pairs.size(),
                                           std::vector<double>(d, 0.0));
    for (int rep = 0; rep < reps; ++rep) {
        Rng stream = master.split(rep);
        auto emb = embed_continuum(e, d, stream);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            auto rs = emb.at(e.snap(pairs[p].first));
            auto rt = emb.at(e.snap(pairs[p].second));
            for (int j = 0; j < d; ++j) {
                sums[p][j] += rs[j] * rt[j];
                var_s[p][j] += rs[j] * rs[j];
                var_t[p][j] += rt[j] * rt[j];
            }
        }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double m = path_minimum(e, idx, pairs[p].first, pairs[p].second);
        const double vs = e.value_at(pairs[p].first);
        const double vt = e.value_at(pairs[p].second);
        // var of the product estimator for jointly normal centered pairs
        const double se_cov = std::sqrt((vs * vt + m * m) / reps);
        for (int j = 0; j < d; ++j) {
            REQUIRE(sums[p][j] / reps == Catch::Approx(m).margin(3.5 * se_cov));
            REQUIRE(var_s[p][j] / reps ==
                    Catch::Approx(vs).margin(3.5 * vs * std::sqrt(2.0 / reps)));
            REQUIRE(var_t[p][j] / reps ==
                    Catch::Approx(vt).margin(3.5 * vt * std::sqrt(2.0 / reps)));
        }
    }
}

TEST_CASE("embedding respects the quotient: zero-distance pairs coincide") {
    // lattice-valued excursion so exact d_v = 0 pairs exist
    Rng rng(13);
    auto base = Excursion::sample_normalized(1 << 11, rng);
    std::vector<double> vals = base.values();
    const double lattice = 1.0 / 32.0;
    for (std::size_t i = 1; i + 1 < vals.size(); ++i)
        vals[i] = std::max(lattice, std::round(vals[i] / lattice) * lattice);
    Excursion e(std::move(vals), 1.0);
    RangeMinIndex idx(e);
    auto emb = embed_continuum(e, 4, rng);
    int checked = 0;
    for (std::size_t i = 1; i + 1 < e.size() && checked < 500; i += 3) {
        for (std::size_t j = i + 2; j < std::min(i + 200, e.size() - 1); ++j) {
            if (tree_distance(e, idx, e.time_of(i), e.time_of(j)) == 0.0) {
                auto a = emb.at(i);
                auto b = emb.at(j);
                for (int k = 0; k < 4; ++k) REQUIRE(a[k] == b[k]);
                ++checked;
                break;
            }
        }
    }
    REQUIRE(checked > 50);
}

TEST_CASE("near-pairs have small displacement (probabilistic modulus)") {
    Rng rng(17);
    auto e = Excursion::sample_normalized(1 << 12, rng);
    RangeMinIndex idx(e);
    const int d = 3;
    auto emb = embed_continuum(e, d, rng);
    const double gs = e.grid_step();
    const double bound = 6.0 * std::sqrt(gs * d * std::log(1.0 / gs));
    // candidate near-pairs: (i, first return strictly below v[i]); keep those
    // with d_v <= 2 grid_step
    int violations = 0, tested = 0;
    for (std::size_t i = 1; i + 1 < e.size(); ++i) {
        for (std::size_t j = i + 1; j < std::min(i + 400, e.size()); ++j) {
            if (e.values()[j] < e.values()[i]) {
                const double dv = tree_distance(e, idx, e.time_of(i), e.time_of(j));
                if (dv <= 2.0 * gs) {
                    ++tested;
                    double norm2 = 0.0;
                    for (int k = 0; k < d; ++k) {
                        const double diff = emb.at(i)[k] - emb.at(j)[k];
                        norm2 += diff * diff;
                    }
                    if (std::sqrt(norm2) > bound) ++violations;
                }
                break;
            }
        }
    }
    REQUIRE(tested > 20);
    REQUIRE(violations <= std::max(1, tested / 100));
}

TEST_CASE("embed_brw: root at origin, one increment at depth 1, path variance") {
    Rng rng(19);
    auto tree = OrderedTree(std::vector<int>{2, 1, 0, 0});  // root-{a-{b}, c}
    auto step = StepDist::gaussian(2);
    auto emb = embed_brw(tree, step, rng);
    for (double x : emb.at(0)) REQUIRE(x == 0.0);

    // depth-1 vertex gets exactly one step: replicate and check variance 1
    const int reps = 30000;
    double s2 = 0.0;
    double sL = 0.0;
    const int L = 5;
    auto path = OrderedTree(std::vector<int>{1, 1, 1, 1, 1, 0});
    for (int i = 0; i < reps; ++i) {
        Rng r = rng.split(i);
        auto em = embed_brw(tree, step, r);
        s2 += em.at(1)[0] * em.at(1)[0];
        Rng r2 = rng.split(reps + i);
        auto emp = embed_brw(path, step, r2);
        sL += emp.at(L)[0] * emp.at(L)[0];
    }
    REQUIRE(s2 / reps == Catch::Approx(1.0).margin(3.0 * std::sqrt(2.0 / reps)));
    REQUIRE(sL / reps ==
            Catch::Approx(L).margin(3.0 * L * std::sqrt(2.0 / reps)));
}

TEST_CASE("embed_brw root-path increments are iid steps (KS on one-step law)") {
    Rng rng(23);
    auto dist = OffspringDist::poisson1();
    auto tree = sample_conditioned_gw(4000, dist, rng);
    auto step = StepDist::gaussian(1);
    auto emb = embed_brw(tree, step, rng);
    // collect increments along the deepest root path
    int deepest = 0;
    for (int v = 0; v < tree.n(); ++v)
        if (tree.depth(v) > tree.depth(deepest)) deepest = v;
    std::vector<double> incs;
    for (int v = deepest; v != 0; v = tree.parent(v))
        incs.push_back(emb.at(v)[0] - emb.at(tree.parent(v))[0]);
    std::vector<double> ref(20000);
    for (auto& x : ref) x = rng.normal();
    if (incs.size() >= 30) {
        auto res = ks_two_sample(incs, ref);
        REQUIRE(res.p_value > 0.001);
    }
}

TEST_CASE("continuity modulus: sup displacement grows with the distance cap") {
    Rng rng(53);
    auto e = Excursion::sample_normalized(1 << 11, rng);
    RangeMinIndex idx(e);
    const int d = 3;
    auto emb = embed_continuum(e, d, rng);
    std::vector<double> caps{0.01, 0.05, 0.2, 1.0};
    std::vector<double> sups(caps.size(), 0.0);
    for (int rep = 0; rep < 30000; ++rep) {
        const std::size_t i = rng.uniform_below(e.size());
        const std::size_t j = rng.uniform_below(e.size());
        const double dv = e.values()[i] + e.values()[j] - 2.0 * idx.min_value(i, j);
        double norm2 = 0.0;
        for (int k = 0; k < d; ++k) {
            const double diff = emb.at(i)[k] - emb.at(j)[k];
            norm2 += diff * diff;
        }
        const double disp = std::sqrt(norm2);
        for (std::size_t c = 0; c < caps.size(); ++c)
            if (dv < caps[c]) sups[c] = std::max(sups[c], disp);
    }
    for (std::size_t c = 1; c < caps.size(); ++c) REQUIRE(sups[c] >= sups[c - 1]);
    // smallness at the finest cap: |r(s)-r(t)| ~ sqrt(d_v * chi^2_d)
    REQUIRE(sups[0] <= 6.0 * std::sqrt(caps[0] * d));
}

TEST_CASE("step distributions are centered with the stated covariance") {
    Rng rng(29);
    for (auto step : {StepDist::gaussian(3), StepDist::axis_uniform(3),
                      StepDist::two_point(3),
                      StepDist::table(2, {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 2.0}, {0.0, -2.0}},
                                      {0.25, 0.25, 0.25, 0.25})}) {
        const int d = step.dim();
        const int reps = 200000;
        std::vector<double> mean(d, 0.0), cov(static_cast<std::size_t>(d) * d, 0.0);
        std::vector<double> y(d);
        for (int i = 0; i < reps; ++i) {
            step.sample(rng, y.data());
            for (int a = 0; a < d; ++a) {
                mean[a] += y[a];
                for (int b = 0; b < d; ++b) cov[a * d + b] += y[a] * y[b];
            }
        }
        for (int a = 0; a < d; ++a) {
            REQUIRE(mean[a] / reps == Catch::Approx(0.0).margin(0.02));
            for (int b = 0; b < d; ++b) {
                REQUIRE(cov[a * d + b] / reps ==
                        Catch::Approx(step.covariance().at(a, b)).margin(0.03));
            }
        }
    }
    REQUIRE_THROWS_AS(StepDist::table(1, {{1.0}}, {1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(
        StepDist::table(1, {{1.0}, {0.5}}, {0.5, 0.5}),
        std::invalid_argument);  // nonzero mean
}

TEST_CASE("normalized_tour: n=1 trivial and the 3-path hand computation") {
    Rng rng(31);
    auto single = OrderedTree(std::vector<int>{0});
    auto emb1 = GraphEmbedding(1, 2);
    auto t1 = normalized_tour(single, emb1);
    for (double x : t1.v) REQUIRE(x == 0.0);
    for (double x : t1.r) REQUIRE(x == 0.0);

    // 3-path with deterministic +e1 increments
    auto path = OrderedTree(std::vector<int>{1, 1, 0});
    GraphEmbedding emb(3, 2);
    emb.at(1)[0] = 1.0;
    emb.at(2)[0] = 2.0;
    auto tour = normalized_tour(path, emb);
    const double s = std::pow(3.0, -0.25);
    std::vector<double> expect_r1{0.0, 0.0, s, 2.0 * s, s, 0.0, 0.0};
    REQUIRE(tour.v.size() == 7);
    for (std::size_t k = 0; k < 7; ++k) {
        REQUIRE(tour.r[k * 2] == Catch::Approx(expect_r1[k]));
        REQUIRE(tour.v[k] ==
                Catch::Approx(std::vector<double>{0, 0, 1, 2, 1, 0, 0}[k] / std::sqrt(3.0)));
    }

    auto mismatched = GraphEmbedding(5, 2);
    REQUIRE_THROWS_AS(normalized_tour(path, mismatched), std::invalid_argument);
}

TEST_CASE("normalized_tour: r constant across repeat visits of a vertex") {
    Rng rng(37);
    auto dist = OffspringDist::geometric(0.5);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_below(30));
        auto tree = sample_conditioned_gw(n, dist, rng);
        auto emb = embed_brw(tree, StepDist::gaussian(2), rng);
        auto tour = normalized_tour(tree, emb);
        auto dt = dfs_tour(tree);
        for (std::size_t i = 0; i < dt.vertex_visits.size(); ++i) {
            for (std::size_t j = i + 1; j < dt.vertex_visits.size(); ++j) {
                if (dt.vertex_visits[i] == dt.vertex_visits[j]) {
                    REQUIRE(tour.r[i * 2] == tour.r[j * 2]);
                    REQUIRE(tour.r[i * 2 + 1] == tour.r[j * 2 + 1]);
                }
            }
        }
    }
}

TEST_CASE("scaling constants: Poisson, geometric, and homogeneity") {
    auto pois = scaling_constants(OffspringDist::poisson1(), StepDist::gaussian(2));
    REQUIRE(pois.sigma_tree == Catch::Approx(2.0));
    REQUIRE(pois.sigma_phi.at(0, 0) == Catch::Approx(std::sqrt(2.0)));
    REQUIRE(pois.sigma_phi.at(0, 1) == Catch::Approx(0.0).margin(1e-12));

    auto geo = scaling_constants(OffspringDist::geometric(0.5), StepDist::gaussian(2));
    REQUIRE(geo.sigma_tree == Catch::Approx(std::sqrt(2.0)));

    // scaling Y by c scales Sigma_phi by c, leaves sigma_T unchanged
    auto scaled = StepDist::table(1, {{3.0}, {-3.0}}, {0.5, 0.5});
    auto base = StepDist::table(1, {{1.0}, {-1.0}}, {0.5, 0.5});
    auto a = scaling_constants(OffspringDist::poisson1(), base);
    auto b = scaling_constants(OffspringDist::poisson1(), scaled);
    REQUIRE(b.sigma_tree == a.sigma_tree);
    REQUIRE(b.sigma_phi.at(0, 0) == Catch::Approx(3.0 * a.sigma_phi.at(0, 0)));
}

TEST_CASE("matrix_sqrt squares back") {
    SymMatrix m = SymMatrix::identity(2, 0.0);
    m.at(0, 0) = 2.0;
    m.at(0, 1) = m.at(1, 0) = 0.5;
    m.at(1, 1) = 1.0;
    auto r = matrix_sqrt(m);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 2; ++k) acc += r.at(i, k) * r.at(k, j);
            REQUIRE(acc == Catch::Approx(m.at(i, j)).margin(1e-10));
        }
}

TEST_CASE("arc_extract: root arcs, monotone prefixes, ancestor characterization") {
    Rng rng(41);
    auto e = Excursion::sample_normalized(1 << 10, rng);
    RangeMinIndex idx(e);
    auto emb = embed_continuum(e, 2, rng);
    auto tour = make_tour(e, emb);

    // t = 0: arc to the root is the single origin point
    auto arc0 = arc_extract(tour, 0.0);
    REQUIRE(arc0.count() == 1);
    REQUIRE(arc0.at(0)[0] == 0.0);

    // monotone-increasing prefix: every earlier grid point is ancestral
    std::vector<double> mono(64);
    for (std::size_t i = 0; i < mono.size(); ++i)
        mono[i] = static_cast<double>(i) / (mono.size() - 1);
    mono.back() = 0.0;
    std::vector<double> monov = mono;
    // make it a valid excursion: rise then collapse at the last step
    Excursion me(std::move(monov), 1.0);
    ContinuumEmbedding memb = embed_continuum(me, 2, rng);
    auto mtour = make_tour(me, memb);
    auto marc = arc_extract(mtour, me.time_of(me.size() - 2));
    REQUIRE(marc.count() == me.size() - 1);

    // ancestor characterization: {s <= t : d_v(s,t) = v(t) - v(s)} as tree points
    for (double t : {0.31, 0.62, 0.93}) {
        auto arc = arc_extract(tour, t);
        const std::size_t tidx = e.snap(t);
        // every extracted point is an ancestor
        for (std::size_t i = 0; i < arc.count(); ++i) {
            const double dv = tree_distance(e, idx, arc.times[i], e.time_of(tidx));
            REQUIRE(dv == Catch::Approx(e.value_at(e.time_of(tidx)) -
                                        e.value_at(arc.times[i]))
                              .margin(1e-12));
        }
        // every grid ancestor coincides (as a tree point) with an extracted one
        for (std::size_t s = 0; s <= tidx; s += 3) {
            const double ds = tree_distance(e, idx, e.time_of(s), e.time_of(tidx));
            if (ds == e.values()[tidx] - e.values()[s]) {
                bool found = false;
                for (std::size_t i = 0; i < arc.count() && !found; ++i) {
                    found = tree_distance(e, idx, arc.times[i], e.time_of(s)) <=
                            2.0 * e.grid_step();
                }
                REQUIRE(found);
            }
        }
        // heights strictly increasing along the arc
        for (std::size_t i = 1; i < arc.count(); ++i)
            REQUIRE(arc.heights[i] > arc.heights[i - 1]);
    }
}

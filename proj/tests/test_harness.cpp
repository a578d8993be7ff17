#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sptree/config.hpp"
#include "sptree/experiments.hpp"
#include "sptree/serialize.hpp"

using namespace sptree;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("config: parsing, comments, unknown keys") {
    const std::string dir = "harness_tmp";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/demo.cfg");
        out << "# comment line\n";
        out << "grid = 512   # trailing comment\n";
        out << "d = 2\n";
        out << "\n";
    }
    ExperimentConfig cfg;
    cfg.experiment = "cov-check";
    cfg.load_file(dir + "/demo.cfg");
    REQUIRE(cfg.get_int("grid", 0) == 512);
    REQUIRE(cfg.get_int("d", 0) == 2);
    REQUIRE(cfg.get_int("replicas", 77) == 77);

    REQUIRE_NOTHROW(cfg.validate_keys({"grid", "d", "replicas", "pairs"}));
    REQUIRE_THROWS_AS(cfg.validate_keys({"grid"}), std::invalid_argument);

    {
        std::ofstream out(dir + "/bad.cfg");
        out << "not a key value line\n";
    }
    ExperimentConfig bad;
    REQUIRE_THROWS_AS(bad.load_file(dir + "/bad.cfg"), std::runtime_error);
}

TEST_CASE("run_experiment: unknown experiment is a usage error") {
    ExperimentConfig cfg;
    cfg.experiment = "no-such-experiment";
    REQUIRE_THROWS_AS(run_experiment(cfg, "harness_tmp/none"), std::invalid_argument);
}

TEST_CASE("registry enumerates every acceptance experiment") {
    std::set<std::string> names;
    for (const auto& info : experiment_registry()) names.insert(info.name);
    for (const char* required :
         {"simulate-tour", "cov-check", "hausdorff-calibrate", "hausdorff-verify",
          "arc-identity", "tour-convergence", "reduced-subtree-check",
          "walk-scaling", "spectral-dim", "bm-properties", "superprocess-sanity",
          "mass-identity", "alpha-uniformity", "oracle-batch"}) {
        REQUIRE(names.count(required) == 1);
    }
}

TEST_CASE("determinism: identical (config, seed) gives byte-identical outputs") {
    ExperimentConfig cfg;
    cfg.experiment = "cov-check";
    cfg.seed = 4242;
    cfg.set("grid", "512");
    cfg.set("replicas", "300");
    cfg.set("pairs", "4");
    cfg.set("d", "2");
    auto r1 = run_experiment(cfg, "harness_tmp/det_a");
    auto r2 = run_experiment(cfg, "harness_tmp/det_b");
    REQUIRE(r1.pass == r2.pass);
    REQUIRE(slurp("harness_tmp/det_a/report.json") ==
            slurp("harness_tmp/det_b/report.json"));
    REQUIRE(slurp("harness_tmp/det_a/cov_check.csv") ==
            slurp("harness_tmp/det_b/cov_check.csv"));
    REQUIRE(!slurp("harness_tmp/det_a/cov_check.csv").empty());
}

TEST_CASE("determinism holds across thread counts") {
    ExperimentConfig cfg;
    cfg.experiment = "tour-convergence";
    cfg.seed = 99;
    cfg.set("n", "200");
    cfg.set("trees", "60");
    cfg.set("oracle_grid", "256");
    cfg.set("oracle_samples", "60");
    setenv("SPTREE_THREADS", "1", 1);
    auto r1 = run_experiment(cfg, "harness_tmp/thr_1");
    setenv("SPTREE_THREADS", "4", 1);
    auto r2 = run_experiment(cfg, "harness_tmp/thr_4");
    unsetenv("SPTREE_THREADS");
    REQUIRE(slurp("harness_tmp/thr_1/report.json") ==
            slurp("harness_tmp/thr_4/report.json"));
    REQUIRE(slurp("harness_tmp/thr_1/tour_convergence_poisson.csv") ==
            slurp("harness_tmp/thr_4/tour_convergence_poisson.csv"));
}

TEST_CASE("simulate-tour emits a well-formed tour CSV") {
    ExperimentConfig cfg;
    cfg.experiment = "simulate-tour";
    cfg.seed = 7;
    cfg.set("kind", "discrete");
    cfg.set("n", "50");
    cfg.set("d", "2");
    auto report = run_experiment(cfg, "harness_tmp/tour");
    REQUIRE(report.pass);
    std::ifstream in("harness_tmp/tour/tour.csv");
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "t,v,r_1,r_2");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    REQUIRE(rows == 2 * 50 + 1);
    REQUIRE(std::filesystem::exists("harness_tmp/tour/tree.csv"));
    REQUIRE(std::filesystem::exists("harness_tmp/tour/contour.csv"));
    REQUIRE(std::filesystem::exists("harness_tmp/tour/embedding.csv"));
}

TEST_CASE("serializers emit the documented headers") {
    Rng rng(5);
    auto tree = sample_conditioned_gw(12, OffspringDist::poisson1(), rng);
    auto tour = dfs_tour(tree);
    std::filesystem::create_directories("harness_tmp");
    write_tree_csv(tree, "harness_tmp/tree.csv");
    write_tour_csv(tour, "harness_tmp/dtour.csv");
    auto exc = Excursion::sample_normalized(65, rng);
    write_excursion_csv(exc, "harness_tmp/exc.csv");
    auto emb = embed_brw(tree, StepDist::gaussian(2), rng);
    write_embedding_csv(emb, "harness_tmp/emb.csv");

    auto first_line = [](const std::string& path) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        return line;
    };
    REQUIRE(first_line("harness_tmp/tree.csv") == "vertex,parent,child_rank");
    REQUIRE(first_line("harness_tmp/dtour.csv") == "k,vertex,depth");
    REQUIRE(first_line("harness_tmp/exc.csv") == "t,v");
    REQUIRE(first_line("harness_tmp/emb.csv") == "vertex,x_1,x_2");

    // excursion CSV round-trips at 17 significant digits
    std::ifstream in("harness_tmp/exc.csv");
    std::string line;
    std::getline(in, line);
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const double v = std::stod(line.substr(comma + 1));
        REQUIRE(v == exc.values()[i]);
        ++i;
    }
    REQUIRE(i == exc.size());

    // graph spatial tree JSON has the documented fields
    auto gst = reduce_discrete(tree, tour, {0.3, 0.7});
    attach_spatial(gst, emb);
    auto j = gst_to_json(gst);
    REQUIRE(j.contains("shape"));
    REQUIRE(j.contains("lengths"));
    REQUIRE(j.contains("edge_polylines"));

    // forest manifest references per-cluster files that exist
    Rng frng(11);
    ForestSample forest;
    forest.eps = 2.0;
    forest.clusters.push_back(sample_cluster(2.0, 2, 257, frng));
    write_forest(forest, "harness_tmp/forest");
    REQUIRE(std::filesystem::exists("harness_tmp/forest/forest.json"));
    for (std::size_t c = 0; c < forest.clusters.size(); ++c) {
        REQUIRE(std::filesystem::exists("harness_tmp/forest/cluster_" +
                                        std::to_string(c) + "_excursion.csv"));
    }

    auto lm = level_measure(forest, 0.0, 0.1);
    write_level_measure_csv(lm, "harness_tmp/level.csv");
    REQUIRE(first_line("harness_tmp/level.csv") == "x_1,x_2,weight");
}

TEST_CASE("quenched/annealed split: annealed experiments use fresh environments") {
    // structural check: different replica indices draw different
    // environments, while a fixed (seed, index) reproduces the same one
    Rng master(123);
    Rng s1 = master.split(1);
    Rng s2 = master.split(2);
    Rng s1_again = master.split(1);
    auto t1 = sample_conditioned_gw(30, OffspringDist::poisson1(), s1);
    auto t2 = sample_conditioned_gw(30, OffspringDist::poisson1(), s2);
    auto t1_again = sample_conditioned_gw(30, OffspringDist::poisson1(), s1_again);
    REQUIRE(t1 == t1_again);
    REQUIRE(!(t1 == t2));
}

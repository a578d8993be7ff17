#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sptree/csv.hpp"
#include "sptree/embedding.hpp"
#include "sptree/excursion.hpp"
#include "sptree/gw.hpp"
#include "sptree/reduced.hpp"
#include "sptree/superprocess.hpp"
#include "sptree/walks.hpp"

namespace sptree {

// Excursion: `t,v` in grid order.
inline void write_excursion_csv(const Excursion& exc, const std::string& path) {
    CsvWriter csv(path, {"t", "v"});
    for (std::size_t i = 0; i < exc.size(); ++i)
        csv.row({exc.time_of(i), exc.values()[i]});
}

// Ordered tree: `vertex,parent,child_rank` (root row has parent -1, rank 0).
inline void write_tree_csv(const OrderedTree& tree, const std::string& path) {
    CsvWriter csv(path, {"vertex", "parent", "child_rank"});
    std::vector<int> rank(tree.n(), 0);
    for (int v = 0; v < tree.n(); ++v) {
        auto [cb, ce] = tree.children(v);
        int r = 0;
        for (const int* c = cb; c != ce; ++c) rank[*c] = r++;
    }
    for (int v = 0; v < tree.n(); ++v)
        csv.row_mixed({v, tree.parent(v), rank[v]}, {});
}

// Discrete tour: `k,vertex,depth`.
inline void write_tour_csv(const DiscreteTour& tour, const std::string& path) {
    CsvWriter csv(path, {"k", "vertex", "depth"});
    for (std::size_t k = 0; k < tour.vertex_visits.size(); ++k)
        csv.row_mixed({static_cast<long long>(k), tour.vertex_visits[k],
                       tour.depths[k]},
                      {});
}

// Graph embedding: `vertex,x_1..x_d`.
inline void write_embedding_csv(const GraphEmbedding& emb, const std::string& path) {
    std::vector<std::string> header{"vertex"};
    for (int j = 1; j <= emb.dim(); ++j) header.push_back("x_" + std::to_string(j));
    CsvWriter csv(path, header);
    for (int v = 0; v < emb.n(); ++v) {
        auto pos = emb.at(v);
        csv.row_mixed({v}, std::vector<double>(pos.begin(), pos.end()));
    }
}

// Walk path: `t,state,x_1..x_d` (spatial columns only when an image exists).
inline void write_walk_csv(const WalkPath& path, const std::string& file) {
    std::vector<std::string> header{"t", "state"};
    for (int j = 1; j <= path.dim; ++j) header.push_back("x_" + std::to_string(j));
    CsvWriter csv(file, header);
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        std::vector<double> spatial;
        if (path.dim > 0)
            spatial.assign(path.image.begin() + i * path.dim,
                           path.image.begin() + (i + 1) * path.dim);
        std::vector<double> row{path.times[i]};
        row.push_back(static_cast<double>(path.states[i]));
        row.insert(row.end(), spatial.begin(), spatial.end());
        csv.row(row);
    }
}

// Return probabilities: `m,p`.
inline void write_return_probability_csv(const std::vector<std::int64_t>& steps,
                                         const std::vector<double>& probs,
                                         const std::string& path) {
    CsvWriter csv(path, {"m", "p"});
    for (std::size_t i = 0; i < steps.size(); ++i)
        csv.row_mixed({steps[i]}, {probs[i]});
}

// Level measure: `x_1..x_d,weight`.
inline void write_level_measure_csv(const LevelMeasure& lm, const std::string& path) {
    std::vector<std::string> header;
    for (int j = 1; j <= lm.dim; ++j) header.push_back("x_" + std::to_string(j));
    header.push_back("weight");
    CsvWriter csv(path, header);
    for (std::size_t a = 0; a < lm.count(); ++a) {
        std::vector<double> row(lm.positions.begin() + a * lm.dim,
                                lm.positions.begin() + (a + 1) * lm.dim);
        row.push_back(lm.weights[a]);
        csv.row(row);
    }
}

// Graph spatial tree: shape as a parent/child-rank list, lengths, polylines.
inline nlohmann::ordered_json gst_to_json(const GraphSpatialTree& gst) {
    nlohmann::ordered_json j;
    auto shape = nlohmann::ordered_json::array();
    std::vector<int> rank(gst.shape.n(), 0);
    for (int v = 0; v < gst.shape.n(); ++v) {
        auto [cb, ce] = gst.shape.children(v);
        int r = 0;
        for (const int* c = cb; c != ce; ++c) rank[*c] = r++;
    }
    for (int v = 0; v < gst.shape.n(); ++v) {
        nlohmann::ordered_json node;
        node["vertex"] = v;
        node["parent"] = gst.shape.parent(v);
        node["child_rank"] = rank[v];
        shape.push_back(node);
    }
    j["shape"] = shape;
    j["lengths"] = gst.lengths;
    j["dim"] = gst.dim;
    auto polylines = nlohmann::ordered_json::array();
    for (const auto& poly : gst.edge_polyline) polylines.push_back(poly);
    j["edge_polylines"] = polylines;
    return j;
}

inline void write_gst_json(const GraphSpatialTree& gst, const std::string& path) {
    std::ofstream out(path);
    out << gst_to_json(gst).dump(2) << '\n';
}

// Forest: JSON manifest referencing per-cluster excursion/embedding CSVs.
inline void write_forest(const ForestSample& forest, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["eps"] = forest.eps;
    auto clusters = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < forest.clusters.size(); ++i) {
        const auto& cluster = forest.clusters[i];
        const std::string exc_path = dir + "/cluster_" + std::to_string(i) + "_excursion.csv";
        const std::string emb_path = dir + "/cluster_" + std::to_string(i) + "_embedding.csv";
        write_excursion_csv(cluster.exc, exc_path);
        {
            std::vector<std::string> header{"t"};
            for (int j = 1; j <= cluster.emb.dim(); ++j)
                header.push_back("x_" + std::to_string(j));
            CsvWriter csv(emb_path, header);
            for (std::size_t k = 0; k < cluster.exc.size(); ++k) {
                std::vector<double> row{cluster.exc.time_of(k)};
                auto pos = cluster.emb.at(k);
                row.insert(row.end(), pos.begin(), pos.end());
                csv.row(row);
            }
        }
        nlohmann::ordered_json entry;
        entry["height"] = cluster.height;
        entry["tau"] = cluster.exc.tau();
        entry["excursion"] = exc_path;
        entry["embedding"] = emb_path;
        clusters.push_back(entry);
    }
    manifest["clusters"] = clusters;
    std::ofstream out(dir + "/forest.json");
    out << manifest.dump(2) << '\n';
}

}  // namespace sptree

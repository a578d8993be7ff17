#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sptree/embedding.hpp"
#include "sptree/gw.hpp"
#include "sptree/reduced.hpp"
#include "sptree/rng.hpp"

namespace sptree {

// Undirected adjacency in CSR form; neighbor order is deterministic
// (parent first, then children in planar order), which the shared-RNG
// coupling tests rely on.
struct TreeAdjacency {
    std::vector<std::int32_t> start;
    std::vector<std::int32_t> list;

    explicit TreeAdjacency(const OrderedTree& tree) {
        const int n = tree.n();
        start.assign(n + 1, 0);
        for (int v = 0; v < n; ++v)
            start[v + 1] = start[v] + (v != 0 ? 1 : 0) + tree.child_count(v);
        list.resize(start[n]);
        std::vector<std::int32_t> fill(start.begin(), start.end() - 1);
        for (int v = 0; v < n; ++v) {
            if (v != 0) list[fill[v]++] = tree.parent(v);
            auto [cb, ce] = tree.children(v);
            for (const int* c = cb; c != ce; ++c) list[fill[v]++] = *c;
        }
    }

    TreeAdjacency() = default;

    int degree(int v) const { return start[v + 1] - start[v]; }
    int neighbor(int v, std::uint64_t i) const { return list[start[v] + i]; }
    int n() const { return static_cast<int>(start.size()) - 1; }
};

// Time-indexed trajectory; states are vertex/node ids of the walk graph.
struct WalkPath {
    std::vector<double> times;
    std::vector<std::int32_t> states;
    std::vector<double> image;  // optional, row-major states x dim
    int dim = 0;
    double max_edge_rounding = 0.0;  // subdivision walks report the per-edge
                                     // length rounding they ran on
};

// Discrete-time simple random walk on the tree's vertices.
inline WalkPath srw(const TreeAdjacency& adj, int start, std::int64_t steps,
                    Rng& rng) {
    if (steps < 0) throw std::invalid_argument("srw: steps >= 0");
    WalkPath path;
    path.times.reserve(steps + 1);
    path.states.reserve(steps + 1);
    int cur = start;
    path.times.push_back(0.0);
    path.states.push_back(cur);
    for (std::int64_t s = 1; s <= steps; ++s) {
        cur = adj.neighbor(cur, rng.uniform_below(adj.degree(cur)));
        path.times.push_back(static_cast<double>(s));
        path.states.push_back(cur);
    }
    return path;
}

inline WalkPath srw(const OrderedTree& tree, int start, std::int64_t steps,
                    Rng& rng) {
    return srw(TreeAdjacency(tree), start, steps, rng);
}

// SRW restricted to the tree vertices lying on the skeleton arcs of a reduced
// subtree (the induced subdivided-skeleton graph).
inline WalkPath srw_on_skeleton(const OrderedTree& tree,
                                const GraphSpatialTree& skeleton, int start,
                                std::int64_t steps, Rng& rng) {
    std::vector<char> member(tree.n(), 0);
    member[0] = 1;
    for (const auto& path : skeleton.edge_vertex_path)
        for (int v : path) member[v] = 1;
    if (!member[start])
        throw std::invalid_argument("srw_on_skeleton: start not on the skeleton");
    // induced adjacency, same neighbor order as TreeAdjacency
    TreeAdjacency full(tree);
    TreeAdjacency induced;
    induced.start.assign(tree.n() + 1, 0);
    std::vector<std::int32_t> tmp;
    tmp.reserve(full.list.size());
    for (int v = 0; v < tree.n(); ++v) {
        induced.start[v + 1] = induced.start[v];
        if (!member[v]) continue;
        for (int i = 0; i < full.degree(v); ++i) {
            const int w = full.neighbor(v, i);
            if (member[w]) {
                tmp.push_back(w);
                ++induced.start[v + 1];
            }
        }
    }
    induced.list = std::move(tmp);
    return srw(induced, start, steps, rng);
}

// Weighted metric tree prepared for subdivision walks: every edge is cut into
// integer segments of length h, with the per-edge rounding reported.
struct SubdividedTree {
    TreeAdjacency adj;
    double h = 0.0;
    double max_rounding = 0.0;             // max |n_e h - |e|| over edges
    std::vector<std::int32_t> gst_node;    // node id of each original vertex
    std::vector<std::int32_t> node_edge;   // walk node -> gst edge (-1 at vertices)
    std::vector<double> node_offset;       // distance from the edge's parent end
    int n_nodes = 0;

    static SubdividedTree build(const GraphSpatialTree& gst, double h) {
        if (!(h > 0.0)) throw std::invalid_argument("subdivision: h > 0");
        double min_edge = std::numeric_limits<double>::infinity();
        for (double l : gst.lengths) min_edge = std::min(min_edge, l);
        if (h >= min_edge)
            throw std::invalid_argument("subdivision: h >= min edge length");
        SubdividedTree out;
        out.h = h;
        const int nv = gst.n_nodes();
        std::vector<std::int64_t> segments(gst.lengths.size());
        std::int64_t total_interior = 0;
        for (std::size_t e = 0; e < gst.lengths.size(); ++e) {
            segments[e] = std::llround(gst.lengths[e] / h);
            if (segments[e] < 1) segments[e] = 1;
            out.max_rounding = std::max(
                out.max_rounding, std::abs(segments[e] * h - gst.lengths[e]));
            total_interior += segments[e] - 1;
        }
        out.n_nodes = nv + static_cast<int>(total_interior);
        out.gst_node.resize(nv);
        for (int v = 0; v < nv; ++v) out.gst_node[v] = v;
        out.node_edge.assign(out.n_nodes, -1);
        out.node_offset.assign(out.n_nodes, 0.0);
        // adjacency: vertices keep ids 0..nv-1; interior nodes appended per edge
        std::vector<std::vector<std::int32_t>> nbr(out.n_nodes);
        int next = nv;
        for (int node = 1; node < nv; ++node) {
            const int e = node - 1;
            const int parent = gst.shape.parent(node);
            int prev = parent;
            for (std::int64_t s = 1; s < segments[e]; ++s) {
                const int mid = next++;
                out.node_edge[mid] = e;
                out.node_offset[mid] = static_cast<double>(s) * h;
                nbr[prev].push_back(mid);
                nbr[mid].push_back(prev);
                prev = mid;
            }
            nbr[prev].push_back(node);
            nbr[node].push_back(prev);
        }
        out.adj.start.assign(out.n_nodes + 1, 0);
        for (int v = 0; v < out.n_nodes; ++v)
            out.adj.start[v + 1] =
                out.adj.start[v] + static_cast<std::int32_t>(nbr[v].size());
        out.adj.list.reserve(out.adj.start[out.n_nodes]);
        for (int v = 0; v < out.n_nodes; ++v)
            for (std::int32_t w : nbr[v]) out.adj.list.push_back(w);
        return out;
    }
};

// Brownian motion on a weighted metric tree, approximated by the SRW on the
// h-subdivision with time step h^2 per move.
inline WalkPath metric_tree_bm(const GraphSpatialTree& gst, int start_node,
                               double t_max, double h, Rng& rng) {
    if (!(t_max > 0.0)) throw std::invalid_argument("metric_tree_bm: t_max > 0");
    auto sub = SubdividedTree::build(gst, h);
    WalkPath path;
    path.max_edge_rounding = sub.max_rounding;
    const std::int64_t steps =
        static_cast<std::int64_t>(std::ceil(t_max / (h * h)));
    int cur = sub.gst_node[start_node];
    path.times.reserve(steps + 1);
    path.states.reserve(steps + 1);
    path.times.push_back(0.0);
    path.states.push_back(cur);
    for (std::int64_t s = 1; s <= steps; ++s) {
        cur = sub.adj.neighbor(cur, rng.uniform_below(sub.adj.degree(cur)));
        path.times.push_back(s * h * h);
        path.states.push_back(cur);
    }
    return path;
}

struct HitResult {
    int target_index = -1;  // which of the targets was hit first
    double time = 0.0;      // walk time at the hit (h^2 per step)
    std::int64_t steps = 0;
};

// First hit among target nodes for the subdivision walk (used by the
// defining-property experiments; step cap guards runaways).
inline HitResult bm_first_hit(const SubdividedTree& sub, int start_walk_node,
                              const std::vector<int>& target_walk_nodes, Rng& rng,
                              std::int64_t max_steps = int64_t{1} << 40) {
    std::vector<char> is_target(sub.n_nodes, 0);
    for (int t : target_walk_nodes) is_target[t] = 1;
    HitResult out;
    int cur = start_walk_node;
    for (std::int64_t s = 0; s < max_steps; ++s) {
        if (is_target[cur]) {
            out.steps = s;
            out.time = static_cast<double>(s) * sub.h * sub.h;
            for (std::size_t i = 0; i < target_walk_nodes.size(); ++i)
                if (target_walk_nodes[i] == cur) out.target_index = static_cast<int>(i);
            return out;
        }
        cur = sub.adj.neighbor(cur, rng.uniform_below(sub.adj.degree(cur)));
    }
    throw std::runtime_error("bm_first_hit: step cap exceeded");
}

// n^{-1/4} phi_n(X^{T_n} at time floor(t n^{3/2})) for each requested t,
// along a single fresh walk from the root.
inline std::vector<double> rescaled_walk_observable(const OrderedTree& tree,
                                                    const GraphEmbedding& emb,
                                                    const std::vector<double>& t_grid,
                                                    Rng& rng) {
    if (emb.n() != tree.n())
        throw std::invalid_argument("rescaled_walk_observable: embedding mismatch");
    const double n = static_cast<double>(tree.n());
    const double n32 = std::pow(n, 1.5);
    const double scale = 1.0 / std::pow(n, 0.25);
    std::vector<std::int64_t> checkpoints(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (t_grid[i] < 0.0)
            throw std::invalid_argument("rescaled_walk_observable: t >= 0");
        checkpoints[i] = static_cast<std::int64_t>(std::floor(t_grid[i] * n32));
    }
    std::vector<double> out(t_grid.size() * emb.dim(), 0.0);
    if (tree.n() == 1) return out;  // stays at the origin
    TreeAdjacency adj(tree);
    std::int64_t max_step = 0;
    for (auto c : checkpoints) max_step = std::max(max_step, c);
    int cur = 0;
    for (std::int64_t s = 0; s <= max_step; ++s) {
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
            if (checkpoints[i] == s) {
                auto pos = emb.at(cur);
                for (int j = 0; j < emb.dim(); ++j)
                    out[i * emb.dim() + j] = scale * pos[j];
            }
        }
        if (s < max_step)
            cur = adj.neighbor(cur, rng.uniform_below(adj.degree(cur)));
    }
    return out;
}

enum class ReturnProbMode { exact, monte_carlo };

// P(X_m = start) for each even step count m: exact distribution-vector
// iteration, or Monte Carlo pooling over `walks` independent walks.
inline std::vector<double> return_probability(const OrderedTree& tree, int start,
                                              const std::vector<std::int64_t>& step_counts,
                                              ReturnProbMode mode, Rng& rng,
                                              std::int64_t walks = 100000) {
    for (auto m : step_counts) {
        if (m < 0 || m % 2 != 0)
            throw std::invalid_argument(
                "return_probability: step counts must be even (bipartite parity)");
    }
    if (step_counts.empty()) return {};
    const std::int64_t max_step =
        *std::max_element(step_counts.begin(), step_counts.end());
    std::vector<double> out(step_counts.size(), 0.0);
    TreeAdjacency adj(tree);
    if (mode == ReturnProbMode::exact) {
        if (tree.n() > 2000)
            throw std::invalid_argument("return_probability: exact mode needs n <= 2000");
        std::vector<double> p(tree.n(), 0.0), q(tree.n(), 0.0);
        p[start] = 1.0;
        for (std::int64_t s = 1; s <= max_step; ++s) {
            std::fill(q.begin(), q.end(), 0.0);
            for (int v = 0; v < tree.n(); ++v) {
                if (p[v] == 0.0) continue;
                const double share = p[v] / adj.degree(v);
                for (int i = 0; i < adj.degree(v); ++i) q[adj.neighbor(v, i)] += share;
            }
            std::swap(p, q);
            for (std::size_t i = 0; i < step_counts.size(); ++i)
                if (step_counts[i] == s) out[i] = p[start];
        }
        for (std::size_t i = 0; i < step_counts.size(); ++i)
            if (step_counts[i] == 0) out[i] = 1.0;
        return out;
    }
    std::vector<std::int64_t> hits(step_counts.size(), 0);
    for (std::int64_t w = 0; w < walks; ++w) {
        Rng stream = rng.split(w);
        int cur = start;
        for (std::int64_t s = 1; s <= max_step; ++s) {
            cur = adj.neighbor(cur, stream.uniform_below(adj.degree(cur)));
            if (cur == start) {
                for (std::size_t i = 0; i < step_counts.size(); ++i)
                    if (step_counts[i] == s) ++hits[i];
            }
        }
    }
    for (std::size_t i = 0; i < step_counts.size(); ++i) {
        out[i] = step_counts[i] == 0
                     ? 1.0
                     : static_cast<double>(hits[i]) / static_cast<double>(walks);
    }
    return out;
}

}  // namespace sptree

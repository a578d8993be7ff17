#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sptree/embedding.hpp"
#include "sptree/excursion.hpp"
#include "sptree/gw.hpp"

namespace sptree {

// Ordered finite tree with positive edge lengths and an optional spatial map
// sampled along each edge. Edges are enumerated in depth-first order: edge j
// joins parent(j) to node j in the shape's preorder numbering, which is the
// canonical order used by d1/d2 shape comparison. Polylines hold positions at
// uniform length fractions along the edge (endpoints included).
struct GraphSpatialTree {
    OrderedTree shape{std::vector<int>{0}};
    std::vector<double> lengths;         // lengths[j-1] = |edge to node j|
    std::vector<double> node_height;     // distance from the root
    std::vector<double> node_time;       // continuum builds: representative times
    std::vector<int> node_vertex;        // discrete builds: underlying tree vertex
    std::vector<std::vector<int>> edge_vertex_path;  // discrete: vertices along edge
    int dim = 0;
    std::vector<std::vector<double>> edge_polyline;  // per edge, flat m x dim

    int n_nodes() const { return shape.n(); }
    int n_edges() const { return shape.n() - 1; }

    double total_length() const {
        double s = 0.0;
        for (double l : lengths) s += l;
        return s;
    }

    void scale_lengths(double f) {
        for (double& l : lengths) l *= f;
        for (double& h : node_height) h *= f;
    }
    void scale_spatial(double f) {
        for (auto& poly : edge_polyline)
            for (double& x : poly) x *= f;
    }
};

namespace detail {

// Shared laminar builder: sorted leaves (height, payload) with consecutive
// meet heights; merges nodes closer than merge_tol and detects degree-4
// collisions.
struct ReducedBuilder {
    struct Node {
        double height = 0.0;
        double time = 0.0;
        int vertex = -1;
        int parent = -1;
        std::vector<int> children;
    };
    std::vector<Node> nodes;
    std::vector<int> stack;
    double merge_tol = 0.0;

    explicit ReducedBuilder(double tol) : merge_tol(tol) {
        nodes.push_back({});  // root at height 0
        stack.push_back(0);
    }

    int attach_leaf(double height, double time, int vertex, double meet,
                    double meet_time, int meet_vertex) {
        int popped = -1;
        while (nodes[stack.back()].height > meet + merge_tol) {
            popped = stack.back();
            stack.pop_back();
        }
        int attach = stack.back();
        if (nodes[attach].height < meet - merge_tol) {
            // new branch node strictly between attach and the popped child
            Node branch;
            branch.height = meet;
            branch.time = meet_time;
            branch.vertex = meet_vertex;
            branch.parent = attach;
            const int b = static_cast<int>(nodes.size());
            if (popped < 0)
                throw std::logic_error("reduced build: dangling branch");
            // reparent the popped subtree under the new branch node
            auto& siblings = nodes[attach].children;
            *std::find(siblings.begin(), siblings.end(), popped) = b;
            nodes[popped].parent = b;
            branch.children.push_back(popped);
            nodes.push_back(std::move(branch));
            stack.push_back(b);
            attach = b;
        }
        if (height - nodes[attach].height <= merge_tol) {
            // the marked point coincides with the attach node
            if (nodes[attach].vertex < 0) nodes[attach].vertex = vertex;
            return attach;
        }
        Node leaf;
        leaf.height = height;
        leaf.time = time;
        leaf.vertex = vertex;
        leaf.parent = attach;
        const int id = static_cast<int>(nodes.size());
        nodes[attach].children.push_back(id);
        nodes.push_back(std::move(leaf));
        stack.push_back(id);
        return id;
    }

    // preorder renumber into a GraphSpatialTree skeleton
    GraphSpatialTree finish(bool check_degree) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const int degree = static_cast<int>(nodes[i].children.size()) +
                               (nodes[i].parent >= 0 ? 1 : 0);
            if (check_degree && degree >= 4)
                throw DegeneracyError(
                    "reduced subtree has a vertex of degree four (merged branch "
                    "points beyond tolerance)");
        }
        std::vector<int> order;
        order.reserve(nodes.size());
        std::vector<int> stack2{0};
        std::vector<int> newid(nodes.size(), -1);
        while (!stack2.empty()) {
            const int v = stack2.back();
            stack2.pop_back();
            newid[v] = static_cast<int>(order.size());
            order.push_back(v);
            for (auto it = nodes[v].children.rbegin(); it != nodes[v].children.rend();
                 ++it)
                stack2.push_back(*it);
        }
        std::vector<int> parent(order.size());
        GraphSpatialTree out;
        out.node_height.resize(order.size());
        out.node_time.resize(order.size());
        out.node_vertex.resize(order.size());
        out.lengths.resize(order.size() > 0 ? order.size() - 1 : 0);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const Node& nd = nodes[order[i]];
            parent[i] = nd.parent < 0 ? -1 : newid[nd.parent];
            out.node_height[i] = nd.height;
            out.node_time[i] = nd.time;
            out.node_vertex[i] = nd.vertex;
            if (i > 0) out.lengths[i - 1] = nd.height - nodes[nodes[order[i]].parent].height;
        }
        out.shape = OrderedTree::from_parents(parent);
        return out;
    }
};

}  // namespace detail

// Reduced subtree of a coded continuum tree spanned by the root and the
// classes of the given times (Eq. 7.1 vertex set: the pairwise branch points).
// Lengths only; the caller attaches spatial samples from a tour if needed.
inline GraphSpatialTree reduce_continuum(const Excursion& exc,
                                         const RangeMinIndex& idx,
                                         std::vector<double> times) {
    if (times.empty()) throw std::invalid_argument("reduce_continuum: k >= 1");
    std::sort(times.begin(), times.end());
    const double same_tol = 2.0 * exc.grid_step();
    const double merge_tol = 4.0 * exc.grid_step();
    // dedupe same tree points
    std::vector<std::size_t> leaves;
    for (double t : times) {
        const std::size_t i = exc.snap(t);
        if (!leaves.empty()) {
            const double d = exc.values()[leaves.back()] + exc.values()[i] -
                             2.0 * idx.min_value(leaves.back(), i);
            if (d <= same_tol) continue;
        }
        leaves.push_back(i);
    }
    detail::ReducedBuilder builder(merge_tol);
    for (std::size_t j = 0; j < leaves.size(); ++j) {
        const std::size_t i = leaves[j];
        double meet = 0.0, meet_time = 0.0;
        if (j == 0) {
            meet = 0.0;
            meet_time = 0.0;
        } else {
            const std::size_t am = idx.argmin(leaves[j - 1], i);
            meet = exc.values()[am];
            meet_time = exc.time_of(am);
        }
        builder.attach_leaf(exc.values()[i], exc.time_of(i), -1, meet, meet_time, -1);
    }
    return builder.finish(/*check_degree=*/true);
}

// Reduced subtree of a graph tree spanned by the root and the vertices
// selected through the tour at times alpha_n(u): exact integer lengths, plus
// the underlying vertex path of every edge.
inline GraphSpatialTree reduce_discrete(const OrderedTree& tree,
                                        const DiscreteTour& tour,
                                        std::vector<double> us) {
    if (us.empty()) throw std::invalid_argument("reduce_discrete: k >= 1");
    std::sort(us.begin(), us.end());
    // selected vertices with their first-visit tour index, in visit order
    std::vector<std::pair<std::size_t, int>> picks;  // (tour index, vertex)
    for (double u : us) {
        const double a = alpha_n(u, tour);
        const std::size_t k =
            static_cast<std::size_t>(std::llround(2.0 * tour.n * a));
        picks.emplace_back(k, tour.vertex_visits[k]);
    }
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end(),
                            [](const auto& a, const auto& b) {
                                return a.second == b.second;
                            }),
                picks.end());
    // drop later duplicate vertices that appear at distinct tour indices
    {
        std::vector<std::pair<std::size_t, int>> unique_picks;
        std::vector<char> seen(tree.n(), 0);
        for (const auto& p : picks) {
            if (seen[p.second]) continue;
            seen[p.second] = 1;
            unique_picks.push_back(p);
        }
        picks.swap(unique_picks);
    }
    detail::ReducedBuilder builder(0.0);
    for (std::size_t j = 0; j < picks.size(); ++j) {
        const auto [k, vertex] = picks[j];
        int meet_vertex = 0;
        double meet = 0.0;
        if (j > 0) {
            // lca of consecutive picks via the minimum tour depth between visits
            std::size_t lo = picks[j - 1].first, hi = k;
            std::size_t am = lo;
            for (std::size_t i = lo; i <= hi; ++i)
                if (tour.depths[i] < tour.depths[am]) am = i;
            meet = tour.depths[am];
            meet_vertex = tour.vertex_visits[am];
        }
        builder.attach_leaf(tree.depth(vertex), 0.0, vertex, meet, 0.0, meet_vertex);
    }
    auto out = builder.finish(/*check_degree=*/false);
    if (out.node_vertex[0] < 0) out.node_vertex[0] = 0;
    // vertex paths along edges (parent's vertex down to child's vertex)
    out.edge_vertex_path.resize(out.n_edges());
    for (int node = 1; node < out.n_nodes(); ++node) {
        const int pnode = out.shape.parent(node);
        std::vector<int> path;
        int v = out.node_vertex[node];
        const int stop = out.node_vertex[pnode];
        while (v != stop) {
            if (v < 0) throw std::logic_error("reduce_discrete: broken edge path");
            path.push_back(v);
            v = tree.parent(v);
        }
        path.push_back(stop);
        std::reverse(path.begin(), path.end());
        out.edge_vertex_path[node - 1] = std::move(path);
    }
    return out;
}

// Shared-time correspondence between two tours on a common grid: the pairs
// ([t], [t]') over grid times, root pair first.
struct Correspondence {
    std::vector<std::pair<double, double>> pairs;  // (time in a, time in b)
};

inline Correspondence shared_time_correspondence(const Tour& a, const Tour& b) {
    if (a.len() != b.len() || a.tau != b.tau)
        throw std::invalid_argument("shared_time_correspondence: grid mismatch");
    Correspondence c;
    c.pairs.reserve(a.len());
    const double step = a.grid_step();
    for (std::size_t k = 0; k < a.len(); ++k)
        c.pairs.emplace_back(k * step, k * step);
    return c;
}

// Fill edge polylines from a graph embedding (positions of the vertices along
// each edge path).
inline void attach_spatial(GraphSpatialTree& gst, const GraphEmbedding& emb) {
    gst.dim = emb.dim();
    gst.edge_polyline.assign(gst.n_edges(), {});
    for (int e = 0; e < gst.n_edges(); ++e) {
        const auto& path = gst.edge_vertex_path[e];
        auto& poly = gst.edge_polyline[e];
        poly.reserve(path.size() * emb.dim());
        for (int v : path) {
            auto pos = emb.at(v);
            poly.insert(poly.end(), pos.begin(), pos.end());
        }
    }
}

// Fill edge polylines by sampling the tour's head along each edge at uniform
// height fractions (endpoints plus interior_samples interior points).
inline void attach_spatial_continuum(GraphSpatialTree& gst, const Tour& tour,
                                     const Excursion& exc, const RangeMinIndex& idx,
                                     int interior_samples = 16) {
    gst.dim = tour.dim;
    gst.edge_polyline.assign(gst.n_edges(), {});
    for (int node = 1; node < gst.n_nodes(); ++node) {
        const int pnode = gst.shape.parent(node);
        const double h0 = gst.node_height[pnode];
        const double h1 = gst.node_height[node];
        const std::size_t child_idx = exc.snap(gst.node_time[node]);
        auto& poly = gst.edge_polyline[node - 1];
        const int m = interior_samples + 2;
        poly.reserve(static_cast<std::size_t>(m) * tour.dim);
        for (int s = 0; s < m; ++s) {
            const double h = h0 + (h1 - h0) * s / (m - 1);
            const std::size_t rep = ancestor_index(exc, idx, child_idx, h);
            auto pos = tour.head(rep);
            poly.insert(poly.end(), pos.begin(), pos.end());
        }
    }
}

// d1: sup over corresponding edges of the length difference; infinite when
// the ordered shapes differ.
inline double d1(const GraphSpatialTree& a, const GraphSpatialTree& b) {
    if (!(a.shape == b.shape)) return std::numeric_limits<double>::infinity();
    double sup = 0.0;
    for (std::size_t j = 0; j < a.lengths.size(); ++j)
        sup = std::max(sup, std::abs(a.lengths[j] - b.lengths[j]));
    return sup;
}

// Point on the skeleton of a graph spatial tree: an edge index with a length
// offset from the parent end; edge -1 denotes the root itself.
struct PointOnTree {
    int edge = -1;
    double offset = 0.0;
};

// The shape-preserving homeomorphism: proportional position along the
// corresponding edge.
inline PointOnTree skeleton_map(const GraphSpatialTree& a, const GraphSpatialTree& b,
                                PointOnTree x) {
    if (!(a.shape == b.shape))
        throw std::invalid_argument("skeleton_map: shapes differ");
    if (x.edge < 0) return x;
    if (x.edge >= a.n_edges()) throw std::out_of_range("skeleton_map: edge");
    PointOnTree out;
    out.edge = x.edge;
    out.offset = b.lengths[x.edge] * x.offset / a.lengths[x.edge];
    return out;
}

namespace detail {

inline void eval_polyline(const std::vector<double>& poly, int dim, double frac,
                          double* out) {
    const std::size_t m = poly.size() / dim;
    const double pos = frac * static_cast<double>(m - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), m - 2);
    const double w = pos - static_cast<double>(lo);
    for (int j = 0; j < dim; ++j)
        out[j] = (1.0 - w) * poly[lo * dim + j] + w * poly[(lo + 1) * dim + j];
}

}  // namespace detail

// d2: sup over stored sample fractions (union of both trees' grids) of the
// displacement between the two spatial maps composed with the homeomorphism.
inline double d2(const GraphSpatialTree& a, const GraphSpatialTree& b) {
    if (!(a.shape == b.shape))
        throw std::invalid_argument("d2: shapes differ");
    if (a.dim != b.dim || a.dim == 0)
        throw std::invalid_argument("d2: spatial maps missing or dim mismatch");
    double sup = 0.0;
    std::vector<double> pa(a.dim), pb(b.dim);
    for (int e = 0; e < a.n_edges(); ++e) {
        const std::size_t ma = a.edge_polyline[e].size() / a.dim;
        const std::size_t mb = b.edge_polyline[e].size() / b.dim;
        for (std::size_t s = 0; s < ma + mb; ++s) {
            const double frac = s < ma ? s / static_cast<double>(ma - 1)
                                       : (s - ma) / static_cast<double>(mb - 1);
            detail::eval_polyline(a.edge_polyline[e], a.dim, frac, pa.data());
            detail::eval_polyline(b.edge_polyline[e], b.dim, frac, pb.data());
            double norm2 = 0.0;
            for (int j = 0; j < a.dim; ++j)
                norm2 += (pa[j] - pb[j]) * (pa[j] - pb[j]);
            sup = std::max(sup, std::sqrt(norm2));
        }
    }
    return sup;
}

// d0 = (d1 + d2) ^ 1; shape mismatch saturates the cap.
inline double d0(const GraphSpatialTree& a, const GraphSpatialTree& b) {
    const double part1 = d1(a, b);
    if (std::isinf(part1)) return 1.0;
    const double part2 = (a.dim > 0 && b.dim > 0) ? d2(a, b) : 0.0;
    return std::min(1.0, part1 + part2);
}

// sup over tree vertices of the graph distance to the skeleton spanned by the
// root and the selected vertices (multi-source BFS).
inline double coverage_defect_discrete(const OrderedTree& tree,
                                       const std::vector<int>& selected) {
    std::vector<char> on_skeleton(tree.n(), 0);
    on_skeleton[0] = 1;
    for (int w : selected) {
        for (int v = w; v != -1 && !on_skeleton[v]; v = tree.parent(v))
            on_skeleton[v] = 1;
    }
    std::vector<int> dist(tree.n(), -1);
    std::vector<int> queue;
    queue.reserve(tree.n());
    for (int v = 0; v < tree.n(); ++v) {
        if (on_skeleton[v]) {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int v = queue[head];
        const int p = tree.parent(v);
        if (p >= 0 && dist[p] < 0) {
            dist[p] = dist[v] + 1;
            queue.push_back(p);
        }
        auto [cb, ce] = tree.children(v);
        for (const int* c = cb; c != ce; ++c) {
            if (dist[*c] < 0) {
                dist[*c] = dist[v] + 1;
                queue.push_back(*c);
            }
        }
    }
    return static_cast<double>(*std::max_element(dist.begin(), dist.end()));
}

// Continuum version over the grid: skeleton = ancestor classes of the marked
// times; returns sup over grid points of d_v to the nearest skeleton point.
inline double coverage_defect_continuum(const Excursion& exc,
                                        const RangeMinIndex& idx,
                                        const std::vector<double>& times) {
    // representative skeleton times: left ancestors of each mark
    std::vector<std::size_t> skel;
    for (double t : times) {
        double runmin = std::numeric_limits<double>::infinity();
        for (std::size_t s = exc.snap(t) + 1; s-- > 0;) {
            if (exc.values()[s] < runmin) {
                runmin = exc.values()[s];
                skel.push_back(s);
            }
        }
    }
    std::sort(skel.begin(), skel.end());
    skel.erase(std::unique(skel.begin(), skel.end()), skel.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < exc.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s : skel) {
            const double d = exc.values()[i] + exc.values()[s] -
                             2.0 * idx.min_value(i, s);
            best = std::min(best, d);
            if (best == 0.0) break;
        }
        worst = std::max(worst, best);
    }
    return worst;
}

struct CorrespondenceBound {
    double distortion = 0.0;   // sup over grid pairs |d_v - d_{v'}|
    double spatial_sup = 0.0;  // sup over grid times |r - r'|
    double bound = 0.0;        // 4 ||v - v'||_inf + ||r - r'||_inf
};

// Shared-time correspondence between two tours on a common grid; the
// distortion is guaranteed <= 4 ||v - v'||_inf, so distortion + spatial_sup
// never exceeds the bound.
inline CorrespondenceBound tour_correspondence_bound(const Tour& a, const Tour& b) {
    if (a.len() != b.len() || a.dim != b.dim || a.tau != b.tau)
        throw std::invalid_argument("tour_correspondence_bound: grid mismatch");
    RangeMinIndex ia(a.v), ib(b.v);
    const std::size_t n = a.len();
    CorrespondenceBound out;
    double vsup = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vsup = std::max(vsup, std::abs(a.v[i] - b.v[i]));
        double norm2 = 0.0;
        for (int j = 0; j < a.dim; ++j) {
            const double diff = a.r[i * a.dim + j] - b.r[i * b.dim + j];
            norm2 += diff * diff;
        }
        out.spatial_sup = std::max(out.spatial_sup, std::sqrt(norm2));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a.v[i] + a.v[j] - 2.0 * ia.min_value(i, j);
            const double db = b.v[i] + b.v[j] - 2.0 * ib.min_value(i, j);
            out.distortion = std::max(out.distortion, std::abs(da - db));
        }
    }
    out.bound = 4.0 * vsup + out.spatial_sup;
    return out;
}

// Linear resampling of a tour onto a uniform grid with new_len points.
inline Tour resample_tour(const Tour& t, std::size_t new_len) {
    if (new_len < 2) throw std::invalid_argument("resample_tour: need >= 2 points");
    Tour out;
    out.tau = t.tau;
    out.dim = t.dim;
    out.v.resize(new_len);
    out.r.resize(new_len * t.dim);
    const std::size_t old_n = t.len() - 1;
    for (std::size_t k = 0; k < new_len; ++k) {
        const double pos = static_cast<double>(k) * old_n / (new_len - 1);
        const std::size_t lo = std::min(static_cast<std::size_t>(pos), old_n - 1);
        const double w = pos - static_cast<double>(lo);
        out.v[k] = (1.0 - w) * t.v[lo] + w * t.v[lo + 1];
        for (int j = 0; j < t.dim; ++j)
            out.r[k * t.dim + j] =
                (1.0 - w) * t.r[lo * t.dim + j] + w * t.r[(lo + 1) * t.dim + j];
    }
    out.v.front() = t.v.front();
    out.v.back() = t.v.back();
    return out;
}

}  // namespace sptree

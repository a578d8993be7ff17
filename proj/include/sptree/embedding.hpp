#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sptree/excursion.hpp"
#include "sptree/gw.hpp"
#include "sptree/rng.hpp"

namespace sptree {

// Dense symmetric d x d matrix, row-major.
struct SymMatrix {
    int dim = 0;
    std::vector<double> a;

    static SymMatrix identity(int d, double scale = 1.0) {
        SymMatrix m;
        m.dim = d;
        m.a.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) m.a[static_cast<std::size_t>(i) * d + i] = scale;
        return m;
    }

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * dim + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * dim + j]; }
};

namespace detail {

// Jacobi eigendecomposition for small symmetric matrices; used for the
// principal matrix square root in the scaling constants.
inline void jacobi_eigen(SymMatrix m, std::vector<double>& eigvals, SymMatrix& vecs) {
    const int d = m.dim;
    vecs = SymMatrix::identity(d);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += m.at(p, q) * m.at(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const double apq = m.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double mkp = m.at(k, p), mkq = m.at(k, q);
                    m.at(k, p) = c * mkp - s * mkq;
                    m.at(k, q) = s * mkp + c * mkq;
                }
                for (int k = 0; k < d; ++k) {
                    const double mpk = m.at(p, k), mqk = m.at(q, k);
                    m.at(p, k) = c * mpk - s * mqk;
                    m.at(q, k) = s * mpk + c * mqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = vecs.at(k, p), vkq = vecs.at(k, q);
                    vecs.at(k, p) = c * vkp - s * vkq;
                    vecs.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(d);
    for (int i = 0; i < d; ++i) eigvals[i] = m.at(i, i);
}

}  // namespace detail

inline SymMatrix matrix_sqrt(const SymMatrix& m) {
    std::vector<double> vals;
    SymMatrix vecs;
    detail::jacobi_eigen(m, vals, vecs);
    SymMatrix out = SymMatrix::identity(m.dim, 0.0);
    for (int i = 0; i < m.dim; ++i) {
        if (vals[i] < -1e-12)
            throw std::invalid_argument("matrix_sqrt: matrix not positive semidefinite");
        const double r = std::sqrt(std::max(vals[i], 0.0));
        for (int j = 0; j < m.dim; ++j)
            for (int k = 0; k < m.dim; ++k)
                out.at(j, k) += vecs.at(j, i) * r * vecs.at(k, i);
    }
    return out;
}

// Centered d-dimensional step law for branching-random-walk increments.
class StepDist {
public:
    enum class Kind { gaussian, axis_uniform, two_point, table };

    static StepDist gaussian(int d) {
        StepDist s;
        s.kind_ = Kind::gaussian;
        s.dim_ = d;
        s.cov_ = SymMatrix::identity(d);
        return s;
    }

    // uniform on {+-e_i}: mean zero, covariance I/d
    static StepDist axis_uniform(int d) {
        StepDist s;
        s.kind_ = Kind::axis_uniform;
        s.dim_ = d;
        s.cov_ = SymMatrix::identity(d, 1.0 / d);
        return s;
    }

    // iid +-1 coordinates: product of centered two-point laws, covariance I
    static StepDist two_point(int d) {
        StepDist s;
        s.kind_ = Kind::two_point;
        s.dim_ = d;
        s.cov_ = SymMatrix::identity(d);
        return s;
    }

    // finite support {points[i] w.p. probs[i]}; bounded, so the o(x^{-4})
    // tail condition holds trivially
    static StepDist table(int d, std::vector<std::vector<double>> points,
                          std::vector<double> probs) {
        StepDist s;
        s.kind_ = Kind::table;
        s.dim_ = d;
        if (points.size() != probs.size() || points.empty())
            throw std::invalid_argument("StepDist::table: size mismatch");
        double total = 0.0;
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (static_cast<int>(points[i].size()) != d)
                throw std::invalid_argument("StepDist::table: dim mismatch");
            if (probs[i] < 0.0)
                throw std::invalid_argument("StepDist::table: negative prob");
            total += probs[i];
            for (int j = 0; j < d; ++j) mean[j] += probs[i] * points[i][j];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("StepDist::table: probs must sum to 1");
        for (int j = 0; j < d; ++j)
            if (std::abs(mean[j]) > 1e-12)
                throw std::invalid_argument("StepDist::table: mean must be zero");
        s.cov_ = SymMatrix::identity(d, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    s.cov_.at(j, k) += probs[i] * points[i][j] * points[i][k];
        // positive definiteness via eigenvalues
        std::vector<double> vals;
        SymMatrix vecs;
        detail::jacobi_eigen(s.cov_, vals, vecs);
        for (double v : vals)
            if (!(v > 0.0))
                throw std::invalid_argument("StepDist::table: covariance not PD");
        s.points_ = std::move(points);
        s.cum_.resize(probs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            s.cum_[i] = acc;
        }
        return s;
    }

    int dim() const noexcept { return dim_; }
    Kind kind() const noexcept { return kind_; }
    const SymMatrix& covariance() const noexcept { return cov_; }
    // Bounded-support laws certify the o(x^{-4}) tail condition by
    // construction; the gaussian satisfies it analytically but is flagged as
    // unbounded.
    bool bounded_support() const noexcept { return kind_ != Kind::gaussian; }
    std::string name() const {
        switch (kind_) {
            case Kind::gaussian: return "gaussian";
            case Kind::axis_uniform: return "axis-uniform";
            case Kind::two_point: return "two-point";
            case Kind::table: return "table";
        }
        return "";
    }

    void sample(Rng& rng, double* out) const {
        switch (kind_) {
            case Kind::gaussian:
                for (int j = 0; j < dim_; ++j) out[j] = rng.normal();
                return;
            case Kind::axis_uniform: {
                std::fill(out, out + dim_, 0.0);
                const std::uint64_t pick = rng.uniform_below(2 * dim_);
                out[pick / 2] = (pick & 1) ? 1.0 : -1.0;
                return;
            }
            case Kind::two_point: {
                for (int j = 0; j < dim_; ++j)
                    out[j] = (rng.next_u64() & 1) ? 1.0 : -1.0;
                return;
            }
            case Kind::table: {
                const double u = rng.uniform01();
                const std::size_t i =
                    std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
                const auto& p = points_[std::min(i, points_.size() - 1)];
                std::copy(p.begin(), p.end(), out);
                return;
            }
        }
    }

private:
    Kind kind_ = Kind::gaussian;
    int dim_ = 1;
    SymMatrix cov_;
    std::vector<std::vector<double>> points_;
    std::vector<double> cum_;
};

// Gaussian head process of a coded tree, one position per grid time.
// Conditional on the excursion, (r(t_i)) is centered Gaussian with covariance
// m_v(t_i, t_j) I, exactly at grid resolution: the construction walks the
// grid with a checkpoint stack (height, position), pushing fresh increments
// on ascents and popping through exact Brownian-bridge points on descents.
class ContinuumEmbedding {
public:
    ContinuumEmbedding(std::size_t n_points, int d)
        : dim_(d), positions_(n_points * static_cast<std::size_t>(d), 0.0) {}

    int dim() const noexcept { return dim_; }
    std::size_t n_points() const noexcept { return positions_.size() / dim_; }
    std::span<const double> at(std::size_t i) const {
        return {positions_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<double> at(std::size_t i) {
        return {positions_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }
    const std::vector<double>& flat() const noexcept { return positions_; }

private:
    int dim_;
    std::vector<double> positions_;
};

inline ContinuumEmbedding embed_continuum(const Excursion& exc, int d, Rng& rng) {
    if (d < 1) throw std::invalid_argument("embed_continuum: d >= 1");
    const auto& v = exc.values();
    const std::size_t n = v.size();
    ContinuumEmbedding emb(n, d);

    std::vector<double> stack_h;
    std::vector<double> stack_x;  // d values per entry
    stack_h.reserve(1024);
    stack_x.reserve(1024 * d);
    stack_h.push_back(0.0);
    for (int j = 0; j < d; ++j) stack_x.push_back(0.0);

    std::vector<double> cur(d, 0.0);
    std::vector<double> above_x(d, 0.0);
    double cur_h = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double h = v[i];
        if (h > cur_h) {
            const double sd = std::sqrt(h - cur_h);
            for (int j = 0; j < d; ++j) cur[j] += sd * rng.normal();
            cur_h = h;
            stack_h.push_back(h);
            stack_x.insert(stack_x.end(), cur.begin(), cur.end());
        } else if (h < cur_h) {
            // pop strictly above h; bridge between the retained checkpoint
            // below and the last popped one
            double above_h = cur_h;
            std::copy(cur.begin(), cur.end(), above_x.begin());
            while (stack_h.back() > h) {
                above_h = stack_h.back();
                std::copy(stack_x.end() - d, stack_x.end(), above_x.begin());
                stack_h.pop_back();
                stack_x.resize(stack_x.size() - d);
            }
            const double below_h = stack_h.back();
            if (below_h == h) {
                std::copy(stack_x.end() - d, stack_x.end(), cur.begin());
            } else {
                const double span = above_h - below_h;
                const double frac = (h - below_h) / span;
                const double bridge_sd =
                    std::sqrt((h - below_h) * (above_h - h) / span);
                const double* below_x = stack_x.data() + stack_x.size() - d;
                for (int j = 0; j < d; ++j) {
                    cur[j] = below_x[j] + frac * (above_x[j] - below_x[j]) +
                             bridge_sd * rng.normal();
                }
                stack_h.push_back(h);
                stack_x.insert(stack_x.end(), cur.begin(), cur.end());
            }
            cur_h = h;
        }
        std::copy(cur.begin(), cur.end(), emb.at(i).begin());
    }
    return emb;
}

// Branching-random-walk embedding: root at the origin, each vertex at its
// parent plus an independent step.
class GraphEmbedding {
public:
    GraphEmbedding(int n, int d)
        : dim_(d), positions_(static_cast<std::size_t>(n) * d, 0.0) {}

    int dim() const noexcept { return dim_; }
    int n() const noexcept { return static_cast<int>(positions_.size() / dim_); }
    std::span<const double> at(int v) const {
        return {positions_.data() + static_cast<std::size_t>(v) * dim_,
                static_cast<std::size_t>(dim_)};
    }
    std::span<double> at(int v) {
        return {positions_.data() + static_cast<std::size_t>(v) * dim_,
                static_cast<std::size_t>(dim_)};
    }

private:
    int dim_;
    std::vector<double> positions_;
};

inline GraphEmbedding embed_brw(const OrderedTree& tree, const StepDist& step,
                                Rng& rng) {
    const int d = step.dim();
    GraphEmbedding emb(tree.n(), d);
    std::vector<double> y(d);
    for (int v = 1; v < tree.n(); ++v) {
        step.sample(rng, y.data());
        auto parent = emb.at(tree.parent(v));
        auto self = emb.at(v);
        for (int j = 0; j < d; ++j) self[j] = parent[j] + y[j];
    }
    return emb;
}

// A tour (v, r): grid excursion-like path plus head positions on the same
// grid. v is a plain grid function (discrete depth paths may touch zero in
// the interior, so it need not satisfy the excursion invariants).
struct Tour {
    std::vector<double> v;
    std::vector<double> r;  // row-major, len x dim
    double tau = 1.0;
    int dim = 1;

    std::size_t len() const noexcept { return v.size(); }
    double grid_step() const noexcept {
        return tau / static_cast<double>(v.size() - 1);
    }
    std::span<const double> head(std::size_t k) const {
        return {r.data() + k * dim, static_cast<std::size_t>(dim)};
    }
    std::size_t snap(double t) const {
        const double slack = 1e-9 * tau;
        if (t < -slack || t > tau + slack)
            throw std::out_of_range("Tour: time outside [0, tau]");
        const double pos = std::clamp(t, 0.0, tau) / grid_step();
        return std::min(static_cast<std::size_t>(std::llround(pos)), v.size() - 1);
    }
};

inline Tour make_tour(const Excursion& exc, const ContinuumEmbedding& emb) {
    if (emb.n_points() != exc.size())
        throw std::invalid_argument("make_tour: grid mismatch");
    Tour t;
    t.v = exc.values();
    t.r = emb.flat();
    t.tau = exc.tau();
    t.dim = emb.dim();
    return t;
}

// Normalized discrete tour (v_n, r_n) = (n^{-1/2} V_n, n^{-1/4} R_n) on the
// grid k/(2n), endpoints pinned to the root.
inline Tour normalized_tour(const OrderedTree& tree, const GraphEmbedding& emb) {
    if (emb.n() != tree.n())
        throw std::invalid_argument("normalized_tour: embedding built on another tree");
    const auto tour = dfs_tour(tree);
    const double n = static_cast<double>(tree.n());
    const double vscale = 1.0 / std::sqrt(n);
    const double rscale = 1.0 / std::pow(n, 0.25);
    Tour out;
    out.tau = 1.0;
    out.dim = emb.dim();
    const std::size_t len = tour.depths.size();
    out.v.resize(len);
    out.r.resize(len * emb.dim());
    for (std::size_t k = 0; k < len; ++k) {
        out.v[k] = vscale * tour.depths[k];
        auto pos = emb.at(tour.vertex_visits[k]);
        for (int j = 0; j < emb.dim(); ++j) out.r[k * emb.dim() + j] = rscale * pos[j];
    }
    return out;
}

struct ScalingConstants {
    double sigma_tree = 0.0;  // sigma_T = 2 / sigma_Z
    SymMatrix sigma_phi;      // Sigma_phi = Sigma_Y sqrt(2 / sigma_Z)
};

inline ScalingConstants scaling_constants(const OffspringDist& dist,
                                          const StepDist& step) {
    const double sigma_z = dist.sigma();
    if (!(sigma_z > 0.0))
        throw std::invalid_argument("scaling_constants: sigma_Z must be positive");
    ScalingConstants out;
    out.sigma_tree = 2.0 / sigma_z;
    SymMatrix sigma_y = matrix_sqrt(step.covariance());
    const double f = std::sqrt(2.0 / sigma_z);
    out.sigma_phi = sigma_y;
    for (double& x : out.sigma_phi.a) x *= f;
    return out;
}

// Root-to-[t] arc of a tour: the grid ancestors of [t] (strictly decreasing
// running minimum scanning left from t), in increasing time order. This is
// the stopped snake path w(t) at grid resolution.
struct ArcPoints {
    std::vector<double> times;
    std::vector<double> heights;
    std::vector<double> positions;  // row-major, count x dim
    int dim = 1;

    std::size_t count() const noexcept { return times.size(); }
    std::span<const double> at(std::size_t i) const {
        return {positions.data() + i * dim, static_cast<std::size_t>(dim)};
    }
};

inline ArcPoints arc_extract(const Tour& tour, double t) {
    const std::size_t tidx = tour.snap(t);
    ArcPoints arc;
    arc.dim = tour.dim;
    std::vector<std::size_t> picks;
    double runmin = std::numeric_limits<double>::infinity();
    for (std::size_t s = tidx + 1; s-- > 0;) {
        if (tour.v[s] < runmin) {
            runmin = tour.v[s];
            picks.push_back(s);
        }
    }
    std::reverse(picks.begin(), picks.end());
    arc.times.reserve(picks.size());
    arc.heights.reserve(picks.size());
    arc.positions.reserve(picks.size() * tour.dim);
    const double step = tour.grid_step();
    for (std::size_t s : picks) {
        arc.times.push_back(static_cast<double>(s) * step);
        arc.heights.push_back(tour.v[s]);
        auto h = tour.head(s);
        arc.positions.insert(arc.positions.end(), h.begin(), h.end());
    }
    return arc;
}

}  // namespace sptree

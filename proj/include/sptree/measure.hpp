#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sptree/embedding.hpp"
#include "sptree/excursion.hpp"
#include "sptree/parallel.hpp"
#include "sptree/rng.hpp"
#include "sptree/stats.hpp"

namespace sptree {

struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Gauge x -> kappa x^2 ln ln (1/x) on (0, x_max]. A calibrated gauge pins the
// (dim, delta) it was fitted at; estimates at any other delta are rejected,
// since the raw covering count is delta-dependent.
struct Gauge {
    double kappa = 1.0;
    double x_max = std::exp(-2.0);
    int dim = 0;        // 0 = unbound
    double delta = 0.0;  // 0 = unbound
};

inline double gauge_eval(const Gauge& g, double x) {
    if (!(x > 0.0) || x > g.x_max)
        throw std::out_of_range("gauge_eval: x outside (0, x_max]");
    return g.kappa * x * x * std::log(std::log(1.0 / x));
}

// Ordered polyline tracing an arc; consecutive points must be closer than the
// covering radius used on it.
struct ArcSample {
    std::vector<double> points;  // row-major count x dim
    int dim = 1;

    std::size_t count() const { return points.empty() ? 0 : points.size() / dim; }
    const double* at(std::size_t i) const { return points.data() + i * dim; }
};

namespace detail {

// Greedy sequential cover over a point stream: a new radius-delta ball opens
// at the first point escaping the current one. source(out) yields points in
// arc order, returning false when exhausted; the caller guarantees spacing.
template <class Source>
std::int64_t greedy_cover_stream(int d, double delta, Source&& source) {
    std::vector<double> center(d), point(d);
    if (!source(center.data())) return 0;
    std::int64_t balls = 1;
    const double delta2 = delta * delta;
    while (source(point.data())) {
        double dist2 = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diff = point[j] - center[j];
            dist2 += diff * diff;
        }
        if (dist2 > delta2) {
            ++balls;
            std::copy(point.begin(), point.end(), center.begin());
        }
    }
    return balls;
}

// Time step for sampling Brownian paths against a covering radius delta:
// mean spacing delta/3, with a rejection cap keeping every step below delta.
inline double brownian_step_for(int d, double delta) {
    return delta * delta / (9.0 * static_cast<double>(d));
}

// One Brownian increment of per-coordinate variance u, redrawn in the
// (astronomically rare) event it reaches length delta, so sampled arcs meet
// the spacing invariant by construction.
inline void capped_gaussian_step(int d, double u, double delta, Rng& rng,
                                 double* out) {
    const double sd = std::sqrt(u);
    const double delta2 = delta * delta;
    while (true) {
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
            out[j] = sd * rng.normal();
            norm2 += out[j] * out[j];
        }
        if (norm2 < delta2) return;
    }
}

}  // namespace detail

// Greedy covering count of a sampled arc; consecutive-point spacing must stay
// below delta.
inline std::int64_t cover_count(const ArcSample& arc, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("cover_count: delta > 0");
    const std::size_t n = arc.count();
    if (n == 0) return 0;
    const double delta2 = delta * delta;
    for (std::size_t i = 1; i < n; ++i) {
        double gap2 = 0.0;
        for (int j = 0; j < arc.dim; ++j) {
            const double diff = arc.at(i)[j] - arc.at(i - 1)[j];
            gap2 += diff * diff;
        }
        if (gap2 >= delta2)
            throw ResolutionError("cover_count: consecutive samples further than delta");
    }
    std::size_t cursor = 0;
    return detail::greedy_cover_stream(arc.dim, delta, [&](double* out) {
        if (cursor >= n) return false;
        std::copy(arc.at(cursor), arc.at(cursor) + arc.dim, out);
        ++cursor;
        return true;
    });
}

// Covering estimate of the gauge measure: ball count times the gauge at the
// ball diameter. Empty and single-point arcs measure zero.
inline double hausdorff_estimate(const ArcSample& arc, const Gauge& g, double delta) {
    if (g.delta > 0.0 && std::abs(g.delta - delta) > 1e-15)
        throw std::invalid_argument(
            "hausdorff_estimate: gauge calibrated at a different delta");
    if (g.dim > 0 && g.dim != arc.dim)
        throw std::invalid_argument("hausdorff_estimate: gauge dimension mismatch");
    if (arc.count() <= 1) return 0.0;
    return static_cast<double>(cover_count(arc, delta)) * gauge_eval(g, 2.0 * delta);
}

// d-dimensional Brownian path run for `duration`, sampled at the covering
// step for delta.
inline ArcSample brownian_path_sample(int d, double duration, double delta,
                                      Rng& rng) {
    const double u = detail::brownian_step_for(d, delta);
    const std::int64_t steps = static_cast<std::int64_t>(std::ceil(duration / u));
    ArcSample arc;
    arc.dim = d;
    arc.points.assign(static_cast<std::size_t>(steps + 1) * d, 0.0);
    std::vector<double> inc(d);
    for (std::int64_t s = 1; s <= steps; ++s) {
        detail::capped_gaussian_step(d, u, delta, rng, inc.data());
        for (int j = 0; j < d; ++j)
            arc.points[s * d + j] = arc.points[(s - 1) * d + j] + inc[j];
    }
    return arc;
}

namespace detail {

// Streaming covering count of a fresh Brownian path (no materialization).
inline std::int64_t cover_brownian_path(int d, double duration, double delta,
                                        Rng& rng) {
    const double u = brownian_step_for(d, delta);
    const std::int64_t steps = static_cast<std::int64_t>(std::ceil(duration / u));
    std::vector<double> cur(d, 0.0), inc(d);
    std::int64_t emitted = 0;
    return greedy_cover_stream(d, delta, [&](double* out) {
        if (emitted > steps) return false;
        if (emitted > 0) {
            capped_gaussian_step(d, u, delta, rng, inc.data());
            for (int j = 0; j < d; ++j) cur[j] += inc[j];
        }
        std::copy(cur.begin(), cur.end(), out);
        ++emitted;
        return true;
    });
}

// Streaming source walking a root-to-[t] arc: the tour's ancestor staircase
// (actual embedding values) with conditional Brownian-bridge fill between
// consecutive ancestors, at the covering step for delta. Exact in law: given
// the excursion, the emitted sequence is a Brownian path of duration v(t)
// sampled at spacing <= the covering step.
class BridgeArcSource {
public:
    BridgeArcSource(const ArcPoints& anchors, double delta, Rng& rng)
        : anchors_(&anchors),
          d_(anchors.dim),
          delta_(delta),
          u_(brownian_step_for(anchors.dim, delta)),
          rng_(&rng),
          cur_(anchors.dim, 0.0) {
        if (d_ > 64) throw std::invalid_argument("BridgeArcSource: dim cap 64");
    }

    bool operator()(double* out) {
        if (next_anchor_ == 0) {
            std::copy(anchors_->at(0).begin(), anchors_->at(0).end(), cur_.begin());
            cur_h_ = anchors_->heights[0];
            next_anchor_ = 1;
            std::copy(cur_.begin(), cur_.end(), out);
            return true;
        }
        while (next_anchor_ < anchors_->count()) {
            const double target_h = anchors_->heights[next_anchor_];
            const double gap = target_h - cur_h_;
            if (gap <= u_) {
                // arrive at the anchor itself (actual embedded position)
                std::copy(anchors_->at(next_anchor_).begin(),
                          anchors_->at(next_anchor_).end(), cur_.begin());
                cur_h_ = target_h;
                ++next_anchor_;
                std::copy(cur_.begin(), cur_.end(), out);
                return true;
            }
            // one conditional bridge step of size u_ toward the anchor
            const double frac = u_ / gap;
            const double sd = std::sqrt(u_ * (gap - u_) / gap);
            const double delta2 = delta_ * delta_;
            auto anchor = anchors_->at(next_anchor_);
            while (true) {
                double norm2 = 0.0;
                for (int j = 0; j < d_; ++j) {
                    scratch_[j] = cur_[j] + frac * (anchor[j] - cur_[j]) +
                                  sd * rng_->normal();
                    const double diff = scratch_[j] - cur_[j];
                    norm2 += diff * diff;
                }
                if (norm2 < delta2) break;
            }
            std::copy(scratch_, scratch_ + d_, cur_.begin());
            cur_h_ += u_;
            std::copy(cur_.begin(), cur_.end(), out);
            return true;
        }
        return false;
    }

private:
    const ArcPoints* anchors_;
    int d_;
    double delta_;
    double u_;
    Rng* rng_;
    std::vector<double> cur_;
    double cur_h_ = 0.0;
    std::size_t next_anchor_ = 0;
    double scratch_[64];
};

}  // namespace detail

// Materialized bridge-densified arc sample (the streaming source drives the
// experiments; this form feeds the ArcSample-level ops and tests).
inline ArcSample arc_sample_from_tour(const Tour& tour, double t, double delta,
                                      Rng& rng) {
    const ArcPoints anchors = arc_extract(tour, t);
    if (tour.dim > 64) throw std::invalid_argument("arc_sample_from_tour: dim cap 64");
    ArcSample arc;
    arc.dim = tour.dim;
    detail::BridgeArcSource source(anchors, delta, rng);
    std::vector<double> point(tour.dim);
    while (source(point.data()))
        arc.points.insert(arc.points.end(), point.begin(), point.end());
    return arc;
}

// Covering-count measure of the root-to-[t] arc without materialization.
inline double measure_root_arc(const Tour& tour, double t, const Gauge& g,
                               double delta, Rng& rng) {
    if (g.delta > 0.0 && std::abs(g.delta - delta) > 1e-15)
        throw std::invalid_argument("measure_root_arc: gauge delta mismatch");
    const ArcPoints anchors = arc_extract(tour, t);
    if (anchors.count() <= 1) return 0.0;
    detail::BridgeArcSource source(anchors, delta, rng);
    const std::int64_t balls =
        detail::greedy_cover_stream(tour.dim, delta, source);
    if (balls <= 1) return 0.0;
    return static_cast<double>(balls) * gauge_eval(g, 2.0 * delta);
}

struct CalibrationStats {
    Gauge gauge;
    double raw_slope = 0.0;  // covering-sum slope before normalization
    double r_squared = 0.0;
    int paths = 0;
};

// Fits kappa so that the covering estimate of a standard Brownian path of
// duration t regresses onto t with slope one. Stores (d, delta) with the
// gauge; reuse at another delta is rejected downstream.
inline CalibrationStats calibrate_kappa(int d, double delta, int reps, Rng& rng) {
    if (d < 3) throw std::invalid_argument("calibrate_kappa: requires d >= 3");
    if (!(delta > 0.0) || 2.0 * delta > std::exp(-2.0))
        throw std::invalid_argument("calibrate_kappa: need 0 < 2 delta <= e^-2");
    if (reps < 20) throw std::invalid_argument("calibrate_kappa: reps >= 20");
    Gauge raw;  // kappa = 1 reference gauge
    std::vector<double> durations{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> xs(reps), ys(reps);
    const double g2d = raw.kappa * 4.0 * delta * delta *
                       std::log(std::log(1.0 / (2.0 * delta)));
    std::vector<std::int64_t> counts(reps);
    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t i) {
        Rng stream = rng.split(i);
        const double t = durations[i % durations.size()];
        counts[i] = detail::cover_brownian_path(d, t, delta, stream);
        xs[i] = t;
    });
    for (int i = 0; i < reps; ++i) ys[i] = static_cast<double>(counts[i]) * g2d;
    const LinFit fit = linfit(xs, ys);
    CalibrationStats out;
    out.raw_slope = fit.slope;
    out.r_squared = fit.r_squared;
    out.paths = reps;
    out.gauge.kappa = 1.0 / fit.slope;
    out.gauge.dim = d;
    out.gauge.delta = delta;
    return out;
}

struct ArcIdentityRecord {
    double t = 0.0;
    double v = 0.0;
    double estimate = 0.0;
    double rel_err = 0.0;
    bool skipped = false;
};

// Per-t relative error of the root-arc gauge measure against v(t) (the
// tree-metric identity, checked from spatial positions only; the excursion
// identifies which points form the arc).
inline std::vector<ArcIdentityRecord> arc_measure_identity_check(
    const Tour& tour, const Gauge& g, double delta,
    const std::vector<double>& t_grid, Rng& rng, double v_floor = 0.05) {
    std::vector<ArcIdentityRecord> out(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        auto& rec = out[i];
        rec.t = t_grid[i];
        rec.v = tour.v[tour.snap(t_grid[i])];
        if (rec.v < v_floor) {
            rec.skipped = true;
            continue;
        }
        Rng stream = rng.split(i);
        rec.estimate = measure_root_arc(tour, t_grid[i], g, delta, stream);
        rec.rel_err = std::abs(rec.estimate - rec.v) / rec.v;
    }
    return out;
}

// d_S(r(s), r(t)) estimate: sum of the gauge measures of the two arc pieces
// above the branch point of [s], [t].
inline double two_point_arc_measure(const Tour& tour, const RangeMinIndex& idx,
                                    const Gauge& g, double delta, double s, double t,
                                    Rng& rng) {
    const std::size_t is = tour.snap(s), it = tour.snap(t);
    const std::size_t bidx = idx.argmin(is, it);
    const double m = tour.v[bidx];
    double total = 0.0;
    int piece = 0;
    for (std::size_t leaf : {is, it}) {
        ++piece;
        ArcPoints anchors = arc_extract(tour, leaf * tour.grid_step());
        // keep the staircase above the branch height, anchored at the branch
        ArcPoints cut;
        cut.dim = anchors.dim;
        cut.times.push_back(bidx * tour.grid_step());
        cut.heights.push_back(m);
        auto bpos = tour.head(bidx);
        cut.positions.insert(cut.positions.end(), bpos.begin(), bpos.end());
        for (std::size_t i = 0; i < anchors.count(); ++i) {
            if (anchors.heights[i] > m) {
                cut.times.push_back(anchors.times[i]);
                cut.heights.push_back(anchors.heights[i]);
                auto p = anchors.at(i);
                cut.positions.insert(cut.positions.end(), p.begin(), p.end());
            }
        }
        if (cut.count() <= 1) continue;  // leaf at the branch point
        Rng stream = rng.split(piece);
        detail::BridgeArcSource source(cut, delta, stream);
        const std::int64_t balls =
            detail::greedy_cover_stream(tour.dim, delta, source);
        if (balls > 1) total += static_cast<double>(balls) * gauge_eval(g, 2.0 * delta);
    }
    return total;
}

// Hausdorff distance between finite point clouds (max of the two directed
// sup-inf distances).
inline double point_cloud_hausdorff(const std::vector<double>& a,
                                    const std::vector<double>& b, int dim) {
    if (a.empty() || b.empty() || a.size() % dim != 0 || b.size() % dim != 0)
        throw std::invalid_argument("point_cloud_hausdorff: empty or ragged input");
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    auto directed = [dim](const std::vector<double>& from, std::size_t nf,
                          const std::vector<double>& to, std::size_t nt) {
        double worst = 0.0;
        for (std::size_t i = 0; i < nf; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nt; ++j) {
                double d2 = 0.0;
                for (int k = 0; k < dim; ++k) {
                    const double diff = from[i * dim + k] - to[j * dim + k];
                    d2 += diff * diff;
                }
                best = std::min(best, d2);
                if (best == 0.0) break;
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, na, b, nb), directed(b, nb, a, na));
}

struct InjectivityDiagnostic {
    double min_image_distance = std::numeric_limits<double>::infinity();
    int pairs_used = 0;
};

// Minimum image distance over sampled pairs at tree distance >= eta;
// reported, never asserted (self-intersections are expected in low dimension).
inline InjectivityDiagnostic injectivity_diagnostic(const Tour& tour,
                                                    const RangeMinIndex& idx,
                                                    double eta, int pairs, Rng& rng) {
    if (!(eta > 0.0)) throw std::invalid_argument("injectivity_diagnostic: eta > 0");
    InjectivityDiagnostic out;
    for (int i = 0; i < pairs; ++i) {
        const std::size_t a = rng.uniform_below(tour.len());
        const std::size_t b = rng.uniform_below(tour.len());
        const double dv = tour.v[a] + tour.v[b] - 2.0 * idx.min_value(a, b);
        if (dv < eta) continue;
        double d2 = 0.0;
        for (int j = 0; j < tour.dim; ++j) {
            const double diff = tour.r[a * tour.dim + j] - tour.r[b * tour.dim + j];
            d2 += diff * diff;
        }
        out.min_image_distance = std::min(out.min_image_distance, std::sqrt(d2));
        ++out.pairs_used;
    }
    return out;
}

}  // namespace sptree

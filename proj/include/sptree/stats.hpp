#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace sptree {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

struct ChiSquareResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int df = 0;
    bool degenerate = false;  // df == 0
};

struct LinFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Survival function of the Kolmogorov distribution, Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 l^2}.
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-12) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16 * (std::abs(sum) + 1e-300)) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Two-sided two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double va = a[ia], vb = b[ib];
        if (va <= vb) {
            do { ++ia; } while (ia < a.size() && a[ia] == va);
        }
        if (vb <= va) {
            do { ++ib; } while (ib < b.size() && b[ib] == vb);
        }
        d = std::max(d, std::abs(ia / na - ib / nb));
    }
    d = std::max(d, std::abs(1.0 - ib / nb));
    d = std::max(d, std::abs(ia / na - 1.0));
    const double ne = na * nb / (na + nb);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    return {d, kolmogorov_q(lambda)};
}

// Pearson chi-square against given cell probabilities; df = bins - 1.
inline ChiSquareResult chi_square(const std::vector<double>& observed,
                                  const std::vector<double>& expected_probs) {
    if (observed.empty() || observed.size() != expected_probs.size())
        throw std::invalid_argument("chi_square: size mismatch");
    double n = 0.0;
    for (double o : observed) n += o;
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!(expected_probs[i] > 0.0))
            throw std::invalid_argument("chi_square: nonpositive expected probability");
        const double e = n * expected_probs[i];
        const double diff = observed[i] - e;
        stat += diff * diff / e;
    }
    ChiSquareResult result;
    result.statistic = stat;
    result.df = static_cast<int>(observed.size()) - 1;
    if (result.df == 0) {
        result.statistic = 0.0;
        result.degenerate = true;
        result.p_value = 1.0;
        return result;
    }
    result.p_value = boost::math::gamma_q(result.df / 2.0, stat / 2.0);
    return result;
}

inline LinFit linfit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("linfit: need >= 2 points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("linfit: degenerate xs");
    LinFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double ymean = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
        ss_res += r * r;
        ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
    }
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

// Least squares on (ln x, ln y); inputs must be strictly positive.
inline LinFit linfit_loglog(const std::vector<double>& xs,
                            const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("linfit_loglog: size mismatch");
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::invalid_argument("linfit_loglog: nonpositive value");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    return linfit(lx, ly);
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance: need >= 2");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace sptree

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/owens_t.hpp>

#include "errors.hpp"
#include "normal.hpp"
#include "rng.hpp"
#include "skew_params.hpp"

namespace skewtree {

/// Skew-normal density 2 phi(z) Phi(lambda z).
inline double snd_pdf(double z, double lambda) {
    detail::require(std::isfinite(lambda), "snd_pdf needs a finite lambda");
    return 2.0 * normal_pdf(z) * normal_cdf(lambda * z);
}

/// Skew-normal CDF, Phi(z) - 2 T(z, lambda) with Owen's T function.
inline double snd_cdf(double z, double lambda) {
    detail::require(std::isfinite(lambda), "snd_cdf needs a finite lambda");
    return normal_cdf(z) - 2.0 * boost::math::owens_t(z, lambda);
}

struct SndMoments {
    double mean;
    double variance;
};

inline SndMoments snd_moments(const SkewParams& p) {
    const double d = p.delta();
    return {std::sqrt(2.0 / std::numbers::pi) * d, 1.0 - (2.0 / std::numbers::pi) * d * d};
}

inline SndMoments snd_moments(double lambda) {
    detail::require(std::isfinite(lambda), "snd_moments needs a finite lambda");
    return snd_moments(SkewParams::from_lambda(lambda));
}

/// E[Z^(2k+1)] for the skew-normal law. Written in delta so that it stays
/// finite at |delta| = 1, where it reduces to the signed half-normal moment.
inline double snd_odd_moment(int k, const SkewParams& p) {
    detail::require(k >= 0, "odd moment index must be nonnegative");
    const double d = p.delta();
    const double c = 1.0 - d * d;
    // (2k+1)! / 2^k, accumulated to avoid overflow for moderate k.
    double lead = 1.0;
    for (int m = 2; m <= 2 * k + 1; ++m) lead *= m;
    lead /= std::ldexp(1.0, k);
    double sum = 0.0;
    double j_fact = 1.0;
    for (int j = 0; j <= k; ++j) {
        if (j > 0) j_fact *= j;
        double odd_fact = 1.0; // (2j+1)!
        for (int m = 2; m <= 2 * j + 1; ++m) odd_fact *= m;
        double km_fact = 1.0; // (k-j)!
        for (int m = 2; m <= k - j; ++m) km_fact *= m;
        sum += j_fact * std::pow(4.0, j) * std::pow(d, 2 * j + 1) * std::pow(c, k - j) /
               (odd_fact * km_fact);
    }
    return std::sqrt(2.0 / std::numbers::pi) * lead * sum;
}

inline double snd_odd_moment(int k, double lambda) {
    return snd_odd_moment(k, SkewParams::from_lambda(lambda));
}

/// Raw moment E[Z^m]; even orders coincide with the standard normal ((m-1)!!).
inline double snd_raw_moment(int m, const SkewParams& p) {
    detail::require(m >= 0, "moment order must be nonnegative");
    if (m % 2 == 1) return snd_odd_moment((m - 1) / 2, p);
    double v = 1.0;
    for (int q = m - 1; q > 1; q -= 2) v *= q;
    return v;
}

/// Density of the skew Brownian motion marginal at time t.
inline double sbm_pdf(double x, double t, const SkewParams& p) {
    detail::require(t > 0.0, "sbm_pdf needs t > 0");
    const double w = x >= 0.0 ? p.alpha() : 1.0 - p.alpha();
    return w * std::sqrt(2.0 / (std::numbers::pi * t)) * std::exp(-x * x / (2.0 * t));
}

/// SBM marginal CDF at time t.
inline double sbm_cdf(double x, double t, const SkewParams& p) {
    detail::require(t > 0.0, "sbm_cdf needs t > 0");
    const double a = p.alpha();
    const double z = x / std::sqrt(t);
    if (x < 0.0) return 2.0 * (1.0 - a) * normal_cdf(z);
    return (1.0 - a) + a * (2.0 * normal_cdf(z) - 1.0);
}

struct SbmMoments {
    double mean;
    double variance;
    double skewness;
    double excess_kurtosis;
};

/// Unit-time mean of the SBM, (2 alpha - 1) sqrt(2 / pi).
inline double sbm_unit_mean(const SkewParams& p) {
    return (2.0 * p.alpha() - 1.0) * std::sqrt(2.0 / std::numbers::pi);
}

/// Mean, variance, skewness and excess kurtosis of the SBM marginal at time t.
/// Skewness and kurtosis depend on alpha only, so they are computed without t.
inline SbmMoments sbm_moments(double t, const SkewParams& p) {
    detail::require(t > 0.0, "sbm_moments needs t > 0");
    const double m = sbm_unit_mean(p);
    const double m2 = m * m;
    const double v1 = 1.0 - m2;
    SbmMoments out{};
    out.mean = m * std::sqrt(t);
    out.variance = t * v1;
    out.skewness = (2.0 * m2 - 1.0) * m / std::pow(v1, 1.5);
    // From E[X^4] = 3t^2 for a sign-flipped |N(0, t)|.
    out.excess_kurtosis = 2.0 * m2 * (2.0 - 3.0 * m2) / (v1 * v1);
    return out;
}

/// One draw of B_t for the SBM: |N(0, t)| with a negative sign w.p. 1 - alpha.
inline double sample_sbm_marginal(double t, const SkewParams& p, Rng& rng) {
    detail::require(t > 0.0, "sample_sbm_marginal needs t > 0");
    const double x = std::abs(rng.normal()) * std::sqrt(t);
    return rng.uniform() < p.alpha() ? x : -x;
}

/// Itô-McKean path sqrt(1 - delta^2) B1 + delta |B2| on the given grid.
inline std::vector<double> sample_ito_mckean_path(std::span<const double> t_grid, double delta,
                                                  Rng& rng) {
    detail::require(!t_grid.empty() && t_grid[0] == 0.0, "time grid must start at 0");
    detail::require(delta >= -1.0 && delta <= 1.0, "delta must lie in [-1, 1]");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        detail::require(t_grid[i] > t_grid[i - 1], "time grid must be strictly increasing");
    const double s = std::sqrt(1.0 - delta * delta);
    std::vector<double> out(t_grid.size(), 0.0);
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double sd = std::sqrt(t_grid[i] - t_grid[i - 1]);
        b1 += sd * rng.normal();
        b2 += sd * rng.normal();
        out[i] = s * b1 + delta * std::abs(b2);
    }
    return out;
}

} // namespace skewtree

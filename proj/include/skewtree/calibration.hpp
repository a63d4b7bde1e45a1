#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "series.hpp"
#include "skew_params.hpp"
#include "skew_walk.hpp"
#include "stats.hpp"

namespace skewtree {

// ---------------------------------------------------------------- sigma

inline double estimate_sigma_from_returns(std::span<const double> daily, double dt) {
    detail::require(dt > 0.0, "dt must be positive");
    if (daily.size() < 30) throw DataError("sigma estimation needs at least 30 returns");
    return std::sqrt(summarize(daily).variance() / dt);
}

/// sigma* = sqrt(sample variance of daily log-returns / dt).
inline double estimate_sigma(const PriceSeries& s) {
    const Returns r = compute_returns(s);
    return estimate_sigma_from_returns(r.daily, s.dt);
}

// ---------------------------------------------------------------- (mu, alpha) search

struct SearchDomain {
    double mu_lo = -0.5, mu_hi = 0.5;
    double alpha_lo = 0.45, alpha_hi = 0.65;

    void validate() const {
        detail::require(mu_lo <= mu_hi, "mu bounds are reversed");
        detail::require(alpha_lo <= alpha_hi, "alpha bounds are reversed");
        detail::require(alpha_lo >= 0.0 && alpha_hi <= 1.0, "alpha bounds must lie in [0, 1]");
    }
};

struct FitOptions {
    SearchDomain domain;
    std::size_t ensemble_size = 20000;
    int repeats = 1; // walks per candidate; the candidate keeps its best walk
    std::size_t workers = 0;
};

struct CalibrationResult {
    double sigma_star = 0, mu_star = 0, alpha_star = 0, mse = 0;
    SearchDomain domain;
    std::size_t ensemble_size = 0;
    int repeats = 1;
    std::uint64_t seed = 0;
    std::size_t best_index = 0;
    std::vector<std::string> warnings;
};

struct Candidate {
    double mu;
    double alpha;
};

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base), f = inv, x = 0.0;
    while (i > 0) {
        x += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return x;
}

inline constexpr std::uint64_t kShiftStream = ~std::uint64_t{0};

} // namespace detail

/// Candidate i: a randomly shifted Halton(2, 3) point mapped onto the domain.
inline Candidate fit_candidate(std::size_t i, const SearchDomain& d, const Rng& rng) {
    Rng shift = rng.substream(detail::kShiftStream);
    const double s1 = shift.uniform(), s2 = shift.uniform();
    double u = detail::radical_inverse(i + 1, 2) + s1;
    double v = detail::radical_inverse(i + 1, 3) + s2;
    u -= std::floor(u);
    v -= std::floor(v);
    return {d.mu_lo + (d.mu_hi - d.mu_lo) * u, d.alpha_lo + (d.alpha_hi - d.alpha_lo) * v};
}

/// Random stream feeding walk `repeat` of candidate i.
inline Rng fit_candidate_stream(const Rng& rng, std::size_t i, int repeat = 0) {
    return rng.substream(i).substream(static_cast<std::uint64_t>(repeat));
}

/// Model cumulative returns (mu - sigma^2 / 2) k dt + sigma sqrt(dt) M_k, k = 1..n.
inline std::vector<double> theoretical_cumulative_returns(double mu, double sigma,
                                                          std::span<const int> walk, double dt) {
    const double drift = (mu - 0.5 * sigma * sigma) * dt;
    const double scale = sigma * std::sqrt(dt);
    std::vector<double> out(walk.size() - 1);
    for (std::size_t k = 1; k < walk.size(); ++k)
        out[k - 1] = drift * static_cast<double>(k) + scale * walk[k];
    return out;
}

namespace detail {

/// Squared distance between R and one model walk; stops early above `bound`.
inline double walk_sse(std::span<const double> R, double mu, double sigma, double alpha, double dt,
                       Rng& rng, double bound) {
    const double drift = (mu - 0.5 * sigma * sigma) * dt;
    const double scale = sigma * std::sqrt(dt);
    double sse = 0.0;
    walk_srw(static_cast<int>(R.size()), alpha, rng, [&](int k, int m) {
        const double e = R[static_cast<std::size_t>(k - 1)] -
                         (drift * static_cast<double>(k) + scale * m);
        sse += e * e;
        return !((k & 63) == 0 && sse > bound);
    });
    return sse;
}

} // namespace detail

/// Full (never aborted) squared error of candidate i, for audits.
inline double candidate_sse(std::span<const double> R, double dt, double sigma,
                            const FitOptions& opt, const Rng& rng, std::size_t i) {
    const Candidate c = fit_candidate(i, opt.domain, rng);
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.repeats; ++r) {
        Rng s = fit_candidate_stream(rng, i, r);
        best = std::min(best, detail::walk_sse(R, c.mu, sigma, c.alpha, dt, s,
                                               std::numeric_limits<double>::infinity()));
    }
    return best;
}

/// Ensemble search for (mu*, alpha*) minimizing ||R_emp - R_th||^2 over
/// cumulative returns R_1..R_n. mse is the minimum squared error over n.
inline CalibrationResult fit_mu_alpha_cumulative(std::span<const double> R, double dt,
                                                 double sigma_star, const FitOptions& opt,
                                                 const Rng& rng) {
    detail::require(sigma_star > 0.0, "sigma* must be positive");
    detail::require(dt > 0.0, "dt must be positive");
    detail::require(opt.ensemble_size >= 1000, "ensemble size must be at least 1000");
    detail::require(opt.repeats >= 1, "repeat count must be at least 1");
    opt.domain.validate();
    if (R.empty()) throw DataError("no returns to fit");

    constexpr std::size_t per_task = 64;
    const std::size_t tasks = (opt.ensemble_size + per_task - 1) / per_task;
    std::atomic<double> global_best{std::numeric_limits<double>::infinity()};
    std::vector<std::pair<double, std::size_t>> task_best(
        tasks, {std::numeric_limits<double>::infinity(), 0});

    parallel_for(
        tasks,
        [&](std::size_t t) {
            const std::size_t lo = t * per_task;
            const std::size_t hi = std::min(opt.ensemble_size, lo + per_task);
            auto& mine = task_best[t];
            for (std::size_t i = lo; i < hi; ++i) {
                const Candidate c = fit_candidate(i, opt.domain, rng);
                for (int r = 0; r < opt.repeats; ++r) {
                    Rng s = fit_candidate_stream(rng, i, r);
                    const double bound = global_best.load(std::memory_order_relaxed);
                    const double sse = detail::walk_sse(R, c.mu, sigma_star, c.alpha, dt, s, bound);
                    if (sse < mine.first || (sse == mine.first && i < mine.second)) mine = {sse, i};
                    double cur = global_best.load(std::memory_order_relaxed);
                    while (sse < cur && !global_best.compare_exchange_weak(cur, sse)) {
                    }
                }
            }
        },
        opt.workers);

    // Aborted candidates carry partial sums above the final best, so the
    // (sse, index) minimum does not depend on scheduling.
    auto best = *std::min_element(task_best.begin(), task_best.end());
    const Candidate c = fit_candidate(best.second, opt.domain, rng);

    CalibrationResult res;
    res.sigma_star = sigma_star;
    res.mu_star = c.mu;
    res.alpha_star = c.alpha;
    res.mse = best.first / static_cast<double>(R.size());
    res.domain = opt.domain;
    res.ensemble_size = opt.ensemble_size;
    res.repeats = opt.repeats;
    res.seed = rng.seed();
    res.best_index = best.second;

    const double root_m = std::sqrt(static_cast<double>(opt.ensemble_size));
    const double a_step = (opt.domain.alpha_hi - opt.domain.alpha_lo) / root_m;
    const double m_step = (opt.domain.mu_hi - opt.domain.mu_lo) / root_m;
    if (c.alpha - opt.domain.alpha_lo <= a_step || opt.domain.alpha_hi - c.alpha <= a_step)
        res.warnings.push_back("alpha* is at the edge of the search domain; widen the alpha bounds and refit");
    if (c.mu - opt.domain.mu_lo <= m_step || opt.domain.mu_hi - c.mu <= m_step)
        res.warnings.push_back("mu* is at the edge of the search domain; widen the mu bounds and refit");
    return res;
}

inline CalibrationResult fit_mu_alpha(const PriceSeries& s, double sigma_star,
                                      const FitOptions& opt, const Rng& rng) {
    const Returns r = compute_returns(s);
    return fit_mu_alpha_cumulative(r.cumulative, s.dt, sigma_star, opt, rng);
}

// ---------------------------------------------------------------- chain and rebuild

/// Sign-quantized chain: steps sign((r_j - (mu - sigma^2/2) dt) / (sigma sqrt dt)),
/// with sign(0) = 0. Returns M_0 .. M_n.
inline std::vector<int> reconstruct_chain(const PriceSeries& s, double mu_hat, double sigma_hat) {
    detail::require(sigma_hat != 0.0, "chain reconstruction needs a nonzero sigma");
    const Returns r = compute_returns(s);
    const double drift = (mu_hat - 0.5 * sigma_hat * sigma_hat) * s.dt;
    const double scale = sigma_hat * std::sqrt(s.dt);
    std::vector<int> chain(r.daily.size() + 1, 0);
    for (std::size_t j = 0; j < r.daily.size(); ++j) {
        const double x = (r.daily[j] - drift) / scale;
        chain[j + 1] = chain[j] + (x > 0.0) - (x < 0.0);
    }
    return chain;
}

struct RebuiltPath {
    std::vector<double> prices;
    std::optional<double> r_squared;
    std::optional<double> rmse;
};

/// Model prices S_k = S_{k-1} exp((mu - sigma^2/2) dt + sigma sqrt(dt) dM_k).
/// With a reference series, also reports R^2 and RMSE of the rebuilt prices.
inline RebuiltPath rebuild_price_path(std::span<const int> chain, double mu_hat, double sigma_hat,
                                      double s0, double dt,
                                      std::span<const double> reference = {}) {
    detail::require(s0 > 0.0, "initial price must be positive");
    detail::require(dt > 0.0, "dt must be positive");
    detail::require(!chain.empty(), "chain must be nonempty");
    const double drift = (mu_hat - 0.5 * sigma_hat * sigma_hat) * dt;
    const double scale = sigma_hat * std::sqrt(dt);
    RebuiltPath out;
    out.prices.resize(chain.size());
    out.prices[0] = s0;
    for (std::size_t k = 1; k < chain.size(); ++k)
        out.prices[k] = out.prices[k - 1] * std::exp(drift + scale * (chain[k] - chain[k - 1]));
    if (!reference.empty()) {
        detail::require(reference.size() == chain.size(), "reference length must match the chain");
        const double mean = summarize(reference).mean();
        double ss_res = 0.0, ss_tot = 0.0;
        for (std::size_t k = 0; k < chain.size(); ++k) {
            ss_res += (reference[k] - out.prices[k]) * (reference[k] - out.prices[k]);
            ss_tot += (reference[k] - mean) * (reference[k] - mean);
        }
        out.rmse = std::sqrt(ss_res / static_cast<double>(chain.size()));
        out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    }
    return out;
}

// ---------------------------------------------------------------- rolling windows

struct RollingOptions {
    std::size_t window = 252;
    std::size_t median_window = 21;
    FitOptions fit;
};

struct RollingCalibration {
    std::size_t window = 0, median_window = 0;
    std::vector<std::string> dates; // window end dates
    std::vector<double> sigma_hat, sigma_star, mu_hat, alpha_hat, mse, mu_med, alpha_med;
    std::vector<std::string> failures; // "date: reason" for windows left as gaps
};

namespace detail {

inline double trailing_median(const std::vector<double>& xs, std::size_t end, std::size_t width) {
    std::vector<double> v;
    const std::size_t lo = end + 1 >= width ? end + 1 - width : 0;
    for (std::size_t i = lo; i <= end; ++i)
        if (!std::isnan(xs[i])) v.push_back(xs[i]);
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

} // namespace detail

/// Window fits over every end date. sigma* for a window is the average of
/// sigma-hat over the windows ending inside it. A window that fails becomes a
/// NaN gap with a recorded reason.
inline RollingCalibration rolling_calibration(const PriceSeries& s, const RollingOptions& opt,
                                              const Rng& rng) {
    s.validate();
    detail::require(opt.window >= 30, "window must hold at least 30 returns");
    detail::require(opt.median_window >= 1, "median window must be positive");
    if (s.size() <= opt.window)
        throw DataError("series of " + std::to_string(s.size()) +
                        " prices is not longer than the window of " + std::to_string(opt.window));

    const Returns all = compute_returns(s);
    const std::size_t n_win = s.size() - opt.window;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    RollingCalibration out;
    out.window = opt.window;
    out.median_window = opt.median_window;
    out.dates.resize(n_win);
    for (auto* v : {&out.sigma_hat, &out.sigma_star, &out.mu_hat, &out.alpha_hat, &out.mse,
                    &out.mu_med, &out.alpha_med})
        v->assign(n_win, nan);

    // Window w covers prices [w, w + window] and daily returns [w, w + window).
    for (std::size_t w = 0; w < n_win; ++w) {
        out.dates[w] = s.dates.empty() ? std::to_string(w + opt.window) : s.dates[w + opt.window];
        out.sigma_hat[w] = estimate_sigma_from_returns(
            std::span<const double>(all.daily).subspan(w, opt.window), s.dt);
    }
    for (std::size_t w = 0; w < n_win; ++w) {
        const std::size_t lo = w + 1 >= opt.window ? w + 1 - opt.window : 0;
        double acc = 0.0;
        for (std::size_t v = lo; v <= w; ++v) acc += out.sigma_hat[v];
        out.sigma_star[w] = acc / static_cast<double>(w - lo + 1);
    }

    std::vector<std::string> reasons(n_win);
    FitOptions inner = opt.fit;
    inner.workers = 1;
    parallel_for(
        n_win,
        [&](std::size_t w) {
            try {
                std::vector<double> R(opt.window);
                const double base = w == 0 ? 0.0 : all.cumulative[w - 1];
                for (std::size_t k = 0; k < opt.window; ++k) R[k] = all.cumulative[w + k] - base;
                const CalibrationResult c = fit_mu_alpha_cumulative(R, s.dt, out.sigma_star[w],
                                                                    inner, rng.substream(w));
                out.mu_hat[w] = c.mu_star;
                out.alpha_hat[w] = c.alpha_star;
                out.mse[w] = c.mse;
            } catch (const std::exception& e) {
                reasons[w] = e.what();
            }
        },
        opt.fit.workers);

    for (std::size_t w = 0; w < n_win; ++w) {
        if (!reasons[w].empty()) out.failures.push_back(out.dates[w] + ": " + reasons[w]);
        out.mu_med[w] = detail::trailing_median(out.mu_hat, w, opt.median_window);
        out.alpha_med[w] = detail::trailing_median(out.alpha_hat, w, opt.median_window);
    }
    return out;
}

struct DeltaSeries {
    std::vector<std::string> dates;
    std::vector<double> alpha_med;
    std::vector<double> delta;
    RollingCalibration rolling;
};

/// delta from a median-smoothed alpha: 2 alpha - 1.
inline double delta_from_alpha_median(double alpha_med) { return 2.0 * alpha_med - 1.0; }

/// Rolling alpha fits on an index, restricted to alpha_bounds, mapped to delta.
inline DeltaSeries estimate_delta_from_index(const PriceSeries& s, RollingOptions opt,
                                             double alpha_lo, double alpha_hi, const Rng& rng) {
    detail::require(alpha_lo < alpha_hi, "alpha bounds are reversed");
    opt.fit.domain.alpha_lo = alpha_lo;
    opt.fit.domain.alpha_hi = alpha_hi;
    DeltaSeries out;
    out.rolling = rolling_calibration(s, opt, rng);
    out.dates = out.rolling.dates;
    out.alpha_med = out.rolling.alpha_med;
    out.delta.resize(out.alpha_med.size());
    for (std::size_t i = 0; i < out.delta.size(); ++i)
        out.delta[i] = delta_from_alpha_median(std::clamp(out.alpha_med[i], alpha_lo, alpha_hi));
    return out;
}

// ---------------------------------------------------------------- constrained fit

struct ConstrainedFit {
    double mu_hat = 0;
    std::optional<double> sigma_hat; // empty when delta = 0 leaves it unidentified
    double r_squared = 0;
    double rmse = 0;
};

/// Least squares without intercept of R_k on k dt and delta sqrt(2 k dt / pi).
inline ConstrainedFit fit_mu_sigma_given_delta(const PriceSeries& s, double delta) {
    detail::require(delta > -1.0 && delta < 1.0, "delta must lie in (-1, 1)");
    const Returns r = compute_returns(s);
    const std::size_t n = r.cumulative.size();
    double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1) * s.dt;
        const double x1 = t, x2 = delta * std::sqrt(2.0 * t / std::numbers::pi);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        b1 += x1 * r.cumulative[i];
        b2 += x2 * r.cumulative[i];
    }
    ConstrainedFit f;
    const double det = s11 * s22 - s12 * s12;
    if (delta == 0.0) {
        f.mu_hat = b1 / s11;
    } else {
        if (!(std::abs(det) > 1e-12 * s11 * s22))
            throw DegenerateMarket("regressors are collinear; the fit is not identified");
        f.mu_hat = (s22 * b1 - s12 * b2) / det;
        f.sigma_hat = (s11 * b2 - s12 * b1) / det;
    }
    const double mean = summarize(r.cumulative).mean();
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1) * s.dt;
        double fit = f.mu_hat * t;
        if (f.sigma_hat) fit += *f.sigma_hat * delta * std::sqrt(2.0 * t / std::numbers::pi);
        ss_res += (r.cumulative[i] - fit) * (r.cumulative[i] - fit);
        ss_tot += (r.cumulative[i] - mean) * (r.cumulative[i] - mean);
    }
    f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    f.rmse = std::sqrt(ss_res / static_cast<double>(n));
    return f;
}

// ---------------------------------------------------------------- synthetic data

struct SyntheticFixture {
    PriceSeries series;
    SrwPath walk;
    double mu = 0, sigma = 0, alpha = 0;
};

/// Business-day ISO dates starting at 2000-01-03.
inline std::vector<std::string> business_dates(std::size_t n) {
    using namespace std::chrono;
    std::vector<std::string> out;
    out.reserve(n);
    sys_days d = year{2000} / 1 / 3;
    while (out.size() < n) {
        const unsigned wd = weekday{d}.c_encoding();
        if (wd != 0 && wd != 6) {
            const year_month_day ymd{d};
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
            out.emplace_back(buf);
        }
        d += days{1};
    }
    return out;
}

/// n prices S_k = s0 exp((mu - sigma^2/2) k dt + sigma sqrt(dt) M_k) on one SRW.
inline SyntheticFixture synthetic_fixture(double mu, double sigma, double alpha, std::size_t n,
                                          Rng& rng, double s0 = 100.0, double dt = 1.0 / 252.0) {
    detail::require(sigma > 0.0, "synthetic sigma must be positive");
    detail::require(n >= 2, "synthetic series needs at least 2 prices");
    SyntheticFixture f;
    f.mu = mu;
    f.sigma = sigma;
    f.alpha = alpha;
    f.walk = generate_srw(static_cast<int>(n - 1), SkewParams::from_alpha(alpha), rng);
    f.series.dt = dt;
    f.series.dates = business_dates(n);
    f.series.prices.resize(n);
    const double drift = (mu - 0.5 * sigma * sigma) * dt;
    const double scale = sigma * std::sqrt(dt);
    for (std::size_t k = 0; k < n; ++k)
        f.series.prices[k] = s0 * std::exp(drift * static_cast<double>(k) + scale * f.walk.values[k]);
    return f;
}

} // namespace skewtree

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "skew_params.hpp"
#include "skew_stats.hpp"
#include "stats.hpp"

namespace skewtree {

struct SrwPath {
    std::vector<int> values; // M_0 .. M_n, M_0 = 0
    double alpha = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    int steps() const noexcept { return static_cast<int>(values.size()) - 1; }
};

/// Drives one skew random walk of n steps, calling visit(k, M_k) for k = 1..n.
/// Away from zero the step is a fair coin taken from a 64-bit buffer; at zero
/// the walk goes up with probability alpha.
template <class Visit>
void walk_srw(int n, double alpha, Rng& rng, Visit&& visit) {
    std::uint64_t buffer = 0;
    int left = 0;
    int m = 0;
    for (int k = 1; k <= n; ++k) {
        if (m == 0) {
            m = rng.uniform() < alpha ? 1 : -1;
        } else {
            if (left == 0) {
                buffer = rng.bits();
                left = 64;
            }
            m += (buffer & 1U) ? 1 : -1;
            buffer >>= 1;
            --left;
        }
        if (!visit(k, m)) return;
    }
}

inline SrwPath generate_srw(int n, const SkewParams& p, Rng& rng) {
    detail::require(n >= 1, "a skew random walk needs at least one step");
    SrwPath path;
    path.alpha = p.alpha();
    path.seed = rng.seed();
    path.stream = rng.stream();
    path.values.resize(static_cast<std::size_t>(n) + 1, 0);
    walk_srw(n, p.alpha(), rng, [&](int k, int m) {
        path.values[static_cast<std::size_t>(k)] = m;
        return true;
    });
    return path;
}

struct SrwMoments {
    double mean;
    double std;
    double dmean;
    double dstd;
};

/// Closed-form moments of M_k and of the increment M_k - M_{k-1}.
inline SrwMoments srw_theoretical_moments(int k, const SkewParams& p) {
    detail::require(k >= 1, "step index must be at least 1");
    const double mu1 = sbm_unit_mean(p);
    const double sk = std::sqrt(static_cast<double>(k));
    const double gap = sk - std::sqrt(static_cast<double>(k - 1));
    return {mu1 * sk, std::sqrt((1.0 - mu1 * mu1) * k), mu1 * gap,
            std::sqrt(1.0 - mu1 * mu1 * gap * gap)};
}

struct EnsembleMomentReport {
    std::size_t n_paths = 0;
    std::vector<double> empirical_mean, empirical_std, empirical_dmean, empirical_dstd;
    std::vector<double> theoretical_mean, theoretical_std, theoretical_dmean, theoretical_dstd;
    double mse_mean = 0, mse_std = 0, mse_dmean = 0, mse_dstd = 0;
};

namespace detail {

inline double rms_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

constexpr std::size_t kPathsPerTask = 512;

} // namespace detail

/// Ensemble statistics of M_k and its increments for k = 1..n_steps, with the
/// root-mean-square gap to the closed forms. Path i uses rng.substream(i), and
/// sums are kept in exact integers, so the report is independent of workers.
inline EnsembleMomentReport ensemble_moment_report(std::size_t n_paths, int n_steps,
                                                   const SkewParams& p, const Rng& rng,
                                                   std::size_t workers = 0) {
    detail::require(n_paths >= 100, "ensemble needs at least 100 paths");
    detail::require(n_steps >= 1, "ensemble needs at least one step");
    const auto n = static_cast<std::size_t>(n_steps);
    std::vector<std::int64_t> sum_m(n, 0), sum_m2(n, 0), sum_d(n, 0);
    std::mutex merge_mutex;
    const std::size_t tasks = (n_paths + detail::kPathsPerTask - 1) / detail::kPathsPerTask;
    parallel_for(
        tasks,
        [&](std::size_t task) {
            std::vector<std::int64_t> lm(n, 0), lm2(n, 0), ld(n, 0);
            const std::size_t lo = task * detail::kPathsPerTask;
            const std::size_t hi = std::min(n_paths, lo + detail::kPathsPerTask);
            for (std::size_t i = lo; i < hi; ++i) {
                Rng r = rng.substream(i);
                int prev = 0;
                walk_srw(n_steps, p.alpha(), r, [&](int k, int m) {
                    const auto idx = static_cast<std::size_t>(k - 1);
                    lm[idx] += m;
                    lm2[idx] += static_cast<std::int64_t>(m) * m;
                    ld[idx] += m - prev;
                    prev = m;
                    return true;
                });
            }
            std::lock_guard lock(merge_mutex);
            for (std::size_t k = 0; k < n; ++k) {
                sum_m[k] += lm[k];
                sum_m2[k] += lm2[k];
                sum_d[k] += ld[k];
            }
        },
        workers);

    EnsembleMomentReport rep;
    rep.n_paths = n_paths;
    const double N = static_cast<double>(n_paths);
    for (auto* v : {&rep.empirical_mean, &rep.empirical_std, &rep.empirical_dmean,
                    &rep.empirical_dstd, &rep.theoretical_mean, &rep.theoretical_std,
                    &rep.theoretical_dmean, &rep.theoretical_dstd})
        v->resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double mean = static_cast<double>(sum_m[k]) / N;
        const double var = (static_cast<double>(sum_m2[k]) - N * mean * mean) / (N - 1.0);
        const double dmean = static_cast<double>(sum_d[k]) / N;
        const double dvar = N / (N - 1.0) * (1.0 - dmean * dmean);
        rep.empirical_mean[k] = mean;
        rep.empirical_std[k] = std::sqrt(std::max(var, 0.0));
        rep.empirical_dmean[k] = dmean;
        rep.empirical_dstd[k] = std::sqrt(std::max(dvar, 0.0));
        const SrwMoments th = srw_theoretical_moments(static_cast<int>(k) + 1, p);
        rep.theoretical_mean[k] = th.mean;
        rep.theoretical_std[k] = th.std;
        rep.theoretical_dmean[k] = th.dmean;
        rep.theoretical_dstd[k] = th.dstd;
    }
    rep.mse_mean = detail::rms_gap(rep.empirical_mean, rep.theoretical_mean);
    rep.mse_std = detail::rms_gap(rep.empirical_std, rep.theoretical_std);
    rep.mse_dmean = detail::rms_gap(rep.empirical_dmean, rep.theoretical_dmean);
    rep.mse_dstd = detail::rms_gap(rep.empirical_dstd, rep.theoretical_dstd);
    return rep;
}

struct ZeroOccurrenceStats {
    std::vector<double> rates_percent; // one per path, untruncated
    double bin_width_percent = 0.05;
    double truncation_percent = 4.17;
    std::vector<double> bin_lower;          // left edges in percent
    std::vector<double> relative_frequency; // fraction of all paths per bin
    std::size_t above_truncation = 0;
    double q1 = 0, q2 = 0, q3 = 0;
    double min_rate = 0, max_rate = 0;
};

/// Share of the times 0..n_steps-1 at which a walk sits at zero, per path.
/// M_0 counts, so the smallest possible rate is 1 / n_steps.
inline ZeroOccurrenceStats zero_occurrence_stats(std::size_t n_paths, int n_steps,
                                                 const SkewParams& p, const Rng& rng,
                                                 std::size_t workers = 0) {
    detail::require(n_paths >= 1000, "zero-occurrence statistics need at least 1000 paths");
    detail::require(n_steps >= 1, "walks need at least one step");
    ZeroOccurrenceStats z;
    z.rates_percent.resize(n_paths);
    const std::size_t tasks = (n_paths + detail::kPathsPerTask - 1) / detail::kPathsPerTask;
    parallel_for(
        tasks,
        [&](std::size_t task) {
            const std::size_t lo = task * detail::kPathsPerTask;
            const std::size_t hi = std::min(n_paths, lo + detail::kPathsPerTask);
            for (std::size_t i = lo; i < hi; ++i) {
                Rng r = rng.substream(i);
                int zeros = 1; // M_0
                walk_srw(n_steps - 1, p.alpha(), r, [&](int, int m) {
                    zeros += (m == 0);
                    return true;
                });
                z.rates_percent[i] = 100.0 * zeros / n_steps;
            }
        },
        workers);

    const auto bins =
        static_cast<std::size_t>(std::ceil(z.truncation_percent / z.bin_width_percent - 1e-9));
    z.bin_lower.resize(bins);
    z.relative_frequency.assign(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) z.bin_lower[b] = b * z.bin_width_percent;
    for (double r : z.rates_percent) {
        if (r > z.truncation_percent) {
            ++z.above_truncation;
            continue;
        }
        auto b = static_cast<std::size_t>(r / z.bin_width_percent);
        z.relative_frequency[std::min(b, bins - 1)] += 1.0;
    }
    for (double& f : z.relative_frequency) f /= static_cast<double>(n_paths);

    std::vector<double> sorted = z.rates_percent;
    std::sort(sorted.begin(), sorted.end());
    z.q1 = quantile_sorted(sorted, 0.25);
    z.q2 = quantile_sorted(sorted, 0.50);
    z.q3 = quantile_sorted(sorted, 0.75);
    z.min_rate = sorted.front();
    z.max_rate = sorted.back();
    return z;
}

/// Right-continuous step function t -> sqrt(dt) M_floor(t / dt) on [0, n dt].
class CadlagPath {
public:
    CadlagPath(std::vector<int> values, double dt) : values_(std::move(values)), dt_(dt) {
        detail::require(dt > 0.0, "embedding step must be positive");
        detail::require(!values_.empty(), "embedding needs a nonempty path");
    }

    double operator()(double t) const {
        const double horizon = dt_ * static_cast<double>(values_.size() - 1);
        detail::require(t >= 0.0 && t <= horizon * (1.0 + 1e-12), "time outside the path horizon");
        return std::sqrt(dt_) * values_[index(t)];
    }

    /// Step index holding at time t. Times within a relative 1e-12 of a grid
    /// point k dt count as reaching it, so decimal inputs like 0.3 with
    /// dt = 0.1 land on step 3 despite rounding.
    std::size_t index(double t) const {
        const std::size_t last = values_.size() - 1;
        constexpr double tol = 1e-12;
        auto k = static_cast<std::int64_t>(std::floor(t / dt_));
        if (static_cast<double>(k + 1) * dt_ * (1.0 - tol) <= t) ++k;
        if (k > 0 && static_cast<double>(k) * dt_ * (1.0 - tol) > t) --k;
        return std::min(static_cast<std::size_t>(std::max<std::int64_t>(k, 0)), last);
    }

    double dt() const noexcept { return dt_; }
    double horizon() const noexcept { return dt_ * static_cast<double>(values_.size() - 1); }

private:
    std::vector<int> values_;
    double dt_;
};

inline CadlagPath embed_cadlag(const SrwPath& path, double dt) { return CadlagPath(path.values, dt); }

} // namespace skewtree

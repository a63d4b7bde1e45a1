#pragma once

// Self-check suites shared by the command-line `verify` command.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "lattice.hpp"
#include "rng.hpp"
#include "skew_stats.hpp"
#include "skew_walk.hpp"
#include "stats.hpp"

namespace skewtree {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Random three-asset market: |delta| in [0.02, 0.5] with random sign, asset
/// scales in +-[0.05, 0.6] at least 0.05 apart, mu in [-0.2, 0.4], r in [0, 0.05].
inline MarketSpec random_market_spec(Rng& rng, int n_steps = 1) {
    MarketSpec s;
    const double mag = 0.02 + 0.48 * rng.uniform();
    s.delta = rng.uniform() < 0.5 ? -mag : mag;
    s.r = 0.05 * rng.uniform();
    s.dt = 1.0 / 252.0;
    s.n_steps = n_steps;
    for (;;) {
        for (auto& a : s.assets) {
            const double m = 0.05 + 0.55 * rng.uniform();
            a.sigma = rng.uniform() < 0.5 ? -m : m;
            a.mu = -0.2 + 0.6 * rng.uniform();
            a.s0 = 20.0 + 480.0 * rng.uniform();
        }
        const auto& a = s.assets;
        if (std::abs(a[0].sigma - a[1].sigma) >= 0.05 && std::abs(a[0].sigma - a[2].sigma) >= 0.05 &&
            std::abs(a[1].sigma - a[2].sigma) >= 0.05)
            return s;
    }
}

/// Price by enumerating all 4^n branch sequences with the lattice's own
/// measure. Exponential in n; meant as an audit for n <= 8.
template <class Real>
Real brute_force_price(const MarketSpec& spec, const Payoff& payoff) {
    using std::exp;
    using std::sqrt;
    const auto mm = market_measure<Real>(spec);
    const Real dt(spec.dt), sq = sqrt(dt), d(mm.delta_used);
    const Real s = sqrt(Real(1) - d * d);
    const Real disc = exp(-Real(spec.r) * dt);
    const int n = spec.n_steps;
    const int span = 2 * n + 1;
    // Terminal payoffs depend only on (j1, j2); cache them so the 4^n walk
    // over branch sequences stays cheap.
    std::vector<std::optional<Real>> leaf(static_cast<std::size_t>(span * span));
    std::function<Real(int, int, int)> go = [&](int k, int j1, int j2) -> Real {
        if (k == n) {
            auto& slot = leaf[static_cast<std::size_t>((j1 + n) * span + (j2 + n))];
            if (!slot) {
                std::array<Real, 3> px{};
                const Real level = sq * (s * Real(j1) + d * Real(std::abs(j2)));
                for (std::size_t i = 0; i < 3; ++i) {
                    const auto& a = spec.assets[i];
                    px[i] = Real(a.s0) * exp(Real(a.mu) * Real(n) * dt + Real(a.sigma) * level);
                }
                slot = payoff.template operator()<Real>(px);
            }
            return *slot;
        }
        const auto& q = mm.at(j2).q;
        Real acc(0);
        for (std::size_t x = 0; x < 4; ++x)
            acc += q[x] * go(k + 1, j1 + kFirstSign[x], j2 + kSecondSign[x]);
        return disc * acc;
    };
    return go(0, 0, 0);
}

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

} // namespace detail

/// Normalization, repricing, replication and brute-force equivalence over
/// random markets.
inline std::vector<CheckResult> verify_lattice(std::size_t n_specs, const Rng& master, int brute_steps = 8) {
    double worst_norm = 0, worst_res = 0, worst_res_four = 0, worst_spread = 0, worst_brute = 0;
    std::size_t degenerate = 0;
    for (std::size_t t = 0; t < n_specs; ++t) {
        Rng rng = master.substream(t);
        // Step counts cycle through 1..brute_steps.
        MarketSpec spec = random_market_spec(rng, 1 + static_cast<int>(t % static_cast<std::size_t>(brute_steps)));
        try {
            const auto rep = martingale_residuals(spec);
            worst_res = std::max(worst_res, rep.max_residual);
            worst_res_four = std::max(worst_res_four, rep.max_residual_excluding_two_state);
            for (int j2 : {-1, 0, 1}) {
                const auto q = rn_probabilities(j2, spec);
                worst_norm = std::max(worst_norm, std::abs(q[0] + q[1] + q[2] + q[3] - 1.0));
                BranchQuadruple<double> f{};
                for (auto& v : f) v = 100.0 * rng.uniform();
                if (j2 == 0) {
                    f[1] = f[0];
                    f[3] = f[2];
                }
                // A zero level first occurs at k = 2; the others at k = 1.
                const LatticeNode at{j2 == 0 ? 2 : 1, j2 == 0 ? 0 : 1, j2};
                const auto D = hedging_deltas(at, f, spec);
                worst_spread = std::max(worst_spread, replication_spread(at, f, D, spec));
            }
            const double kp = (0.8 + 0.4 * rng.uniform()) * strike_from_moneyness(OptionKind::put, 1.0, spec);
            const double kc = (0.8 + 0.4 * rng.uniform()) * strike_from_moneyness(OptionKind::call, 1.0, spec);
            for (const auto& p : {payoff_rainbow_put(kp), payoff_rainbow_call(kc)}) {
                const double lat = price_european(spec, p).price;
                const double bf = static_cast<double>(brute_force_price<mp::real<100>>(spec, p));
                worst_brute = std::max(worst_brute, std::abs(lat - bf) / std::max(1.0, std::abs(bf)));
            }
        } catch (const DegenerateMarket&) {
            ++degenerate;
        }
    }
    return {
        {"probabilities sum to 1 (<= 1e-10)", worst_norm <= 1e-10, detail::fmt("worst %.3g", worst_norm)},
        {"every level class reprices each asset (<= 1e-9)", worst_res <= 1e-9, detail::fmt("worst %.3g", worst_res)},
        {"four-state classes reprice each asset (<= 1e-9)", worst_res_four <= 1e-9,
         detail::fmt("worst %.3g", worst_res_four)},
        {"hedged portfolio equal on all successors (<= 1e-10 rel)", worst_spread <= 1e-10,
         detail::fmt("worst %.3g", worst_spread)},
        {"lattice equals path enumeration (<= 1e-10)", worst_brute <= 1e-10, detail::fmt("worst %.3g", worst_brute)},
        {"no degenerate random markets", degenerate == 0, detail::fmt("%.0f degenerate", static_cast<double>(degenerate))},
    };
}

/// Zero-occurrence quartiles and their independence of alpha.
inline std::vector<CheckResult> verify_walk(std::size_t n_paths, int n_steps, const Rng& master) {
    std::vector<CheckResult> out;
    std::vector<std::vector<double>> rates;
    const std::array<double, 3> alphas{0.4, 0.5, 0.6};
    const std::array<double, 3> target{0.41, 0.87, 1.48};
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const auto z = zero_occurrence_stats(n_paths, n_steps, SkewParams::from_alpha(alphas[i]), master.substream(i));
        const bool ok = std::abs(z.q1 - target[0]) <= 0.06 && std::abs(z.q2 - target[1]) <= 0.06 &&
                        std::abs(z.q3 - target[2]) <= 0.06;
        out.push_back({detail::fmt("zero-occurrence quartiles at alpha %.2f within 0.06pp", alphas[i]), ok,
                       detail::fmt("Q1 %.3f%% Q2 %.3f%% Q3 %.3f%%", z.q1, z.q2, z.q3)});
        rates.push_back(z.rates_percent);
    }
    for (std::size_t i = 0; i < rates.size(); ++i)
        for (std::size_t j = i + 1; j < rates.size(); ++j) {
            const double d = ks_two_sample(rates[i], rates[j]);
            const double crit = ks_two_sample_critical_1pct(rates[i].size(), rates[j].size());
            out.push_back({detail::fmt("zero-occurrence laws match for alpha %.1f vs %.1f (KS 1%%)", alphas[i], alphas[j]),
                           d < crit, detail::fmt("D %.4f, critical %.4f", d, crit)});
        }
    return out;
}

/// Density normalization, half-line mass and sampler moments.
inline std::vector<CheckResult> verify_stats(std::size_t n_samples, const Rng& master) {
    std::vector<CheckResult> out;
    for (double a : {0.4, 0.5, 0.55, 0.9}) {
        // Composite Simpson on [0, 12], closed form available for comparison.
        const auto p = SkewParams::from_alpha(a);
        const int m = 20000;
        const double h = 12.0 / m;
        double acc = sbm_pdf(0.0, 1.0, p) + sbm_pdf(12.0, 1.0, p);
        for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * sbm_pdf(i * h, 1.0, p);
        const double mass = acc * h / 3.0;
        out.push_back({detail::fmt("SBM density mass on [0, inf) equals alpha = %.2f", a), std::abs(mass - a) <= 1e-8,
                       detail::fmt("mass %.12f", mass)});
    }
    const double delta = 0.102;
    Rng rng = master.substream(0);
    const std::array<double, 2> grid{0.0, 1.0};
    std::vector<double> xs(n_samples);
    for (auto& x : xs) x = sample_ito_mckean_path(grid, delta, rng)[1];
    const RunningStats acc = summarize(xs);
    // Standard error of the sample variance from the fourth central moment.
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - acc.mean(), 4);
    m4 /= static_cast<double>(xs.size());
    const double var_se = std::sqrt((m4 - acc.variance() * acc.variance()) / static_cast<double>(xs.size()));
    const auto th = sbm_moments(1.0, SkewParams::from_delta(delta));
    const double z = (acc.mean() - th.mean) / acc.std_error();
    const double zv = (acc.variance() - th.variance) / var_se;
    out.push_back({"Ito-McKean mean at t = 1 within 4 standard errors", std::abs(z) <= 4.0,
                   detail::fmt("mean %.5f vs %.5f (z %.2f)", acc.mean(), th.mean, z)});
    out.push_back({"Ito-McKean variance at t = 1 within 4 standard errors", std::abs(zv) <= 4.0,
                   detail::fmt("variance %.5f vs %.5f (z %.2f)", acc.variance(), th.variance, zv)});
    return out;
}

/// Synthetic round trips of the calibration steps.
inline std::vector<CheckResult> verify_calibration(const Rng& master) {
    std::vector<CheckResult> out;
    Rng rng = master.substream(0);
    const auto fx = synthetic_fixture(0.05, 0.1, 0.6, 2000, rng);
    const double sig = estimate_sigma(fx.series);
    out.push_back({"sigma estimate on synthetic data", std::abs(sig - 0.1) <= 3 * 0.1 / std::sqrt(2.0 * 2000),
                   detail::fmt("sigma* %.6f", sig)});
    const auto chain = reconstruct_chain(fx.series, 0.05, 0.1);
    bool same = chain.size() == fx.walk.values.size();
    for (std::size_t i = 0; same && i < chain.size(); ++i) same = chain[i] == fx.walk.values[i];
    out.push_back({"chain reconstruction recovers the generating walk", same, ""});
    const auto rb = rebuild_price_path(chain, 0.05, 0.1, fx.series.prices[0], fx.series.dt, fx.series.prices);
    out.push_back({"price rebuild has R^2 = 1", rb.r_squared && *rb.r_squared > 1.0 - 1e-12,
                   detail::fmt("R^2 %.15f", rb.r_squared.value_or(0))});
    return out;
}

} // namespace skewtree

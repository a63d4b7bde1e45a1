#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace skewtree {

/// Single-asset reference trees.
///   matched     u, d matched to mean mu dt and variance sigma^2 dt under p;
///               q = p - theta sqrt(p (1 - p)) sqrt(dt), theta = (mu - r) / sigma
///   crr         u = e^{sigma sqrt dt}, d = 1 / u, q = (e^{r dt} - d) / (u - d)
///   jr          u, d = e^{mu dt +- sigma sqrt dt},
///               q = (e^{(r - mu) dt} - e^{-sigma sqrt dt}) / (e^{sigma sqrt dt} - e^{-sigma sqrt dt})
///   skew_shift  u, d = e^{mu dt + sigma (+-sqrt(1 - delta^2) + delta) sqrt dt},
///               q = (1 - theta sqrt dt) / 2 with theta from user-given (mu_bar, sigma_bar)
///   reflected   delta = 1 tree on |zeta|, weights depend on the level zeta
enum class BaselineKind { matched, crr, jr, skew_shift, reflected };

inline const char* baseline_name(BaselineKind k) {
    switch (k) {
    case BaselineKind::matched: return "matched";
    case BaselineKind::crr: return "crr";
    case BaselineKind::jr: return "jr";
    case BaselineKind::skew_shift: return "skew_shift";
    case BaselineKind::reflected: return "reflected";
    }
    return "?";
}

struct BaselineParams {
    double s0 = 100.0;
    double mu = 0.0;
    double sigma = 0.2;
    double r = 0.0;
    double maturity = 1.0;
    int n_steps = 100;
    double p = 0.5;       // matched physical up-probability
    double delta = 0.0;   // skew_shift
    double mu_bar = 0.0;  // skew_shift
    double sigma_bar = 0.0;

    double dt() const { return maturity / n_steps; }
};

struct BaselineResult {
    double price = 0.0;
    double q_min = 0.0, q_max = 0.0;
    bool arbitrage_warning = false;
    std::vector<std::string> warnings;
};

struct BinomialStep {
    double up, down, q;
};

/// One-step factors and up-weight of a recombining baseline tree.
inline BinomialStep baseline_step(BaselineKind kind, const BaselineParams& bp) {
    detail::require(bp.n_steps >= 1, "baseline tree needs at least one step");
    detail::require(bp.maturity > 0.0, "maturity must be positive");
    const double dt = bp.dt(), sq = std::sqrt(dt);
    switch (kind) {
    case BaselineKind::matched: {
        detail::require(bp.p > 0.0 && bp.p < 1.0, "matched needs p in (0, 1)");
        detail::require(bp.sigma != 0.0, "matched needs a nonzero sigma");
        const double theta = (bp.mu - bp.r) / bp.sigma;
        return {1.0 + bp.mu * dt + std::sqrt((1.0 - bp.p) / bp.p) * bp.sigma * sq,
                1.0 + bp.mu * dt - std::sqrt(bp.p / (1.0 - bp.p)) * bp.sigma * sq,
                bp.p - theta * std::sqrt(bp.p * (1.0 - bp.p)) * sq};
    }
    case BaselineKind::crr: {
        detail::require(bp.sigma > 0.0, "crr needs a positive sigma");
        const double u = std::exp(bp.sigma * sq), d = 1.0 / u;
        return {u, d, (std::exp(bp.r * dt) - d) / (u - d)};
    }
    case BaselineKind::jr: {
        detail::require(bp.sigma != 0.0, "jr needs a nonzero sigma");
        const double eu = std::exp(bp.sigma * sq), ed = std::exp(-bp.sigma * sq);
        return {std::exp(bp.mu * dt) * eu, std::exp(bp.mu * dt) * ed,
                (std::exp((bp.r - bp.mu) * dt) - ed) / (eu - ed)};
    }
    case BaselineKind::skew_shift: {
        detail::require(bp.delta > -1.0 && bp.delta < 1.0, "skew_shift needs delta in (-1, 1)");
        detail::require(bp.sigma_bar != 0.0, "skew_shift needs a nonzero sigma_bar");
        const double s = std::sqrt(1.0 - bp.delta * bp.delta);
        const double theta = (bp.mu_bar - 0.5 * bp.sigma_bar * bp.sigma_bar - bp.r) / bp.sigma_bar;
        return {std::exp(bp.mu * dt + bp.sigma * (s + bp.delta) * sq),
                std::exp(bp.mu * dt + bp.sigma * (-s + bp.delta) * sq), 0.5 * (1.0 - theta * sq)};
    }
    case BaselineKind::reflected:
        break;
    }
    throw std::invalid_argument("reflected has level-dependent steps; use price_baseline");
}

/// First-order CRR up-weight 1/2 + ((r - sigma^2/2) / (2 sigma)) sqrt(dt).
inline double crr_first_order_q(double sigma, double r, double dt) {
    return 0.5 + (r - 0.5 * sigma * sigma) / (2.0 * sigma) * std::sqrt(dt);
}

/// First-order JR up-weight 1/2 - theta sqrt(dt) / 2 with theta = (mu + sigma^2/2 - r) / sigma,
/// the expansion of the exact weight for up/down factors e^{mu dt +- sigma sqrt dt}.
inline double jr_first_order_q(double mu, double sigma, double r, double dt) {
    return 0.5 - 0.5 * (mu + 0.5 * sigma * sigma - r) / sigma * std::sqrt(dt);
}

/// Up-weight of the delta = 1 tree at level zeta. NaN at zeta = 0, where both
/// moves coincide.
inline double reflected_q(int zeta, double mu, double sigma, double r, double dt) {
    const double sq = std::sqrt(dt);
    const double up = std::exp(sigma * (std::abs(zeta + 1) - std::abs(zeta)) * sq);
    const double dn = std::exp(sigma * (std::abs(zeta - 1) - std::abs(zeta)) * sq);
    if (up == dn) return std::numeric_limits<double>::quiet_NaN();
    return (std::exp((r - mu) * dt) - dn) / (up - dn);
}

/// European price of payoff(S_T) on a baseline tree.
inline BaselineResult price_baseline(BaselineKind kind, const BaselineParams& bp,
                                     const std::function<double(double)>& payoff) {
    detail::require(bp.s0 > 0.0, "spot must be positive");
    detail::require(bp.n_steps >= 1, "baseline tree needs at least one step");
    const int n = bp.n_steps;
    const double dt = bp.dt();
    const double disc = std::exp(-bp.r * dt);
    BaselineResult res;
    auto note_q = [&](double q) {
        res.q_min = std::min(res.q_min, q);
        res.q_max = std::max(res.q_max, q);
    };
    res.q_min = std::numeric_limits<double>::infinity();
    res.q_max = -std::numeric_limits<double>::infinity();

    if (kind == BaselineKind::reflected) {
        // Level zeta in [-k, k] stored at index zeta + k; S = s0 e^{mu k dt + sigma |zeta| sqrt dt}.
        const double sq = std::sqrt(dt);
        std::vector<double> f(static_cast<std::size_t>(2 * n + 1));
        for (int z = -n; z <= n; z += 2)
            f[static_cast<std::size_t>(z + n)] =
                payoff(bp.s0 * std::exp(bp.mu * n * dt + bp.sigma * std::abs(z) * sq));
        bool flat_warned = false;
        for (int k = n - 1; k >= 0; --k) {
            std::vector<double> g(static_cast<std::size_t>(2 * k + 1));
            for (int z = -k; z <= k; z += 2) {
                double q = reflected_q(z, bp.mu, bp.sigma, bp.r, dt);
                if (std::isnan(q)) {
                    q = 0.5;
                    if (!flat_warned) {
                        res.warnings.push_back("zeta = 0: both moves coincide, weight 1/2 used");
                        flat_warned = true;
                    }
                }
                note_q(q);
                const double fu = f[static_cast<std::size_t>(z + 1 + k + 1)];
                const double fd = f[static_cast<std::size_t>(z - 1 + k + 1)];
                g[static_cast<std::size_t>(z + k)] = disc * (q * fu + (1.0 - q) * fd);
            }
            f.swap(g);
        }
        res.price = f[0];
    } else {
        const BinomialStep st = baseline_step(kind, bp);
        note_q(st.q);
        std::vector<double> f(static_cast<std::size_t>(n) + 1);
        for (int j = 0; j <= n; ++j)
            f[static_cast<std::size_t>(j)] =
                payoff(bp.s0 * std::pow(st.up, j) * std::pow(st.down, n - j));
        for (int k = n - 1; k >= 0; --k)
            for (int j = 0; j <= k; ++j)
                f[static_cast<std::size_t>(j)] =
                    disc * (st.q * f[static_cast<std::size_t>(j) + 1] + (1.0 - st.q) * f[static_cast<std::size_t>(j)]);
        res.price = f[0];
    }
    if (res.q_min < 0.0 || res.q_max > 1.0) {
        res.arbitrage_warning = true;
        res.warnings.push_back("arbitrage: up-weight outside [0, 1]");
    }
    return res;
}

} // namespace skewtree

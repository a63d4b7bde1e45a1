#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "errors.hpp"
#include "market.hpp"
#include "parallel.hpp"

namespace skewtree {

namespace mp {
template <unsigned Digits>
using real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>,
                                           boost::multiprecision::et_off>;
} // namespace mp

// ---------------------------------------------------------------- geometry

/// Asset prices at a node: s0 exp(mu k dt + sigma sqrt(dt) (sqrt(1 - delta^2) j1 + delta |j2|)).
inline std::array<double, 3> node_asset_prices(const LatticeNode& node, const MarketSpec& spec) {
    node.validate();
    spec.validate();
    const double s = std::sqrt(1.0 - spec.delta * spec.delta);
    const double a = std::sqrt(spec.dt) * (s * node.j1 + spec.delta * std::abs(node.j2));
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        const auto& as = spec.assets[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = as.s0 * std::exp(as.mu * node.k * spec.dt + as.sigma * a);
    }
    return out;
}

/// Exponent multiplier e1 sqrt(1 - delta^2) + delta (|j2 + e2| - |j2|) of branch x.
template <class Real = double>
Real branch_exponent(int j2, Branch x, double delta) {
    using std::sqrt;
    const auto b = static_cast<std::size_t>(x);
    const Real d(delta);
    const Real s = sqrt(Real(1) - d * d);
    return Real(kFirstSign[b]) * s + d * Real(second_driver_jump(j2, kSecondSign[b]));
}

/// One-step growth factors exp(mu dt + sigma c_x sqrt(dt)) per branch and asset.
/// Multiplying by the node price gives the successor price on that branch.
template <class Real = double>
BranchQuadruple<std::array<Real, 3>> psi_factors(int j2, const MarketSpec& spec) {
    using std::exp;
    using std::sqrt;
    spec.validate();
    const Real dt(spec.dt);
    const Real sq = sqrt(dt);
    BranchQuadruple<std::array<Real, 3>> out{};
    for (auto x : kBranches) {
        const Real c = branch_exponent<Real>(j2, x, spec.delta);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& a = spec.assets[i];
            out[static_cast<std::size_t>(x)][i] = exp(Real(a.mu) * dt + Real(a.sigma) * c * sq);
        }
    }
    return out;
}

// ---------------------------------------------------------------- risk-neutral measure

namespace detail {

template <class Real>
using Mat3 = std::array<std::array<Real, 3>, 3>;

template <class Real>
Real det3(const Mat3<Real>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

template <class Real>
Mat3<Real> with_row(Mat3<Real> m, std::size_t row, const std::array<Real, 3>& v) {
    m[row] = v;
    return m;
}

template <class Real>
Mat3<Real> with_column(Mat3<Real> m, std::size_t col, const std::array<Real, 3>& v) {
    for (std::size_t r = 0; r < 3; ++r) m[r][col] = v[r];
    return m;
}

template <class Real>
double row_norm(const std::array<Real, 3>& v) {
    double s = 0.0;
    for (const auto& x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

inline constexpr double kDeterminantTolerance = 1e-12;
inline constexpr double kEffectiveZeroDelta = 1e-6;

} // namespace detail

/// Branch weights for one class of second-driver levels.
template <class Real>
struct ClassMeasure {
    LevelClass level = LevelClass::zero;
    BranchQuadruple<Real> q{};
    bool two_state = false;           // branches collapse pairwise (zero level, or delta ~ 0)
    double determinant = 0.0;         // replication determinant, 0 when two_state
    double hadamard_scale = 0.0;      // product of its row norms
    double printed_uu_gap = 0.0;      // |q_uu from the A1-row form - q_uu|
    std::array<double, 3> residual{}; // |e^{-r dt} sum_x q_x growth_x - 1| per asset

    double total_variation() const {
        double s = 0.0;
        for (const auto& v : q) s += std::abs(static_cast<double>(v));
        return s;
    }
    double max_residual() const { return *std::max_element(residual.begin(), residual.end()); }
};

template <class Real>
struct MarketMeasure {
    std::array<ClassMeasure<Real>, 3> classes{};
    bool effective_delta_zero = false;
    double delta_used = 0.0;

    const ClassMeasure<Real>& at(int j2) const { return classes[static_cast<std::size_t>(level_class(j2))]; }
};

namespace detail {

template <class Real>
void fill_residuals(ClassMeasure<Real>& m, const MarketSpec& spec, double delta) {
    using std::exp;
    MarketSpec local = spec;
    local.delta = delta;
    const auto g = psi_factors<Real>(representative_level(m.level), local);
    const Real disc = exp(-Real(spec.r) * Real(spec.dt));
    for (std::size_t i = 0; i < 3; ++i) {
        Real acc(0);
        for (std::size_t x = 0; x < 4; ++x) acc += m.q[x] * g[x][i];
        m.residual[i] = std::abs(static_cast<double>(disc * acc - Real(1)));
    }
}

/// Two-state step: uu and ud coincide, du and dd coincide. Three martingale
/// conditions on one free weight are solved in the least-squares sense and the
/// weight is split evenly across the coinciding branches.
template <class Real>
ClassMeasure<Real> two_state_measure(LevelClass level, const MarketSpec& spec, double delta) {
    using std::exp;
    using std::sqrt;
    ClassMeasure<Real> m;
    m.level = level;
    m.two_state = true;
    const int j2 = representative_level(level);
    const Real dt(spec.dt), sq = sqrt(dt);
    const Real cu = branch_exponent<Real>(j2, Branch::uu, delta);
    const Real cd = branch_exponent<Real>(j2, Branch::du, delta);
    Real num(0), den(0);
    for (const auto& a : spec.assets) {
        const Real target = exp((Real(spec.r) - Real(a.mu)) * dt);
        const Real hu = exp(Real(a.sigma) * cu * sq);
        const Real hd = exp(Real(a.sigma) * cd * sq);
        num += (target - hd) * (hu - hd);
        den += (hu - hd) * (hu - hd);
    }
    if (!(static_cast<double>(den) > 0.0))
        throw DegenerateMarket("all assets have the same up and down moves at a " +
                               std::string(level_class_name(level)) + " level");
    const Real qu = num / den;
    const Real half = Real(1) / Real(2);
    m.q = {qu * half, qu * half, (Real(1) - qu) * half, (Real(1) - qu) * half};
    fill_residuals(m, spec, delta);
    return m;
}

/// Four-state step from the replication determinants. Rows m index the
/// branch differences uu-ud, ud-du, du-dd; columns index the assets.
template <class Real>
ClassMeasure<Real> four_state_measure(LevelClass level, const MarketSpec& spec, double delta) {
    using std::exp;
    using std::sqrt;
    ClassMeasure<Real> m;
    m.level = level;
    const int j2 = representative_level(level);
    const Real dt(spec.dt), sq = sqrt(dt);

    std::array<std::array<Real, 3>, 4> h{}; // h[x][i] = exp(sigma_i c_x sqrt dt)
    for (auto x : kBranches) {
        const Real c = branch_exponent<Real>(j2, x, delta);
        for (std::size_t i = 0; i < 3; ++i)
            h[static_cast<std::size_t>(x)][i] = exp(Real(spec.assets[i].sigma) * c * sq);
    }
    Mat3<Real> B{};
    std::array<Real, 3> A1{}, A2{};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t r = 0; r < 3; ++r) B[r][i] = h[r][i] - h[r + 1][i];
        const Real target = exp((Real(spec.r) - Real(spec.assets[i].mu)) * dt);
        A1[i] = target - h[0][i];
        A2[i] = target - h[1][i];
    }
    const Real Q = det3(B);
    m.determinant = static_cast<double>(Q);
    m.hadamard_scale = row_norm(B[0]) * row_norm(B[1]) * row_norm(B[2]);
    if (!(std::abs(m.determinant) > kDeterminantTolerance * m.hadamard_scale))
        throw DegenerateMarket(
            std::string("replication determinant vanishes at a ") + level_class_name(level) +
            " level (near-identical asset scales or delta too close to 0)");

    // q_uu takes the A2 row. The A1-row variant equals q_uu - 1 and is kept
    // only as a diagnostic.
    const Real q_uu = det3(with_row(B, 0, A2)) / Q;
    const Real printed_uu = det3(with_row(B, 0, A1)) / Q;

    Real ud(0), du(0);
    for (std::size_t i = 0; i < 3; ++i) {
        ud += det3(with_column(B, i, std::array<Real, 3>{-A1[i], A1[i], Real(0)}));
        du += det3(with_column(B, i, std::array<Real, 3>{Real(0), -A1[i], A1[i]}));
    }
    const Real dd = -det3(with_row(B, 2, A1));

    m.q = {q_uu, ud / Q, du / Q, dd / Q};
    m.printed_uu_gap = std::abs(static_cast<double>(printed_uu - q_uu));
    fill_residuals(m, spec, delta);
    return m;
}

} // namespace detail

/// Risk-neutral weights for the three level classes of a market. When |delta|
/// is below 1e-6 the market is treated as delta = 0 and every step is two-state.
template <class Real>
MarketMeasure<Real> market_measure(const MarketSpec& spec) {
    spec.validate();
    MarketMeasure<Real> mm;
    mm.effective_delta_zero = std::abs(spec.delta) < detail::kEffectiveZeroDelta;
    mm.delta_used = mm.effective_delta_zero ? 0.0 : spec.delta;
    for (auto level : {LevelClass::negative, LevelClass::zero, LevelClass::positive}) {
        auto& slot = mm.classes[static_cast<std::size_t>(level)];
        if (mm.effective_delta_zero || level == LevelClass::zero)
            slot = detail::two_state_measure<Real>(level, spec, mm.delta_used);
        else
            slot = detail::four_state_measure<Real>(level, spec, mm.delta_used);
    }
    return mm;
}

/// (q_uu, q_ud, q_du, q_dd) at a node with second-driver level j2.
/// Evaluated with 50 significant digits and rounded to double.
inline BranchQuadruple<double> rn_probabilities(int j2, const MarketSpec& spec) {
    const auto mm = market_measure<mp::real<50>>(spec);
    const auto& q = mm.at(j2).q;
    return {static_cast<double>(q[0]), static_cast<double>(q[1]), static_cast<double>(q[2]),
            static_cast<double>(q[3])};
}

struct MartingaleReport {
    std::array<std::array<double, 3>, 3> residual{}; // [level class][asset]
    std::array<BranchQuadruple<double>, 3> q{};
    std::array<bool, 3> two_state{};
    double max_residual = 0.0;
    double max_residual_excluding_two_state = 0.0;
};

/// One-step repricing error of each asset under the measure, per level class.
inline MartingaleReport martingale_residuals(const MarketSpec& spec) {
    const auto mm = market_measure<mp::real<50>>(spec);
    MartingaleReport rep;
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& cm = mm.classes[c];
        rep.residual[c] = cm.residual;
        rep.two_state[c] = cm.two_state;
        for (std::size_t x = 0; x < 4; ++x) rep.q[c][x] = static_cast<double>(cm.q[x]);
        rep.max_residual = std::max(rep.max_residual, cm.max_residual());
        if (!cm.two_state)
            rep.max_residual_excluding_two_state =
                std::max(rep.max_residual_excluding_two_state, cm.max_residual());
    }
    return rep;
}

// ---------------------------------------------------------------- hedging

/// Deltas D making sum_i D_i S_i - f equal on all four successors, by Cramer's
/// rule on successor price differences. At a zero level the uu/ud and du/dd
/// successors coincide, so the claim must agree on them and the minimum-norm
/// delta is returned.
inline std::array<double, 3> hedging_deltas(const LatticeNode& node,
                                            const BranchQuadruple<double>& f,
                                            const MarketSpec& spec) {
    const auto s = node_asset_prices(node, spec);
    const bool flat = std::abs(spec.delta) < detail::kEffectiveZeroDelta;
    MarketSpec local = spec;
    if (flat) local.delta = 0.0;
    const auto g = psi_factors<double>(node.j2, local);
    std::array<std::array<double, 3>, 4> psi{};
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t i = 0; i < 3; ++i) psi[x][i] = s[i] * g[x][i];

    if (node.j2 == 0 || flat) {
        const double fscale = std::max({1.0, std::abs(f[0]), std::abs(f[1]), std::abs(f[2]), std::abs(f[3])});
        if (std::abs(f[0] - f[1]) > 1e-12 * fscale || std::abs(f[2] - f[3]) > 1e-12 * fscale)
            throw DegenerateMarket("claim differs on coinciding successors; it cannot be hedged at this node");
        std::array<double, 3> v{};
        double vv = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            v[i] = psi[0][i] - psi[2][i];
            vv += v[i] * v[i];
        }
        if (!(vv > 0.0)) throw DegenerateMarket("assets do not move at this node");
        const double scale = (f[0] - f[2]) / vv;
        return {v[0] * scale, v[1] * scale, v[2] * scale};
    }

    detail::Mat3<double> D{};
    std::array<double, 3> df{};
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < 3; ++i) D[r][i] = psi[r][i] - psi[r + 1][i];
        df[r] = f[r] - f[r + 1];
    }
    const double det = detail::det3(D);
    const double scale = detail::row_norm(D[0]) * detail::row_norm(D[1]) * detail::row_norm(D[2]);
    if (!(std::abs(det) > detail::kDeterminantTolerance * scale))
        throw DegenerateMarket("hedging determinant vanishes at this node");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) out[i] = detail::det3(detail::with_column(D, i, df)) / det;
    return out;
}

/// Spread of the hedged portfolio sum_i D_i S_i(x) - f_x across the four
/// successors, relative to the largest portfolio magnitude.
inline double replication_spread(const LatticeNode& node, const BranchQuadruple<double>& f,
                                 const std::array<double, 3>& D, const MarketSpec& spec) {
    const auto s = node_asset_prices(node, spec);
    const auto g = psi_factors<double>(node.j2, spec);
    std::array<double, 4> p{};
    for (std::size_t x = 0; x < 4; ++x) {
        p[x] = -f[x];
        for (std::size_t i = 0; i < 3; ++i) p[x] += D[i] * s[i] * g[x][i];
    }
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    double mag = 0.0;
    for (double v : p) mag = std::max(mag, std::abs(v));
    return mag > 0.0 ? (*hi - *lo) / mag : 0.0;
}

// ---------------------------------------------------------------- payoffs

struct Payoff {
    enum class Kind { rainbow_put, rainbow_call, constant, asset };
    Kind kind = Kind::constant;
    double value = 0.0; // strike or constant
    int asset = 0;

    template <class Real>
    Real operator()(const std::array<Real, 3>& s) const {
        switch (kind) {
        case Kind::rainbow_put: {
            const Real m = std::min({s[0], s[1], s[2]});
            const Real v = Real(value) - m;
            return v > Real(0) ? v : Real(0);
        }
        case Kind::rainbow_call: {
            const Real m = std::max({s[0], s[1], s[2]});
            const Real v = m - Real(value);
            return v > Real(0) ? v : Real(0);
        }
        case Kind::constant:
            return Real(value);
        case Kind::asset:
            return s[static_cast<std::size_t>(asset)];
        }
        return Real(0);
    }
};

/// max(0, K - min S).
inline Payoff payoff_rainbow_put(double K) {
    detail::require(K > 0.0, "strike must be positive");
    return {Payoff::Kind::rainbow_put, K, 0};
}

/// max(0, max S - K).
inline Payoff payoff_rainbow_call(double K) {
    detail::require(K > 0.0, "strike must be positive");
    return {Payoff::Kind::rainbow_call, K, 0};
}

inline Payoff payoff_constant(double c) { return {Payoff::Kind::constant, c, 0}; }

inline Payoff payoff_asset(int i) {
    detail::require(i >= 0 && i < 3, "asset index must be 0, 1 or 2");
    return {Payoff::Kind::asset, 0.0, i};
}

// ---------------------------------------------------------------- pricing

struct PricingOptions {
    int digits = 0;          // 0 picks the precision automatically; 16 forces double
    bool keep_nodes = false; // store every layer of the first payoff
    std::size_t workers = 1;
};

struct PricingDiagnostics {
    double q_min = 0, q_max = 0;
    double worst_residual = 0;            // over the level classes the lattice visits
    double worst_four_state_residual = 0; // excluding two-state classes
    double zero_level_residual = 0;
    double max_total_variation = 0; // max sum |q|; errors grow like its n-th power
    double printed_uu_gap = 0;
    bool arbitrage_warning = false;
    bool effective_delta_zero = false;
    int digits_used = 16;
    std::vector<std::string> warnings;
};

struct PricingResult {
    double price = 0.0;
    PricingDiagnostics diagnostics;
    std::vector<std::vector<double>> node_values; // [k][a * (k + 1) + b] when kept
};

/// Significant digits lost to cancellation over n steps of a signed measure.
inline double lost_digits(double total_variation, int n_steps) {
    return n_steps * std::log10(std::max(total_variation, 1.0));
}

inline constexpr std::array<int, 5> kPrecisionTiers{50, 100, 200, 400, 800};

/// Digits for a run: 16 (double) when fewer than 3 digits are at risk, else the
/// smallest tier keeping 20 digits beyond the loss.
inline int select_digits(double total_variation, int n_steps) {
    const double lost = lost_digits(total_variation, n_steps);
    if (lost < 3.0) return 16;
    for (int tier : kPrecisionTiers)
        if (tier >= lost + 20.0) return tier;
    return kPrecisionTiers.back();
}

namespace detail {

template <class Real>
PricingDiagnostics measure_diagnostics(const MarketMeasure<Real>& mm, int n_steps, const MarketSpec& spec) {
    PricingDiagnostics d;
    d.effective_delta_zero = mm.effective_delta_zero;
    d.q_min = std::numeric_limits<double>::infinity();
    d.q_max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& cm = mm.classes[c];
        const bool visited = cm.level == LevelClass::zero || n_steps >= 2;
        if (!visited) continue;
        for (const auto& v : cm.q) {
            d.q_min = std::min(d.q_min, static_cast<double>(v));
            d.q_max = std::max(d.q_max, static_cast<double>(v));
        }
        d.worst_residual = std::max(d.worst_residual, cm.max_residual());
        if (!cm.two_state) d.worst_four_state_residual = std::max(d.worst_four_state_residual, cm.max_residual());
        if (cm.level == LevelClass::zero) d.zero_level_residual = cm.max_residual();
        d.max_total_variation = std::max(d.max_total_variation, cm.total_variation());
        d.printed_uu_gap = std::max(d.printed_uu_gap, cm.printed_uu_gap);
    }
    if (d.q_min < 0.0 || d.q_max > 1.0) {
        d.arbitrage_warning = true;
        d.warnings.push_back("arbitrage: risk-neutral weights outside [0, 1] (min " +
                             std::to_string(d.q_min) + ", max " + std::to_string(d.q_max) + ")");
    }
    if (d.zero_level_residual > 1e-9)
        d.warnings.push_back("zero-level step cannot reprice all three assets (residual " +
                             std::to_string(d.zero_level_residual) + ")");
    if (spec.r < 0.0) d.warnings.push_back("negative riskless rate");
    if (mm.effective_delta_zero) d.warnings.push_back("|delta| < 1e-6 treated as 0 (two-state steps)");
    return d;
}

template <class Real>
std::vector<PricingResult> run_lattice(const MarketSpec& spec,
                                       const std::vector<std::function<Real(const std::array<Real, 3>&)>>& payoffs,
                                       const PricingOptions& opt, int digits_used) {
    using std::exp;
    using std::sqrt;
    const auto mm = market_measure<Real>(spec);
    PricingDiagnostics diag = measure_diagnostics(mm, spec.n_steps, spec);
    diag.digits_used = digits_used;
    const double needed = lost_digits(diag.max_total_variation, spec.n_steps) + 20.0;
    if (digits_used > 16 && needed > digits_used)
        diag.warnings.push_back("precision cap reached: about " + std::to_string(static_cast<int>(needed)) +
                                " digits needed, " + std::to_string(digits_used) + " used");

    const int n = spec.n_steps;
    const std::size_t W = static_cast<std::size_t>(n) + 1;
    const Real dt(spec.dt), sq = sqrt(dt);
    const Real d(mm.delta_used);
    const Real s = sqrt(Real(1) - d * d);
    const Real disc = exp(-Real(spec.r) * dt);

    std::vector<std::array<Real, 3>> terminal(W * W);
    for (std::size_t a = 0; a < W; ++a)
        for (std::size_t b = 0; b < W; ++b) {
            const int j1 = 2 * static_cast<int>(a) - n, j2 = 2 * static_cast<int>(b) - n;
            const Real level = sq * (s * Real(j1) + d * Real(std::abs(j2)));
            for (std::size_t i = 0; i < 3; ++i) {
                const auto& as = spec.assets[i];
                terminal[a * W + b][i] = Real(as.s0) * exp(Real(as.mu) * Real(n) * dt + Real(as.sigma) * level);
            }
        }

    std::array<BranchQuadruple<Real>, 3> q{};
    for (std::size_t c = 0; c < 3; ++c) {
        q[c] = mm.classes[c].q;
        for (auto& v : q[c]) v *= disc;
    }

    std::vector<PricingResult> results;
    results.reserve(payoffs.size());
    std::vector<Real> cur(W * W), nxt(W * W);
    for (std::size_t p = 0; p < payoffs.size(); ++p) {
        PricingResult res;
        res.diagnostics = diag;
        const bool keep = opt.keep_nodes && p == 0;
        if (keep) res.node_values.resize(W);
        for (std::size_t idx = 0; idx < W * W; ++idx) cur[idx] = payoffs[p](terminal[idx]);
        auto snapshot = [&](int k) {
            const auto w = static_cast<std::size_t>(k) + 1;
            auto& layer = res.node_values[static_cast<std::size_t>(k)];
            layer.resize(w * w);
            for (std::size_t a = 0; a < w; ++a)
                for (std::size_t b = 0; b < w; ++b) layer[a * w + b] = static_cast<double>(cur[a * W + b]);
        };
        if (keep) snapshot(n);
        for (int k = n - 1; k >= 0; --k) {
            const auto w = static_cast<std::size_t>(k) + 1;
            auto row = [&](std::size_t a) {
                for (std::size_t b = 0; b < w; ++b) {
                    const auto& qq = q[static_cast<std::size_t>(level_class(2 * static_cast<int>(b) - k))];
                    nxt[a * W + b] = qq[0] * cur[(a + 1) * W + b + 1] + qq[1] * cur[(a + 1) * W + b] +
                                     qq[2] * cur[a * W + b + 1] + qq[3] * cur[a * W + b];
                }
            };
            if (opt.workers > 1 && w >= 32)
                parallel_for(w, row, opt.workers);
            else
                for (std::size_t a = 0; a < w; ++a) row(a);
            std::swap(cur, nxt);
            if (keep) snapshot(k);
        }
        res.price = static_cast<double>(cur[0]);
        if (!std::isfinite(res.price)) res.diagnostics.warnings.push_back("price is not finite");
        results.push_back(std::move(res));
    }
    return results;
}

template <class Real>
std::vector<std::function<Real(const std::array<Real, 3>&)>> wrap_payoffs(const std::vector<Payoff>& ps) {
    std::vector<std::function<Real(const std::array<Real, 3>&)>> out;
    out.reserve(ps.size());
    for (const auto& p : ps) out.emplace_back([p](const std::array<Real, 3>& s) { return p.template operator()<Real>(s); });
    return out;
}

} // namespace detail

/// Calls f with a value of the floating type chosen for `digits`.
template <class F>
decltype(auto) with_precision(int digits, F&& f) {
    if (digits <= 16) return f(double{});
    if (digits <= 50) return f(mp::real<50>{});
    if (digits <= 100) return f(mp::real<100>{});
    if (digits <= 200) return f(mp::real<200>{});
    if (digits <= 400) return f(mp::real<400>{});
    return f(mp::real<800>{});
}

inline int resolve_digits(const MarketSpec& spec, const PricingOptions& opt) {
    if (opt.digits > 0) return opt.digits;
    const auto mm = market_measure<mp::real<50>>(spec);
    double tv = 0.0;
    for (const auto& c : mm.classes) tv = std::max(tv, c.total_variation());
    return select_digits(tv, spec.n_steps);
}

/// Backward induction of several payoffs on the recombining (j1, j2) lattice.
inline std::vector<PricingResult> price_european_many(const MarketSpec& spec, const std::vector<Payoff>& payoffs,
                                                      const PricingOptions& opt = {}) {
    spec.validate();
    const int digits = resolve_digits(spec, opt);
    return with_precision(digits, [&](auto tag) {
        using Real = decltype(tag);
        const int used = std::is_same_v<Real, double> ? 16 : static_cast<int>(std::numeric_limits<Real>::digits10);
        return detail::run_lattice<Real>(spec, detail::wrap_payoffs<Real>(payoffs), opt, used);
    });
}

inline PricingResult price_european(const MarketSpec& spec, const Payoff& payoff, const PricingOptions& opt = {}) {
    return price_european_many(spec, {payoff}, opt).front();
}

/// Arbitrary payoff evaluated in double precision throughout.
inline PricingResult price_european(const MarketSpec& spec, std::function<double(const std::array<double, 3>&)> payoff,
                                    const PricingOptions& opt = {}) {
    spec.validate();
    return detail::run_lattice<double>(spec, {std::move(payoff)}, opt, 16).front();
}

// ---------------------------------------------------------------- surfaces

enum class OptionKind { put, call };

struct SurfaceRequest {
    OptionKind kind = OptionKind::put;
    std::vector<int> t_days;
    std::vector<double> moneyness;
};

struct SurfaceCell {
    int t_days = 0;
    double moneyness = 0, strike = 0, price = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    bool arbitrage_warning = false;
    std::string warnings;
};

struct Surface {
    OptionKind kind = OptionKind::put;
    std::vector<int> t_days;
    std::vector<double> moneyness;
    std::vector<SurfaceCell> cells; // row-major: t outer, moneyness inner

    const SurfaceCell& at(std::size_t ti, std::size_t mi) const { return cells[ti * moneyness.size() + mi]; }
};

/// Strike for a moneyness: M min S0 for puts, M max S0 for calls.
inline double strike_from_moneyness(OptionKind kind, double m, const MarketSpec& spec) {
    const auto& a = spec.assets;
    const double ref = kind == OptionKind::put ? std::min({a[0].s0, a[1].s0, a[2].s0})
                                               : std::max({a[0].s0, a[1].s0, a[2].s0});
    return m * ref;
}

/// Prices every (T, M) cell with one lattice step per day. A maturity whose
/// lattice fails marks all of its cells as failed with the reason.
inline Surface price_surface(const MarketSpec& spec, const SurfaceRequest& req, const PricingOptions& opt = {}) {
    detail::require(!req.t_days.empty() && !req.moneyness.empty(), "surface grid must be nonempty");
    for (int t : req.t_days) detail::require(t >= 1, "maturities must be at least one day");
    for (double m : req.moneyness) detail::require(m > 0.0, "moneyness must be positive");
    Surface sf;
    sf.kind = req.kind;
    sf.t_days = req.t_days;
    sf.moneyness = req.moneyness;
    sf.cells.resize(req.t_days.size() * req.moneyness.size());
    for (std::size_t ti = 0; ti < req.t_days.size(); ++ti) {
        MarketSpec local = spec;
        local.n_steps = req.t_days[ti];
        std::vector<Payoff> payoffs;
        for (std::size_t mi = 0; mi < req.moneyness.size(); ++mi) {
            auto& cell = sf.cells[ti * req.moneyness.size() + mi];
            cell.t_days = req.t_days[ti];
            cell.moneyness = req.moneyness[mi];
            cell.strike = strike_from_moneyness(req.kind, cell.moneyness, spec);
            payoffs.push_back(req.kind == OptionKind::put ? payoff_rainbow_put(cell.strike)
                                                          : payoff_rainbow_call(cell.strike));
        }
        try {
            const auto res = price_european_many(local, payoffs, opt);
            for (std::size_t mi = 0; mi < req.moneyness.size(); ++mi) {
                auto& cell = sf.cells[ti * req.moneyness.size() + mi];
                cell.price = res[mi].price;
                cell.arbitrage_warning = res[mi].diagnostics.arbitrage_warning;
                std::string w;
                for (const auto& s : res[mi].diagnostics.warnings) w += (w.empty() ? "" : "; ") + s;
                cell.warnings = w;
            }
        } catch (const std::exception& e) {
            for (std::size_t mi = 0; mi < req.moneyness.size(); ++mi) {
                auto& cell = sf.cells[ti * req.moneyness.size() + mi];
                cell.failed = true;
                cell.warnings = e.what();
            }
        }
    }
    return sf;
}

// ---------------------------------------------------------------- implied rate

/// Riskless rate implied by two assets sharing delta:
/// (mu2 sigma1 - mu1 sigma2 + (sigma2^2 - sigma1^2) / 2) / (sigma1 - sigma2).
inline double fb_rate(const AssetSpec& a1, const AssetSpec& a2) {
    const double gap = a1.sigma - a2.sigma;
    if (!(std::abs(gap) > 1e-12 * std::max({1.0, std::abs(a1.sigma), std::abs(a2.sigma)})))
        throw DegenerateMarket("implied rate diverges: the two asset scales coincide");
    return (a2.mu * a1.sigma - a1.mu * a2.sigma + 0.5 * (a2.sigma * a2.sigma - a1.sigma * a1.sigma)) / gap;
}

} // namespace skewtree

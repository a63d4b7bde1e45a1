#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

#include <skewtree/skewtree.hpp>
#include <skewtree/verify.hpp>

using namespace skewtree;

namespace {

double bs_call(double s, double k, double sigma, double r, double t) {
    const double d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * t) / (sigma * std::sqrt(t));
    const double d2 = d1 - sigma * std::sqrt(t);
    auto N = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    return s * N(d1) - k * std::exp(-r * t) * N(d2);
}

MarketSpec reference_market(int n) {
    MarketSpec s;
    s.assets = {AssetSpec{0.32, -0.090, 432.51}, AssetSpec{0.31, -0.23, 52.25}, AssetSpec{-0.069, 2.8, 76.09}};
    s.delta = 0.102;
    s.n_steps = n;
    return s;
}

// Risk-neutral weights from the 4x4 system: weights sum to one and every
// discounted asset is a one-step martingale.
Eigen::Vector4d oracle_q(int j2, const MarketSpec& spec) {
    const auto g = psi_factors<double>(j2, spec);
    Eigen::Matrix4d A;
    Eigen::Vector4d b;
    A.row(0).setOnes();
    b(0) = 1.0;
    for (int i = 0; i < 3; ++i) {
        for (int x = 0; x < 4; ++x) A(i + 1, x) = g[x][i];
        b(i + 1) = std::exp(spec.r * spec.dt);
    }
    return A.fullPivLu().solve(b);
}

} // namespace

TEST(Geometry, NodePricesAndGrowthFactorsAgree) {
    const auto spec = reference_market(3);
    const LatticeNode n0{0, 0, 0}, n1{1, 1, -1};
    const auto s0 = node_asset_prices(n0, spec);
    EXPECT_DOUBLE_EQ(s0[0], 432.51);
    const auto g = psi_factors<double>(0, spec);
    const auto s1 = node_asset_prices(n1, spec);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(s1[i], s0[i] * g[static_cast<std::size_t>(Branch::ud)][i], 1e-12 * s1[i]);
    EXPECT_THROW(node_asset_prices(LatticeNode{1, 0, 1}, spec), std::invalid_argument);
}

TEST(Geometry, ZeroLevelBranchesCoincide) {
    EXPECT_DOUBLE_EQ(branch_exponent(0, Branch::uu, 0.3), branch_exponent(0, Branch::ud, 0.3));
    EXPECT_DOUBLE_EQ(branch_exponent(0, Branch::du, 0.3), branch_exponent(0, Branch::dd, 0.3));
    EXPECT_NE(branch_exponent(2, Branch::uu, 0.3), branch_exponent(2, Branch::ud, 0.3));
}

TEST(Measure, FourStateMatchesEigenOracle) {
    const Rng master(3);
    for (int t = 0; t < 30; ++t) {
        Rng rng = master.substream(static_cast<std::uint64_t>(t));
        const auto spec = random_market_spec(rng);
        const auto mm = market_measure<mp::real<50>>(spec);
        for (int j2 : {-3, 2}) {
            const auto ref = oracle_q(j2, spec);
            const auto& cm = mm.at(j2);
            ASSERT_FALSE(cm.two_state);
            const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
            for (int x = 0; x < 4; ++x)
                EXPECT_NEAR(static_cast<double>(cm.q[x]), ref(x), 1e-7 * scale) << t << " " << j2 << " " << x;
            EXPECT_LT(cm.max_residual(), 1e-30);
            // The alternate q_uu form with the first replacement row is off by exactly one.
            EXPECT_NEAR(cm.printed_uu_gap, 1.0, 1e-20);
        }
    }
}

TEST(Measure, NegativeAndPositiveLevelsAreMirrorImages) {
    const auto rep = martingale_residuals(reference_market(1));
    const auto& neg = rep.q[0];
    const auto& pos = rep.q[2];
    EXPECT_NEAR(neg[0], pos[1], 1e-9);
    EXPECT_NEAR(neg[2], pos[3], 1e-9);
}

TEST(Measure, ReferenceMarketHasSignedWeightsAndZeroLevelGap) {
    const auto rep = martingale_residuals(reference_market(1));
    EXPECT_LT(rep.q[0][1], 0.0);
    EXPECT_GT(rep.q[0][0], 1.0);
    EXPECT_TRUE(rep.two_state[1]);
    EXPECT_LT(rep.max_residual_excluding_two_state, 1e-30);
    // Two coinciding branch pairs cannot price three assets at once here.
    EXPECT_GT(rep.residual[1][0] + rep.residual[1][1] + rep.residual[1][2], 1e-4);
    for (const auto& q : rep.q) EXPECT_NEAR(q[0] + q[1] + q[2] + q[3], 1.0, 1e-12);
}

TEST(Measure, ZeroLevelExactWhenAssetsAgree) {
    // Choose drifts so that one up-weight prices every asset at a zero level.
    MarketSpec spec = reference_market(1);
    spec.r = 0.02;
    const double qu = 0.45, d = spec.delta, s = std::sqrt(1 - d * d), sq = std::sqrt(spec.dt);
    for (auto& a : spec.assets) {
        const double hu = std::exp(a.sigma * (s + d) * sq), hd = std::exp(a.sigma * (-s + d) * sq);
        a.mu = spec.r - std::log(qu * hu + (1 - qu) * hd) / spec.dt;
    }
    const auto rep = martingale_residuals(spec);
    EXPECT_LT(rep.residual[1][0] + rep.residual[1][1] + rep.residual[1][2], 1e-13);
    EXPECT_NEAR(rep.q[1][0] + rep.q[1][1], qu, 1e-12);
    EXPECT_NEAR(rep.q[1][0], rep.q[1][1], 1e-15);
}

TEST(Measure, DegenerateSigmasThrow) {
    MarketSpec spec = reference_market(1);
    spec.assets[1].sigma = spec.assets[0].sigma;
    EXPECT_THROW(market_measure<double>(spec), DegenerateMarket);
    EXPECT_THROW(price_european(spec, payoff_constant(1.0)), DegenerateMarket);
}

TEST(Measure, TinyDeltaIsTreatedAsZero) {
    MarketSpec spec = reference_market(4);
    spec.delta = 1e-8;
    const auto res = price_european(spec, payoff_constant(2.0));
    EXPECT_TRUE(res.diagnostics.effective_delta_zero);
    EXPECT_NEAR(res.price, 2.0, 1e-12);
    bool noted = false;
    for (const auto& w : res.diagnostics.warnings) noted = noted || w.find("1e-6") != std::string::npos;
    EXPECT_TRUE(noted);
}

TEST(Pricing, ConstantPayoffIsDiscountedBond) {
    for (int n : {1, 2, 7, 30}) {
        MarketSpec spec = reference_market(n);
        spec.r = 0.03;
        const auto res = price_european(spec, payoff_constant(5.0));
        EXPECT_NEAR(res.price, 5.0 * std::exp(-0.03 * spec.maturity()), 1e-12) << n;
    }
}

TEST(Pricing, MatchesBruteForceEnumeration) {
    const Rng master(19);
    for (int t = 0; t < 12; ++t) {
        Rng rng = master.substream(static_cast<std::uint64_t>(t));
        const auto spec = random_market_spec(rng, 1 + t % 6);
        const double k = strike_from_moneyness(OptionKind::put, 1.05, spec);
        for (const auto& p : {payoff_rainbow_put(k), payoff_rainbow_call(k), payoff_asset(1)}) {
            const double lat = price_european(spec, p).price;
            const double bf = static_cast<double>(brute_force_price<mp::real<100>>(spec, p));
            EXPECT_NEAR(lat, bf, 1e-10 * std::max(1.0, std::abs(bf))) << t;
        }
    }
}

TEST(Pricing, DoubleCallableAgreesWithPayoffType) {
    Rng rng(5);
    const auto spec = random_market_spec(rng, 3);
    PricingOptions opt;
    opt.digits = 16;
    const auto a = price_european(spec, payoff_rainbow_call(100.0), opt);
    const auto b = price_european(spec, [](const std::array<double, 3>& s) {
        return std::max(0.0, std::max({s[0], s[1], s[2]}) - 100.0);
    });
    EXPECT_NEAR(a.price, b.price, 1e-9 * std::max(1.0, std::abs(a.price)));
}

TEST(Pricing, KeptNodesHaveLatticeShape) {
    PricingOptions opt;
    opt.keep_nodes = true;
    const auto res = price_european(reference_market(3), payoff_constant(1.0), opt);
    ASSERT_EQ(res.node_values.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(res.node_values[k].size(), (k + 1) * (k + 1));
    EXPECT_DOUBLE_EQ(res.node_values[0][0], res.price);
}

TEST(Pricing, ParallelRowsMatchSerial) {
    Rng rng(6);
    const auto spec = random_market_spec(rng, 40);
    PricingOptions one, many;
    many.workers = 3;
    EXPECT_EQ(price_european(spec, payoff_rainbow_put(200.0), one).price,
              price_european(spec, payoff_rainbow_put(200.0), many).price);
}

TEST(Pricing, PrecisionTiers) {
    EXPECT_EQ(select_digits(1.0, 1000), 16);
    EXPECT_EQ(select_digits(2677.0, 5), 50);
    EXPECT_EQ(select_digits(2677.0, 20), 100);
    EXPECT_EQ(select_digits(2677.0, 60), 400);
    EXPECT_EQ(select_digits(1e9, 200), 800);
    EXPECT_NEAR(lost_digits(10.0, 7), 7.0, 1e-12);
}

TEST(Pricing, ReferenceMarketFlagsArbitrage) {
    const auto res = price_european(reference_market(2), payoff_rainbow_put(52.25));
    EXPECT_TRUE(res.diagnostics.arbitrage_warning);
    EXPECT_GT(res.diagnostics.zero_level_residual, 1e-4);
    EXPECT_GE(res.diagnostics.digits_used, 16);
}

TEST(Hedging, ReplicatesOnAllSuccessors) {
    const Rng master(23);
    for (int t = 0; t < 20; ++t) {
        Rng rng = master.substream(static_cast<std::uint64_t>(t));
        const auto spec = random_market_spec(rng, 3);
        const BranchQuadruple<double> f{rng.uniform() * 10, rng.uniform() * 10, rng.uniform() * 10, rng.uniform() * 10};
        for (const LatticeNode n : {LatticeNode{1, 1, 1}, LatticeNode{3, -1, -3}}) {
            const auto D = hedging_deltas(n, f, spec);
            EXPECT_LT(replication_spread(n, f, D, spec), 1e-10);
        }
        const LatticeNode z{2, 0, 0};
        const BranchQuadruple<double> g{3.0, 3.0, 1.0, 1.0};
        const auto D = hedging_deltas(z, g, spec);
        EXPECT_LT(replication_spread(z, g, D, spec), 1e-10);
        EXPECT_THROW(hedging_deltas(z, f, spec), DegenerateMarket);
    }
}

TEST(Surface, ShapeStrikesAndSingleCell) {
    MarketSpec spec = reference_market(1);
    SurfaceRequest req;
    req.kind = OptionKind::call;
    req.t_days = {1, 2};
    req.moneyness = {0.9, 1.1};
    const auto sf = price_surface(spec, req);
    ASSERT_EQ(sf.cells.size(), 4u);
    EXPECT_DOUBLE_EQ(sf.at(1, 1).strike, 1.1 * 432.51);
    EXPECT_EQ(sf.at(1, 0).t_days, 2);
    req.t_days = {1};
    req.moneyness = {1.0};
    EXPECT_EQ(price_surface(spec, req).cells.size(), 1u);
    req.moneyness = {};
    EXPECT_THROW(price_surface(spec, req), std::invalid_argument);
    EXPECT_DOUBLE_EQ(strike_from_moneyness(OptionKind::put, 1.0, spec), 52.25);
}

TEST(Surface, DegenerateMaturityMarksCells) {
    MarketSpec spec = reference_market(1);
    spec.assets[2].sigma = spec.assets[1].sigma;
    SurfaceRequest req;
    req.t_days = {3};
    req.moneyness = {1.0, 1.2};
    const auto sf = price_surface(spec, req);
    for (const auto& c : sf.cells) {
        EXPECT_TRUE(c.failed);
        EXPECT_FALSE(c.warnings.empty());
    }
}

TEST(ImpliedRate, FormulaAndDegeneracy) {
    const AssetSpec a{0.1, 0.2, 1}, b{0.05, -0.1, 1};
    const double r = fb_rate(a, b);
    EXPECT_NEAR(r, (0.05 * 0.2 - 0.1 * -0.1 + 0.5 * (0.01 - 0.04)) / 0.3, 1e-15);
    EXPECT_THROW(fb_rate(a, AssetSpec{0.3, 0.2, 1}), DegenerateMarket);
}

TEST(Baseline, CrrAndJrConvergeToBlackScholes) {
    BaselineParams bp;
    bp.s0 = 100;
    bp.mu = 0.05;
    bp.sigma = 0.2;
    bp.r = 0.01;
    bp.maturity = 1;
    bp.n_steps = 1024;
    const double bs = bs_call(100, 100, 0.2, 0.01, 1);
    auto call = [](double s) { return std::max(0.0, s - 100.0); };
    EXPECT_LT(std::abs(price_baseline(BaselineKind::jr, bp, call).price - bs) / bs, 1e-3);
    EXPECT_LT(std::abs(price_baseline(BaselineKind::crr, bp, call).price - bs) / bs, 1e-3);
}

TEST(Baseline, FirstOrderWeightsMatchExact) {
    BaselineParams bp;
    bp.mu = 0.07;
    bp.sigma = 0.25;
    bp.r = 0.02;
    bp.n_steps = 10000;
    const double dt = bp.dt();
    EXPECT_NEAR(baseline_step(BaselineKind::crr, bp).q, crr_first_order_q(0.25, 0.02, dt), 1e-4);
    EXPECT_NEAR(baseline_step(BaselineKind::jr, bp).q, jr_first_order_q(0.07, 0.25, 0.02, dt), 1e-4);
}

TEST(Baseline, MatchedAndSkewShiftSteps) {
    BaselineParams bp;
    bp.mu = 0.05;
    bp.sigma = 0.2;
    bp.p = 0.3;
    bp.n_steps = 252;
    const auto st = baseline_step(BaselineKind::matched, bp);
    // Physical mean growth of the step is 1 + mu dt.
    EXPECT_NEAR(bp.p * st.up + (1 - bp.p) * st.down, 1 + bp.mu * bp.dt(), 1e-14);
    bp.delta = 0.3;
    bp.mu_bar = 0.06;
    bp.sigma_bar = 0.2;
    const auto s3 = baseline_step(BaselineKind::skew_shift, bp);
    EXPECT_GT(s3.up, s3.down);
    EXPECT_THROW(baseline_step(BaselineKind::reflected, bp), std::invalid_argument);
}

TEST(Baseline, ReflectedWarnsAtZeroLevel) {
    BaselineParams bp;
    bp.mu = 0.05;
    bp.sigma = 0.2;
    bp.n_steps = 10;
    EXPECT_TRUE(std::isnan(reflected_q(0, 0.05, 0.2, 0.0, 0.1)));
    const auto res = price_baseline(BaselineKind::reflected, bp, [](double) { return 1.0; });
    EXPECT_NEAR(res.price, 1.0, 1e-12);
    EXPECT_FALSE(res.warnings.empty());
}

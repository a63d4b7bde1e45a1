// Command-line front end: simulation, calibration, delta estimation, pricing,
// surfaces and self-checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <skewtree/config.hpp>
#include <skewtree/skewtree.hpp>
#include <skewtree/verify.hpp>

using namespace skewtree;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kData = 3, kDegenerate = 4 };

constexpr std::uint64_t kDefaultSeed = 20210914;

void echo(const std::string& command, std::uint64_t seed, const json& config) {
    std::printf("# command: %s\n# seed: %llu\n# config: %s\n", command.c_str(),
                static_cast<unsigned long long>(seed), config.dump().c_str());
}

std::string num(double x) { return format_number(x); }

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> v;
    if (count == 1) return {lo};
    for (int i = 0; i < count; ++i) v.push_back(lo + (hi - lo) * i / (count - 1));
    return v;
}

void print_diagnostics(const PricingDiagnostics& d) {
    std::printf("q_min,%s\nq_max,%s\nworst_martingale_residual,%s\nzero_level_residual,%s\n"
                "max_total_variation,%s\ndigits_used,%d\narbitrage_warning,%s\n",
                num(d.q_min).c_str(), num(d.q_max).c_str(), num(d.worst_residual).c_str(),
                num(d.zero_level_residual).c_str(), num(d.max_total_variation).c_str(), d.digits_used,
                d.arbitrage_warning ? "yes" : "no");
    for (const auto& w : d.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

struct Common {
    std::uint64_t seed = kDefaultSeed;
    std::size_t workers = 0;
    bool full = false;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skew random walk pricing toolkit"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "master random seed")->capture_default_str();
    app.add_option("--workers", common.workers, "worker threads (0: SKEWTREE_WORKERS or hardware)");
    app.add_flag("--full", common.full, "full-scale ensemble sizes (1e6 walks)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "skew random walk ensembles and moment report");
    double sim_alpha = 0.5;
    std::size_t sim_paths = 100000;
    int sim_steps = 6000;
    std::string sim_out, sim_hist, sim_fixture;
    double fx_mu = 0.05, fx_sigma = 0.1;
    bool sim_zero = false;
    sim->add_option("--alpha", sim_alpha, "skewness alpha in [0, 1]")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sim->add_option("--paths", sim_paths, "number of walks")->capture_default_str();
    sim->add_option("--steps", sim_steps, "steps per walk")->check(CLI::PositiveNumber)->capture_default_str();
    sim->add_option("--out", sim_out, "moment report CSV");
    sim->add_flag("--zero", sim_zero, "also report zero-occurrence statistics");
    sim->add_option("--hist", sim_hist, "zero-occurrence histogram CSV (implies --zero)");
    sim->add_option("--fixture", sim_fixture, "write one synthetic price series (date,price) instead");
    sim->add_option("--mu", fx_mu, "fixture drift")->capture_default_str();
    sim->add_option("--sigma", fx_sigma, "fixture scale")->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "calibrate (sigma, mu, alpha) to a price CSV");
    std::string fit_in, fit_out;
    std::size_t fit_window = 0, fit_median = 21, fit_ensemble = 20000;
    int fit_repeats = 1;
    SearchDomain dom;
    fit->add_option("--input", fit_in, "price CSV with header date,price")->required();
    fit->add_option("--window", fit_window, "rolling window length (0: single fit)");
    fit->add_option("--median-window", fit_median, "median smoothing length")->capture_default_str();
    fit->add_option("--ensemble", fit_ensemble, "candidates per fit")->capture_default_str();
    fit->add_option("--repeats", fit_repeats, "walks per candidate")->capture_default_str();
    fit->add_option("--mu-lo", dom.mu_lo)->capture_default_str();
    fit->add_option("--mu-hi", dom.mu_hi)->capture_default_str();
    fit->add_option("--alpha-lo", dom.alpha_lo)->capture_default_str();
    fit->add_option("--alpha-hi", dom.alpha_hi)->capture_default_str();
    fit->add_option("--out", fit_out, "output CSV (rolling) or JSON (single)");

    // delta-index
    auto* dix = app.add_subcommand("delta-index", "rolling delta estimate from an index price CSV");
    std::string dix_in, dix_out;
    std::size_t dix_window = 252, dix_median = 21, dix_ensemble = 20000;
    double dix_alo = 0.45, dix_ahi = 0.55;
    dix->add_option("--input", dix_in, "index price CSV")->required();
    dix->add_option("--window", dix_window)->capture_default_str();
    dix->add_option("--median-window", dix_median)->capture_default_str();
    dix->add_option("--ensemble", dix_ensemble)->capture_default_str();
    dix->add_option("--alpha-lo", dix_alo)->capture_default_str();
    dix->add_option("--alpha-hi", dix_ahi)->capture_default_str();
    dix->add_option("--out", dix_out, "delta series CSV");

    // market overrides shared by price and surface
    std::string cfg_path;
    std::optional<double> ov_delta, ov_r;
    int digits = 0;
    auto add_market = [&](CLI::App* c) {
        c->add_option("--config", cfg_path, "market JSON (default: the three-ETF reference market)");
        c->add_option("--delta", ov_delta, "override delta");
        c->add_option("--r", ov_r, "override riskless rate");
        c->add_option("--digits", digits, "working digits (0: automatic, 16: double)");
    };

    auto* price = app.add_subcommand("price", "price one claim on the skew pricing tree");
    add_market(price);
    std::string px_kind = "put", px_dump;
    std::optional<double> px_strike, px_money;
    int px_days = 60, px_asset = 0;
    double px_const = 1.0;
    price->add_option("--kind", px_kind, "put | call | constant | asset")
        ->check(CLI::IsMember({"put", "call", "constant", "asset"}))->capture_default_str();
    price->add_option("--strike", px_strike, "strike");
    price->add_option("--moneyness", px_money, "moneyness (strike over min spot for puts, max spot for calls)");
    price->add_option("--days", px_days, "maturity in trading days, one step per day")->check(CLI::PositiveNumber)->capture_default_str();
    price->add_option("--asset", px_asset, "asset index for --kind asset")->check(CLI::Range(0, 2));
    price->add_option("--value", px_const, "constant for --kind constant")->capture_default_str();
    price->add_option("--dump-nodes", px_dump, "CSV of every node value (k,j1,j2,value)");

    auto* surf = app.add_subcommand("surface", "price grid over maturity and moneyness");
    add_market(surf);
    std::string sf_kind = "put", sf_out;
    int t_min = 10, t_max = 100, t_count = 10, m_count = 11;
    double m_min = 0.5, m_max = 1.5;
    surf->add_option("--kind", sf_kind)->check(CLI::IsMember({"put", "call"}))->capture_default_str();
    surf->add_option("--t-min", t_min)->check(CLI::Range(1, 100))->capture_default_str();
    surf->add_option("--t-max", t_max)->check(CLI::Range(1, 100))->capture_default_str();
    surf->add_option("--t-count", t_count)->check(CLI::PositiveNumber)->capture_default_str();
    surf->add_option("--m-min", m_min)->capture_default_str();
    surf->add_option("--m-max", m_max)->capture_default_str();
    surf->add_option("--m-count", m_count)->check(CLI::PositiveNumber)->capture_default_str();
    surf->add_option("--out", sf_out, "surface CSV (T_days,moneyness,strike,price,warnings)");

    auto* ver = app.add_subcommand("verify", "run self-check suites");
    std::string suite = "all";
    std::size_t v_paths = 0, v_specs = 100;
    ver->add_option("--suite", suite, "lattice | walk | stats | calibration | all")
        ->check(CLI::IsMember({"lattice", "walk", "stats", "calibration", "all"}))->capture_default_str();
    ver->add_option("--paths", v_paths, "walks per alpha for the walk suite (default 1e5, 1e6 with --full)");
    ver->add_option("--specs", v_specs, "random markets for the lattice suite")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    const Rng master(common.seed);
    try {
        if (*sim) {
            if (!sim_fixture.empty()) {
                json cfg = {{"alpha", sim_alpha}, {"steps", sim_steps}, {"mu", fx_mu}, {"sigma", fx_sigma}, {"out", sim_fixture}};
                echo("simulate --fixture", common.seed, cfg);
                Rng r = master;
                const auto fx = synthetic_fixture(fx_mu, fx_sigma, sim_alpha, static_cast<std::size_t>(sim_steps), r);
                write_price_csv(fx.series, sim_fixture);
                std::printf("wrote %zu prices to %s\n", fx.series.size(), sim_fixture.c_str());
                return kOk;
            }
            if (common.full && !sim->count("--paths")) sim_paths = 1000000;
            json cfg = {{"alpha", sim_alpha}, {"paths", sim_paths}, {"steps", sim_steps}, {"workers", common.workers}};
            echo("simulate", common.seed, cfg);
            const auto p = SkewParams::from_alpha(sim_alpha);
            const auto rep = ensemble_moment_report(sim_paths, sim_steps, p, master, common.workers);
            std::printf("measure,rms_error\nmean,%s\nstd,%s\nincrement_mean,%s\nincrement_std,%s\n",
                        num(rep.mse_mean).c_str(), num(rep.mse_std).c_str(), num(rep.mse_dmean).c_str(),
                        num(rep.mse_dstd).c_str());
            if (!sim_out.empty()) write_moment_report_csv(rep, sim_out);
            if (sim_zero || !sim_hist.empty()) {
                const auto z = zero_occurrence_stats(sim_paths, sim_steps, p, master.substream(1), common.workers);
                std::printf("zero_rate_q1_percent,%s\nzero_rate_q2_percent,%s\nzero_rate_q3_percent,%s\n"
                            "zero_rate_min_percent,%s\nzero_rate_max_percent,%s\n",
                            num(z.q1).c_str(), num(z.q2).c_str(), num(z.q3).c_str(), num(z.min_rate).c_str(),
                            num(z.max_rate).c_str());
                if (!sim_hist.empty()) write_histogram_csv(z, sim_hist);
            }
            return kOk;
        }

        if (*fit) {
            const auto loaded = load_price_csv(fit_in);
            for (const auto& w : loaded.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            for (const auto& n : loaded.notices) std::fprintf(stderr, "notice: %s\n", n.c_str());
            FitOptions fo;
            fo.domain = dom;
            fo.ensemble_size = fit_ensemble;
            fo.repeats = fit_repeats;
            fo.workers = common.workers;
            json cfg = {{"input", fit_in}, {"window", fit_window}, {"median_window", fit_median},
                        {"ensemble", fit_ensemble}, {"repeats", fit_repeats},
                        {"domain", {dom.mu_lo, dom.mu_hi, dom.alpha_lo, dom.alpha_hi}}};
            echo("fit", common.seed, cfg);
            if (fit_window == 0) {
                const double sig = estimate_sigma(loaded.series);
                const auto res = fit_mu_alpha(loaded.series, sig, fo, master);
                for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
                json out = {{"sigma_star", res.sigma_star}, {"mu_star", res.mu_star}, {"alpha_star", res.alpha_star},
                            {"mse", res.mse}, {"ensemble_size", res.ensemble_size}, {"seed", res.seed}};
                std::printf("sigma_star,%s\nmu_star,%s\nalpha_star,%s\nmse,%s\n", num(res.sigma_star).c_str(),
                            num(res.mu_star).c_str(), num(res.alpha_star).c_str(), num(res.mse).c_str());
                if (!fit_out.empty()) {
                    std::ofstream f(fit_out);
                    f << out.dump(2) << '\n';
                }
            } else {
                RollingOptions ro;
                ro.window = fit_window;
                ro.median_window = fit_median;
                ro.fit = fo;
                const auto rc = rolling_calibration(loaded.series, ro, master);
                for (const auto& f : rc.failures) std::fprintf(stderr, "window failed: %s\n", f.c_str());
                std::printf("windows,%zu\nlast_date,%s\nlast_sigma_star,%s\nlast_mu_med,%s\nlast_alpha_med,%s\n",
                            rc.dates.size(), rc.dates.back().c_str(), num(rc.sigma_star.back()).c_str(),
                            num(rc.mu_med.back()).c_str(), num(rc.alpha_med.back()).c_str());
                if (!fit_out.empty()) write_calibration_csv(rc, fit_out);
            }
            return kOk;
        }

        if (*dix) {
            const auto loaded = load_price_csv(dix_in);
            for (const auto& w : loaded.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            RollingOptions ro;
            ro.window = dix_window;
            ro.median_window = dix_median;
            ro.fit.ensemble_size = dix_ensemble;
            ro.fit.workers = common.workers;
            json cfg = {{"input", dix_in}, {"window", dix_window}, {"median_window", dix_median},
                        {"ensemble", dix_ensemble}, {"alpha_bounds", {dix_alo, dix_ahi}}};
            echo("delta-index", common.seed, cfg);
            const auto ds = estimate_delta_from_index(loaded.series, ro, dix_alo, dix_ahi, master);
            double acc = 0.0;
            std::size_t cnt = 0;
            for (double d : ds.delta)
                if (!std::isnan(d)) {
                    acc += d;
                    ++cnt;
                }
            std::printf("windows,%zu\nmean_delta,%s\nlast_delta,%s\n", ds.delta.size(),
                        num(cnt ? acc / cnt : NAN).c_str(), num(ds.delta.back()).c_str());
            if (!dix_out.empty()) write_delta_csv(ds, dix_out);
            return kOk;
        }

        auto load_market = [&]() {
            NamedMarket m = cfg_path.empty() ? reference_market() : load_market_config(cfg_path);
            if (ov_delta) m.spec.delta = *ov_delta;
            if (ov_r) m.spec.r = *ov_r;
            return m;
        };

        if (*price) {
            NamedMarket m = load_market();
            m.spec.n_steps = px_days;
            m.spec.validate();
            Payoff pay;
            double strike = 0.0;
            if (px_kind == "put" || px_kind == "call") {
                const auto kind = px_kind == "put" ? OptionKind::put : OptionKind::call;
                if (px_strike && px_money) throw std::invalid_argument("give --strike or --moneyness, not both");
                strike = px_strike ? *px_strike : strike_from_moneyness(kind, px_money.value_or(1.0), m.spec);
                pay = kind == OptionKind::put ? payoff_rainbow_put(strike) : payoff_rainbow_call(strike);
            } else if (px_kind == "constant") {
                pay = payoff_constant(px_const);
            } else {
                pay = payoff_asset(px_asset);
            }
            json cfg = {{"market", market_to_json(m)}, {"kind", px_kind}, {"strike", strike}, {"days", px_days},
                        {"digits", digits}};
            echo("price", common.seed, cfg);
            PricingOptions po;
            po.digits = digits;
            po.keep_nodes = !px_dump.empty();
            const auto res = price_european(m.spec, pay, po);
            std::printf("price,%s\n", num(res.price).c_str());
            if (px_kind == "constant")
                std::printf("expected,%s\n", num(px_const * std::exp(-m.spec.r * m.spec.maturity())).c_str());
            print_diagnostics(res.diagnostics);
            if (!px_dump.empty()) {
                std::string text = "k,j1,j2,value\n";
                for (std::size_t k = 0; k < res.node_values.size(); ++k)
                    for (std::size_t a = 0; a <= k; ++a)
                        for (std::size_t b = 0; b <= k; ++b)
                            text += std::to_string(k) + ',' + std::to_string(2 * static_cast<int>(a) - static_cast<int>(k)) +
                                    ',' + std::to_string(2 * static_cast<int>(b) - static_cast<int>(k)) + ',' +
                                    num(res.node_values[k][a * (k + 1) + b]) + '\n';
                detail::write_text(px_dump, text);
            }
            return kOk;
        }

        if (*surf) {
            NamedMarket m = load_market();
            m.spec.validate();
            if (t_min > t_max || m_min > m_max) throw std::invalid_argument("surface ranges are reversed");
            SurfaceRequest req;
            req.kind = sf_kind == "put" ? OptionKind::put : OptionKind::call;
            for (double t : linspace(t_min, t_max, t_count)) {
                const int d = static_cast<int>(std::lround(t));
                if (req.t_days.empty() || req.t_days.back() != d) req.t_days.push_back(d);
            }
            req.moneyness = linspace(m_min, m_max, m_count);
            json cfg = {{"market", market_to_json(m)}, {"kind", sf_kind}, {"t_days", req.t_days},
                        {"moneyness", req.moneyness}, {"digits", digits}};
            echo("surface", common.seed, cfg);
            PricingOptions po;
            po.digits = digits;
            const auto sf = price_surface(m.spec, req, po);
            std::size_t failed = 0, flagged = 0;
            for (const auto& c : sf.cells) {
                failed += c.failed;
                flagged += c.arbitrage_warning;
            }
            std::printf("cells,%zu\nfailed_cells,%zu\narbitrage_flagged_cells,%zu\n", sf.cells.size(), failed, flagged);
            if (sf_out.empty())
                std::fputs(surface_csv(sf).c_str(), stdout);
            else
                write_surface_csv(sf, sf_out);
            return kOk;
        }

        if (*ver) {
            if (v_paths == 0) v_paths = common.full ? 1000000 : 100000;
            json cfg = {{"suite", suite}, {"paths", v_paths}, {"specs", v_specs}};
            echo("verify", common.seed, cfg);
            std::vector<CheckResult> all;
            auto add = [&](std::vector<CheckResult> r) { all.insert(all.end(), r.begin(), r.end()); };
            if (suite == "lattice" || suite == "all") add(verify_lattice(v_specs, master.substream(10)));
            if (suite == "walk" || suite == "all") add(verify_walk(v_paths, 6000, master.substream(11)));
            if (suite == "stats" || suite == "all") add(verify_stats(1000000, master.substream(12)));
            if (suite == "calibration" || suite == "all") add(verify_calibration(master.substream(13)));
            bool ok = true;
            for (const auto& c : all) {
                std::printf("%s  %s  (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
                ok = ok && c.pass;
            }
            return ok ? kOk : kCheckFailed;
        }
    } catch (const DegenerateMarket& e) {
        std::fprintf(stderr, "degenerate market: %s\n", e.what());
        return kDegenerate;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    }
    return kOk;
}

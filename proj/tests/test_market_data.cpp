#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <skewtree/config.hpp>
#include <skewtree/skewtree.hpp>

using namespace skewtree;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("skewtree_md_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name, const std::string& content = {}) const {
        const auto p = (path_ / name).string();
        if (!content.empty()) std::ofstream(p, std::ios::binary) << content;
        return p;
    }

private:
    fs::path path_;
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(LoadCsv, ReadsCleanFile) {
    TempDir d;
    const auto p = d.file("a.csv", "date,price\n2020-01-02,10\n2020-01-03,10.5\n2020-01-06,11\n");
    const auto l = load_price_csv(p);
    EXPECT_EQ(l.series.size(), 3u);
    EXPECT_TRUE(l.warnings.empty());
    EXPECT_DOUBLE_EQ(l.series.prices[2], 11.0);
}

TEST(LoadCsv, HeaderIsCaseAndSpaceInsensitiveWithBom) {
    TempDir d;
    const auto p = d.file("a.csv", "\xEF\xBB\xBF Date , Price \r\n2020-01-02, 10\r\n2020-01-03,11\r\n");
    const auto l = load_price_csv(p);
    EXPECT_EQ(l.series.size(), 2u);
    EXPECT_EQ(l.series.dates[0], "2020-01-02");
}

TEST(LoadCsv, DropsBadRowsWithWarnings) {
    TempDir d;
    const auto p = d.file("a.csv", "date,price\n2020-01-02,10\n2020-01-03,\n2020-01-04,abc\n2020-01-05,-3\n"
                                   "2020-01-06,nan\n2020-01-07,12\n");
    const auto l = load_price_csv(p);
    EXPECT_EQ(l.series.size(), 2u);
    EXPECT_EQ(l.warnings.size(), 4u);
}

TEST(LoadCsv, SortsUnorderedRowsWithNotice) {
    TempDir d;
    const auto p = d.file("a.csv", "date,price\n2020-01-03,11\n2020-01-02,10\n");
    const auto l = load_price_csv(p);
    EXPECT_EQ(l.series.dates[0], "2020-01-02");
    EXPECT_EQ(l.notices.size(), 1u);
}

TEST(LoadCsv, Errors) {
    TempDir d;
    EXPECT_THROW(load_price_csv(d.file("missing.csv")), DataError);
    EXPECT_THROW(load_price_csv(d.file("h.csv", "day,close\n2020-01-02,1\n2020-01-03,2\n")), DataError);
    EXPECT_THROW(load_price_csv(d.file("dup.csv", "date,price\n2020-01-02,1\n2020-01-02,2\n")), DataError);
    EXPECT_THROW(load_price_csv(d.file("short.csv", "date,price\n2020-01-02,1\n")), DataError);
}

TEST(WriteCsv, PriceRoundTrip) {
    TempDir d;
    Rng rng(4);
    const auto fx = synthetic_fixture(0.05, 0.1, 0.6, 50, rng);
    const auto p = d.file("fx.csv");
    write_price_csv(fx.series, p);
    const auto l = load_price_csv(p);
    ASSERT_EQ(l.series.size(), 50u);
    EXPECT_EQ(l.series.dates, fx.series.dates);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(l.series.prices[i], fx.series.prices[i], 1e-8 * fx.series.prices[i]);
}

TEST(WriteCsv, SurfaceFormatAndEmptyGrid) {
    Surface sf;
    sf.t_days = {10};
    sf.moneyness = {1.0};
    SurfaceCell c;
    c.t_days = 10;
    c.moneyness = 1.0;
    c.strike = 52.25;
    c.price = 1.5;
    c.warnings = "a, b";
    sf.cells = {c};
    EXPECT_EQ(surface_csv(sf), "T_days,moneyness,strike,price,warnings\n10,1,52.25,1.5,\"a, b\"\n");
    Surface empty;
    TempDir d;
    const auto p = d.file("s.csv");
    EXPECT_THROW(write_surface_csv(empty, p), std::invalid_argument);
    EXPECT_FALSE(fs::exists(p));
}

TEST(WriteCsv, NanIsEmptyField) {
    EXPECT_EQ(format_number(std::nan("")), "");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1234567.125), "1234567.125");
}

TEST(WriteCsv, CalibrationColumns) {
    RollingCalibration rc;
    rc.dates = {"2020-01-02"};
    rc.sigma_hat = {0.1};
    rc.sigma_star = {0.1};
    rc.mu_hat = {std::nan("")};
    rc.alpha_hat = {0.5};
    rc.mse = {1e-4};
    rc.mu_med = {0.02};
    rc.alpha_med = {0.55};
    EXPECT_EQ(calibration_csv(rc),
              "date,sigma_hat,sigma_star,mu_hat,alpha_hat,mse,mu_med,alpha_med\n2020-01-02,0.1,0.1,,0.5,0.0001,0.02,0.55\n");
}

TEST(WriteCsv, UnwritablePathIsDataError) {
    Rng rng(1);
    const auto fx = synthetic_fixture(0.05, 0.1, 0.6, 5, rng);
    EXPECT_THROW(write_price_csv(fx.series, "/nonexistent_dir/x.csv"), DataError);
}

TEST(Config, ReferenceMarketRoundTrip) {
    const auto m = reference_market();
    EXPECT_EQ(m.names[0], "SPY");
    EXPECT_DOUBLE_EQ(m.spec.delta, 0.102);
    EXPECT_DOUBLE_EQ(m.spec.assets[2].s0, 76.09);
    const auto back = market_from_json(market_to_json(m));
    EXPECT_EQ(back.names, m.names);
    for (int i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(back.spec.assets[i].mu, m.spec.assets[i].mu);
        EXPECT_DOUBLE_EQ(back.spec.assets[i].sigma, m.spec.assets[i].sigma);
    }
}

TEST(Config, LoadsFileAndRejectsBadInput) {
    TempDir d;
    const auto good = d.file("m.json", R"({"assets":[{"name":"A","mu":0.1,"sigma":0.2,"s0":10},
        {"name":"B","mu":0.0,"sigma":-0.3,"s0":20},{"name":"C","mu":0.05,"sigma":0.5,"s0":30}],
        "delta":0.2,"r":0.01,"n_steps":5})");
    const auto m = load_market_config(good);
    EXPECT_DOUBLE_EQ(m.spec.r, 0.01);
    EXPECT_EQ(m.spec.n_steps, 5);
    EXPECT_DOUBLE_EQ(m.spec.dt, 1.0 / 252);
    EXPECT_THROW(load_market_config(d.file("bad.json", "{\"assets\":[]}")), std::exception);
    EXPECT_THROW(load_market_config(d.file("nope.json")), DataError);
}

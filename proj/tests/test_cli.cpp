#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SKEWTREE_CLI_PATH) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, ""};
    std::string out;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), p)) out += buf.data();
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string tmp(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "skewtree_cli_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string demo(const std::string& name) { return std::string(SKEWTREE_DEMOS_DIR) + "/" + name; }

} // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("simulate --alpha 1.5").code, 2);
    EXPECT_EQ(run("verify --suite nonsense").code, 2);
    EXPECT_EQ(run("price --bogus").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SimulateEchoesSeedAndIsDeterministic) {
    const auto a = tmp("sim_a.csv"), b = tmp("sim_b.csv");
    const auto r1 = run("--seed 5 simulate --alpha 0.6 --paths 300 --steps 200 --out " + a);
    const auto r2 = run("--seed 5 --workers 3 simulate --alpha 0.6 --paths 300 --steps 200 --out " + b);
    ASSERT_EQ(r1.code, 0) << r1.out;
    ASSERT_EQ(r2.code, 0) << r2.out;
    EXPECT_NE(r1.out.find("# seed: 5"), std::string::npos);
    EXPECT_NE(r1.out.find("increment_std"), std::string::npos);
    EXPECT_EQ(slurp(a), slurp(b));
    const auto text = slurp(a);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 201);
}

TEST(Cli, FitOnFixtureFile) {
    const auto fx = tmp("fx.csv"), js = tmp("fit.json");
    ASSERT_EQ(run("--seed 3 simulate --fixture " + fx + " --alpha 0.6 --steps 1500").code, 0);
    const auto r = run("--seed 4 fit --input " + fx + " --ensemble 4000 --alpha-lo 0.3 --alpha-hi 0.7 --out " + js);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("alpha_star"), std::string::npos);
    EXPECT_NE(slurp(js).find("\"mu_star\""), std::string::npos);
}

TEST(Cli, RollingFitWritesPerDateCsv) {
    const auto fx = tmp("fx_roll.csv"), out = tmp("roll.csv");
    ASSERT_EQ(run("simulate --fixture " + fx + " --steps 320").code, 0);
    const auto r = run("fit --input " + fx + " --window 252 --ensemble 1000 --out " + out);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto text = slurp(out);
    EXPECT_EQ(text.rfind("date,sigma_hat,sigma_star,mu_hat,alpha_hat,mse,mu_med,alpha_med\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 320 - 252);
}

TEST(Cli, DataErrors) {
    EXPECT_EQ(run("fit --input /nonexistent/prices.csv").code, 3);
    const auto fx = tmp("short.csv");
    ASSERT_EQ(run("simulate --fixture " + fx + " --steps 100").code, 0);
    EXPECT_EQ(run("delta-index --input " + fx + " --window 252").code, 3);
}

TEST(Cli, DeltaIndexStaysInBounds) {
    const auto fx = tmp("idx.csv"), out = tmp("delta.csv");
    ASSERT_EQ(run("simulate --fixture " + fx + " --alpha 0.55 --steps 300").code, 0);
    const auto r = run("delta-index --input " + fx + " --window 100 --ensemble 1000 --out " + out);
    ASSERT_EQ(r.code, 0) << r.out;
    std::istringstream in(slurp(out));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "date,alpha_med,delta");
    while (std::getline(in, line)) {
        const double d = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_GE(d, -0.1 - 1e-12);
        EXPECT_LE(d, 0.1 + 1e-12);
    }
}

TEST(Cli, PriceConstantIsDiscountBond) {
    const auto r = run("price --config " + demo("reference_market.json") + " --kind constant --value 3 --r 0.05 --days 10");
    ASSERT_EQ(r.code, 0) << r.out;
    std::ostringstream want;
    want.precision(10);
    want << "price," << 3 * std::exp(-0.05 * 10 / 252.0);
    EXPECT_NE(r.out.find(want.str()), std::string::npos) << r.out;
}

TEST(Cli, PriceDegenerateMarketExitCode) {
    const auto r = run("price --config " + demo("degenerate_market.json") + " --kind put --moneyness 1");
    EXPECT_EQ(r.code, 4) << r.out;
    EXPECT_NE(r.out.find("degenerate"), std::string::npos);
}

TEST(Cli, PriceDumpsNodes) {
    const auto dump = tmp("nodes.csv");
    const auto r = run("price --kind call --moneyness 1 --days 3 --dump-nodes " + dump);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto text = slurp(dump);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 1 + 4 + 9 + 16);
}

TEST(Cli, SurfaceSingleCellAndGrid) {
    const auto one = tmp("one.csv"), grid = tmp("grid.csv");
    auto r = run("surface --t-min 5 --t-max 5 --t-count 1 --m-min 1 --m-max 1 --m-count 1 --out " + one);
    ASSERT_EQ(r.code, 0) << r.out;
    auto text = slurp(one);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    r = run("surface --kind call --t-min 1 --t-max 3 --t-count 3 --m-count 3 --out " + grid);
    ASSERT_EQ(r.code, 0) << r.out;
    text = slurp(grid);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10);
}

TEST(Cli, VerifyCalibrationSuitePasses) {
    const auto r = run("verify --suite calibration");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

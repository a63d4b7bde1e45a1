#pragma once

// JSON market configuration. Kept out of the umbrella header so that the
// core library does not require the JSON dependency.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "market.hpp"

namespace skewtree {

struct NamedMarket {
    MarketSpec spec;
    std::array<std::string, 3> names{"asset1", "asset2", "asset3"};
};

/// {"assets": [{"name", "mu", "sigma", "s0"} x3], "delta", "r", "dt", "n_steps"}.
/// r, dt and n_steps default to 0, 1/252 and 1.
inline NamedMarket market_from_json(const nlohmann::json& j) {
    NamedMarket out;
    try {
        const auto& assets = j.at("assets");
        if (!assets.is_array() || assets.size() != 3) throw DataError("config needs exactly 3 assets");
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& a = assets[i];
            out.spec.assets[i] = {a.at("mu").get<double>(), a.at("sigma").get<double>(), a.at("s0").get<double>()};
            out.names[i] = a.value("name", out.names[i]);
        }
        out.spec.delta = j.at("delta").get<double>();
        out.spec.r = j.value("r", 0.0);
        out.spec.dt = j.value("dt", 1.0 / 252.0);
        out.spec.n_steps = j.value("n_steps", 1);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad market config: ") + e.what());
    }
    return out;
}

inline NamedMarket load_market_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    try {
        return market_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("config is not valid JSON: " + std::string(e.what()));
    }
}

inline nlohmann::json market_to_json(const NamedMarket& m) {
    nlohmann::json j;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = m.spec.assets[i];
        j["assets"].push_back({{"name", m.names[i]}, {"mu", a.mu}, {"sigma", a.sigma}, {"s0", a.s0}});
    }
    j["delta"] = m.spec.delta;
    j["r"] = m.spec.r;
    j["dt"] = m.spec.dt;
    j["n_steps"] = m.spec.n_steps;
    return j;
}

/// The three-ETF market fitted in the worked example (SPY, IEV, JPXN), r = 0.
inline NamedMarket reference_market() {
    NamedMarket m;
    m.spec.assets = {AssetSpec{0.32, -0.090, 432.51}, AssetSpec{0.31, -0.23, 52.25}, AssetSpec{-0.069, 2.8, 76.09}};
    m.names = {"SPY", "IEV", "JPXN"};
    m.spec.delta = 0.102;
    m.spec.r = 0.0;
    m.spec.dt = 1.0 / 252.0;
    m.spec.n_steps = 60;
    return m;
}

} // namespace skewtree

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"

namespace skewtree {

/// Daily price history. Dates are opaque ISO strings ordered lexically.
struct PriceSeries {
    std::vector<std::string> dates;
    std::vector<double> prices;
    double dt = 1.0 / 252.0;

    std::size_t size() const noexcept { return prices.size(); }

    /// Throws unless prices are positive, dates strictly increase and n >= 2.
    void validate() const {
        if (prices.size() < 2) throw DataError("price series needs at least 2 rows");
        if (!dates.empty() && dates.size() != prices.size())
            throw DataError("price series has mismatched date and price counts");
        if (!(dt > 0.0)) throw DataError("price series step dt must be positive");
        for (std::size_t i = 0; i < prices.size(); ++i) {
            if (!(prices[i] > 0.0) || !std::isfinite(prices[i]))
                throw DataError("price series contains a non-positive or non-finite price");
            if (!dates.empty() && i > 0 && !(dates[i - 1] < dates[i]))
                throw DataError("price series dates must be strictly increasing");
        }
    }
};

struct Returns {
    std::vector<double> cumulative; // R_k = ln(S_k / S_0), k = 1..n-1
    std::vector<double> daily;      // r_k = R_k - R_{k-1}, with r_1 = R_1
};

inline Returns compute_returns(const PriceSeries& s) {
    s.validate();
    Returns out;
    const std::size_t n = s.size() - 1;
    out.cumulative.resize(n);
    out.daily.resize(n);
    for (std::size_t k = 1; k <= n; ++k) {
        out.cumulative[k - 1] = std::log(s.prices[k] / s.prices[0]);
        out.daily[k - 1] = k == 1 ? out.cumulative[0] : out.cumulative[k - 1] - out.cumulative[k - 2];
    }
    return out;
}

} // namespace skewtree

#pragma once

#include <cmath>
#include <numbers>

namespace skewtree {

/// Standard normal density.
inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF. erfc keeps full relative accuracy in the lower tail,
/// which a 1 + erf formulation would lose.
inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

} // namespace skewtree

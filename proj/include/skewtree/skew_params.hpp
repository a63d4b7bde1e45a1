#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace skewtree {

/// Skewness of a skew Brownian motion, stored as the Itô-McKean delta.
///
/// The three parameterizations are views of one value:
///   alpha  = (1 + delta) / 2          probability of a positive excursion
///   lambda = delta / sqrt(1 - delta^2) skew-normal shape
/// delta = 0, alpha = 1/2 and lambda = 0 all describe the symmetric case.
/// The closed interval [-1, 1] is accepted so that the degenerate walks
/// alpha = 0 and alpha = 1 can be expressed; lambda is infinite there.
class SkewParams {
public:
    constexpr SkewParams() = default;

    static SkewParams from_delta(double delta) {
        detail::require(std::isfinite(delta) && delta >= -1.0 && delta <= 1.0,
                        "skew delta must lie in [-1, 1], got " + std::to_string(delta));
        SkewParams p;
        p.delta_ = delta;
        return p;
    }

    static SkewParams from_alpha(double alpha) {
        detail::require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
                        "skew alpha must lie in [0, 1], got " + std::to_string(alpha));
        return from_delta(2.0 * alpha - 1.0);
    }

    static SkewParams from_lambda(double lambda) {
        detail::require(!std::isnan(lambda), "skew lambda must not be NaN");
        if (std::isinf(lambda)) return from_delta(lambda > 0 ? 1.0 : -1.0);
        return from_delta(lambda / std::sqrt(1.0 + lambda * lambda));
    }

    constexpr double delta() const noexcept { return delta_; }
    constexpr double alpha() const noexcept { return (1.0 + delta_) / 2.0; }

    double lambda() const noexcept {
        if (delta_ == 1.0) return std::numeric_limits<double>::infinity();
        if (delta_ == -1.0) return -std::numeric_limits<double>::infinity();
        return delta_ / std::sqrt(1.0 - delta_ * delta_);
    }

    constexpr bool symmetric() const noexcept { return delta_ == 0.0; }

private:
    double delta_ = 0.0;
};

} // namespace skewtree

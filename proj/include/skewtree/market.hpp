#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>

#include "errors.hpp"

namespace skewtree {

struct AssetSpec {
    double mu = 0.0;    // drift per year
    double sigma = 0.0; // signed marginal scale per sqrt(year)
    double s0 = 1.0;    // spot
};

/// Three assets sharing one skewness delta, plus the bond rate and the grid.
struct MarketSpec {
    std::array<AssetSpec, 3> assets{};
    double delta = 0.0;
    double r = 0.0;
    double dt = 1.0 / 252.0;
    int n_steps = 1;

    double maturity() const noexcept { return dt * n_steps; }

    void validate() const {
        for (const auto& a : assets) {
            detail::require(std::isfinite(a.mu) && std::isfinite(a.sigma), "asset mu and sigma must be finite");
            detail::require(a.s0 > 0.0 && std::isfinite(a.s0), "asset spot prices must be positive");
        }
        detail::require(delta > -1.0 && delta < 1.0, "market delta must lie in (-1, 1)");
        detail::require(std::isfinite(r), "riskless rate must be finite");
        detail::require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
        detail::require(n_steps >= 1, "the lattice needs at least one step");
    }
};

/// Lattice state: step k and the two driver levels.
struct LatticeNode {
    int k = 0;
    int j1 = 0;
    int j2 = 0;

    void validate() const {
        detail::require(k >= 0, "node step must be nonnegative");
        detail::require(std::abs(j1) <= k && std::abs(j2) <= k, "node level exceeds the step");
        detail::require(((j1 - k) % 2) == 0 && ((j2 - k) % 2) == 0, "node level has the wrong parity");
    }
};

enum class Branch { uu = 0, ud = 1, du = 2, dd = 3 };

inline constexpr std::array<Branch, 4> kBranches{Branch::uu, Branch::ud, Branch::du, Branch::dd};
inline constexpr std::array<int, 4> kFirstSign{+1, +1, -1, -1};
inline constexpr std::array<int, 4> kSecondSign{+1, -1, +1, -1};

inline const char* branch_name(Branch b) {
    static constexpr const char* names[] = {"uu", "ud", "du", "dd"};
    return names[static_cast<int>(b)];
}

template <class T>
using BranchQuadruple = std::array<T, 4>;

/// |j2 + e2| - |j2|: +e2 above zero, -e2 below, +1 at zero.
inline int second_driver_jump(int j2, int e2) { return std::abs(j2 + e2) - std::abs(j2); }

/// Node class of the second driver: the measure depends on j2 only through it.
enum class LevelClass { negative = 0, zero = 1, positive = 2 };

inline LevelClass level_class(int j2) {
    return j2 > 0 ? LevelClass::positive : (j2 < 0 ? LevelClass::negative : LevelClass::zero);
}

inline int representative_level(LevelClass c) {
    return c == LevelClass::positive ? 1 : (c == LevelClass::negative ? -1 : 0);
}

inline const char* level_class_name(LevelClass c) {
    static constexpr const char* names[] = {"negative", "zero", "positive"};
    return names[static_cast<int>(c)];
}

} // namespace skewtree

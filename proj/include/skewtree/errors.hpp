#pragma once

#include <stdexcept>
#include <string>

namespace skewtree {

/// Malformed or missing input data (files, series too short, bad rows).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A replication or risk-neutral system whose determinant is numerically zero.
class DegenerateMarket : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested numerical precision exceeds what the library can provide.
class PrecisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

} // namespace detail

} // namespace skewtree

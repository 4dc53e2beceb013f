#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace carshare {

/// UTC instant with one-second resolution. Polls arrive once a minute.
using Timestamp = std::chrono::sys_seconds;

struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Grid cell address. Rows grow northwards, columns eastwards.
struct CellId {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const CellId&, const CellId&) = default;
};

/// Base class for every recoverable failure reported by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required input is missing, unreadable, or structurally invalid.
class InputError : public Error {
public:
    using Error::Error;
};

/// A caller violated an operation precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace carshare

template <>
struct std::hash<carshare::CellId> {
    std::size_t operator()(const carshare::CellId& c) const noexcept {
        return std::hash<long long>{}((static_cast<long long>(c.row) << 32) ^ static_cast<unsigned>(c.col));
    }
};
